"""Extension axioms, staged generic models and bounded-rank type equivalence."""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from itertools import combinations

from .closure import Formula, Literal
from .completion import complete_finite
from .core import PartialSTS, canonical_form, find_embeddings, union, validate
from .errors import HypothesisViolated, InvalidSystem
from .freequasigroup import FreeUniverse, Term
from .seeding import derive_seed


@dataclass(frozen=True)
class DeltaInstance:
    outer: PartialSTS
    inner: frozenset[str]

    def __post_init__(self):
        if not self.inner <= self.outer.point_set:
            raise InvalidSystem(f"inner points {sorted(self.inner - self.outer.point_set)} not in outer system")
        if not self.outer.is_relatively_closed(self.inner):
            raise InvalidSystem("inner set is not relatively closed in the outer system")

    @property
    def inner_system(self) -> PartialSTS:
        return self.outer.induced(self.inner)

    def to_json(self) -> dict:
        d = self.outer.to_json()
        d["inner"] = sorted(self.inner)
        return d

    @classmethod
    def from_json(cls, obj: dict) -> DeltaInstance:
        outer = validate(obj.get("points", []), obj.get("blocks", []))
        return cls(outer, frozenset(obj.get("inner", [])))


def delta_variables(inst: DeltaInstance) -> dict[str, str]:
    inner = sorted(inst.inner)
    rest = sorted(inst.outer.point_set - inst.inner)
    out = {p: f"x{i}" for i, p in enumerate(inner, 1)}
    out.update({p: f"y{i}" for i, p in enumerate(rest, 1)})
    return out


def _diagram(points: Sequence[str], blocks: Iterable[tuple[str, str, str]], var: dict[str, str], order: dict[str, int]) -> tuple[Literal, ...]:
    lits = [Literal(var[a], var[b], False) for a, b in combinations(points, 2)]
    for blk in blocks:
        a, b, c = sorted(blk, key=order.__getitem__)
        lits.append(Literal((var[a], var[b]), var[c], True))
    return tuple(lits)


def delta_formulas(inst: DeltaInstance) -> tuple[Formula, Formula]:
    """(δ_A, δ_B): distinctness plus one product equality per block, (min, mid) -> third."""
    var = delta_variables(inst)
    order = {p: i for i, p in enumerate(sorted(var, key=lambda p: (var[p][0], int(var[p][1:]))))}
    inner = sorted(inst.inner, key=order.__getitem__)
    allp = sorted(var, key=order.__getitem__)
    inner_blocks = [b for b in inst.outer.blocks if inst.inner.issuperset(b)]
    dA = Formula(tuple(var[p] for p in inner), _diagram(inner, inner_blocks, var, order))
    dB = Formula(tuple(var[p] for p in allp), _diagram(allp, inst.outer.blocks, var, order))
    return dA, dB


def check_delta(M: PartialSTS, inst: DeltaInstance, budget: int | None = None) -> tuple[bool, dict[str, str] | None]:
    """Every realization of δ_A in M extends to a realization of δ_B."""
    A = inst.inner_system
    for e in find_embeddings(A, M, budget=budget):
        if next(find_embeddings(inst.outer, M, base=e, budget=budget), None) is None:
            return False, e
    return True, None


def _partial_systems(n: int) -> list[PartialSTS]:
    """One partial STS on points p1..pn per isomorphism class."""
    pts = [f"p{i}" for i in range(1, n + 1)]
    triples = list(combinations(range(n), 3))
    seen: dict[str, PartialSTS] = {}
    chosen: list[tuple[int, int, int]] = []
    used: set[tuple[int, int]] = set()

    def rec(start: int) -> None:
        S = validate(pts, [[pts[i] for i in t] for t in chosen])
        lab = canonical_form(S)
        if lab not in seen:
            seen[lab] = S
        for j in range(start, len(triples)):
            t = triples[j]
            ps = [(t[0], t[1]), (t[0], t[2]), (t[1], t[2])]
            if any(p in used for p in ps):
                continue
            used.update(ps)
            chosen.append(t)
            rec(j + 1)
            chosen.pop()
            used.difference_update(ps)

    rec(0)
    return [seen[k] for k in sorted(seen)]


def enumerate_delta(max_outer_size: int) -> Iterator[DeltaInstance]:
    """One instance per isomorphism class of (outer, inner), sorted by (size, label)."""
    found: list[tuple[int, str, DeltaInstance]] = []
    for n in range(1, max_outer_size + 1):
        for S in _partial_systems(n):
            labels: dict[str, DeltaInstance] = {}
            for r in range(n + 1):
                for inner in combinations(S.points, r):
                    if not S.is_relatively_closed(inner):
                        continue
                    inner_set = frozenset(inner)
                    lab = canonical_form(S, {p: int(p in inner_set) for p in S.points})
                    if lab not in labels:
                        labels[lab] = DeltaInstance(S, inner_set)
            found.extend((n, lab, inst) for lab, inst in labels.items())
    found.sort(key=lambda x: (x[0], x[1]))
    for _, _, inst in found:
        yield inst


@dataclass
class StageLog:
    stage: int
    adjoined: int  # fresh configurations added before completion
    points: int


def generic_build(
    seed_system: PartialSTS,
    stages: int,
    instance_size_bound: int,
    rng_seed: int = 0,
    max_order: int | None = None,
    logs: list[StageLog] | None = None,
) -> list[PartialSTS]:
    """Chain M0 ⊆ M1 ⊆ ... where M_{i+1} extends every bounded δ realization in M_i."""
    if not seed_system.is_total():
        raise HypothesisViolated("seed system must be total")
    chain = [seed_system]
    instances = list(enumerate_delta(instance_size_bound))
    for stage in range(stages):
        M = chain[-1]
        growing = M
        taken = set(M.points)
        adjoined = 0
        for inst in instances:
            A = inst.inner_system
            fresh_pts = sorted(inst.outer.point_set - inst.inner)
            for e in list(find_embeddings(A, M)):
                if next(find_embeddings(inst.outer, growing, base=e), None) is not None:
                    continue
                adjoined += 1
                ren = dict(e)
                for p in fresh_pts:
                    nm = f"g{stage + 1}_{adjoined}_{p}"
                    while nm in taken:
                        nm += "'"
                    taken.add(nm)
                    ren[p] = nm
                copy = validate([ren[p] for p in inst.outer.points], [[ren[x] for x in b] for b in inst.outer.blocks])
                growing = union(growing, copy)
        if growing is M:
            nxt = M
        else:
            cap = max_order if max_order is not None else 3 * len(growing) + 30
            nxt = complete_finite(growing, cap, seed=derive_seed(rng_seed, "stage", stage))
        chain.append(nxt)
        if logs is not None:
            logs.append(StageLog(stage + 1, adjoined, len(nxt)))
    return chain


def verify_chain(chain: Sequence[PartialSTS], instance_size_bound: int) -> list[tuple[int, DeltaInstance, dict[str, str]]]:
    """Replay: every δ_A realization in M_i extends inside M_{i+1}.  Returns failures."""
    failures = []
    instances = list(enumerate_delta(instance_size_bound))
    for i in range(len(chain) - 1):
        M, N = chain[i], chain[i + 1]
        if not M.is_substructure_of(N):
            failures.append((i, None, {}))
            continue
        for inst in instances:
            for e in find_embeddings(inst.inner_system, M):
                if next(find_embeddings(inst.outer, N, base=e), None) is None:
                    failures.append((i, inst, e))
    return failures


# -- isolating formulas --------------------------------------------------


@dataclass(frozen=True)
class IsolatingFormula:
    formula: Formula
    enumeration: tuple[str, ...]  # point assigned to each variable, tuple first

    @property
    def existential(self) -> tuple[str, ...]:
        return self.formula.existential


def isolating_formula(tup: Sequence[str], M: PartialSTS) -> IsolatingFormula:
    """Diagram of the closure of the tuple; closure points beyond it are existential."""
    for p in tup:
        if p not in M:
            raise InvalidSystem(f"unknown point {p!r}")
    first: dict[str, int] = {}
    lits: list[Literal] = []
    for i, p in enumerate(tup):
        if p in first:
            lits.append(Literal(f"x{first[p] + 1}", f"x{i + 1}", True))
        else:
            first[p] = i
    closure = M.closure(tup)
    extra = sorted(closure - set(tup))
    enum = list(tup) + extra
    var = {p: f"x{first[p] + 1}" for p in first}
    var.update({p: f"x{len(tup) + j + 1}" for j, p in enumerate(extra)})
    order = {p: (first[p] if p in first else len(tup) + extra.index(p)) for p in closure}
    pts = sorted(closure, key=order.__getitem__)
    blocks = [b for b in M.blocks if closure.issuperset(b)]
    lits.extend(_diagram(pts, blocks, var, order))
    in_block = {p for b in blocks for p in b}
    for p in pts:
        if p not in in_block:
            lits.append(Literal((var[p], var[p]), var[p], True))
    variables = tuple(f"x{i}" for i in range(1, len(enum) + 1))
    ex = tuple(var[p] for p in extra)
    return IsolatingFormula(Formula(variables, tuple(lits), ex), tuple(enum))


def satisfies_isolating(iso: IsolatingFormula, tup: Sequence[str], M: PartialSTS) -> bool:
    """Whether tup, with existential witnesses found in M, satisfies the formula."""
    n = len(tup)
    if n != len(iso.enumeration) - len(iso.existential):
        return False
    var_pts = [f"x{i}" for i in range(1, len(iso.enumeration) + 1)]
    eqs = {}
    blocks = []
    for lit in iso.formula.literals:
        if lit.eq and isinstance(lit.left, str):
            eqs[lit.right] = lit.left
        elif lit.eq and isinstance(lit.left, tuple) and lit.left[0] != lit.left[1]:
            blocks.append([lit.left[0], lit.left[1], lit.right])
    for v, w in eqs.items():
        if tup[int(v[1:]) - 1] != tup[int(w[1:]) - 1]:
            return False
    keep = [v for v in var_pts if v not in eqs]
    P = validate(keep, blocks)
    base = {v: tup[int(v[1:]) - 1] for v in keep if int(v[1:]) <= n}
    if len(set(base.values())) != len(base):
        return False
    return next(find_embeddings(P, M, base=base), None) is not None


# -- bounded-rank equivalence ------------------------------------------------


def _as_universe(amb) -> FreeUniverse:
    return amb if isinstance(amb, FreeUniverse) else FreeUniverse(amb)


def _as_terms(tup, U: FreeUniverse) -> list[Term]:
    return [x if isinstance(x, Term) else U.leaf(x) for x in tup]


def qf_equiv_m(tuple1, amb1, tuple2, amb2, m: int) -> bool:
    """Whether a_i -> b_i extends to an isomorphism of the partial systems on ⟨a⟩_m and ⟨b⟩_m.

    Ambients are FreeUniverses or PartialSTSs (a non-total system is read
    through its free completion).
    """
    if len(tuple1) != len(tuple2):
        raise ValueError("tuples must have equal length")
    U1, U2 = _as_universe(amb1), _as_universe(amb2)
    a, b = _as_terms(tuple1, U1), _as_terms(tuple2, U2)
    levels: list[set[tuple[Term, Term]]] = [set(), set(zip(a, b))]
    for r in range(2, m + 1):
        lvl = set()
        for i in range(1, r):
            for x1, x2 in levels[i]:
                for y1, y2 in levels[r - i]:
                    lvl.add((U1.mul(x1, y1), U2.mul(x2, y2)))
        levels.append(lvl)
    fwd: dict[Term, Term] = {}
    bwd: dict[Term, Term] = {}
    for lvl in levels:
        for x, y in lvl:
            if fwd.setdefault(x, y) is not y or bwd.setdefault(y, x) is not x:
                return False
    items = list(fwd.items())
    for i, (x1, x2) in enumerate(items):
        for y1, y2 in items[i + 1:]:
            z1, z2 = U1.mul(x1, y1), U2.mul(x2, y2)
            in1, in2 = z1 in fwd, z2 in bwd
            if in1 != in2 or (in1 and fwd[z1] is not z2):
                return False
    return True
