"""Joint embedding, amalgamation, the four-system merges and free independence.

Closed sets inside a free universe are given by finite generator lists and
handled exactly through ``Generated``: a closure is free over its core, so
every construction works on finite presentations and lets the free product
reproduce the rest.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .completion import _fresh, complete_finite
from .core import PartialSTS, union, validate
from .errors import (
    CompatibilityCheckFailed,
    DepthExceeded,
    HypothesisViolated,
    InvalidSystem,
    NotASubquasigroup,
    VerificationFailed,
)
from .freequasigroup import (
    FreeUniverse,
    Generated,
    Term,
    Transport,
    down_close,
    freely_generates,
    intersection_generators,
    isomorphic_closures,
    same_closure,
)
from .generic import qf_equiv_m
from .seeding import make_rng

CERT_DEPTH = 3


# -- finite systems: JEP and AP ------------------------------------------------


def _rename_apart(Q: PartialSTS, taken: set[str], keep: Mapping[str, str] | None = None) -> dict[str, str]:
    keep = dict(keep or {})
    ren: dict[str, str] = {}
    for p in Q.points:
        if p in keep:
            ren[p] = keep[p]
            continue
        nm = p if p not in taken else _fresh(f"{p}'", taken)
        taken.add(nm)
        ren[p] = nm
    return ren


def joint_embed(Q1: PartialSTS, Q2: PartialSTS, order_budget: int, seed: int = 0) -> tuple[PartialSTS, dict[str, str], dict[str, str]]:
    """A finite STS with substructure embeddings of Q1 and Q2 having disjoint images."""
    for Q in (Q1, Q2):
        if not Q.is_total():
            raise HypothesisViolated("joint_embed needs total systems")
    e1 = {p: p for p in Q1.points}
    e2 = _rename_apart(Q2, set(Q1.points))
    T = complete_finite(union(Q1, Q2.relabel(e2)), order_budget, seed=seed)
    return T, e1, e2


def _check_sub(C: PartialSTS, Q: PartialSTS, emb: Mapping[str, str]) -> None:
    img = [emb[p] for p in C.points]
    if len(set(img)) != len(img) or any(x not in Q for x in img):
        raise NotASubquasigroup("embedding of the shared part is not injective into the system")
    if not C.is_total():
        raise NotASubquasigroup("shared part is not total on itself")
    for a, b, c in C.blocks:
        if Q.product(emb[a], emb[b]) != emb[c]:
            raise NotASubquasigroup(f"block {(a, b, c)} is not preserved")
    if not Q.is_relatively_closed(img):
        raise NotASubquasigroup("image of the shared part is not closed")


def amalgamate(
    Q1: PartialSTS,
    Q2: PartialSTS,
    C: PartialSTS,
    order_budget: int,
    c1: Mapping[str, str] | None = None,
    c2: Mapping[str, str] | None = None,
    seed: int = 0,
) -> tuple[PartialSTS, dict[str, str], dict[str, str]]:
    """Amalgam of Q1 and Q2 over the common subquasigroup C (embedded by c1, c2; default identity)."""
    c1 = dict(c1) if c1 is not None else {p: p for p in C.points}
    c2 = dict(c2) if c2 is not None else {p: p for p in C.points}
    _check_sub(C, Q1, c1)
    _check_sub(C, Q2, c2)
    e1 = {p: p for p in Q1.points}
    glue = {c2[p]: c1[p] for p in C.points}
    e2 = _rename_apart(Q2, set(Q1.points), glue)
    T = complete_finite(union(Q1, Q2.relabel(e2)), order_budget, seed=seed)
    return T, e1, e2


# -- merges in a free universe -----------------------------------------------------


@dataclass
class MergeResult:
    universe: FreeUniverse
    embed: object  # old Term -> Term of ``universe``
    A: tuple[Term, ...]  # images of the generators of A_0
    sizes: dict[str, int]
    claims: tuple[str, ...]
    certified_depth: int
    exact: bool = True

    def __iter__(self):
        return iter(self.A)


def _closure_eq(U: FreeUniverse, X: Iterable[Term], Y: Iterable[Term]) -> bool:
    return same_closure(Generated(U, X), Generated(U, Y))


class _Side:
    def __init__(self, U: FreeUniverse, A: Sequence[Term], B: Sequence[Term]):
        self.A = list(A)
        self.B = list(B)
        self.gA = Generated(U, self.A)
        self.gB = Generated(U, self.B)
        self.gAB = Generated(U, self.A + self.B)


def _hyp(ok: bool, clause: str) -> None:
    if not ok:
        raise HypothesisViolated(clause)


def _iso_from(U: FreeUniverse, src: _Side, dst: _Side, images: Mapping[Term, Term], E: Sequence[Term]):
    """Forward and inverse transports for an isomorphism ⟨A0B0⟩ -> ⟨A_iB_i⟩ over E."""
    gens = src.A + src.B
    missing = [t for t in gens if t not in images]
    _hyp(not missing, f"isomorphism is undefined on {[str(t) for t in missing]}")
    fwd = {t: images[t] for t in gens}
    inv: dict[Term, Term] = {}
    for x, y in fwd.items():
        _hyp(inv.setdefault(y, x) is x, "isomorphism is not injective on generators")
    f = Transport(src.gAB, fwd, U)
    img_g = Generated(U, list(inv))
    finv = Transport(img_g, inv, U)
    _hyp(f.check() is None and finv.check() is None, "A0B0 and AiBi are not isomorphic via the given map")
    _hyp(same_closure(img_g, dst.gAB), "the map is not onto AiBi")
    _hyp(_closure_eq(U, [f(t) for t in src.A], dst.A), "the map does not send A0 onto Ai")
    _hyp(_closure_eq(U, [f(t) for t in src.B], dst.B), "the map does not send B0 onto Bi")
    _hyp(all(f(e) is e for e in E), "the map is not the identity on E")
    return f, finv, img_g


def _merge(
    U: FreeUniverse,
    sides: list[_Side],
    isos: list[Mapping[Term, Term]],
    *,
    empty_E: bool = False,
    max_rounds: int = 64,
) -> MergeResult:
    s0 = sides[0]
    t = len(sides)
    if t == 1:
        return MergeResult(U, lambda x: x, tuple(s0.A), {}, (), 0)
    if len(isos) != t - 1:
        raise InvalidSystem("one isomorphism per side after the first is required")

    # hypotheses
    Fg = intersection_generators(s0.gA, s0.gB)
    if empty_E:
        _hyp(not Fg, "A0 ∩ B0 = ∅")
    for i, s in enumerate(sides[1:], 1):
        Fi = intersection_generators(s.gA, s.gB)
        if empty_E:
            _hyp(not Fi, f"A{i} ∩ B{i} = ∅")
        _hyp(_closure_eq(U, Fg, Fi), f"A0 ∩ B0 = A{i} ∩ B{i}")
    E = sorted(intersection_generators(s0.gB, sides[1].gB), key=lambda x: x.key)
    gE = Generated(U, E)
    for i in range(t):
        for j in range(i + 1, t):
            Eij = intersection_generators(sides[i].gB, sides[j].gB)
            if empty_E:
                _hyp(not Eij, f"B{i} ∩ B{j} = ∅")
            _hyp(same_closure(Generated(U, Eij), gE), f"B{i} ∩ B{j} = E")
    trans = [None] + [_iso_from(U, s0, s, f, E) for s, f in zip(sides[1:], isos)]
    gAE = []
    for i, s in enumerate(sides):
        g = Generated(U, s.A + E)
        gAE.append(g)
        meet = intersection_generators(g, s.gB)
        _hyp(same_closure(Generated(U, meet), gE), f"⟨A{i}E⟩ ∩ B{i} = E")

    # finite presentation S0 of ⟨A0B0⟩ whose images present every side
    S0 = set(s0.gAB.core)
    for _ in range(max_rounds):
        nxt = set(S0)
        for i in range(1, t):
            f, finv, img_g = trans[i]
            Si = down_close(img_g, {f(x) for x in S0} | set(img_g.core))
            nxt |= {finv(y) for y in Si}
        nxt = down_close(s0.gAB, nxt)
        if nxt == S0:
            break
        S0 = nxt
    else:
        raise DepthExceeded("finite presentation of the merge did not stabilize")

    # g on S0: old on B0, fresh names on A, W, U
    taken = set(U.base.points)
    counters = {"A": 0, "W": 0, "U": 0}
    names: dict[Term, object] = {}
    order = sorted(S0, key=lambda x: x.key)
    for x in order:
        if x in s0.gB:
            names[x] = x
            continue
        part = "A" if x in s0.gA else "W" if x in gAE[0] else "U"
        counters[part] += 1
        nm = _fresh(f"m{part}{counters[part]}", taken)
        taken.add(nm)
        names[x] = nm

    def blocks_of(S: set[Term]) -> list[tuple[Term, Term, Term]]:
        ts = sorted(S, key=lambda x: x.key)
        out = []
        for i, x in enumerate(ts):
            for y in ts[i + 1:]:
                z = U.mul(x, y)
                if z in S and y.key < z.key:
                    out.append((x, y, z))
        return out

    def key(v) -> tuple:
        return (0, v.key) if isinstance(v, Term) else (1, v)

    def norm(b) -> tuple:
        return tuple(sorted(b, key=key))

    R = {norm(tuple(names[x] for x in b)) for b in blocks_of(S0)}
    AEW = {names[x] for x in S0 if x in gAE[0]}
    sizes = {"A": counters["A"], "W": counters["W"], "U": counters["U"]}
    relations = [R]
    for i in range(1, t):
        f, finv, img_g = trans[i]
        s = sides[i]
        Si = {f(x) for x in S0}
        h: dict[Term, object] = {}
        k = 0
        for y in sorted(Si, key=lambda x: x.key):
            via_g = names[finv(y)] if y in gAE[i] else None
            if y in s.gB:
                if via_g is not None and via_g is not y:
                    raise CompatibilityCheckFailed("h agrees with g∘f⁻¹", f"{y} maps to {via_g}")
                h[y] = y
            elif via_g is not None:
                h[y] = via_g
            else:
                k += 1
                nm = _fresh(f"mV{i}_{k}", taken)
                taken.add(nm)
                h[y] = nm
        sizes[f"V{i}"] = k
        Srel = {norm(tuple(h[x] for x in b)) for b in blocks_of(Si)}
        in_aew = lambda b: all(v in AEW for v in b)  # noqa: E731
        if {b for b in R if in_aew(b)} != {b for b in Srel if in_aew(b)}:
            raise CompatibilityCheckFailed("claim 1", f"side {i}: R and S differ on AEW")
        relations.append(Srel)

    # claim 2: the union of the transported relations is a partial STS
    pair_owner: dict[frozenset, tuple] = {}
    for rel in relations:
        for b in rel:
            for u, v in ((b[0], b[1]), (b[0], b[2]), (b[1], b[2])):
                other = pair_owner.setdefault(frozenset((u, v)), b)
                if other != b:
                    raise CompatibilityCheckFailed("claim 2", f"pair {u}, {v} in {other} and {b}")
    # claim 3: each relation meets the old universe in whole blocks or single points
    for i, rel in enumerate(relations):
        for b in rel:
            old = [v for v in b if isinstance(v, Term)]
            if len(old) == 2 or (len(old) == 3 and U.mul(old[0], old[1]) is not old[2]):
                raise CompatibilityCheckFailed("claim 3", f"side {i}: block {[str(v) for v in b]}")
            if any(v not in sides[i].gB for v in old):
                raise CompatibilityCheckFailed("claim 3", f"side {i}: block leaves B{i}")

    new_pts = sorted(taken - set(U.base.points))
    new_blocks = sorted({b for rel in relations for b in rel if not all(isinstance(v, Term) for v in b)}, key=lambda b: [key(v) for v in b])
    U2, embed = U.extend(new_pts, new_blocks, alias_prefix="mt")

    def lift(v) -> Term:
        return embed(v)

    G = Transport(s0.gAB, {x: lift(names[x]) for x in s0.A + s0.B}, U2)
    A_img = tuple(G(a) for a in s0.A)
    for i, s in enumerate(sides):
        left = (list(s0.A) if i == 0 else [trans[i][0](a) for a in s0.A]) + list(s.B)
        right = list(A_img) + [embed(b) for b in s.B]
        if not isomorphic_closures(U, left, U2, right):
            raise VerificationFailed("amalgam", f"side {i}: merged set is not isomorphic over B{i}")
        if not qf_equiv_m(left, U, right, U2, CERT_DEPTH):
            raise VerificationFailed("amalgam", f"side {i}: depth-{CERT_DEPTH} equivalence fails")
    return MergeResult(U2, embed, A_img, sizes, ("claim 1", "claim 2", "claim 3"), CERT_DEPTH)


def merge_al1(
    U: FreeUniverse,
    A0: Sequence[Term],
    B0: Sequence[Term],
    A1: Sequence[Term],
    B1: Sequence[Term],
    iso: Mapping[Term, Term],
) -> MergeResult:
    """A with A ≡_{B0} A0 and A ≡_{B1} A1, for A_i ∩ B_i = B0 ∩ B1 = ∅."""
    return _merge(U, [_Side(U, A0, B0), _Side(U, A1, B1)], [iso], empty_E=True)


def merge_al25(
    U: FreeUniverse,
    A0: Sequence[Term],
    B0: Sequence[Term],
    A1: Sequence[Term],
    B1: Sequence[Term],
    iso: Mapping[Term, Term],
) -> MergeResult:
    """Same conclusion over E = B0 ∩ B1 when ⟨A_iE⟩ ∩ B_i = E on both sides."""
    return _merge(U, [_Side(U, A0, B0), _Side(U, A1, B1)], [iso])


def merge_family(
    U: FreeUniverse,
    pairs: Sequence[tuple[Sequence[Term], Sequence[Term]]],
    isos: Sequence[Mapping[Term, Term]],
) -> MergeResult:
    """One A with A ≡_{B_i} A_i for every i; isos[i-1] maps A0B0 onto A_iB_i."""
    if not pairs:
        raise InvalidSystem("empty family")
    return _merge(U, [_Side(U, a, b) for a, b in pairs], list(isos))


@dataclass
class Al3Report:
    holds: bool
    reason: str = ""
    merge: MergeResult | None = None

    def __bool__(self) -> bool:
        return self.holds


def check_al3(
    U: FreeUniverse,
    A0: Sequence[Term],
    A1: Sequence[Term],
    B0: Sequence[Term],
    B1: Sequence[Term],
    D: Sequence[Term],
    iso: Mapping[Term, Term],
    d0: Mapping[Term, Term],
    d1: Mapping[Term, Term],
    merge: bool = True,
) -> Al3Report:
    """Check D ≡_{EA0} B0 (via d0) and D ≡_{EA1} B1 (via d1), derive the closedness
    equalities and hand over to merge_al25.

    d0 and d1 send the generators of D into B0 and B1.
    """
    s0, s1 = _Side(U, A0, B0), _Side(U, A1, B1)
    E = sorted(intersection_generators(s0.gB, s1.gB), key=lambda x: x.key)
    gE = Generated(U, E)
    for i, (s, d) in enumerate(((s0, d0), (s1, d1))):
        fixed = list(dict.fromkeys(list(E) + s.A))
        missing = [x for x in D if x not in d]
        if missing:
            return Al3Report(False, f"d{i} is undefined on {[str(x) for x in missing]}")
        left = fixed + list(D)
        right = fixed + [d[x] for x in D]
        if not isomorphic_closures(U, left, U, right):
            return Al3Report(False, f"D is not equivalent to B{i} over E A{i}")
        if not _closure_eq(U, [d[x] for x in D], s.B):
            return Al3Report(False, f"d{i} does not map D onto B{i}")
    for i, s in enumerate((s0, s1)):
        meet = intersection_generators(Generated(U, s.A + E), s.gB)
        if not same_closure(Generated(U, meet), gE):
            raise VerificationFailed("amalgam", f"⟨A{i}E⟩ ∩ B{i} ≠ E although the hypotheses hold")
    try:
        res = merge_al25(U, A0, B0, A1, B1, iso) if merge else None
    except HypothesisViolated as exc:
        return Al3Report(False, str(exc))
    return Al3Report(True, "", res)


# -- free independence ------------------------------------------------------------------


@dataclass
class IndepResult:
    verdict: str  # "independent" | "dependent" | "unknown"
    witness: object = None
    reason: str = ""
    depth: int = 0

    def __bool__(self) -> bool:
        return self.verdict == "independent"


def indep(A: Iterable[Term], B: Iterable[Term], C: Iterable[Term], U: FreeUniverse, depth: int = 3) -> IndepResult:
    """A ⫝_C B: ⟨AC⟩ ∩ ⟨BC⟩ = ⟨C⟩ and ⟨ABC⟩ is free over ⟨AC⟩ ∪ ⟨BC⟩.

    Decided exactly from the finite cores, so "unknown" does not occur;
    ``depth`` is carried into the report for callers that compare depths.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    A, B, C = list(A), list(B), list(C)
    gAC, gBC, gC = Generated(U, A + C), Generated(U, B + C), Generated(U, C)
    for x in sorted(intersection_generators(gAC, gBC), key=lambda t: t.key):
        if x not in gC:
            return IndepResult("dependent", x, "common element outside ⟨C⟩", depth)
    ok, blk = freely_generates(U, [gAC, gBC])
    if not ok:
        return IndepResult("dependent", blk, "product collapse in ⟨ABC⟩", depth)
    return IndepResult("independent", None, "", depth)


@dataclass
class FullExistence:
    universe: FreeUniverse
    embed: object
    A: tuple[Term, ...]
    result: IndepResult
    fresh: tuple[str, ...] = field(default_factory=tuple)


def full_existence_witness(
    A: Iterable[Term], B: Iterable[Term], C: Iterable[Term], U: FreeUniverse, depth: int = 3, prefix: str = "fx"
) -> FullExistence:
    """A' ≡_C A with A' ⫝_C B, realized by fresh generators in an extended universe."""
    A, B, C = list(A), list(B), list(C)
    AC = list(dict.fromkeys(A + C))
    BC = list(dict.fromkeys(B + C))
    gAC, gC = Generated(U, AC), Generated(U, C)
    if all(a in gC for a in A):
        res = indep(A, BC, C, U, depth)
        return FullExistence(U, lambda x: x, tuple(A), res)
    core = sorted(gAC.core, key=lambda t: t.key)
    taken = set(U.base.points)
    names: dict[Term, object] = {}
    fresh = []
    for x in core:
        if x in gC:
            names[x] = x
        else:
            nm = _fresh(f"{prefix}{len(fresh) + 1}", taken)
            taken.add(nm)
            fresh.append(nm)
            names[x] = nm
    blocks = []
    for x, y, z in gAC.core_blocks():
        b = (names[x], names[y], names[z])
        if not all(isinstance(v, Term) for v in b):
            blocks.append(b)
    U2, embed = U.extend(fresh, blocks, alias_prefix=f"{prefix}t")
    G = Transport(gAC, {x: embed(names[x]) for x in AC}, U2)
    A2 = tuple(G(a) for a in A)
    if not isomorphic_closures(U, AC, U2, [G(x) for x in AC]):
        raise VerificationFailed("amalgam", "fresh copy is not isomorphic over C")
    res = indep(A2, [embed(b) for b in BC], [embed(c) for c in C], U2, depth)
    return FullExistence(U2, embed, A2, res, tuple(fresh))


# -- random configurations ----------------------------------------------------------


def random_partial(rng, points: Sequence[str], max_blocks: int) -> PartialSTS:
    blocks: list[list[str]] = []
    used: set[frozenset] = set()
    for _ in range(max_blocks * 4):
        if len(blocks) >= max_blocks or len(points) < 3:
            break
        b = rng.sample(list(points), 3)
        pairs = {frozenset(p) for p in ((b[0], b[1]), (b[0], b[2]), (b[1], b[2]))}
        if pairs & used:
            continue
        used |= pairs
        blocks.append(b)
    return validate(points, blocks)


def _random_term(rng, U: FreeUniverse, pts: Sequence[Term], max_rank: int) -> Term:
    t = rng.choice(list(pts))
    for _ in range(rng.randrange(max_rank)):
        t = U.mul(t, rng.choice(list(pts)))
    return t


@dataclass
class IndepConfig:
    universe: FreeUniverse
    A: list[Term]
    B: list[Term]
    C: list[Term]


def random_indep_config(seed: int, max_gens: int = 3, n_points: int = 6, max_blocks: int = 2) -> IndepConfig:
    """Base of ``n_points`` with a few blocks; A, B, C of up to ``max_gens`` short terms."""
    rng = make_rng(seed, "indep-config")
    pts = [f"p{i}" for i in range(1, n_points + 1)]
    U = FreeUniverse(random_partial(rng, pts, rng.randrange(max_blocks + 1)))
    leaves = U.points()

    def pick(lo: int) -> list[Term]:
        return list(dict.fromkeys(_random_term(rng, U, leaves, 2) for _ in range(rng.randint(lo, max_gens))))

    return IndepConfig(U, pick(1), pick(1), pick(0)[: rng.randrange(max_gens)])


@dataclass
class MergeConfig:
    universe: FreeUniverse
    A0: list[Term]
    B0: list[Term]
    A1: list[Term]
    B1: list[Term]
    iso: dict[Term, Term]


def random_merge_config(seed: int, max_tries: int = 200) -> MergeConfig:
    """Two copies of a random system on E ∪ A ∪ B glued along E that satisfy the merge hypotheses."""
    rng = make_rng(seed, "merge-config")
    for _ in range(max_tries):
        ne, na, nb = rng.randint(0, 2), rng.randint(1, 3), rng.randint(1, 2)
        E = [f"e{i}" for i in range(ne)]
        As = [f"a{i}" for i in range(na)]
        Bs = [f"b{i}" for i in range(nb)]
        Xs = [f"x{i}" for i in range(rng.randint(0, 3))]  # products, not generators
        Q = random_partial(rng, E + As + Bs + Xs, rng.randint(1, 4))
        if not Q.blocks or not Q.is_relatively_closed(E):
            continue
        ren = {p: p if p in E else p + "'" for p in Q.points}
        base = union(Q, Q.relabel(ren))
        U = FreeUniverse(base)
        lf = U.leaf
        A0 = [lf(a) for a in As]
        B0 = [lf(x) for x in E + Bs]
        A1 = [lf(ren[a]) for a in As]
        B1 = [lf(ren[x]) for x in E + Bs]
        iso = {lf(p): lf(ren[p]) for p in As + E + Bs}
        try:
            _merge_hypotheses(U, A0, B0, A1, B1, iso)
        except HypothesisViolated:
            continue
        return MergeConfig(U, A0, B0, A1, B1, iso)
    raise HypothesisViolated("no hypothesis-satisfying configuration found")


def _merge_hypotheses(U, A0, B0, A1, B1, iso) -> None:
    """Raise HypothesisViolated unless the two-sided merge hypotheses hold."""
    s0, s1 = _Side(U, A0, B0), _Side(U, A1, B1)
    Fg0 = intersection_generators(s0.gA, s0.gB)
    Fg1 = intersection_generators(s1.gA, s1.gB)
    _hyp(_closure_eq(U, Fg0, Fg1), "A0 ∩ B0 = A1 ∩ B1")
    E = sorted(intersection_generators(s0.gB, s1.gB), key=lambda x: x.key)
    _iso_from(U, s0, s1, iso, E)
    gE = Generated(U, E)
    for i, s in enumerate((s0, s1)):
        meet = intersection_generators(Generated(U, s.A + E), s.gB)
        _hyp(same_closure(Generated(U, meet), gE), f"⟨A{i}E⟩ ∩ B{i} = E")


