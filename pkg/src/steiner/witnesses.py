"""Explicit constructions: the TP2 array, the smallness chain and subsystem-free systems."""

from __future__ import annotations

import itertools
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

from .completion import complete_finite, free_step
from .core import PartialSTS, discrete, embeds, family_union, isomorphic, sub_systems, union, validate
from .errors import (
    AuditFailed,
    BudgetExceeded,
    FamilyMemberTooSmall,
    InvalidSystem,
    NotAdmissible,
    SearchLimit,
    Timeout,
    VerificationFailed,
)
from .freequasigroup import FreeUniverse, Term, closure_levels
from .seeding import derive_seed

# -- TP2 array ---------------------------------------------------------------------


def _ftag(f: Sequence[int]) -> str:
    return "-".join(map(str, f))


@dataclass
class TP2Array:
    system: PartialSTS
    rows: int
    cols: int
    labels: dict[str, str]  # family label -> point token
    functions: list[tuple[int, ...]]

    def a(self, i: int) -> str:
        return self.labels[f"a_{i}"]

    def b(self, i: int) -> str:
        return self.labels[f"b_{i}"]

    def c(self, i: int, j: int) -> str:
        return self.labels[f"c_{i}_{j}"]

    def d(self, f: Sequence[int]) -> str:
        return self.labels[f"d_{_ftag(f)}"]

    def component(self, i: int, j: int) -> PartialSTS:
        """The partial system on A_ij: a_i, b_i, c_ij and the d_f, starred points with f(i) = j."""
        pts = [self.a(i), self.b(i), self.c(i, j)]
        blocks = []
        for f in self.functions:
            if f[i] != j:
                continue
            t = _ftag(f)
            d, As, Bs = self.d(f), self.labels[f"a*_{i}_{j}_{t}"], self.labels[f"b*_{i}_{j}_{t}"]
            pts += [d, As, Bs]
            blocks += [[d, self.c(i, j), Bs], [Bs, self.b(i), As], [d, self.a(i), As]]
        return validate(pts, blocks)


def tp2_array(rows: int, cols: int) -> TP2Array:
    """Array a_i, b_i, c_ij with a path point d_f for every f: rows -> cols."""
    if rows < 1 or cols < 1:
        raise InvalidSystem("rows and cols must be >= 1")
    labels: dict[str, str] = {}
    for i in range(rows):
        labels[f"a_{i}"] = f"a{i}"
        labels[f"b_{i}"] = f"b{i}"
        for j in range(cols):
            labels[f"c_{i}_{j}"] = f"c{i}_{j}"
    functions = list(itertools.product(range(cols), repeat=rows))
    blocks = []
    for f in functions:
        t = _ftag(f)
        labels[f"d_{t}"] = d = f"d{t}"
        for i, j in enumerate(f):
            As = labels[f"a*_{i}_{j}_{t}"] = f"a*{i}_{j}_{t}"
            Bs = labels[f"b*_{i}_{j}_{t}"] = f"b*{i}_{j}_{t}"
            blocks += [[d, f"c{i}_{j}", Bs], [Bs, f"b{i}", As], [d, f"a{i}", As]]
    S = validate(sorted(set(labels.values())), blocks)
    return TP2Array(S, rows, cols, labels, functions)


def path_formula(U: FreeUniverse, x: Term, y1: Term, y2: Term, y3: Term) -> bool:
    """x = y1·(y2·(y3·x))."""
    return U.mul(y1, U.mul(y2, U.mul(y3, x))) is x


def cancellation_derivation(y1: str, y2: str, c1: str, c2: str) -> list[str]:
    """Symbolic derivation of c1 = c2 from x = y1·(y2·(c1·x)) and x = y1·(y2·(c2·x)).

    Each step multiplies both sides by the outer left factor, using
    u·(u·v) = v, and the last step cancels x.
    """
    lhs1, lhs2 = "x", "x"
    rhs1 = ("y1", ("y2", ("c1", "x")))
    rhs2 = ("y1", ("y2", ("c2", "x")))
    env = {"y1": y1, "y2": y2, "c1": c1, "c2": c2, "x": "x"}

    def show(t) -> str:
        return env[t] if isinstance(t, str) else f"({show(t[0])}.{show(t[1])})"

    steps = [f"{show(lhs1)} = {show(rhs1)}", f"{show(lhs2)} = {show(rhs2)}"]
    # peel while both right sides share their outer left factor
    while isinstance(rhs1, tuple) and isinstance(rhs2, tuple) and rhs1[0] == rhs2[0] and rhs1[0] != "c1":
        u = rhs1[0]
        lhs1, rhs1 = (u, lhs1), rhs1[1]
        lhs2, rhs2 = (u, lhs2), rhs2[1]
        steps.append(f"{show(lhs1)} = {show(rhs1)}  [multiply by {env[u]}]")
    if lhs1 != lhs2:
        raise VerificationFailed("tp2", "derivation did not reach a common left side")
    steps.append(f"{show(rhs1)} = {show(rhs2)}  [equal left sides]")
    if rhs1[1] != rhs2[1]:
        raise VerificationFailed("tp2", "no common factor to cancel")
    steps.append(f"{c1} = {c2}  [cancel {show(rhs1[1])}]")
    return steps


@dataclass
class TP2Report:
    path_ok: bool
    path_failures: list[tuple[tuple[int, ...], int]]
    rows_ok: bool
    row_failures: list[str]
    derivations: dict[tuple[int, int, int], list[str]]
    brute_depth: int
    brute_checked: int
    validity_ok: bool
    validity_failures: list[str]

    @property
    def ok(self) -> bool:
        return self.path_ok and self.rows_ok and self.validity_ok


def verify_tp2(arr: TP2Array, depth: int = 4) -> TP2Report:
    """Path satisfaction, row 2-inconsistency (symbolic and brute force) and union validity."""
    U = FreeUniverse(arr.system)
    L = U.leaf
    path_fail = []
    for f in arr.functions:
        for i in range(arr.rows):
            if not path_formula(U, L(arr.d(f)), L(arr.a(i)), L(arr.b(i)), L(arr.c(i, f[i]))):
                path_fail.append((f, i))

    row_fail: list[str] = []
    derivs: dict[tuple[int, int, int], list[str]] = {}
    for i in range(arr.rows):
        for j, k in itertools.combinations(range(arr.cols), 2):
            steps = cancellation_derivation(arr.a(i), arr.b(i), arr.c(i, j), arr.c(i, k))
            derivs[(i, j, k)] = steps
            if arr.c(i, j) == arr.c(i, k):
                row_fail.append(f"row {i}: c_{i}_{j} = c_{i}_{k}, cancellation gives no contradiction")
    checked = 0
    if depth >= 1:
        pairs = [(i, j, k) for i in range(arr.rows) for j, k in itertools.combinations(range(arr.cols), 2)]
        params = {(i, j): (L(arr.a(i)), L(arr.b(i)), L(arr.c(i, j))) for i in range(arr.rows) for j in range(arr.cols)}
        for lvl in closure_levels(U.points(), depth, U):
            for x in lvl:
                checked += 1
                for i, j, k in pairs:
                    if path_formula(U, x, *params[(i, j)]) and path_formula(U, x, *params[(i, k)]):
                        row_fail.append(f"row {i}: {x} realizes columns {j} and {k}")

    val_fail: list[str] = []
    try:
        row_systems = []
        for i in range(arr.rows):
            comps = [arr.component(i, j) for j in range(arr.cols)]
            for j, k in itertools.combinations(range(arr.cols), 2):
                union(comps[j], comps[k])
            row_systems.append(family_union(comps))
        for r1, r2 in itertools.combinations(row_systems, 2):
            union(r1, r2)
        total = family_union(row_systems)
        if total != arr.system:
            val_fail.append("union of the components differs from the array")
    except InvalidSystem as exc:
        val_fail.append(str(exc))
    return TP2Report(not path_fail, path_fail, not row_fail, row_fail, derivs, depth, checked, not val_fail, val_fail)


# -- smallness chain ---------------------------------------------------------------


def minimal_generators(A: PartialSTS) -> tuple[str, ...]:
    """A smallest generating set (lexicographically first among the smallest)."""
    pts = A.points
    for k in range(len(pts) + 1):
        for sub in itertools.combinations(pts, k):
            if len(A.closure(sub)) == len(pts):
                return sub
    return tuple(pts)


@dataclass
class Sma1Stage:
    index: int
    member: int  # index into the family
    k: int
    iterations: int
    free_points: tuple[str, ...]  # b_1 .. b_{2k+3}
    linking: list[tuple[str, str, str]]
    copy: dict[str, str]  # member point -> point of the chain
    size: int


@dataclass
class Sma1Chain:
    chain: list[PartialSTS]
    stages: list[Sma1Stage]
    family: list[PartialSTS]
    base: tuple[str, ...] = ("u1", "u2", "u3")

    @property
    def final(self) -> PartialSTS:
        return self.chain[-1]


def sma1_build(
    family: Sequence[PartialSTS],
    prefix: int,
    generators: Sequence[Sequence[str]] | None = None,
) -> Sma1Chain:
    """B_0 ⊆ ... ⊆ B_t attaching family[i mod |family|] at stage i."""
    family = list(family)
    if not family and prefix > 0:
        raise FamilyMemberTooSmall("empty family")
    for Q in family:
        if not Q.is_total():
            raise InvalidSystem("family members must be total")
    if family and max(len(Q) for Q in family) < 3:
        raise FamilyMemberTooSmall("some member needs at least 3 points")
    gens = [tuple(g) for g in generators] if generators is not None else [minimal_generators(Q) for Q in family]
    base = ("u1", "u2", "u3")
    B = discrete(base)
    chain = [B]
    stages: list[Sma1Stage] = []
    for i in range(prefix):
        m = i % len(family)
        Q, g = family[m], gens[m]
        if len(Q.closure(g)) != len(Q):
            raise InvalidSystem(f"given generators do not generate member {m}")
        k = len(g)
        counter = itertools.count(1)

        def namer(a: str, b: str, depth: int, _i=i) -> str:
            return f"s{_i + 1}_{next(counter)}"

        cur = B
        n = 0
        while True:
            n += 1
            before = set(cur.points)
            cur = free_step(cur, namer, n)
            newest = [p for p in cur.points if p not in before]
            if len(newest) >= 2 * k + 3:
                break
            if not newest:
                raise FamilyMemberTooSmall("saturation stopped growing")
        newest.sort(key=lambda p: int(p.split("_")[1]))
        bs = tuple(newest[: 2 * k + 3])
        copy = {p: f"A{i + 1}_{p}" for p in Q.points}
        link = [(bs[j], bs[k + j], copy[g[j]]) for j in range(k)]
        B = validate(list(cur.points) + [copy[p] for p in Q.points], list(cur.blocks) + [[copy[x] for x in b] for b in Q.blocks] + [list(t) for t in link])
        chain.append(B)
        stages.append(Sma1Stage(i, m, k, n, bs, link, copy, len(B)))
    return Sma1Chain(chain, stages, family, base)


@dataclass
class Sma1Report:
    passed: dict[str, bool] = field(default_factory=dict)
    sub_systems: list[tuple[int, int, int]] = field(default_factory=list)  # (stage, size, member)

    @property
    def ok(self) -> bool:
        return all(self.passed.values())


def sma1_audit(built: Sma1Chain, family: Sequence[PartialSTS] | None = None) -> Sma1Report:
    """Re-derive the chain properties from scratch; raise AuditFailed on the first violation."""
    family = list(family) if family is not None else built.family
    rep = Sma1Report()
    B0 = built.chain[0]
    if len(B0) != 3 or B0.blocks:
        raise AuditFailed("1", B0.dumps())
    rep.passed["1"] = True
    for st, (Bi, Bn) in zip(built.stages, zip(built.chain, built.chain[1:])):
        if not Bi.is_substructure_of(Bn):
            raise AuditFailed("chain", f"stage {st.index}")
        for a, b in itertools.combinations(Bi.points, 2):
            if Bn.product(a, b) is None:
                raise AuditFailed("2", (st.index, a, b))
        Q = family[st.member]
        img = Q.relabel(st.copy)
        if not img.is_substructure_of(Bn):
            raise AuditFailed("3", st.index)
        if len(Bn.closure(Bi.points)) != len(Bn):
            raise AuditFailed("4", st.index)
        linked = {frozenset(t[:2]) for t in st.linking}
        if len(st.free_points) != 2 * st.k + 3:
            raise AuditFailed("free", st.free_points)
        for x, y in itertools.combinations(st.free_points, 2):
            if (Bn.product(x, y) is not None) != (frozenset((x, y)) in linked):
                raise AuditFailed("free", (x, y))
        members = [family[s.member] for s in built.stages[: st.index + 1]]
        for X in sub_systems(Bn, 4):
            sub = Bn.induced(X)
            hit = next((j for j, A in enumerate(members) if embeds(sub, A)), None)
            if hit is None:
                raise AuditFailed("5", X)
            rep.sub_systems.append((st.index + 1, len(X), built.stages[hit].member))
        rep.passed.setdefault("2", True)
        rep.passed.setdefault("3", True)
        rep.passed.setdefault("4", True)
        rep.passed.setdefault("free", True)
        rep.passed.setdefault("5", True)
    final = built.final
    if len(final.closure(built.base)) != len(final):
        raise AuditFailed("generated", "B_0 does not generate the final stage")
    rep.passed["generated"] = True
    return rep


# -- subsystem-free systems --------------------------------------------------------


@dataclass
class DoyenResult:
    system: PartialSTS
    attempts: int
    seconds: float


def certify_doyen(S: PartialSTS) -> bool:
    n = len(S)
    return S.is_total() and not sub_systems(S, 4, n - 1)


def doyen_search(n: int, budget_seconds: float = 120.0, seed: int = 0) -> DoyenResult:
    """An STS(n) with no sub-STS of order strictly between 3 and n."""
    if n % 6 not in (1, 3) or n < 1:
        raise NotAdmissible(n)
    t0 = time.monotonic()
    pts = [f"p{i}" for i in range(1, n + 1)]
    attempt = 0
    while True:
        if time.monotonic() - t0 > budget_seconds:
            raise Timeout(f"no certified STS({n}) within {budget_seconds} s")
        try:
            S = complete_finite(discrete(pts), n, seed=derive_seed(seed, "doyen", n, attempt), keep_substructure=False)
        except (BudgetExceeded, SearchLimit):
            attempt += 1
            continue
        attempt += 1
        if certify_doyen(S):
            return DoyenResult(S, attempt, time.monotonic() - t0)


def nonisomorphic_prefixes(X: Sequence[int], Y: Sequence[int], prefix: int | None = None, seed: int = 0, budget_seconds: float = 120.0) -> bool:
    """Whether the smallness chains over Doyen systems of orders X and Y end non-isomorphic."""
    cache: dict[int, PartialSTS] = {}

    def fam(orders: Sequence[int]) -> list[PartialSTS]:
        out = []
        for n in orders:
            if n not in cache:
                cache[n] = doyen_search(n, budget_seconds, seed).system
            out.append(cache[n])
        return out

    t = prefix if prefix is not None else max(len(X), len(Y))
    fx, fy = sma1_build(fam(X), t).final, sma1_build(fam(Y), t).final
    return not isomorphic(fx, fy)
