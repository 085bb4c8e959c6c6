"""Partial Steiner triple systems.

A partial STS is a finite point set with 3-element blocks in which every
unordered pair of distinct points lies in at most one block.  Idempotence
(``a.a = a``) is implicit and never stored as a block.
"""

from __future__ import annotations

import json
import re
from collections.abc import Iterable, Iterator, Mapping
from itertools import combinations
from pathlib import Path

from .errors import (
    BadPointName,
    BudgetExceeded,
    DuplicatePoint,
    IncompatibleSystems,
    InvalidSystem,
    NonTernaryBlock,
    PairInTwoBlocks,
    RepeatedMemberInBlock,
    UnknownPoint,
)

# Point tokens: no whitespace, no "." or parentheses, and none of the
# formula punctuation "=", "!", "&", ",".
POINT_TOKEN = re.compile(r"[^\s.()=!&,]+")

Block = tuple[str, str, str]


class PartialSTS:
    """Immutable validated partial STS.  Build through :func:`validate`."""

    __slots__ = ("points", "blocks", "point_set", "_adj", "_hash")

    def __init__(self, points: tuple[str, ...], blocks: tuple[Block, ...], adj: dict):
        self.points = points
        self.blocks = blocks
        self.point_set = frozenset(points)
        self._adj = adj
        self._hash = None

    # -- basic queries --------------------------------------------------

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, p: object) -> bool:
        return p in self.point_set

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PartialSTS):
            return NotImplemented
        return self.points == other.points and self.blocks == other.blocks

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.points, self.blocks))
        return self._hash

    def __repr__(self) -> str:
        return f"PartialSTS({len(self.points)} points, {len(self.blocks)} blocks)"

    def _check(self, p: str) -> None:
        if p not in self.point_set:
            raise UnknownPoint(p)

    def product(self, a: str, b: str) -> str | None:
        """The defined product of a and b, or None."""
        self._check(a)
        self._check(b)
        if a == b:
            return a
        return self._adj[a].get(b)

    def partners(self, a: str) -> Mapping[str, str]:
        """Read-only view {b: a.b} over the blocks through a."""
        return self._adj[a]

    def degree(self, a: str) -> int:
        return len(self._adj[a]) // 2

    def is_total(self) -> bool:
        n = len(self.points)
        return 3 * len(self.blocks) == n * (n - 1) // 2

    def undefined_pairs(self) -> list[tuple[str, str]]:
        return [(a, b) for a, b in combinations(self.points, 2) if b not in self._adj[a]]

    def is_relatively_closed(self, A: Iterable[str]) -> bool:
        A = set(A)
        for p in A:
            self._check(p)
        for a in A:
            for b, c in self._adj[a].items():
                if b in A and c not in A:
                    return False
        return True

    def closure(self, A: Iterable[str]) -> frozenset[str]:
        """Smallest relatively closed superset of A."""
        members = set(A)
        for p in members:
            self._check(p)
        queue = list(members)
        while queue:
            a = queue.pop()
            for b, c in self._adj[a].items():
                if b in members and c not in members:
                    members.add(c)
                    queue.append(c)
        return frozenset(members)

    def induced(self, A: Iterable[str]) -> PartialSTS:
        """The substructure on A: blocks of self lying inside A."""
        A = set(A)
        for p in A:
            self._check(p)
        return validate(A, [b for b in self.blocks if A.issuperset(b)])

    def is_substructure_of(self, T: PartialSTS) -> bool:
        if not self.point_set <= T.point_set:
            return False
        return set(T.induced(self.points).blocks) == set(self.blocks)

    def relabel(self, mapping: Mapping[str, str]) -> PartialSTS:
        return validate(
            [mapping[p] for p in self.points],
            [[mapping[x] for x in b] for b in self.blocks],
        )

    def extended(self, points: Iterable[str] = (), blocks: Iterable[Iterable[str]] = ()) -> PartialSTS:
        return validate(list(self.points) + list(points), list(self.blocks) + list(blocks))

    # -- serialization --------------------------------------------------

    def to_json(self) -> dict:
        return {"points": list(self.points), "blocks": [list(b) for b in self.blocks]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":")) + "\n"


def validate(points: Iterable[str], blocks: Iterable[Iterable[str]]) -> PartialSTS:
    """Check the partial-STS axioms and return the canonical immutable system."""
    pts: list[str] = []
    seen: set[str] = set()
    for p in points:
        if not isinstance(p, str) or not POINT_TOKEN.fullmatch(p):
            raise BadPointName(p)
        if p in seen:
            raise DuplicatePoint(p)
        seen.add(p)
        pts.append(p)
    adj: dict[str, dict[str, str]] = {p: {} for p in pts}
    owner: dict[tuple[str, str], Block] = {}
    out: set[Block] = set()
    for raw in blocks:
        blk = tuple(raw) if not isinstance(raw, str) else (raw,)
        if len(blk) != 3:
            raise NonTernaryBlock(list(blk))
        for p in blk:
            if p not in seen:
                raise UnknownPoint(p, f"block {list(blk)}")
        if len(set(blk)) != 3:
            raise RepeatedMemberInBlock(list(blk))
        b = tuple(sorted(blk))
        if b in out:
            continue
        for x, y in combinations(b, 2):
            if (x, y) in owner:
                raise PairInTwoBlocks(x, y, (list(owner[(x, y)]), list(b)))
            owner[(x, y)] = b
        x, y, z = b
        adj[x][y] = z
        adj[y][x] = z
        adj[x][z] = y
        adj[z][x] = y
        adj[y][z] = x
        adj[z][y] = x
        out.add(b)
    pts.sort()
    return PartialSTS(tuple(pts), tuple(sorted(out)), adj)


def from_json(obj: Mapping) -> PartialSTS:
    if not isinstance(obj, Mapping) or "points" not in obj or "blocks" not in obj:
        raise InvalidSystem("expected an object with 'points' and 'blocks'")
    return validate(obj["points"], obj["blocks"])


def loads(text: str) -> PartialSTS:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSystem(f"malformed JSON: {exc}") from exc
    return from_json(obj)


def read_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidSystem(f"{path}: malformed JSON: {exc}") from exc


def read_system(path: str | Path) -> PartialSTS:
    return from_json(read_json(path))


def write_system(S: PartialSTS, path: str | Path) -> None:
    Path(path).write_text(S.dumps(), encoding="utf-8")


# -- module-level operations -------------------------------------------------


def product(S: PartialSTS, a: str, b: str) -> str | None:
    return S.product(a, b)


def is_total(S: PartialSTS) -> bool:
    return S.is_total()


def is_relatively_closed(S: PartialSTS, A: Iterable[str]) -> bool:
    return S.is_relatively_closed(A)


def discrete(points: Iterable[str]) -> PartialSTS:
    return validate(points, [])


def compatible(S1: PartialSTS, S2: PartialSTS, C: Iterable[str] | None = None) -> bool:
    return _conflict(S1, S2, C) is None


def _conflict(S1: PartialSTS, S2: PartialSTS, C: Iterable[str] | None):
    if C is None:
        C = S1.point_set & S2.point_set
    C = set(C)
    for p in C:
        if p not in S1 or p not in S2:
            raise UnknownPoint(p, "common set")
    for a in C:
        for b, c in S1.partners(a).items():
            if b in C:
                d = S2.partners(a).get(b)
                if d is not None and d != c:
                    return (min(a, b), max(a, b)), (c, d)
    return None


def union(S1: PartialSTS, S2: PartialSTS) -> PartialSTS:
    bad = _conflict(S1, S2, None)
    if bad is not None:
        raise IncompatibleSystems(*bad)
    pts = list(S1.points) + [p for p in S2.points if p not in S1]
    return validate(pts, list(S1.blocks) + list(S2.blocks))


def family_union(systems: Iterable[PartialSTS]) -> PartialSTS:
    systems = list(systems)
    for i, j in combinations(range(len(systems)), 2):
        bad = _conflict(systems[i], systems[j], None)
        if bad is not None:
            raise IncompatibleSystems(*bad, indices=(i, j))
    pts: dict[str, None] = {}
    blocks: list[Block] = []
    for S in systems:
        pts.update(dict.fromkeys(S.points))
        blocks.extend(S.blocks)
    return validate(list(pts), blocks)


def disjoint_copy(S: PartialSTS, prefix: str) -> tuple[PartialSTS, dict[str, str]]:
    m = {p: f"{prefix}{p}" for p in S.points}
    return S.relabel(m), m


# -- sub-STS enumeration -------------------------------------------------


def _close_total(S: PartialSTS, members: frozenset[str], w: str, limit: int):
    """Closure of members+{w}; None if it meets an undefined pair or exceeds limit."""
    got = set(members)
    got.add(w)
    queue = [w]
    while queue:
        p = queue.pop()
        adj = S.partners(p)
        for q in list(got):
            if q == p:
                continue
            r = adj.get(q)
            if r is None:
                return None
            if r not in got:
                got.add(r)
                if len(got) > limit:
                    return None
                queue.append(r)
    return frozenset(got)


def sub_systems(S: PartialSTS, min_size: int = 0, max_size: int | None = None) -> list[tuple[str, ...]]:
    """All sub-STSs X (relatively closed and total) with min_size <= |X| <= max_size.

    Sorted by (size, points).
    """
    if max_size is None:
        max_size = len(S)
    found: set[frozenset[str]] = set()
    if min_size <= 0 <= max_size:
        found.add(frozenset())
    if min_size <= 1 <= max_size:
        found.update(frozenset((p,)) for p in S.points)
    if max_size >= 3:
        if min_size <= 3:
            found.update(frozenset(b) for b in S.blocks)
        if max_size >= 7:
            found.update(_large_sub_systems(S, max(min_size, 7), max_size))
    out = [tuple(sorted(x)) for x in found]
    out.sort(key=lambda x: (len(x), x))
    return out


def _large_sub_systems(S: PartialSTS, lo: int, hi: int) -> set[frozenset[str]]:
    # Smallest admissible order >= lo; each point of such a sub-STS lies in
    # at least (v-1)/2 of its blocks, so iteratively strip low-degree points.
    v = lo
    while v % 6 not in (1, 3):
        v += 1
    need = max((v - 1) // 2, 3)
    alive = set(S.points)
    live_blocks = set(S.blocks)
    deg = {p: S.degree(p) for p in alive}
    through: dict[str, list[Block]] = {p: [] for p in alive}
    for b in live_blocks:
        for p in b:
            through[p].append(b)
    stack = [p for p in alive if deg[p] < need]
    while stack:
        p = stack.pop()
        if p not in alive:
            continue
        alive.discard(p)
        for b in through[p]:
            if b in live_blocks:
                live_blocks.discard(b)
                for q in b:
                    if q != p and q in alive:
                        deg[q] -= 1
                        if deg[q] < need:
                            stack.append(q)
    core = sorted(alive)
    result: set[frozenset[str]] = set()
    seen: set[frozenset[str]] = set()
    frontier = [frozenset(b) for b in live_blocks]
    seen.update(frontier)
    while frontier:
        Y = frontier.pop()
        if lo <= len(Y) <= hi:
            result.add(Y)
        for w in core:
            if w in Y:
                continue
            Z = _close_total(S, Y, w, hi)
            if Z is not None and Z not in seen:
                seen.add(Z)
                frontier.append(Z)
    return result


# -- embeddings ----------------------------------------------------------


def find_embeddings(
    S: PartialSTS,
    T: PartialSTS,
    base: Mapping[str, str] | None = None,
    substructure: bool = False,
    budget: int | None = None,
) -> Iterator[dict[str, str]]:
    """Lazily yield injective block-preserving maps S -> T extending base.

    With ``substructure`` the maps also reflect blocks on their image.
    ``budget`` caps the number of search nodes (BudgetExceeded).
    """
    sp, tp = S.points, T.points
    si = {p: i for i, p in enumerate(sp)}
    ti = {p: i for i, p in enumerate(tp)}
    sadj = [{si[q]: si[r] for q, r in S.partners(p).items()} for p in sp]
    tadj = [{ti[q]: ti[r] for q, r in T.partners(p).items()} for p in tp]
    ns, nt = len(sp), len(tp)
    m = [-1] * ns
    inv = [-1] * nt
    nodes = [0]

    def ok(s: int, t: int) -> bool:
        ts = tadj[t]
        for x, y in sadj[s].items():
            tx = m[x]
            if tx >= 0:
                ty = ts.get(tx)
                if ty is None:
                    return False
                if m[y] >= 0:
                    if m[y] != ty:
                        return False
                elif inv[ty] >= 0:
                    return False
        if substructure:
            ss = sadj[s]
            for tx, tz in ts.items():
                x, z = inv[tx], inv[tz]
                if x >= 0 and z >= 0 and ss.get(x) != z:
                    return False
        return True

    def candidates(s: int) -> list[int]:
        forced = -1
        for x, y in sadj[s].items():
            if m[x] >= 0 and m[y] >= 0:
                t = tadj[m[x]].get(m[y])
                if t is None or (forced >= 0 and forced != t):
                    return []
                forced = t
        if forced >= 0:
            return [forced] if inv[forced] < 0 and ok(s, forced) else []
        return [t for t in range(nt) if inv[t] < 0 and ok(s, t)]

    if base:
        for a, b in base.items():
            if a not in si:
                raise UnknownPoint(a, "embedding base (source)")
            if b not in ti:
                raise UnknownPoint(b, "embedding base (target)")
            s, t = si[a], ti[b]
            if inv[t] >= 0 or not ok(s, t):
                return
            m[s], inv[t] = t, s
    if ns - sum(1 for x in m if x >= 0) > nt - sum(1 for x in inv if x >= 0):
        return

    def search() -> Iterator[dict[str, str]]:
        nodes[0] += 1
        if budget is not None and nodes[0] > budget:
            raise BudgetExceeded(f"embedding search exceeded {budget} nodes")
        best, best_c = -1, None
        for s in range(ns):
            if m[s] < 0:
                c = candidates(s)
                if best_c is None or len(c) < len(best_c):
                    best, best_c = s, c
                    if not c:
                        return
        if best < 0:
            yield {sp[i]: tp[m[i]] for i in range(ns)}
            return
        for t in best_c:
            m[best], inv[t] = t, best
            yield from search()
            m[best], inv[t] = -1, -1

    yield from search()


def embeds(S: PartialSTS, T: PartialSTS, substructure: bool = True) -> bool:
    return next(find_embeddings(S, T, substructure=substructure), None) is not None


# -- canonical form ------------------------------------------------------


def _refine(colors: list[int], inc: list[list[tuple[int, int]]]) -> list[int]:
    count = len(set(colors))
    while True:
        sigs = [
            (c, tuple(sorted((colors[q], colors[r]) if colors[q] <= colors[r] else (colors[r], colors[q]) for q, r in inc[p])))
            for p, c in enumerate(colors)
        ]
        ranks = {s: i for i, s in enumerate(sorted(set(sigs)))}
        new = [ranks[s] for s in sigs]
        if len(ranks) == count:
            return new
        count = len(ranks)
        colors = new


def _orbits(gens: list[tuple[int, ...]], n: int) -> list[int]:
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g in gens:
        for x in range(n):
            a, b = find(x), find(g[x])
            if a != b:
                parent[max(a, b)] = min(a, b)
    return [find(x) for x in range(n)]


def canonical_labeling(
    S: PartialSTS, colors: Mapping[str, object] | None = None, budget: int | None = None
) -> tuple[str, dict[str, int]]:
    """Canonical label string and a labeling point -> position achieving it.

    ``colors`` optionally assigns each point a sortable color; isomorphisms
    must then preserve colors.
    """
    pts = S.points
    n = len(pts)
    idx = {p: i for i, p in enumerate(pts)}
    inc: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    triples = [tuple(idx[x] for x in b) for b in S.blocks]
    for a, b, c in triples:
        inc[a].append((b, c))
        inc[b].append((a, c))
        inc[c].append((a, b))
    if colors is None:
        init = [0] * n
        color_values: list = []
    else:
        color_values = sorted({colors[p] for p in pts}, key=lambda v: (type(v).__name__, v))
        rank = {v: i for i, v in enumerate(color_values)}
        init = [rank[colors[p]] for p in pts]
    counts = [init.count(i) for i in range(len(set(init)))] if n else []

    best: list = [None, None]  # encoding, labeling
    first: list = [None, None]
    autos: list[tuple[int, ...]] = []
    nodes = [0]

    def leaf(lab: list[int]) -> None:
        enc = tuple(sorted(tuple(sorted((lab[a], lab[b], lab[c]))) for a, b, c in triples))
        for ref in (first, best):
            if ref[0] == enc:
                inv = [0] * n
                for p, l in enumerate(ref[1]):
                    inv[l] = p
                g = tuple(inv[lab[p]] for p in range(n))
                if any(g[i] != i for i in range(n)):
                    autos.append(g)
        if first[0] is None:
            first[0], first[1] = enc, lab
        if best[0] is None or enc < best[0]:
            best[0], best[1] = enc, lab

    def search(cols: list[int], seq: list[int]) -> None:
        nodes[0] += 1
        if budget is not None and nodes[0] > budget:
            raise BudgetExceeded(f"canonical labeling exceeded {budget} nodes")
        sizes: dict[int, int] = {}
        for c in cols:
            sizes[c] = sizes.get(c, 0) + 1
        cell = min((c for c, k in sizes.items() if k > 1), default=None)
        if cell is None:
            leaf(cols)
            return
        members = [v for v in range(n) if cols[v] == cell]
        tried: list[int] = []
        for v in members:
            if tried:
                stab = [g for g in autos if all(g[s] == s for s in seq)]
                if stab:
                    orb = _orbits(stab, n)
                    if any(orb[u] == orb[v] for u in tried):
                        continue
            tried.append(v)
            nxt = [2 * c for c in cols]
            nxt[v] -= 1
            search(_refine(nxt, inc), seq + [v])

    if n:
        search(_refine(init, inc), [])
        enc, lab = best[0], best[1]
    else:
        enc, lab = (), []
    body = ";".join(f"{a},{b},{c}" for a, b, c in enc)
    label = f"n={n}|b={len(triples)}|c={counts}|v={[repr(v) for v in color_values]}|{body}"
    return label, {p: lab[i] for i, p in enumerate(pts)}


def canonical_form(
    S: PartialSTS, colors: Mapping[str, object] | None = None, budget: int | None = None
) -> str:
    """Label string equal for two systems iff they are isomorphic."""
    return canonical_labeling(S, colors, budget)[0]


def isomorphic(S: PartialSTS, T: PartialSTS) -> bool:
    if len(S) != len(T) or len(S.blocks) != len(T.blocks):
        return False
    return canonical_form(S) == canonical_form(T)


# -- brute-force enumeration (oracle) ----------------------------------------


def enumerate_sts(points: Iterable[str]) -> Iterator[PartialSTS]:
    """Every STS on exactly these labeled points (exhaustive; small orders only)."""
    pts = sorted(points)
    n = len(pts)
    used: set[tuple[int, int]] = set()
    chosen: list[tuple[int, int, int]] = []

    def rec() -> Iterator[PartialSTS]:
        pair = next(((a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in used), None)
        if pair is None:
            yield validate(pts, [[pts[x] for x in t] for t in chosen])
            return
        a, b = pair
        for c in range(n):
            if c in (a, b):
                continue
            t = tuple(sorted((a, b, c)))
            ps = [(t[0], t[1]), (t[0], t[2]), (t[1], t[2])]
            if any(p in used for p in ps):
                continue
            used.update(ps)
            chosen.append(t)
            yield from rec()
            chosen.pop()
            used.difference_update(ps)

    if n % 6 in (1, 3) or n == 0:
        yield from rec()
