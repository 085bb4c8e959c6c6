"""Brute-force reference implementations used as test oracles.

These deliberately avoid the library's search and rewriting code: they work
on plain tuples and sets, and trade speed for obviousness.
"""

from __future__ import annotations

import itertools
import random

# Values produced by the brute-force routines below on their first run and
# frozen here; the tests compare the library against these numbers.
FROZEN = {
    "labeled_sts7": 30,  # count_labeled_sts(range(7))
    "labeled_sts9": 840,  # count_labeled_sts(range(9))
    "fano_automorphisms": 168,  # count_embeddings(fano, fano)
    "block_into_fano": 42,  # count_embeddings(one block, fano)
    "free_terms_2_2": 6,  # count_syntactic_terms(2, 2)
    "free_terms_2_3": 22,  # count_syntactic_terms(2, 3)
    "free3_normal_forms_by_rank": (3, 3, 3, 9),  # distinct random_rewrite results, ranks 1..4
    "free_truncation_3_depth2": (12, 9),  # naive_free_truncation(3 discrete points, 2): points, blocks
    "tp2_points_2x2": 2 + 2 + 4 + 4 + 16,  # a_i, b_i, c_ij, d_f, starred points
    "tp2_blocks_2x2": 2 * 4 * 3,  # three blocks per (row, path)
}


def pairs_of(block):
    a, b, c = sorted(block)
    return [(a, b), (a, c), (b, c)]


def is_partial_sts(points, blocks) -> bool:
    seen = set()
    pts = set(points)
    for b in blocks:
        if len(set(b)) != 3 or not set(b) <= pts:
            return False
        for p in pairs_of(b):
            if p in seen:
                return False
            seen.add(p)
    return True


def is_total_sts(points, blocks) -> bool:
    n = len(set(points))
    return is_partial_sts(points, blocks) and 3 * len(blocks) == n * (n - 1) // 2


def count_labeled_sts(points) -> int:
    """Count STSs by scanning triples in lexicographic order (include or skip)."""
    pts = sorted(points)
    n = len(pts)
    need = n * (n - 1) // 6
    if 3 * need != n * (n - 1) // 2:
        return 0
    triples = list(itertools.combinations(range(n), 3))
    count = 0

    def rec(i: int, used: set, k: int) -> None:
        nonlocal count
        if k == need:
            count += 1
            return
        if len(triples) - i < need - k:
            return
        # The lexicographically least uncovered pair must be covered by a triple at or after i.
        first = next((p for p in itertools.combinations(range(n), 2) if p not in used), None)
        for j in range(i, len(triples)):
            t = triples[j]
            if t[:2] > first:
                break
            ps = [(t[0], t[1]), (t[0], t[2]), (t[1], t[2])]
            if any(p in used for p in ps):
                continue
            if first not in ps:
                continue
            rec(j + 1, used | set(ps), k + 1)

    rec(0, set(), 0)
    return count


def product_table(blocks) -> dict:
    tab = {}
    for a, b, c in blocks:
        tab[frozenset((a, b))] = c
        tab[frozenset((a, c))] = b
        tab[frozenset((b, c))] = a
    return tab


def brute_sub_systems(points, blocks, min_size: int = 0):
    """Subsets closed under defined products on which every pair has a product."""
    tab = product_table(blocks)
    pts = sorted(points)
    out = []
    for r in range(min_size, len(pts) + 1):
        for X in itertools.combinations(pts, r):
            Xs = set(X)
            ok = True
            for a, b in itertools.combinations(X, 2):
                c = tab.get(frozenset((a, b)))
                if c is None or c not in Xs:
                    ok = False
                    break
            if ok:
                out.append(X)
    return out


def count_embeddings(S_points, S_blocks, T_points, T_blocks) -> int:
    """Injective maps sending blocks to blocks, by trying every injection."""
    tblocks = {frozenset(b) for b in T_blocks}
    n = 0
    for img in itertools.permutations(T_points, len(S_points)):
        f = dict(zip(S_points, img))
        if all(frozenset(f[x] for x in b) in tblocks for b in S_blocks):
            n += 1
    return n


def count_syntactic_terms(num_vars: int, max_rank: int) -> int:
    """Count raw terms by building them."""
    levels = [[], [("v", i) for i in range(num_vars)]]
    for r in range(2, max_rank + 1):
        levels.append([(u, v) for i in range(1, r) for u in levels[i] for v in levels[r - i]])
    return sum(len(lvl) for lvl in levels)


def naive_free_truncation(points, blocks, depth: int):
    """Adjoin a new point per undefined pair, depth times."""
    pts = list(points)
    blks = [tuple(b) for b in blocks]
    for d in range(depth):
        tab = product_table(blks)
        new = []
        for a, b in itertools.combinations(sorted(pts, key=str), 2):
            if frozenset((a, b)) not in tab:
                p = ("new", d, a, b)
                new.append(p)
                blks.append((a, b, p))
        if not new:
            break
        pts += new
    return pts, blks


# -- an independent rewriter for free Steiner quasigroup terms -----------------------
# Raw terms are point names or 2-tuples.  Canonical strings sort children
# by their own canonical string, so commutativity is built in.


def canon(t) -> str:
    if isinstance(t, str):
        return t
    a, b = sorted((canon(t[0]), canon(t[1])))
    return f"({a}.{b})"


def _redex(t, tab):
    """Contractum of t at the root, or None."""
    if isinstance(t, str):
        return None
    u, v = t
    cu, cv = canon(u), canon(v)
    if cu == cv:
        return u
    for x, y in ((u, v), (v, u)):
        if not isinstance(y, str):
            if canon(y[0]) == canon(x):
                return y[1]
            if canon(y[1]) == canon(x):
                return y[0]
    if isinstance(u, str) and isinstance(v, str):
        c = tab.get(frozenset((u, v)))
        if c is not None:
            return c
    return None


def _positions(t, path=()):
    yield path, t
    if not isinstance(t, str):
        yield from _positions(t[0], path + (0,))
        yield from _positions(t[1], path + (1,))


def _replace(t, path, new):
    if not path:
        return new
    kids = list(t)
    kids[path[0]] = _replace(t[path[0]], path[1:], new)
    return tuple(kids)


def random_rewrite(t, blocks, rng: random.Random) -> str:
    """Rewrite at uniformly random redexes until none is left; return the canonical string."""
    tab = product_table(blocks)
    while True:
        redexes = [(p, r) for p, s in _positions(t) if (r := _redex(s, tab)) is not None]
        if not redexes:
            return canon(t)
        path, r = rng.choice(redexes)
        t = _replace(t, path, r)


def random_raw_term(rng: random.Random, leaves, max_rank: int):
    if max_rank <= 1 or rng.random() < 0.3:
        return rng.choice(leaves)
    k = rng.randint(1, max_rank - 1)
    return (random_raw_term(rng, leaves, k), random_raw_term(rng, leaves, max_rank - k))
