"""Embedding partial systems into total ones.

``free_step``/``free_truncation`` build the free one-step chain: every
undefined pair receives its own fresh product point.  ``complete_finite``
searches for a finite STS containing the input as a substructure.
"""

from __future__ import annotations

from collections.abc import Callable

from .core import PartialSTS, validate
from .errors import BudgetExceeded, NoCompletionWithinBound
from .seeding import make_rng

Namer = Callable[[str, str, int], str]


def default_namer(a: str, b: str, depth: int) -> str:
    return f"{a}*{b}#{depth}"


def _fresh(name: str, taken: set[str]) -> str:
    if name not in taken:
        return name
    k = 1
    while f"{name}~{k}" in taken:
        k += 1
    return f"{name}~{k}"


def free_step(S: PartialSTS, namer: Namer | None = None, depth: int = 1) -> PartialSTS:
    """Adjoin one fresh product point for every undefined pair."""
    namer = namer or default_namer
    taken = set(S.points)
    pts: list[str] = []
    blocks: list[tuple[str, str, str]] = []
    for a, b in S.undefined_pairs():
        p = _fresh(namer(a, b, depth), taken)
        taken.add(p)
        pts.append(p)
        blocks.append((a, b, p))
    if not pts:
        return S
    return S.extended(pts, blocks)


def free_truncation(S: PartialSTS, depth: int, namer: Namer | None = None) -> PartialSTS:
    for d in range(1, depth + 1):
        nxt = free_step(S, namer, d)
        if nxt is S:
            break
        S = nxt
    return S


def admissible_orders(lo: int, hi: int) -> list[int]:
    return [n for n in range(max(lo, 0), hi + 1) if n % 6 in (1, 3)]


def is_admissible(n: int) -> bool:
    return n >= 0 and n % 6 in (1, 3)


class _OutOfNodes(Exception):
    pass


def _order_possible(S: PartialSTS, n: int) -> bool:
    """Cheap necessary conditions for embedding S in an STS of order n."""
    m = len(S)
    fresh = n - m
    missing = 0
    for p in S.points:
        u = m - 1 - 2 * S.degree(p)
        if u > fresh:
            return False
        missing += u
    return missing // 2 <= fresh * (m // 2)


def _search(n: int, m: int, free: list[int], prio: list[int], budget: int) -> list[tuple[int, int, int]] | None:
    """Cover all pairs flagged in ``free`` by triples; None when the tree is exhausted."""
    new_mask = ((1 << n) - 1) ^ ((1 << m) - 1)
    added: list[tuple[int, int, int]] = []
    nodes = 0

    def pick():
        best = None
        best_count = n + 1
        for x in range(n):
            fx = free[x] >> (x + 1)
            y = x + 1
            while fx:
                if fx & 1:
                    c = free[x] & free[y]
                    if y < m:
                        c &= new_mask
                    k = c.bit_count()
                    if k < best_count:
                        best, best_count = (x, y, c), k
                        if k == 0:
                            return best
                fx >>= 1
                y += 1
        return best

    def rec() -> bool:
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise _OutOfNodes
        choice = pick()
        if choice is None:
            return True
        x, y, c = choice
        if not c:
            return False
        for z in prio:
            if c >> z & 1:
                free[x] &= ~((1 << y) | (1 << z))
                free[y] &= ~((1 << x) | (1 << z))
                free[z] &= ~((1 << x) | (1 << y))
                added.append((x, y, z))
                if rec():
                    return True
                added.pop()
                free[x] |= (1 << y) | (1 << z)
                free[y] |= (1 << x) | (1 << z)
                free[z] |= (1 << x) | (1 << y)
        return False

    return added if rec() else None


def complete_finite(
    S: PartialSTS,
    max_order: int,
    seed: int = 0,
    node_budget: int = 400_000,
    restart_nodes: int = 20_000,
    keep_substructure: bool = True,
) -> PartialSTS:
    """A total STS containing S as a substructure, of admissible order <= max_order.

    With ``keep_substructure=False`` new blocks may also fall inside the
    input point set (plain completion of the block set); this is how an
    empty system on 7 points becomes an STS(7).

    Orders are tried upward from the smallest admissible order >= |S|.  At
    each order the pair-covering search restarts with fresh candidate
    orders every ``restart_nodes`` nodes until ``node_budget`` is spent.
    Seed 0 starts from the canonical candidate order.
    """
    if S.is_total() and len(S) % 6 in (1, 3):
        return S
    m = len(S)
    idx = {p: i for i, p in enumerate(S.points)}
    hit_budget = False
    for n in admissible_orders(max(m, 1), max_order):
        if keep_substructure and not _order_possible(S, n):
            continue
        full = (1 << n) - 1
        base_free = [full ^ (1 << x) for x in range(n)]
        for a, b, c in S.blocks:
            x, y, z = idx[a], idx[b], idx[c]
            base_free[x] &= ~((1 << y) | (1 << z))
            base_free[y] &= ~((1 << x) | (1 << z))
            base_free[z] &= ~((1 << x) | (1 << y))
        spent = 0
        attempt = 0
        result = None
        exhausted = False
        while spent < node_budget:
            prio = list(range(n))
            if seed != 0 or attempt > 0:
                make_rng(seed, "complete", n, attempt).shuffle(prio)
            slice_ = min(restart_nodes * (attempt + 1), node_budget - spent)
            try:
                result = _search(n, m if keep_substructure else 0, list(base_free), prio, slice_)
            except _OutOfNodes:
                spent += slice_
                attempt += 1
                continue
            if result is None:
                exhausted = True
            break
        if result is not None:
            taken = set(S.points)
            names = list(S.points)
            k = 0
            while len(names) < n:
                k += 1
                if f"x{k}" not in taken:
                    names.append(f"x{k}")
            blocks = list(S.blocks) + [(names[x], names[y], names[z]) for x, y, z in result]
            return validate(names, blocks)
        if not exhausted:
            hit_budget = True
    if hit_budget:
        raise BudgetExceeded(f"completion search budget exhausted below order {max_order}")
    raise NoCompletionWithinBound(f"no completion of order <= {max_order}")
