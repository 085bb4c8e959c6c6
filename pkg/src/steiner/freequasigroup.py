"""Normal forms in the Steiner quasigroup freely generated by a partial STS.

Terms are hash-consed: structurally equal normal forms are the same object,
so ``is`` and ``==`` coincide and hashing is by identity.  Every node
``node(u, v)`` stored here is irreducible: u != v, neither child absorbs the
other, base-defined pairs of leaves are collapsed, and u precedes v in the
fixed order (rank, then structural lexicographic).
"""

from __future__ import annotations

import threading
from collections.abc import Callable, Iterable, Mapping, Sequence

from .core import POINT_TOKEN, PartialSTS, validate
from .errors import InvalidSystem, NotAHomomorphism, TermSyntaxError, UnknownPoint

Raw = "str | tuple"  # raw term tree: a leaf name or a pair (left, right)


class Term:
    __slots__ = ("name", "left", "right", "rank", "key", "_text", "__weakref__")

    _leaves: dict[str, Term] = {}
    _nodes: dict[tuple[Term, Term], Term] = {}
    _lock = threading.Lock()

    def __init__(self, name, left, right, rank, key):
        self.name = name
        self.left = left
        self.right = right
        self.rank = rank
        self.key = key
        self._text = None

    @classmethod
    def leaf(cls, name: str) -> Term:
        t = cls._leaves.get(name)
        if t is None:
            with cls._lock:
                t = cls._leaves.setdefault(name, Term(name, None, None, 1, (1, name)))
        return t

    @classmethod
    def node(cls, u: Term, v: Term) -> Term:
        if v.key < u.key:
            u, v = v, u
        t = cls._nodes.get((u, v))
        if t is None:
            r = u.rank + v.rank
            with cls._lock:
                t = cls._nodes.setdefault((u, v), Term(None, u, v, r, (r, u.key, v.key)))
        return t

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def __lt__(self, other: Term) -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        if self._text is None:
            self._text = self.name if self.left is None else f"({self.left}.{self.right})"
        return self._text

    def __repr__(self) -> str:
        return f"Term({self})"

    def raw(self):
        return self.name if self.left is None else (self.left.raw(), self.right.raw())

    def leaves(self) -> set[str]:
        out: set[str] = set()
        stack = [self]
        while stack:
            t = stack.pop()
            if t.left is None:
                out.add(t.name)
            else:
                stack.append(t.left)
                stack.append(t.right)
        return out


def rank(t: Term) -> int:
    return t.rank


def subterms(terms: Iterable[Term]) -> set[Term]:
    out: set[Term] = set()
    stack = list(terms)
    while stack:
        t = stack.pop()
        if t in out:
            continue
        out.add(t)
        if t.left is not None:
            stack.append(t.left)
            stack.append(t.right)
    return out


# -- parsing -------------------------------------------------------------


def _parse_term_at(text: str, i: int):
    n = len(text)
    while i < n and text[i].isspace():
        i += 1
    if i >= n:
        raise TermSyntaxError(text, i, "unexpected end of input")
    if text[i] == "(":
        left, i = _parse_term_at(text, i + 1)
        while i < n and text[i].isspace():
            i += 1
        if i >= n or text[i] != ".":
            raise TermSyntaxError(text, i, "expected '.'")
        right, i = _parse_term_at(text, i + 1)
        while i < n and text[i].isspace():
            i += 1
        if i >= n or text[i] != ")":
            raise TermSyntaxError(text, i, "expected ')'")
        return (left, right), i + 1
    m = POINT_TOKEN.match(text, i)
    if not m:
        raise TermSyntaxError(text, i, "expected a point name or '('")
    return m.group(0), m.end()


def parse_term(text: str, base: PartialSTS | Iterable[str] | None = None):
    """Parse ``term := IDENT | "(" term "." term ")"`` into a raw tree."""
    tree, i = _parse_term_at(text, 0)
    while i < len(text) and text[i].isspace():
        i += 1
    if i != len(text):
        raise TermSyntaxError(text, i, "trailing input")
    if base is not None:
        known = base.point_set if isinstance(base, PartialSTS) else set(base)
        for name in raw_leaves(tree):
            if name not in known:
                raise UnknownPoint(name, "term")
    return tree


def raw_leaves(tree) -> set[str]:
    if isinstance(tree, Term):
        return tree.leaves()
    if isinstance(tree, str):
        return {tree}
    return raw_leaves(tree[0]) | raw_leaves(tree[1])


def raw_rank(tree) -> int:
    if isinstance(tree, Term):
        return tree.rank
    if isinstance(tree, str):
        return 1
    return raw_rank(tree[0]) + raw_rank(tree[1])


def format_raw(tree) -> str:
    if isinstance(tree, (str, Term)):
        return str(tree)
    return f"({format_raw(tree[0])}.{format_raw(tree[1])})"


# -- the free universe -----------------------------------------------------


class FreeUniverse:
    """The free Steiner quasigroup over ``base`` with a memoized product."""

    def __init__(self, base: PartialSTS):
        self.base = base
        self._memo: dict[tuple[Term, Term], Term] = {}
        self._lock = threading.Lock()
        self.origin: dict[str, Term] = {}  # alias name -> Term of a parent universe

    def __repr__(self) -> str:
        return f"FreeUniverse({self.base!r})"

    def leaf(self, name: str) -> Term:
        if name not in self.base.point_set:
            raise UnknownPoint(name, "universe base")
        return Term.leaf(name)

    def points(self) -> list[Term]:
        return [Term.leaf(p) for p in self.base.points]

    def contains(self, t: Term) -> bool:
        return t.leaves() <= self.base.point_set

    def mul(self, u: Term, v: Term) -> Term:
        if u is v:
            return u
        key = (u, v) if id(u) < id(v) else (v, u)
        r = self._memo.get(key)
        if r is not None:
            return r
        r = self._mul(u, v)
        with self._lock:
            self._memo[key] = r
        return r

    def _mul(self, u: Term, v: Term) -> Term:
        if v.left is not None:
            if v.left is u:
                return v.right
            if v.right is u:
                return v.left
        if u.left is not None:
            if u.left is v:
                return u.right
            if u.right is v:
                return u.left
        if u.left is None and v.left is None:
            p = self.base.partners(u.name).get(v.name)
            if p is not None:
                return Term.leaf(p)
        return Term.node(u, v)

    def normalize(self, tree) -> Term:
        if isinstance(tree, Term):
            return tree
        if isinstance(tree, str):
            return self.leaf(tree)
        return self.mul(self.normalize(tree[0]), self.normalize(tree[1]))

    def evaluate(self, tree, env: Mapping[str, Term]) -> Term:
        """Normalize a raw tree whose leaves are looked up in env, then in the base."""
        if isinstance(tree, Term):
            return tree
        if isinstance(tree, str):
            t = env.get(tree)
            return t if t is not None else self.leaf(tree)
        return self.mul(self.evaluate(tree[0], env), self.evaluate(tree[1], env))

    def parse(self, text: str) -> Term:
        return self.normalize(parse_term(text, self.base))

    # -- extension by new points and blocks --------------------------------

    def extend(
        self,
        points: Iterable[str] = (),
        blocks: Iterable[Iterable[object]] = (),
        alias_prefix: str = "t_",
    ) -> tuple[FreeUniverse, Callable[[object], Term]]:
        """Universe over base + new points, with blocks that may mention old Terms.

        Every old non-leaf Term used in a block (together with its subterms)
        becomes a named base point carrying its defining block, so the old
        universe embeds in the new one.  A block may meet the old universe in
        at most one element unless all three members are old and already
        form a block.  Returns (new universe, embedding).  The embedding
        accepts old Terms and new point names.
        """
        points = list(points)
        fresh = set(points)
        taken = set(self.base.points) | fresh
        clash = fresh & set(self.base.points)
        if clash:
            raise InvalidSystem(f"new points already in the universe: {sorted(clash)}")
        blocks = [list(b) for b in blocks]
        used: list[Term] = []
        for b in blocks:
            if len(b) != 3:
                raise InvalidSystem(f"block {b} does not have 3 members")
            old = [x for x in b if isinstance(x, Term)]
            for x in b:
                if not isinstance(x, Term) and x not in fresh:
                    raise UnknownPoint(x, "extension block")
            for t in old:
                if not self.contains(t):
                    raise UnknownPoint(str(t), "extension block")
            if len(old) == 2:
                raise InvalidSystem(f"block {[str(x) for x in b]} defines a product of two old elements")
            if len(old) == 3:
                if self.mul(old[0], old[1]) is not old[2] or len(set(old)) != 3:
                    raise InvalidSystem(f"block {[str(x) for x in b]} is not a block of the universe")
            used.extend(t for t in old if t.left is not None)
        names: dict[Term, str] = {}
        new_pts: list[str] = []
        new_blocks: list[list[str]] = [list(b) for b in self.base.blocks]
        k = 0
        for t in sorted(subterms(used), key=lambda s: s.key):
            if t.left is None:
                names[t] = t.name
                continue
            k += 1
            nm = f"{alias_prefix}{k}"
            while nm in taken:
                k += 1
                nm = f"{alias_prefix}{k}"
            taken.add(nm)
            names[t] = nm
            new_pts.append(nm)
        for t, nm in names.items():
            if t.left is not None:
                new_blocks.append([names[t.left], names[t.right], nm])
        for b in blocks:
            if all(isinstance(x, Term) for x in b):
                continue
            new_blocks.append([names.get(x, x.name) if isinstance(x, Term) else x for x in b])
        base2 = validate(list(self.base.points) + new_pts + points, new_blocks)
        U2 = FreeUniverse(base2)
        U2.origin = dict(self.origin)
        U2.origin.update({nm: t for t, nm in names.items() if t.left is not None})
        memo: dict[Term, Term] = {}

        def embed(x) -> Term:
            if isinstance(x, str):
                return U2.leaf(x)
            r = memo.get(x)
            if r is not None:
                return r
            if x in names:
                r = Term.leaf(names[x])
            elif x.left is None:
                r = Term.leaf(x.name)
            else:
                r = U2.mul(embed(x.left), embed(x.right))
            memo[x] = r
            return r

        return U2, embed


def free_universe(points: Iterable[str]) -> FreeUniverse:
    return FreeUniverse(validate(list(points), []))


def normalize(tree, universe: FreeUniverse | PartialSTS) -> Term:
    if isinstance(universe, PartialSTS):
        universe = FreeUniverse(universe)
    return universe.normalize(tree)


def mul(u: Term, v: Term, universe: FreeUniverse) -> Term:
    return universe.mul(u, v)


# -- structural oracle -----------------------------------------------------


def is_normal(t: Term, base: PartialSTS) -> bool:
    """Check the normal-form invariants directly, without calling mul."""
    if t.left is None:
        return t.name in base.point_set
    u, v = t.left, t.right
    if u is v or not (u.key < v.key):
        return False
    if v.left is not None and (v.left is u or v.right is u):
        return False
    if u.left is not None and (u.left is v or u.right is v):
        return False
    if u.left is None and v.left is None and v.name in base.partners(u.name):
        return False
    return is_normal(u, base) and is_normal(v, base)


def enumerate_normal_forms(base: PartialSTS, max_rank: int) -> list[list[Term]]:
    """levels[r] = all normal forms of rank r over the base, built syntactically."""
    levels: list[list[Term]] = [[], [Term.leaf(p) for p in base.points]]
    for r in range(2, max_rank + 1):
        out: list[Term] = []
        for i in range(1, r // 2 + 1):
            for u in levels[i]:
                for v in levels[r - i]:
                    if u is v or not (u.key < v.key):
                        continue
                    t = Term.node(u, v)
                    if is_normal(t, base):
                        out.append(t)
        levels.append(sorted(set(out), key=lambda t: t.key))
    return levels


# -- closures --------------------------------------------------------------


def closure_levels(A: Iterable[Term], k: int, universe: FreeUniverse) -> list[dict[Term, object]]:
    """levels[r] maps each element writable by a rank-r term over A to one such raw term."""
    A = sorted(set(A), key=lambda t: t.key)
    levels: list[dict[Term, object]] = [{}, {a: a for a in A}]
    for r in range(2, k + 1):
        lvl: dict[Term, object] = {}
        for i in range(1, r):
            for u, ru in levels[i].items():
                for v, rv in levels[r - i].items():
                    w = universe.mul(u, v)
                    if w not in lvl:
                        lvl[w] = (ru, rv)
        levels.append(lvl)
    return levels


def closure_k(A: Iterable[Term], k: int, universe: FreeUniverse) -> set[Term]:
    """⟨A⟩_k: values of all terms of rank <= k over A."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out: set[Term] = set()
    for lvl in closure_levels(A, k, universe):
        out.update(lvl)
    return out


def _closed(X: set[Term], universe: FreeUniverse) -> bool:
    xs = list(X)
    for i, u in enumerate(xs):
        for v in xs[i + 1:]:
            if universe.mul(u, v) not in X:
                return False
    return True


def generated(A: Iterable[Term], budget: int, universe: FreeUniverse) -> tuple[set[Term], bool]:
    """Closure of A up to rank ``budget``; the flag is True when a subquasigroup was reached."""
    levels: list[set[Term]] = [set(), set(A)]
    X = set(levels[1])
    for r in range(2, budget + 1):
        lvl = {universe.mul(u, v) for i in range(1, r) for u in levels[i] for v in levels[r - i]}
        levels.append(lvl)
        new = lvl - X
        X |= lvl
        if not new and _closed(X, universe):
            return X, True
    return X, _closed(X, universe)


def is_freely_generated(Q: PartialSTS, A: Iterable[str]) -> bool:
    """Whether the total finite system Q is freely generated by A.

    Runs the chain A_0 = A, A_{n+1} = A_n . A_n: it must exhaust Q, every new
    element needs exactly one parent pair in A_n, and every block meeting a
    new element must be that element's parent block.
    """
    A = set(A)
    for p in A:
        if p not in Q:
            raise UnknownPoint(p)
    current = set(A)
    while True:
        parents: dict[str, list[tuple[str, str]]] = {}
        cur = sorted(current)
        for i, a in enumerate(cur):
            for b in cur[i + 1:]:
                c = Q.product(a, b)
                if c is not None and c not in current:
                    parents.setdefault(c, []).append((a, b))
        if not parents:
            break
        if any(len(ps) != 1 for ps in parents.values()):
            return False
        nxt = current | set(parents)
        for c in parents:
            a, b = parents[c][0]
            for x, y in Q.partners(c).items():
                if x in nxt and y in nxt and {x, y} != {a, b}:
                    return False
        current = nxt
    return current == Q.point_set


def extend_homomorphism(
    f: Mapping[str, str], baseS: PartialSTS, C: PartialSTS, targets: Iterable[Term]
) -> dict[Term, str]:
    """Unique extension of a homomorphism baseS -> C to the requested Terms."""
    for p in baseS.points:
        if p not in f:
            raise UnknownPoint(p, "homomorphism domain")
        if f[p] not in C:
            raise UnknownPoint(f[p], "homomorphism target")
    for a, b, c in baseS.blocks:
        if C.product(f[a], f[b]) != f[c]:
            raise NotAHomomorphism((a, b, c))
    memo: dict[Term, str] = {}

    def image(t: Term) -> str:
        r = memo.get(t)
        if r is None:
            if t.left is None:
                if t.name not in f:
                    raise UnknownPoint(t.name, "homomorphism domain")
                r = f[t.name]
            else:
                r = C.product(image(t.left), image(t.right))
                if r is None:
                    raise InvalidSystem("target system is not total on the image")
            memo[t] = r
        return r

    return {t: image(t) for t in targets}


# -- exact structure of generated subquasigroups ----------------------------


class Generated:
    """⟨X⟩ in a free universe, decided exactly.

    ``zone`` is the subterm closure of X plus the base closure of its
    leaves; ``core`` = ⟨X⟩ ∩ zone is finite and ⟨X⟩ is built from it by free
    products only, so membership reduces to recursion on children outside
    the zone.
    """

    def __init__(self, universe: FreeUniverse, X: Iterable[Term]):
        self.universe = universe
        self.gens = frozenset(X)
        sub = subterms(self.gens)
        leaves = {t.name for t in sub if t.left is None}
        closed = universe.base.closure(leaves)
        self.zone = frozenset(sub | {Term.leaf(p) for p in closed})
        self.core, self.parents = self._core()
        self._memo: dict[Term, bool] = {}

    def _core(self) -> tuple[frozenset[Term], dict[Term, tuple[Term, Term]]]:
        U, zone = self.universe, self.zone
        have = list(self.gens)
        seen = set(have)
        parents: dict[Term, tuple[Term, Term]] = {}
        i = 0
        while i < len(have):
            x = have[i]
            for y in have[: i + 1]:
                z = U.mul(x, y)
                if z in zone and z not in seen:
                    seen.add(z)
                    have.append(z)
                    parents[z] = (y, x)
            i += 1
        return frozenset(have), parents

    def __contains__(self, t: Term) -> bool:
        r = self._memo.get(t)
        if r is None:
            if t in self.zone:
                r = t in self.core
            elif t.left is None:
                r = False
            else:
                r = t.left in self and t.right in self
            self._memo[t] = r
        return r

    def size(self) -> int | None:
        """|⟨X⟩|, or None when infinite.

        A closed core is all of ⟨X⟩.  Otherwise some pair has a free product
        w; two core points u, v close up as {u, v, u·v}, while any third point
        z gives z·w free again, and so on forever.
        """
        if _closed(set(self.core), self.universe):
            return len(self.core)
        return 3 if len(self.core) == 2 else None

    def is_finite(self) -> bool:
        return self.size() is not None

    def core_blocks(self) -> list[tuple[Term, Term, Term]]:
        U = self.universe
        core = sorted(self.core, key=lambda t: t.key)
        out = []
        for i, x in enumerate(core):
            for j in range(i + 1, len(core)):
                y = core[j]
                z = U.mul(x, y)
                if z in self.core and y.key < z.key:
                    out.append((x, y, z))
        return out


def presentation(universe: FreeUniverse, terms: Iterable[Term], blocks: Iterable[tuple] | None = None):
    """A PartialSTS naming the given Terms, with the universe's blocks among them.

    Returns (system, name_of, term_of).  ``blocks`` restricts which blocks
    are kept (default: every block of the universe inside the set).
    """
    terms = sorted(set(terms), key=lambda t: t.key)
    taken = {t.name for t in terms if t.left is None}
    name_of: dict[Term, str] = {}
    k = 0
    for t in terms:
        if t.left is None:
            name_of[t] = t.name
        else:
            k += 1
            while f"t_{k}" in taken:
                k += 1
            name_of[t] = f"t_{k}"
            taken.add(name_of[t])
    if blocks is None:
        tset = set(terms)
        blocks = []
        for i, x in enumerate(terms):
            for y in terms[i + 1:]:
                z = universe.mul(x, y)
                if z in tset and y.key < z.key:
                    blocks.append((x, y, z))
    S = validate(list(name_of.values()), [[name_of[x] for x in b] for b in blocks])
    return S, name_of, {v: k for k, v in name_of.items()}


def intersection_generators(g1: Generated, g2: Generated) -> set[Term]:
    """A generating set for ⟨X⟩ ∩ ⟨Y⟩.

    An element of both closures outside both zones has both children in
    both closures, so the intersection is generated by its core elements.
    """
    return {t for t in g1.core | g2.core if t in g1 and t in g2}


def same_closure(g1: Generated, g2: Generated) -> bool:
    return all(t in g2 for t in g1.gens) and all(t in g1 for t in g2.gens)


def down_close(g: Generated, S: Iterable[Term]) -> set[Term]:
    """Add the children of every element of S lying outside the zone of g."""
    out = set(S)
    stack = list(out)
    while stack:
        t = stack.pop()
        if t in g.zone or t.left is None:
            continue
        for c in (t.left, t.right):
            if c not in out:
                out.add(c)
                stack.append(c)
    return out


def union_presentation(universe: FreeUniverse, parts: list[Generated]) -> tuple[set[Term], list[tuple[Term, Term, Term]]]:
    """Finite generators and blocks presenting the union of the closures as a partial system.

    Each closure is free over any subset that contains its core and is
    closed under taking children outside its zone; the set returned has
    that property for every part simultaneously.
    """
    W: set[Term] = set()
    for g in parts:
        W |= g.core
    while True:
        nxt = set(W)
        for g in parts:
            nxt |= down_close(g, [t for t in W if t in g])
        if nxt == W:
            break
        W = nxt
    terms = sorted(W, key=lambda t: t.key)
    blocks = []
    for i, x in enumerate(terms):
        for y in terms[i + 1:]:
            z = universe.mul(x, y)
            if z in W and y.key < z.key and any(x in g and y in g for g in parts):
                blocks.append((x, y, z))
    return W, blocks


def freely_generates(universe: FreeUniverse, parts: list[Generated]) -> tuple[bool, object]:
    """Whether ⟨∪ parts⟩ is freely generated by the partial system ∪ parts.

    Returns (verdict, witness); the witness is a block of the ambient
    universe that the free completion does not have.
    """
    W0, present_blocks = union_presentation(universe, parts)
    P1, name_of, _ = presentation(universe, W0, present_blocks)
    F = FreeUniverse(P1)
    whole = Generated(universe, W0)
    theta: dict[Term, Term] = {t: Term.leaf(name_of[t]) for t in W0}
    # Discovery order in whole.core extends W0 by parent pairs.
    for t in _discovery_order(whole):
        if t in theta:
            continue
        a, b = whole.parents[t]
        theta[t] = F.mul(theta[a], theta[b])
    for x, y, z in whole.core_blocks():
        if F.mul(theta[x], theta[y]) is not theta[z]:
            return False, (x, y, z)
    return True, None


class Transport:
    """The homomorphism ⟨gens⟩ -> target determined by images of the generators.

    Values are computed along discovery parents inside the core and along
    children outside the zone; ``check`` verifies every core block.
    """

    def __init__(self, g: Generated, images: Mapping[Term, Term], target: FreeUniverse):
        self.g = g
        self.target = target
        self.memo: dict[Term, Term] = dict(images)
        missing = [t for t in g.gens if t not in self.memo]
        if missing:
            raise UnknownPoint(str(missing[0]), "generator map")

    def __call__(self, t: Term) -> Term:
        r = self.memo.get(t)
        if r is not None:
            return r
        stack = [t]
        while stack:
            s = stack[-1]
            if s in self.memo:
                stack.pop()
                continue
            if s in self.g.parents:
                a, b = self.g.parents[s]
            elif s.left is not None and s not in self.g.zone:
                a, b = s.left, s.right
            else:
                raise InvalidSystem(f"{s} is not in the generated subquasigroup")
            pend = [c for c in (a, b) if c not in self.memo]
            if pend:
                stack.extend(pend)
                continue
            self.memo[s] = self.target.mul(self.memo[a], self.memo[b])
            stack.pop()
        return self.memo[t]

    def check(self) -> tuple[Term, Term, Term] | None:
        """First core block not preserved, or None for a homomorphism."""
        for x, y, z in self.g.core_blocks():
            if self.target.mul(self(x), self(y)) is not self(z):
                return (x, y, z)
        return None


def isomorphic_closures(U1: FreeUniverse, tup1: Sequence[Term], U2: FreeUniverse, tup2: Sequence[Term]) -> bool:
    """Whether tup1[i] -> tup2[i] extends to an isomorphism ⟨tup1⟩ -> ⟨tup2⟩.

    Exact: homomorphisms in both directions fixing the generators compose
    to the identity.
    """
    if len(tup1) != len(tup2):
        return False
    fwd: dict[Term, Term] = {}
    bwd: dict[Term, Term] = {}
    for x, y in zip(tup1, tup2):
        if fwd.setdefault(x, y) is not y or bwd.setdefault(y, x) is not x:
            return False
    f = Transport(Generated(U1, fwd), fwd, U2)
    b = Transport(Generated(U2, bwd), bwd, U1)
    return f.check() is None and b.check() is None


def _discovery_order(g: Generated) -> list[Term]:
    order: list[Term] = []
    done: set[Term] = set()

    def visit(t: Term) -> None:
        if t in done:
            return
        if t in g.parents:
            a, b = g.parents[t]
            visit(a)
            visit(b)
        done.add(t)
        order.append(t)

    for t in sorted(g.core, key=lambda s: s.key):
        visit(t)
    return order
