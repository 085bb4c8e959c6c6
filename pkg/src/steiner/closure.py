"""Rank bounds, algebraic closure and quantifier-free satisfiability.

Formulas are conjunctions of term equalities and inequalities.  Leaves of
their term trees are variables or constants (base points of a universe, or
names bound to Terms through an environment).
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from .errors import HypothesisViolated, Overflow, SizeBudgetExceeded, TermSyntaxError, VerificationFailed
from .freequasigroup import (
    FreeUniverse,
    Generated,
    Term,
    _parse_term_at,
    closure_k,
    closure_levels,
    format_raw,
    free_universe,
    generated,
    raw_leaves,
    raw_rank,
)


@dataclass(frozen=True)
class Literal:
    left: object
    right: object
    eq: bool = True

    def __str__(self) -> str:
        return f"{format_raw(self.left)} {'=' if self.eq else '!='} {format_raw(self.right)}"


@dataclass(frozen=True)
class Formula:
    variables: tuple[str, ...]
    literals: tuple[Literal, ...]
    existential: tuple[str, ...] = field(default=())

    def __str__(self) -> str:
        body = " & ".join(str(l) for l in self.literals) or "true"
        if self.existential:
            return f"exists {','.join(self.existential)}: {body}"
        return body

    def leaves(self) -> set[str]:
        out: set[str] = set()
        for lit in self.literals:
            out |= raw_leaves(lit.left) | raw_leaves(lit.right)
        return out

    def max_rank(self) -> int:
        return max((max(raw_rank(l.left), raw_rank(l.right)) for l in self.literals), default=1)

    def holds(self, universe: FreeUniverse, env: Mapping[str, Term]) -> bool:
        for lit in self.literals:
            same = universe.evaluate(lit.left, env) is universe.evaluate(lit.right, env)
            if same != lit.eq:
                return False
        return True


def parse_formula(text: str, variables: Iterable[str] | None = None, constants: Iterable[str] | None = None) -> Formula:
    """Parse ``lit ("&" lit)*`` with ``lit := term "=" term | term "!=" term``.

    Variables are the given names, or every leaf that is not a constant.
    """
    lits: list[Literal] = []
    text = text.strip()
    if text and text != "true":
        pos = 0
        for chunk in text.split("&"):
            lits.append(_parse_literal(chunk, text, pos))
            pos += len(chunk) + 1
    leaves: list[str] = []
    for lit in lits:
        for name in _ordered_leaves(lit.left) + _ordered_leaves(lit.right):
            if name not in leaves:
                leaves.append(name)
    if variables is not None:
        vs = tuple(variables)
    elif constants is not None:
        cs = set(constants)
        vs = tuple(x for x in leaves if x not in cs)
    else:
        vs = tuple(leaves)
    return Formula(vs, tuple(lits))


def _ordered_leaves(tree) -> list[str]:
    if isinstance(tree, str):
        return [tree]
    if isinstance(tree, Term):
        return sorted(tree.leaves())
    return _ordered_leaves(tree[0]) + _ordered_leaves(tree[1])


def _parse_literal(chunk: str, text: str, offset: int) -> Literal:
    for op, eq in (("!=", False), ("=", True)):
        i = chunk.find(op)
        if i >= 0:
            lhs, rhs = chunk[:i], chunk[i + len(op):]
            return Literal(_parse_side(lhs, text, offset), _parse_side(rhs, text, offset + i + len(op)), eq)
    raise TermSyntaxError(text, offset, "expected '=' or '!='")


def _parse_side(s: str, text: str, offset: int):
    try:
        tree, i = _parse_term_at(s, 0)
    except TermSyntaxError as exc:
        raise TermSyntaxError(text, offset + exc.position, str(exc).split(" at position")[0]) from None
    if s[i:].strip():
        raise TermSyntaxError(text, offset + i, "trailing input")
    return tree


# -- counting and rank bounds -------------------------------------------------


def count_terms(num_vars: int, max_rank: int, limit: int | None = None) -> int:
    """Syntactic terms over num_vars variables with rank <= max_rank."""
    if num_vars < 1 or max_rank < 1:
        raise ValueError("num_vars and max_rank must be >= 1")
    T = [0, num_vars]
    for r in range(2, max_rank + 1):
        T.append(sum(T[i] * T[r - i] for i in range(1, r)))
        if limit is not None and sum(T) > limit:
            raise Overflow(f"term count exceeds {limit}")
    total = sum(T)
    if limit is not None and total > limit:
        raise Overflow(f"term count exceeds {limit}")
    return total


def rank_bound_k(n: int, m: int, max_exponent: int = 1_000_000) -> int:
    """k = 2^k0 * m with k0 one more than the number of terms in n+1 variables of rank <= m."""
    if n < 0 or m < 1:
        raise ValueError("need n >= 0 and m >= 1")
    k0 = count_terms(n + 1, m, limit=max_exponent) + 1
    if k0 > max_exponent:
        raise Overflow(f"exponent {k0} exceeds {max_exponent}")
    return (1 << k0) * m


def psi_k(target_var: str, param_vars: Iterable[str], k: int, max_literals: int = 10_000) -> Formula:
    """Conjunction of x != t over terms t of rank <= k in the parameters, one per normal form."""
    if k < 1:
        raise ValueError("k must be >= 1")
    params = list(param_vars)
    U = free_universe(params)
    seen: dict[Term, object] = {}
    levels: list[dict[Term, object]] = [{}, {Term.leaf(p): p for p in params}]
    seen.update(levels[1])
    for r in range(2, k + 1):
        lvl: dict[Term, object] = {}
        for i in range(1, r):
            for u, ru in levels[i].items():
                for v, rv in levels[r - i].items():
                    w = U.mul(u, v)
                    if w not in lvl:
                        lvl[w] = (ru, rv)
        levels.append(lvl)
        grew = False
        for t, raw in lvl.items():
            if t not in seen:
                seen[t] = raw
                grew = True
        if len(seen) > max_literals:
            raise SizeBudgetExceeded(f"psi_{k} needs more than {max_literals} literals")
        if not grew and _closed(seen, U):
            break
    lits = tuple(Literal(target_var, seen[t], False) for t in sorted(seen, key=lambda t: t.key))
    return Formula((target_var, *params), lits)


def _closed(X, U: FreeUniverse) -> bool:
    xs = list(X)
    return all(U.mul(u, v) in X for i, u in enumerate(xs) for v in xs[i + 1:])


def acl(A: Iterable[Term], universe: FreeUniverse, budget: int = 8) -> tuple[set[Term], bool]:
    return generated(A, budget, universe)


# -- satisfiability -----------------------------------------------------------


@dataclass
class SatResult:
    status: str  # "sat", "unsat" or "unknown"
    witness: dict[str, Term] | None = None
    universe: FreeUniverse | None = None  # universe the witness lives in
    reason: str = ""

    def __bool__(self) -> bool:
        return self.status == "sat"


def _occurrences(t: Term, x: Term) -> int:
    if t is x:
        return 1
    if t.left is None:
        return 0
    return _occurrences(t.left, x) + _occurrences(t.right, x)


def _substitute(U: FreeUniverse, t: Term, sub: Mapping[Term, Term]) -> Term:
    memo: dict[Term, Term] = {}

    def go(s: Term) -> Term:
        r = memo.get(s)
        if r is None:
            if s in sub:
                r = sub[s]
            elif s.left is None:
                r = s
            else:
                r = U.mul(go(s.left), go(s.right))
            memo[s] = r
        return r

    return go(t)


def _peel(U: FreeUniverse, s: Term, t: Term, x: Term) -> Term | None:
    """Solve s = t for x when x occurs exactly once in s and not in t."""
    while s is not x:
        if s.left is None:
            return None
        if _occurrences(s.left, x):
            u, w = s.right, s.left
        else:
            u, w = s.left, s.right
        # u.w = t  iff  w = u.t
        s, t = w, U.mul(u, t)
    return t


class _System:
    """Literals over a symbolic universe where the unknowns are fresh generators."""

    def __init__(self, phi: Formula, universe: FreeUniverse, env: Mapping[str, Term]):
        self.base_universe = universe
        unknown = [v for v in phi.variables if v not in env]
        taken = set(universe.base.points)
        self.names: dict[str, str] = {}
        for v in unknown:
            nm, k = f"{v}~v", 0
            while nm in taken:
                k += 1
                nm = f"{v}~v{k}"
            taken.add(nm)
            self.names[v] = nm
        U2, embed = universe.extend(list(self.names.values()))
        self.U = U2
        self.embed = embed
        self.vars = {v: U2.leaf(nm) for v, nm in self.names.items()}
        env2 = {k: embed(t) for k, t in env.items()}
        env2.update(self.vars)
        for name in phi.leaves():
            if name not in env2 and name not in universe.base.point_set:
                raise HypothesisViolated(f"unknown name {name!r} in formula")
        self.env = env2
        self.lits = [(U2.evaluate(l.left, env2), U2.evaluate(l.right, env2), l.eq) for l in phi.literals]


def _var_set(t: Term, vars_: set[Term]) -> set[Term]:
    return {Term.leaf(n) for n in t.leaves()} & vars_


def _simplify(U: FreeUniverse, lits: list, var_terms: set[Term]):
    """Drop identities, solve linear occurrences by cancellation.

    Returns (None, solved, remaining) or (reason, None, None) when the
    literals are contradictory in every Steiner quasigroup.
    """
    solved: dict[Term, Term] = {}
    while True:
        out = []
        hit = None
        for s, t, eq in lits:
            if s is t:
                if not eq:
                    return f"literal {s} != {t} is identically false", None, None
                continue
            vs = _var_set(s, var_terms) | _var_set(t, var_terms)
            if not vs:
                if eq:
                    return f"distinct normal forms {s} and {t} cannot be equal", None, None
                continue
            if eq and hit is None:
                for x in sorted(vs, key=lambda v: v.key):
                    cs, ct = _occurrences(s, x), _occurrences(t, x)
                    if cs + ct != 1:
                        continue
                    val = _peel(U, s, t, x) if cs else _peel(U, t, s, x)
                    if val is not None:
                        hit = (x, val)
                        break
                if hit is not None:
                    continue
            out.append((s, t, eq))
        if hit is None:
            return None, solved, out
        x, val = hit
        sub = {x: val}
        solved = {y: _substitute(U, v, sub) for y, v in solved.items()}
        solved[x] = val
        lits = [(_substitute(U, a, sub), _substitute(U, b, sub), e) for a, b, e in out]


def _diagram_witness(phi: Formula, universe: FreeUniverse, env: Mapping[str, Term]):
    """Realize a diagram-shaped formula (products of names only) by extension."""
    unknown = [v for v in phi.variables if v not in env]
    taken = set(universe.base.points)
    names: dict[str, str] = {}
    for v in unknown:
        nm, k = f"{v}~w", 0
        while nm in taken:
            k += 1
            nm = f"{v}~w{k}"
        taken.add(nm)
        names[v] = nm

    def member(leaf: str):
        if leaf in names:
            return names[leaf]
        if leaf in env:
            return env[leaf]
        return universe.leaf(leaf)

    blocks = []
    for lit in phi.literals:
        if not lit.eq:
            continue
        sides = (lit.left, lit.right)
        prod = [x for x in sides if isinstance(x, tuple) and all(isinstance(y, str) for y in x)]
        single = [x for x in sides if isinstance(x, str)]
        if len(prod) != 1 or len(single) != 1:
            return None
        a, b = prod[0]
        c = single[0]
        if len({a, b, c}) != 3:
            return None
        blocks.append([member(a), member(b), member(c)])
    try:
        U2, embed = universe.extend(list(names.values()), blocks, alias_prefix="w_")
    except Exception:
        return None
    wit = {v: U2.leaf(nm) for v, nm in names.items()}
    env2 = {k: embed(t) for k, t in env.items()}
    env2.update(wit)
    if phi.holds(U2, env2):
        return U2, wit
    return None


def qf_satisfiable(
    phi: Formula,
    universe: FreeUniverse,
    depth: int = 2,
    env: Mapping[str, Term] | None = None,
    max_assignments: int = 100_000,
) -> SatResult:
    """Search for an assignment of phi's unbound variables.

    Unbound variables are treated as fresh free generators.  "unsat" is
    only reported when the literals are contradictory in every Steiner
    quasigroup (identically false literals, or a contradiction forced by
    cancellation); exhausting the search reports "unknown".
    """
    env = dict(env or {})
    sys_ = _System(phi, universe, env)
    U = sys_.U
    var_terms = set(sys_.vars.values())
    reason, solved, rest = _simplify(U, sys_.lits, var_terms)
    if reason is not None:
        return SatResult("unsat", reason=reason)

    def finish(assign: dict[Term, Term], how: str) -> SatResult | None:
        wit = {}
        for v, x in sys_.vars.items():
            val = assign.get(x, x)
            wit[v] = _substitute(U, solved.get(x, val), assign) if x in solved else val
        env2 = dict(sys_.env)
        env2.update(wit)
        if not phi.holds(U, env2):
            return None
        return SatResult("sat", wit, U, how)

    if not any(eq for _, _, eq in rest):
        res = finish({}, "generic assignment by fresh generators")
        if res is None:
            raise VerificationFailed("qf_satisfiable", "generic assignment failed")
        return res
    diag = _diagram_witness(phi, universe, env)
    if diag is not None:
        return SatResult("sat", diag[1], diag[0], "diagram realized by extension")
    free_vars = sorted(var_terms - set(solved), key=lambda v: v.key)
    consts = {U.leaf(n) for n in phi.leaves() if n in universe.base.point_set}
    consts |= {sys_.env[n] for n in phi.leaves() if n in env}
    pool = sorted(closure_k(consts | set(free_vars), depth, U), key=lambda t: t.key)
    tried = 0
    for combo in itertools.product(pool, repeat=len(free_vars)):
        tried += 1
        if tried > max_assignments:
            break
        assign = dict(zip(free_vars, combo))
        ok = all(
            (_substitute(U, s, assign) is _substitute(U, t, assign)) == eq for s, t, eq in rest
        )
        if ok:
            res = finish(assign, "bounded search")
            if res is not None:
                return res
    return SatResult("unknown", reason=f"no witness among {min(tried, max_assignments)} assignments at depth {depth}")


# -- the infinity quantifier -------------------------------------------------


@dataclass
class OrbitResult:
    verdict: str  # "infinite", "finite" or "unknown"
    witness: Term | None = None
    universe: FreeUniverse | None = None
    k: int | None = None
    certified: bool = False
    reason: str = ""


def _params(phi: Formula, var: str, universe: FreeUniverse, env: Mapping[str, Term]) -> list[Term]:
    out = []
    for name in sorted(phi.leaves() - {var}):
        if name in env:
            out.append(env[name])
        elif name in universe.base.point_set:
            out.append(universe.leaf(name))
        else:
            raise HypothesisViolated(f"{name!r} is neither the variable, a constant nor bound")
    return out


def has_infinite_orbit(
    phi: Formula,
    var: str,
    universe: FreeUniverse,
    env: Mapping[str, Term] | None = None,
    depth: int = 2,
    manual_k: int | None = None,
) -> OrbitResult:
    """Decide whether phi(x, a) has infinitely many solutions x.

    "finite" comes from a contradiction or a value forced by cancellation.
    "infinite" needs a solution outside ⟨a⟩_k for the certified k; any
    solution outside ⟨a⟩ qualifies, and membership in ⟨a⟩ is exact.  With
    ``manual_k`` the test uses ⟨a⟩_manual_k and is flagged non-certifying.
    """
    env = dict(env or {})
    phi = Formula((var,), phi.literals, phi.existential)
    params = _params(phi, var, universe, env)
    m = phi.max_rank()
    try:
        k = manual_k if manual_k is not None else rank_bound_k(len(params), m)
    except Overflow:
        k = None
    certified = manual_k is None
    sys_ = _System(phi, universe, env)
    U = sys_.U
    x = sys_.vars[var]
    reason, solved, rest = _simplify(U, sys_.lits, {x})
    if reason is not None:
        return OrbitResult("finite", None, None, k, True, f"no solutions: {reason}")
    if x in solved:
        return OrbitResult("finite", solved[x], U, k, True, "unique solution forced by cancellation")
    ps = [sys_.embed(p) for p in params]
    if manual_k is None:
        inside = Generated(U, ps).__contains__
    else:
        small = closure_k(ps, manual_k, U) if ps else set()
        inside = small.__contains__
    env2 = dict(sys_.env)
    pool = [x] + sorted(closure_k(set(ps) | {x}, depth, U) - {x}, key=lambda t: t.key)
    found_inside = None
    for cand in pool:
        env2[var] = cand
        if phi.holds(U, env2):
            if not inside(cand):
                how = "fresh generator" if cand is x else f"solution {cand} outside the closure"
                return OrbitResult("infinite", cand, U, k, certified, how)
            found_inside = found_inside or cand
    note = f"solutions found only inside the closure (e.g. {found_inside})" if found_inside else "no solution found"
    return OrbitResult("unknown", found_inside, U, k, False, f"{note} at depth {depth}")


def distinct_realizations(
    phi: Formula,
    var: str,
    witness: Term,
    universe: FreeUniverse,
    r: int,
    env: Mapping[str, Term] | None = None,
) -> tuple[FreeUniverse, list[Term]]:
    """r distinct solutions built from one solution outside ⟨params⟩.

    D = ⟨witness, params⟩_m; X grows from ⟨params⟩_m by products landing in
    D; the part D minus X is copied r times over X and glued onto the
    universe.  The images of the witness are the new solutions.
    """
    env = dict(env or {})
    params = _params(phi, var, universe, env)
    m = phi.max_rank()
    env_w = dict(env)
    env_w[var] = witness
    if not phi.holds(universe, env_w):
        raise HypothesisViolated("witness does not satisfy the formula")
    D = closure_k(set(params) | {witness}, m, universe)
    X = closure_k(params, m, universe) if params else set()
    while True:
        xs = sorted(X, key=lambda t: t.key)
        new = {universe.mul(b, c) for i, b in enumerate(xs) for c in xs[i + 1:]} & D
        if new <= X:
            break
        X |= new
    if witness in X:
        raise HypothesisViolated("witness lies in the parameter closure")
    rest = sorted(D - X, key=lambda t: t.key)
    Dl = sorted(D, key=lambda t: t.key)
    blocks_D = []
    for i, b in enumerate(Dl):
        for c in Dl[i + 1:]:
            d = universe.mul(b, c)
            if d in D and c.key < d.key:
                blocks_D.append((b, c, d))
    taken = set(universe.base.points)
    points: list[str] = []
    blocks: list[list[object]] = []
    copies: list[dict[Term, object]] = []
    for j in range(1, r + 1):
        f: dict[Term, object] = {t: t for t in X}
        for i, t in enumerate(rest):
            nm, k = f"r{j}_{i}", 0
            while nm in taken:
                k += 1
                nm = f"r{j}_{i}~{k}"
            taken.add(nm)
            points.append(nm)
            f[t] = nm
        for b, c, d in blocks_D:
            if b in X and c in X and d in X:
                continue
            blocks.append([f[b], f[c], f[d]])
        copies.append(f)
    U2, embed = universe.extend(points, blocks, alias_prefix="q_")
    env2 = {k: embed(t) for k, t in env.items()}
    sols = []
    for f in copies:
        b = U2.leaf(f[witness])
        env2[var] = b
        if not phi.holds(U2, env2):
            raise VerificationFailed("distinct_realizations", f"copy {b} does not satisfy the formula")
        sols.append(b)
    return U2, sols
