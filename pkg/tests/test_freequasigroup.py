from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import FROZEN, canon, random_raw_term, random_rewrite
from steiner.core import validate
from steiner.errors import NotAHomomorphism, TermSyntaxError, UnknownPoint
from steiner.freequasigroup import (
    FreeUniverse,
    Generated,
    Term,
    closure_k,
    enumerate_normal_forms,
    extend_homomorphism,
    free_universe,
    generated,
    is_freely_generated,
    is_normal,
    parse_term,
    rank,
)


def oracle_string(t: Term) -> str:
    """The library's term rewritten into the oracle's commutative canonical string."""
    return canon(t.raw())


def all_raw_terms(leaves, max_rank):
    levels = [[], list(leaves)]
    for r in range(2, max_rank + 1):
        levels.append([(u, v) for i in range(1, r) for u in levels[i] for v in levels[r - i]])
    return [t for lvl in levels for t in lvl]


# -- parsing and normalization -------------------------------------------------------


def test_parse_examples():
    assert parse_term("a") == "a"
    assert parse_term("(a.(a.b))") == ("a", ("a", "b"))
    with pytest.raises(TermSyntaxError):
        parse_term("(a.b")
    with pytest.raises(UnknownPoint):
        parse_term("(a.z)", validate("ab", []))


def test_normalize_examples():
    U = free_universe("ab")
    assert U.parse("(a.a)") is U.leaf("a")
    assert U.parse("(a.(a.b))") is U.leaf("b")
    B = FreeUniverse(validate("abc", [["a", "b", "c"]]))
    assert B.parse("(b.a)") is B.leaf("c")


def test_irreducible_product():
    U = free_universe("abc")
    a, b, c = (U.leaf(x) for x in "abc")
    t = U.mul(U.mul(a, b), U.mul(a, c))
    assert t.left is not None and {str(t.left), str(t.right)} == {"(a.b)", "(a.c)"}
    assert is_normal(t, U.base)


def test_rank():
    U = free_universe("abc")
    assert rank(U.leaf("a")) == 1
    assert rank(U.parse("(a.b)")) == 2
    assert rank(U.parse("((a.b).c)")) == 3


def test_squag_laws_exhaustive_rank4():
    U = free_universe("abc")
    levels = enumerate_normal_forms(U.base, 4)
    assert tuple(len(lvl) for lvl in levels[1:]) == FROZEN["free3_normal_forms_by_rank"]
    terms = [t for lvl in levels for t in lvl]
    for u in terms:
        assert U.mul(u, u) is u
        for v in terms:
            w = U.mul(u, v)
            assert w is U.mul(v, u)
            assert U.mul(u, w) is v
            assert is_normal(w, U.base)


def test_confluence_against_random_rewriter_free():
    U = free_universe("abc")
    rng = random.Random(11)
    for t in all_raw_terms("abc", 5):
        want = oracle_string(U.normalize(t))
        for _ in range(2):
            assert random_rewrite(t, [], rng) == want


def test_confluence_against_random_rewriter_with_base_block():
    blocks = [("a", "b", "c")]
    U = FreeUniverse(validate("abcd", [list(b) for b in blocks]))
    rng = random.Random(12)
    for t in all_raw_terms("abcd", 4):
        assert random_rewrite(t, blocks, rng) == oracle_string(U.normalize(t))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_deep_terms_agree_with_rewriter(seed):
    rng = random.Random(seed)
    blocks = [("a", "b", "c"), ("a", "d", "e")]
    U = FreeUniverse(validate("abcdef", [list(b) for b in blocks]))
    t = random_raw_term(rng, "abcdef", 9)
    assert random_rewrite(t, blocks, rng) == oracle_string(U.normalize(t))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_memoized_product_equals_one_shot_normalization(seed):
    rng = random.Random(seed)
    U = free_universe("abc")
    x, y = random_raw_term(rng, "abc", 5), random_raw_term(rng, "abc", 5)
    fresh = free_universe("abc")
    assert oracle_string(U.mul(U.normalize(x), U.normalize(y))) == oracle_string(fresh.normalize((x, y)))


def test_total_base_degenerates_to_points(fano):
    U = FreeUniverse(fano)
    for t in all_raw_terms(fano.points[:3], 3):
        assert U.normalize(t).left is None


# -- closures ---------------------------------------------------------------------------


def test_closure_examples():
    U = free_universe("abc")
    a, b, c = (U.leaf(x) for x in "abc")
    for k in range(1, 5):
        assert closure_k([a], k, U) == {a}
    assert {str(t) for t in closure_k([a, b], 2, U)} == {"a", "b", "(a.b)"}
    assert closure_k([a, b], 5, U) == closure_k([a, b], 2, U)
    assert len(closure_k([a, b, c], 2, U)) == 6


def test_closure_monotone_in_k():
    U = free_universe("abc")
    gens = [U.leaf(x) for x in "abc"]
    sizes = [len(closure_k(gens, k, U)) for k in range(1, 5)]
    assert sizes == sorted(sizes) and sizes[-1] > sizes[-2]


def test_generated():
    U = free_universe("abc")
    a, b, c = (U.leaf(x) for x in "abc")
    X, done = generated([a, b], 6, U)
    assert done and len(X) == 3
    X, done = generated([a, b, c], 4, U)
    assert not done


def test_generated_fano(fano):
    U = FreeUniverse(fano)
    X, done = generated(U.points(), 3, U)
    assert done and len(X) == 7


def test_generated_sizes():
    U = free_universe("abc")
    a, b, c = (U.leaf(x) for x in "abc")
    assert Generated(U, [a, b]).size() == 3
    assert Generated(U, [a, U.parse("(a.b)")]).size() == 3
    assert Generated(U, [a, b, c]).size() is None
    assert Generated(U, []).size() == 0
    assert Generated(U, [a]).size() == 1


def test_generated_membership_matches_bounded_closure():
    U = FreeUniverse(validate("abcde", [["a", "b", "c"]]))
    gens = [U.leaf("a"), U.leaf("d")]
    g = Generated(U, gens)
    inside = closure_k(gens, 4, U)
    for t in [t for lvl in enumerate_normal_forms(U.base, 3) for t in lvl]:
        if t in inside:
            assert t in g
    assert U.leaf("b") not in g and U.leaf("e") not in g


# -- free generation and homomorphisms ----------------------------------------------------------


def test_is_freely_generated_examples(fano):
    blk = validate("abc", [["a", "b", "c"]])
    assert is_freely_generated(blk, ["a", "b"])
    assert is_freely_generated(fano, fano.points)
    for A in itertools.combinations(fano.points, 3):
        if len(fano.closure(A)) == 7:
            assert not is_freely_generated(fano, A)


def test_homomorphism_into_fano(fano):
    base = validate("ab", [])
    U = FreeUniverse(base)
    t = U.parse("(a.b)")
    img = extend_homomorphism({"a": "1", "b": "2"}, base, fano, [t, U.parse("(a.(a.b))")])
    assert img[t] == "3"
    assert img[U.leaf("b")] == "2"


def test_identity_on_sub_system(fano):
    blk = fano.induced(["1", "2", "3"])
    U = FreeUniverse(blk)
    ids = {p: p for p in blk.points}
    assert extend_homomorphism(ids, blk, fano, U.points()) == {U.leaf(p): p for p in blk.points}


def test_non_homomorphism_is_rejected(fano):
    base = validate("abc", [["a", "b", "c"]])
    with pytest.raises(NotAHomomorphism):
        extend_homomorphism({"a": "1", "b": "2", "c": "4"}, base, fano, [])
