from __future__ import annotations

import itertools

import pytest

from steiner.closure import Formula
from steiner.core import canonical_form, discrete, find_embeddings, validate
from steiner.errors import InvalidSystem
from steiner.freequasigroup import FreeUniverse, free_universe
from steiner.generic import (
    DeltaInstance,
    check_delta,
    delta_formulas,
    enumerate_delta,
    generic_build,
    isolating_formula,
    qf_equiv_m,
    satisfies_isolating,
    verify_chain,
)


def lit_strings(phi: Formula) -> set[str]:
    return {str(l) for l in phi.literals}


def test_delta_formula_shapes():
    two = DeltaInstance(discrete("ab"), frozenset("ab"))
    dA, _ = delta_formulas(two)
    assert lit_strings(dA) == {"x1 != x2"}

    blk = DeltaInstance(validate("abc", [["a", "b", "c"]]), frozenset("abc"))
    dA, dB = delta_formulas(blk)
    assert "(x1.x2) = x3" in lit_strings(dA)
    assert lit_strings(dA) == lit_strings(dB)

    empty = DeltaInstance(discrete("ab"), frozenset())
    dA, dB = delta_formulas(empty)
    assert dA.literals == () and lit_strings(dB) == {"y1 != y2"}


def test_inner_must_be_relatively_closed():
    with pytest.raises(InvalidSystem):
        DeltaInstance(validate("abc", [["a", "b", "c"]]), frozenset("ab"))


def test_check_delta_in_fano(fano):
    assert not check_delta(fano, DeltaInstance(discrete([f"p{i}" for i in range(8)]), frozenset()))[0]
    assert check_delta(fano, DeltaInstance(discrete("abc"), frozenset()))[0]
    assert check_delta(fano, DeltaInstance(discrete("ab"), frozenset("a")))[0]
    # four points with no three on a block, one of them inside
    quad = DeltaInstance(discrete("abcd"), frozenset())
    assert check_delta(fano, quad)[0]


def test_check_delta_is_relabeling_invariant(fano):
    perm = dict(zip(fano.points, reversed(fano.points)))
    G = fano.relabel(perm)
    for inst in enumerate_delta(4):
        assert check_delta(fano, inst)[0] == check_delta(G, inst)[0]


def test_enumerated_instances():
    by_size = {n: [i for i in enumerate_delta(3) if len(i.outer) == n] for n in (1, 2, 3)}
    assert len(by_size[1]) == 2
    assert sorted(len(i.inner) for i in by_size[2]) == [0, 1, 2]
    assert all(not i.outer.blocks for i in by_size[2])
    labels = {canonical_form(i.outer, {p: int(p in i.inner) for p in i.outer.points}) for i in by_size[3]}
    blk = validate("abc", [["a", "b", "c"]])
    assert canonical_form(blk, {p: 1 for p in "abc"}) in labels
    assert canonical_form(discrete("abc"), {p: 0 for p in "abc"}) in labels


def test_generic_build_stage_one():
    chain = generic_build(validate("a", []), 1, 3)
    M1 = chain[1]
    assert next(find_embeddings(discrete("abc"), M1, substructure=True), None) is not None
    assert verify_chain(chain, 3) == []


def test_generic_build_zero_stages(fano):
    assert generic_build(fano, 0, 3) == [fano]


def test_generic_chain_is_monotone():
    chain = generic_build(validate("a", []), 2, 3, rng_seed=4)
    for M, N in zip(chain, chain[1:]):
        assert set(M.blocks) <= set(N.blocks)
    assert verify_chain(chain, 3) == []


def test_generic_build_replay_is_deterministic():
    a = generic_build(validate("a", []), 2, 3, rng_seed=9)
    b = generic_build(validate("a", []), 2, 3, rng_seed=9)
    assert [M.dumps() for M in a] == [M.dumps() for M in b]


# -- isolating formulas ------------------------------------------------------------------------


def test_isolating_single_point(fano):
    iso = isolating_formula(["1"], fano)
    assert lit_strings(iso.formula) == {"(x1.x1) = x1"}
    assert iso.existential == ()


def test_isolating_block_pair(fano):
    iso = isolating_formula(["1", "2"], fano)
    assert iso.existential == ("x3",)
    assert "(x1.x2) = x3" in lit_strings(iso.formula)


def test_isolating_triangle(fano):
    iso = isolating_formula(["1", "2", "4"], fano)
    assert len(iso.existential) == 4
    assert set(iso.enumeration) == set(fano.points)


def test_prime_model_shadow():
    chain = generic_build(validate("a", []), 1, 3)
    M = chain[-1]
    for n in (1, 2):
        for tup in itertools.permutations(M.points, n):
            if tup[0] != M.points[0]:
                continue
            iso = isolating_formula(tup, M)
            for other in itertools.permutations(M.points, n):
                if not satisfies_isolating(iso, other, M):
                    continue
                A, B = M.induced(M.closure(tup)), M.induced(M.closure(other))
                assert len(A) == len(B)
                base = dict(zip(tup, other))
                assert next(find_embeddings(A, B, base=base, substructure=True), None) is not None


# -- bounded-rank equivalence ---------------------------------------------------------------------------


def test_equiv_reflexive(fano):
    assert qf_equiv_m(["1", "2"], fano, ["1", "2"], fano, 3)


def test_block_triples_agree(fano, aff9):
    b9 = aff9.blocks[0]
    for m in range(1, 5):
        assert qf_equiv_m(["1", "2", "3"], fano, list(b9), aff9, m)


def test_block_vs_triangle(fano):
    assert not qf_equiv_m(["1", "2", "3"], fano, ["1", "2", "4"], fano, 2)


def _terms(names, m):
    levels = [[], list(names)]
    for r in range(2, m + 1):
        levels.append([(u, v) for i in range(1, r) for u in levels[i] for v in levels[r - i]])
    return [t for lvl in levels for t in lvl]


def _truths(tup, amb, m):
    U = amb if isinstance(amb, FreeUniverse) else FreeUniverse(amb)
    env = {f"v{i}": U.leaf(p) if isinstance(p, str) else p for i, p in enumerate(tup)}
    terms = _terms(list(env), m)
    vals = [U.evaluate(t, env) for t in terms]
    return [vals[i] is vals[j] for i in range(len(vals)) for j in range(i + 1, len(vals))]


@pytest.mark.parametrize("m", [1, 2, 3])
def test_equivalence_implies_same_equalities(m, fano, aff9):
    ambients = [fano, aff9, validate("abcd", [["a", "b", "c"]]), free_universe("ab")]
    tuples = []
    for amb in ambients:
        pts = amb.base.points if isinstance(amb, FreeUniverse) else amb.points
        tuples += [(t, amb) for t in itertools.permutations(pts[:4], 2)]
    for (t1, a1), (t2, a2) in itertools.combinations(tuples, 2):
        if qf_equiv_m(list(t1), a1, list(t2), a2, m):
            assert _truths(t1, a1, m) == _truths(t2, a2, m)
