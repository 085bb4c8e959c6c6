from __future__ import annotations

import itertools

import pytest

from oracles import FROZEN, is_partial_sts, product_table
from steiner.core import embeds, sub_systems, validate
from steiner.errors import NotAdmissible
from steiner.witnesses import (
    TP2Array,
    cancellation_derivation,
    certify_doyen,
    doyen_search,
    nonisomorphic_prefixes,
    sma1_audit,
    sma1_build,
    tp2_array,
    verify_tp2,
)


def tampered(arr: TP2Array, system, labels=None) -> TP2Array:
    return TP2Array(system, arr.rows, arr.cols, dict(labels or arr.labels), arr.functions)


# -- TP2 ------------------------------------------------------------------------------------


def test_tp2_counts():
    arr = tp2_array(2, 2)
    assert len(arr.system) == FROZEN["tp2_points_2x2"]
    assert len(arr.system.blocks) == FROZEN["tp2_blocks_2x2"]
    assert is_partial_sts(arr.system.points, arr.system.blocks)
    one = tp2_array(1, 1)
    assert (len(one.system), len(one.system.blocks)) == (6, 3)


def test_tp2_verifies():
    rep = verify_tp2(tp2_array(2, 2), depth=3)
    assert rep.ok
    assert len(rep.derivations) == 2


def test_cancellation_derivation_ends_in_equality():
    steps = cancellation_derivation("a", "b", "c", "c'")
    assert steps[-1].startswith("c = c'")
    assert len(steps) == 6


def test_tamper_removed_block_breaks_a_path():
    arr = tp2_array(2, 2)
    blocks = list(arr.system.blocks)[1:]
    bad = tampered(arr, validate(arr.system.points, blocks))
    rep = verify_tp2(bad, depth=1)
    assert not rep.path_ok


def test_tamper_merged_columns():
    arr = tp2_array(2, 2)
    c0, c1 = arr.c(0, 0), arr.c(0, 1)
    ren = {p: (c0 if p == c1 else p) for p in arr.system.points}
    pts = sorted(set(ren.values()))
    S = validate(pts, [[ren[x] for x in b] for b in arr.system.blocks])
    labels = {k: ren[v] for k, v in arr.labels.items()}
    rep = verify_tp2(tampered(arr, S, labels), depth=2)
    # the merged c point realizes both columns, which the row check catches
    assert not rep.rows_ok and not rep.ok


# -- smallness chain ------------------------------------------------------------------------


def test_sma1_base_stage(fano):
    built = sma1_build([fano], 0)
    B0 = built.chain[0]
    assert len(B0) == 3 and not B0.blocks
    assert sma1_audit(built).ok


def test_sma1_fano_needs_nine_free_points(fano):
    built = sma1_build([fano], 1)
    st = built.stages[0]
    assert st.k == 3 and len(st.free_points) == 2 * 3 + 3
    rep = sma1_audit(built)
    assert rep.ok
    final = built.final
    big = [X for X in sub_systems(final, 4)]
    assert big and all(embeds(final.induced(X), fano) for X in big)


def test_sma1_single_block_family():
    blk = validate("xyz", [["x", "y", "z"]])
    built = sma1_build([blk], 1)
    assert len(built.stages) == 1 and sma1_audit(built).ok


def test_sma1_two_members(fano, aff9):
    built = sma1_build([fano, aff9], 2)
    rep = sma1_audit(built)
    assert rep.ok and set(rep.passed) >= {"1", "2", "3", "4", "5", "free", "generated"}
    sizes = {len(X) for X in sub_systems(built.final, 4)}
    assert sizes <= {7, 9} and not sizes & {13, 15}


def test_sma1_block_family_has_no_large_sub_systems():
    blk = validate("xyz", [["x", "y", "z"]])
    assert sub_systems(sma1_build([blk], 2).final, 4) == []


# -- Doyen systems --------------------------------------------------------------------------


def _all_triangles_generate(S) -> bool:
    tab = product_table(S.blocks)

    def close(X):
        X = set(X)
        while True:
            new = {tab[frozenset(p)] for p in itertools.combinations(X, 2)} - X
            if not new:
                return X
            X |= new

    return all(
        len(close(t)) == len(S)
        for t in itertools.combinations(S.points, 3)
        if tab[frozenset(t[:2])] != t[2]
    )


@pytest.mark.parametrize("n", [7, 9, 13, 15])
def test_doyen_orders(n):
    res = doyen_search(n, budget_seconds=120)
    S = res.system
    assert len(S) == n and S.is_total() and certify_doyen(S)
    assert _all_triangles_generate(S)


def test_doyen_rejects_inadmissible():
    with pytest.raises(NotAdmissible):
        doyen_search(8)


def test_certify_rejects_projective_space():
    # PG(3,2): points are nonzero vectors of GF(2)^4, lines are x, y, x+y
    pts = [str(v) for v in range(1, 16)]
    blocks = {tuple(sorted((x, y, x ^ y))) for x in range(1, 16) for y in range(1, 16) if x != y}
    S = validate(pts, [[str(v) for v in b] for b in blocks])
    assert not certify_doyen(S)
    assert len(sub_systems(S, 7, 7)) == 15


def test_nonisomorphic_prefixes():
    assert nonisomorphic_prefixes([7], [9])
    assert not nonisomorphic_prefixes([7], [7])
    assert nonisomorphic_prefixes([7], [7, 9])
