"""Acceptance suite: one PASS/FAIL line per criterion, with wall-clock limits.

Run under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import FROZEN, count_labeled_sts, is_total_sts  # noqa: E402
from steiner.amalgam import merge_al25, random_merge_config  # noqa: E402
from steiner.cli import main as sts_main  # noqa: E402
from steiner.closure import count_terms, rank_bound_k  # noqa: E402
from steiner.completion import complete_finite, is_admissible  # noqa: E402
from steiner.core import canonical_form, embeds, enumerate_sts, read_system, sub_systems, validate  # noqa: E402
from steiner.freequasigroup import Generated, closure_k, enumerate_normal_forms, free_universe, is_normal  # noqa: E402
from steiner.generic import enumerate_delta, generic_build, qf_equiv_m, verify_chain  # noqa: E402
from steiner.witnesses import (  # noqa: E402
    certify_doyen,
    doyen_search,
    nonisomorphic_prefixes,
    sma1_audit,
    sma1_build,
    tp2_array,
    verify_tp2,
)

FIX = Path(__file__).resolve().parent.parent / "src" / "steiner" / "fixtures"
RESULTS: list[str] = []


def c1():
    U = free_universe("abc")
    terms = [t for lvl in enumerate_normal_forms(U.base, 4) for t in lvl]
    bad = 0
    for u in terms:
        bad += U.mul(u, u) is not u
        for v in terms:
            w = U.mul(u, v)
            bad += (w is not U.mul(v, u)) + (U.mul(u, w) is not v) + (not is_normal(w, U.base))
    return bad == 0, f"{len(terms)} normal forms, {bad} failures"


def c2():
    from test_completion import random_systems

    ok = 0
    for S in random_systems(200):
        T = complete_finite(S, 27)
        ok += is_total_sts(T.points, T.blocks) and is_admissible(len(T)) and len(T) <= 27 and T.induced(S.points) == S
    return ok == 200, f"{ok}/200 completed"


def c3():
    pts7 = [str(i) for i in range(1, 8)]
    lab7 = count_labeled_sts(pts7)
    systems = list(enumerate_sts(pts7))
    cls7 = len({canonical_form(S) for S in systems})
    cls9 = len({canonical_form(S) for S in enumerate_sts([str(i) for i in range(9)])})
    ok = lab7 == len(systems) == FROZEN["labeled_sts7"] and cls7 == 1 and cls9 == 1
    return ok, f"labeled STS(7) {lab7}/{len(systems)}, classes {cls7} and {cls9}"


def c4():
    U = free_universe("abc")
    a, b, c = (U.leaf(x) for x in "abc")
    two = Generated(U, [a, b])
    k2 = len(closure_k([a, b, c], 2, U))
    vals = (two.size(), len(closure_k([a, b], 8, U)), k2, count_terms(2, 2), rank_bound_k(1, 2))
    return vals == (3, 3, 6, 6, 256), "sizes and counts " + str(vals)


def c5():
    chain = generic_build(validate("a", []), 2, 3)
    fails = verify_chain(chain, 3)
    code = sts_main(["delta-check", str(FIX / "fano.json"), str(FIX / "delta8.json")])
    detail = f"orders {[len(M) for M in chain]}, {len(list(enumerate_delta(3)))} instances, {len(fails)} failures, fano delta8 exit {code}"
    return not fails and code == 1, detail


def c6():
    arr = tp2_array(2, 2)
    rep = verify_tp2(arr, 4)
    pairs = len(arr.functions) * arr.rows
    ok = (len(arr.system), len(arr.system.blocks)) == (FROZEN["tp2_points_2x2"], FROZEN["tp2_blocks_2x2"])
    ok = ok and rep.ok and pairs == 8 and rep.brute_depth == 4
    return ok, f"{len(arr.system)} points, {len(arr.system.blocks)} blocks, {pairs} path pairs, {rep.brute_checked} terms scanned"


def c7():
    from test_amalgam import independence_suite

    stats = independence_suite(100)
    keys = ("symmetry", "monotonicity", "full_existence", "stationarity", "weak_freedom")
    return all(stats[k] == 0 for k in keys), ", ".join(f"{k}={v}" for k, v in stats.items())


def c8():
    fano, aff9 = read_system(FIX / "fano.json"), read_system(FIX / "aff9.json")
    built = sma1_build([fano, aff9], 2)
    rep = sma1_audit(built)
    final = built.final
    subs = sub_systems(final, 4)
    fit = all(embeds(final.induced(X), fano) or embeds(final.induced(X), aff9) for X in subs)
    props = all(rep.passed.get(k) for k in "12345")
    ok = rep.ok and props and fit and nonisomorphic_prefixes([7], [9])
    return ok, f"final order {len(final)}, {len(subs)} sub-systems above 3, audit {rep.passed}"


def c9():
    t0 = time.perf_counter()
    r9 = doyen_search(9, budget_seconds=10)
    t9 = time.perf_counter() - t0
    r15 = doyen_search(15, budget_seconds=120)
    ok = t9 < 10 and certify_doyen(r9.system) and certify_doyen(r15.system) and len(r15.system) == 15
    return ok, f"n=9 in {t9:.2f} s, n=15 in {r15.seconds:.2f} s after {r15.attempts} attempt(s)"


def c10():
    passed = 0
    for seed in range(20):
        cfg = random_merge_config(seed)
        res = merge_al25(cfg.universe, cfg.A0, cfg.B0, cfg.A1, cfg.B1, cfg.iso)
        e, U2 = res.embed, res.universe
        passed += all(
            qf_equiv_m(list(A) + list(B), cfg.universe, list(res.A) + [e(x) for x in B], U2, 3)
            for A, B in ((cfg.A0, cfg.B0), (cfg.A1, cfg.B1))
        )
    return passed == 20, f"{passed}/20 certified on both sides"


CRITERIA = [
    (1, "squag laws, rank <= 4", c1, 10),
    (2, "completion of 200 random systems", c2, 60),
    (3, "enumeration oracle", c3, 300),
    (4, "closure and rank values", c4, 10),
    (5, "generic chain and extension axioms", c5, 120),
    (6, "TP2 array", c6, 30),
    (7, "independence axioms", c7, 120),
    (8, "smallness chain", c8, 120),
    (9, "Doyen systems", c9, 130),
    (10, "merge certification", c10, 120),
]


def run_criterion(n, title, fn, limit):
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a FAIL line, not a missing line
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    dt = time.perf_counter() - t0
    ok = ok and dt < limit
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {title} ({dt:.2f} s, limit {limit} s) {detail}"
    return ok, line


@pytest.mark.parametrize("n,title,fn,limit", CRITERIA, ids=[f"criterion{c[0]}" for c in CRITERIA])
def test_criterion(n, title, fn, limit, capsys):
    ok, line = run_criterion(n, title, fn, limit)
    RESULTS.append(line)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(*c) for c in CRITERIA]
    for _, line in results:
        print(line, flush=True)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
