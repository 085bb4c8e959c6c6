"""The ``sts`` command.

Exit codes: 0 success or a true verdict, 1 a clean negative verdict, 2
invalid input, 3 an internal verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections.abc import Sequence
from pathlib import Path

from . import amalgam, closure, completion, generic, witnesses
from .core import PartialSTS, from_json, read_json, read_system, write_system
from .errors import StsError
from .freequasigroup import FreeUniverse, Generated, Term, closure_levels


class _Out:
    """Collects the human report and the structured result."""

    def __init__(self) -> None:
        self.result: dict = {}

    def say(self, *parts: object) -> None:
        print(*parts)


def _terms(text: str | None, U: FreeUniverse) -> list[Term]:
    if not text:
        return []
    return [U.parse(t.strip()) for t in text.split(",") if t.strip()]


def _names(text: str | None) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()] if text else []


def _summary(S: PartialSTS) -> str:
    return f"{len(S)} points, {len(S.blocks)} blocks, {'total' if S.is_total() else 'partial'}"


def _budget_seconds(arg: float | None, default: float) -> float:
    if arg is not None:
        return arg
    env = os.environ.get("STS_BUDGET_MS")
    if env:
        try:
            return int(env) / 1000.0
        except ValueError:
            pass
    return default


# -- subcommands -------------------------------------------------------------


def cmd_validate(a, out: _Out) -> int:
    S = read_system(a.file)
    out.say(f"valid: {_summary(S)}")
    out.result.update(points=len(S), blocks=len(S.blocks), total=S.is_total())
    return 0


def cmd_complete(a, out: _Out) -> int:
    S = read_system(a.file)
    T = completion.complete_finite(S, a.max_order, seed=a.seed, keep_substructure=not a.loose)
    if a.out:
        write_system(T, a.out)
        out.say(f"completed to order {len(T)}")
    else:
        sys.stdout.write(T.dumps())
    out.result.update(order=len(T))
    return 0


def cmd_free_step(a, out: _Out) -> int:
    S = completion.free_truncation(read_system(a.file), a.depth)
    if a.out:
        write_system(S, a.out)
        out.say(f"wrote {_summary(S)}")
    else:
        sys.stdout.write(S.dumps())
    out.result.update(points=len(S), blocks=len(S.blocks))
    return 0


def cmd_closure(a, out: _Out) -> int:
    U = FreeUniverse(read_system(a.file))
    gens = _terms(a.gens, U)
    levels = closure_levels(gens, a.k, U)
    seen: set[Term] = set()
    total = 0
    for r, lvl in enumerate(levels):
        new = [t for t in sorted(lvl, key=lambda t: t.key) if t not in seen]
        seen.update(new)
        total += len(new)
        if a.budget is not None and total > a.budget:
            out.say(f"stopped: more than {a.budget} elements")
            out.result.update(size=total, truncated=True)
            return 1
        if r and new:
            out.say(f"rank {r}: " + ", ".join(str(t) for t in new))
    g = Generated(U, gens)
    complete = g.size() == len(seen)
    out.say(f"size {len(seen)}; complete={'true' if complete else 'false'}")
    out.result.update(size=len(seen), complete=complete)
    return 0


def cmd_normalize(a, out: _Out) -> int:
    U = FreeUniverse(read_system(a.file))
    t = U.parse(a.term)
    out.say(str(t))
    out.result.update(term=str(t))
    return 0


def cmd_einf(a, out: _Out) -> int:
    base = read_system(a.file)
    U = FreeUniverse(base)
    phi = closure.parse_formula(a.phi, constants=base.points)
    var = a.var or (phi.variables[0] if phi.variables else "x")
    res = closure.has_infinite_orbit(phi, var, U, depth=a.depth, manual_k=a.k)
    out.say(res.verdict + (f"  witness: {res.witness}" if res.witness is not None else ""))
    if res.reason:
        out.say(f"reason: {res.reason}")
    if a.k is not None:
        out.say("note: manual k, result is not certifying")
    out.result.update(verdict=res.verdict, witness=str(res.witness) if res.witness else None, certified=res.certified)
    return 0 if res.verdict == "infinite" else 1


def cmd_delta_check(a, out: _Out) -> int:
    M = read_system(a.model)
    inst = generic.DeltaInstance.from_json(read_json(a.instance))
    ok, e = generic.check_delta(M, inst)
    out.say("holds" if ok else f"fails at {json.dumps(e, sort_keys=True)}")
    out.result.update(holds=ok, assignment=e)
    return 0 if ok else 1


def cmd_generic(a, out: _Out) -> int:
    seed = read_system(a.seed_file)
    logs: list[generic.StageLog] = []
    chain = generic.generic_build(seed, a.stages, a.bound, rng_seed=a.rng, max_order=a.max_order, logs=logs)
    for i, M in enumerate(chain):
        if a.out_prefix:
            write_system(M, f"{a.out_prefix}{i}.json")
    for lg in logs:
        out.say(f"stage {lg.stage}: adjoined {lg.adjoined}, {lg.points} points")
    out.result.update(stages=[{"stage": lg.stage, "adjoined": lg.adjoined, "points": lg.points} for lg in logs])
    return 0


def _merge_config(path: str):
    cfg = read_json(path)
    base_obj = cfg.get("base")
    if base_obj is None:
        raise StsError("config needs a 'base' system")
    U = FreeUniverse(from_json(base_obj))

    def terms(key_list) -> list[Term]:
        return [U.parse(t) for t in key_list]

    def iso(m: dict) -> dict[Term, Term]:
        return {U.parse(k): U.parse(v) for k, v in m.items()}

    return cfg, U, terms, iso


def cmd_merge(a, out: _Out) -> int:
    cfg, U, terms, iso = _merge_config(a.config)
    if a.kind == "family":
        pairs = [(terms(p["A"]), terms(p["B"])) for p in cfg["pairs"]]
        res = amalgam.merge_family(U, pairs, [iso(m) for m in cfg.get("isos", [])])
    else:
        fn = amalgam.merge_al1 if a.kind == "al1" else amalgam.merge_al25
        res = fn(U, terms(cfg["A0"]), terms(cfg["B0"]), terms(cfg["A1"]), terms(cfg["B1"]), iso(cfg["iso"]))
    out.say("A = " + ", ".join(str(t) for t in res.A))
    out.say(f"fresh points: {json.dumps(res.sizes, sort_keys=True)}; certified at depth {res.certified_depth}")
    if a.out:
        write_system(res.universe.base, a.out)
    out.result.update(A=[str(t) for t in res.A], sizes=res.sizes, depth=res.certified_depth)
    return 0


def cmd_indep(a, out: _Out) -> int:
    U = FreeUniverse(read_system(a.file))
    res = amalgam.indep(_terms(a.a, U), _terms(a.b, U), _terms(a.c, U), U, a.depth)
    wit = res.witness
    if isinstance(wit, tuple):
        wit = "{" + ", ".join(str(t) for t in wit) + "}"
    out.say(res.verdict + (f"  witness: {wit} ({res.reason})" if wit is not None else ""))
    out.result.update(verdict=res.verdict, witness=None if wit is None else str(wit))
    return 0 if res else 1


def cmd_tp2(a, out: _Out) -> int:
    arr = witnesses.tp2_array(a.rows, a.cols)
    out.say(f"array: {_summary(arr.system)}")
    if a.out:
        write_system(arr.system, a.out)
        Path(str(a.out) + ".labels.json").write_text(json.dumps(arr.labels, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    out.result.update(points=len(arr.system), blocks=len(arr.system.blocks))
    if a.verify_depth is not None:
        rep = witnesses.verify_tp2(arr, a.verify_depth)
        out.say(f"path satisfaction: {'pass' if rep.path_ok else 'FAIL'}")
        out.say(f"row 2-inconsistency: {'pass' if rep.rows_ok else 'FAIL'} ({rep.brute_checked} terms to rank {rep.brute_depth})")
        out.say(f"union validity: {'pass' if rep.validity_ok else 'FAIL'}")
        out.result.update(verified=rep.ok)
        if not rep.ok:
            return 3
    return 0


def cmd_sma1(a, out: _Out) -> int:
    family = [read_system(f) for f in a.family]
    built = witnesses.sma1_build(family, a.prefix)
    rep = witnesses.sma1_audit(built)
    for st in built.stages:
        out.say(f"stage {st.index + 1}: member {st.member}, k={st.k}, iterations={st.iterations}, size {st.size}")
    out.say("audit: " + ", ".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in rep.passed.items()))
    if a.out_prefix:
        for i, B in enumerate(built.chain):
            write_system(B, f"{a.out_prefix}{i}.json")
    out.result.update(sizes=[len(B) for B in built.chain], audit=rep.passed)
    return 0


def cmd_doyen(a, out: _Out) -> int:
    budget = _budget_seconds(a.budget, 120.0)
    res = witnesses.doyen_search(a.order, budget, a.seed)
    out.say(f"certified STS({a.order}) after {res.attempts} attempt(s), {res.seconds:.2f} s")
    if a.out:
        write_system(res.system, a.out)
    else:
        sys.stdout.write(res.system.dumps())
    out.result.update(order=a.order, attempts=res.attempts)
    return 0


def cmd_isolate(a, out: _Out) -> int:
    M = read_system(a.file)
    iso = generic.isolating_formula(_names(a.tuple), M)
    out.say(str(iso.formula))
    out.result.update(formula=str(iso.formula), enumeration=list(iso.enumeration))
    return 0


def cmd_equiv(a, out: _Out) -> int:
    S1, S2 = read_system(a.left_file), read_system(a.right_file)
    ok = generic.qf_equiv_m(_names(a.left), S1, _names(a.right), S2, a.depth)
    out.say("equivalent" if ok else "not equivalent")
    out.result.update(equivalent=ok, depth=a.depth)
    return 0 if ok else 1


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sts", description="Steiner triple systems and free Steiner quasigroups.")
    p.add_argument("--threads", type=int, default=1, help="accepted for compatibility; work runs sequentially")
    p.add_argument("--report", help="write a JSON result document here")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="validate a system file")
    s.add_argument("file")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("complete", help="embed a partial system in a finite STS")
    s.add_argument("file")
    s.add_argument("--max-order", type=int, default=27)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--loose", action="store_true", help="allow new blocks inside the input point set")
    s.add_argument("--out")
    s.set_defaults(func=cmd_complete)

    s = sub.add_parser("free-step", help="adjoin free products for undefined pairs")
    s.add_argument("file")
    s.add_argument("--depth", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_free_step)

    s = sub.add_parser("closure", help="closure of generators, grouped by rank")
    s.add_argument("file")
    s.add_argument("--gens", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--budget", type=int)
    s.set_defaults(func=cmd_closure)

    s = sub.add_parser("normalize", help="normal form of a term")
    s.add_argument("file")
    s.add_argument("--term", required=True)
    s.set_defaults(func=cmd_normalize)

    s = sub.add_parser("einf", help="does the formula have infinitely many solutions")
    s.add_argument("file")
    s.add_argument("--phi", required=True)
    s.add_argument("--var")
    s.add_argument("--depth", type=int, default=2)
    s.add_argument("--k", type=int, help="manual rank bound (not certifying)")
    s.set_defaults(func=cmd_einf)

    s = sub.add_parser("delta-check", help="check one extension axiom instance in a finite model")
    s.add_argument("model")
    s.add_argument("instance")
    s.set_defaults(func=cmd_delta_check)

    s = sub.add_parser("generic", help="staged generic model")
    s.add_argument("--seed-file", required=True)
    s.add_argument("--stages", type=int, required=True)
    s.add_argument("--bound", type=int, required=True)
    s.add_argument("--rng", type=int, default=0)
    s.add_argument("--max-order", type=int)
    s.add_argument("--out-prefix")
    s.set_defaults(func=cmd_generic)

    s = sub.add_parser("merge", help="merge constructions over a free universe")
    s.add_argument("kind", choices=["al1", "al25", "family"])
    s.add_argument("config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_merge)

    s = sub.add_parser("indep", help="free independence")
    s.add_argument("file")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--c", default="")
    s.add_argument("--depth", type=int, default=3)
    s.set_defaults(func=cmd_indep)

    s = sub.add_parser("tp2", help="TP2 witness array")
    s.add_argument("--rows", type=int, required=True)
    s.add_argument("--cols", type=int, required=True)
    s.add_argument("--verify-depth", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_tp2)

    s = sub.add_parser("sma1", help="smallness chain over a family")
    s.add_argument("family", nargs="+")
    s.add_argument("--prefix", type=int, required=True)
    s.add_argument("--out-prefix")
    s.set_defaults(func=cmd_sma1)

    s = sub.add_parser("doyen", help="search for a subsystem-free STS")
    s.add_argument("--order", type=int, required=True)
    s.add_argument("--budget", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_doyen)

    s = sub.add_parser("isolate", help="isolating formula of a tuple")
    s.add_argument("file")
    s.add_argument("--tuple", required=True)
    s.set_defaults(func=cmd_isolate)

    s = sub.add_parser("equiv", help="bounded-rank equivalence of two tuples")
    s.add_argument("left_file")
    s.add_argument("right_file")
    s.add_argument("--left", required=True)
    s.add_argument("--right", required=True)
    s.add_argument("--depth", type=int, default=3)
    s.set_defaults(func=cmd_equiv)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    out = _Out()
    try:
        code = a.func(a, out)
    except StsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = exc.exit_code
        out.result.update(error=type(exc).__name__, message=str(exc))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 2
        out.result.update(error=type(exc).__name__, message=str(exc))
    if a.report:
        doc = {"command": a.command, "exit_code": code, **out.result}
        Path(a.report).write_text(json.dumps(doc, sort_keys=True, indent=1, default=str) + "\n", encoding="utf-8")
    return code


if __name__ == "__main__":
    sys.exit(main())
