"""Command-line driver: check, run, analyze, trace.

Exit codes: 0 success; 1 rejected program or deadlocked run; 2 I/O
problems; 3 step-limit exhaustion; 4 violated runtime invariant.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from . import dfcheck, runtime
from .parser import ParseError, parse_program, parse_expr, parse_stype
from .pretty import pretty_term
from .statics import SortError, WfError, normalize
from .syntax import DEndpoint, DVar, Program, Term, subst_term
from .typecheck import (ChannelInfo, TypeCheckError, inline_defs,
                        typecheck_program)


def _emit(record: dict, stream=None) -> None:
    print(json.dumps(record, sort_keys=True, separators=(",", ":")),
          file=stream or sys.stdout)


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as ex:
        print(f"error: {ex}", file=sys.stderr)
        raise SystemExit(2)


def _diag(code: str, message: str, span=None, fmt: str = "records") -> None:
    rec = {"code": code, "span": list(span) if span else None,
           "message": message, "guard": None, "solverVerdict": None}
    if fmt == "text":
        where = f"{span[0]}:{span[1]}: " if span else ""
        print(f"error[{code}] {where}{message}", file=sys.stderr)
    else:
        _emit(rec, sys.stderr)


def _check_file(path: str, budget: int, assert_runtime: bool,
                fmt: str) -> Optional[tuple[Program, Term]]:
    src = _read(path)
    try:
        prog = parse_program(src)
        main = typecheck_program(prog, budget=budget,
                                 assert_runtime=assert_runtime)
        return prog, main
    except ParseError as ex:
        _diag("parse-error", ex.message, (ex.line, ex.col), fmt)
    except TypeCheckError as ex:
        rec = ex.record()
        if fmt == "text":
            _diag(ex.code, ex.message, ex.span, fmt)
        else:
            _emit(rec, sys.stderr)
    except (WfError, SortError) as ex:
        code = ex.code if isinstance(ex, WfError) else "sort-mismatch"
        _diag(code, str(ex), None, fmt)
    return None


def cmd_check(args) -> int:
    got = _check_file(args.file, args.solver_budget, args.assert_runtime,
                      args.format)
    if got is None:
        return 1
    if args.format == "text":
        print(f"{args.file}: accepted")
    else:
        _emit({"result": "accepted", "file": args.file})
    return 0


def _policy(seed: Optional[int]):
    if seed is None:
        return runtime.RoundRobin()
    return runtime.SeededRandom(seed)


def _load_fixture(path: str) -> runtime.Pool:
    data = json.loads(_read(path))
    sig = {}
    for cid, entry in data.get("sig", {}).items():
        universe = tuple(entry["universe"])
        proto = None
        if entry.get("proto"):
            proto = normalize(parse_stype(entry["proto"], universe=universe))
        sig[int(cid)] = ChannelInfo(proto, universe)
    threads = {}
    for tid, entry in data["threads"].items():
        term = parse_expr(entry["src"])
        for name, ep in entry.get("subst", {}).items():
            term = subst_term(term, name,
                              DEndpoint(ep["chan"], tuple(ep["roles"])))
        threads[int(tid)] = term
    return runtime.Pool(threads, sig,
                        data.get("next_channel", max(sig, default=-1) + 1),
                        data.get("next_thread", max(threads) + 1))


def _prepare_pool(args) -> Optional[runtime.Pool]:
    if args.file.endswith(".fixture"):
        if not args.unsafe_backdoor:
            _diag("unchecked-input",
                  "pool fixtures run only with --unsafe-backdoor", None,
                  args.format)
            raise SystemExit(1)
        return _load_fixture(args.file)
    if args.unsafe_backdoor:
        src = _read(args.file)
        try:
            prog = parse_program(src)
        except ParseError as ex:
            _diag("parse-error", ex.message, (ex.line, ex.col), args.format)
            raise SystemExit(1)
        return runtime.Pool.initial(inline_defs(prog))
    got = _check_file(args.file, args.solver_budget, args.assert_runtime,
                      args.format)
    if got is None:
        return None
    _, main = got
    if args.erase_proofs:
        main = runtime.erase_proofs(main)
    return runtime.Pool.initial(main)


def _execute(args, step_hook=None,
             pool_hook=None) -> tuple[int, Optional[runtime.Outcome]]:
    pool = _prepare_pool(args)
    if pool is None:
        return 1, None
    if pool_hook is not None:
        pool_hook(pool)
    checked = args.checked and not args.erase_proofs and not args.unsafe_backdoor
    tolerant = args.erase_proofs or args.unsafe_backdoor
    try:
        outcome = runtime.run(pool, _policy(args.seed), max_steps=args.max_steps,
                              checked=checked, tolerant=tolerant,
                              erased=args.erase_proofs if hasattr(args, "erase_proofs") else False,
                              step_hook=step_hook)
    except runtime.InvariantViolation as ex:
        _diag("invariant-violation", str(ex), None, args.format)
        return 4, None
    if outcome.kind == "done":
        return 0, outcome
    if outcome.kind == "deadlock":
        return 1, outcome
    return 3, outcome


def cmd_run(args) -> int:
    code, outcome = _execute(args)
    if outcome is None:
        return code
    rec = {
        "outcome": {"done": "AllDone", "deadlock": "Deadlock",
                    "steplimit": "StepLimit"}[outcome.kind],
        "steps": outcome.steps,
        "finalValue": pretty_term(outcome.value) if outcome.value is not None
        else None,
    }
    if outcome.report is not None:
        rec["report"] = outcome.report
    if args.format == "text":
        print(f"{rec['outcome']} after {rec['steps']} step(s)"
              + (f", value {rec['finalValue']}" if rec["finalValue"] else ""))
    else:
        _emit(rec)
    return code


def cmd_trace(args) -> int:
    events = []

    def hook(pool, event):
        events.append(event)

    code, outcome = _execute(args, step_hook=hook)
    for ev in events:
        if args.format == "text":
            chan = f" #{ev.channel}" if ev.channel is not None else ""
            print(f"[{ev.step}] {ev.kind}{chan} threads={list(ev.threads)}")
        else:
            _emit(ev.record())
    return code


def cmd_analyze(args) -> int:
    records = []

    def initial(pool):
        col = dfcheck.abstract_pool(pool)
        records.append(dfcheck.analyze(col, 0))

    def hook(pool, event):
        col = dfcheck.abstract_pool(pool)
        records.append(dfcheck.analyze(col, event.step + 1))

    code, outcome = _execute(args, step_hook=hook, pool_hook=initial)
    for rec in records:
        if args.format == "text":
            print(f"[{rec['step']}] relaxed={rec['relaxed']} "
                  f"df_reducible={rec['df_reducible']} sets={rec['sets']}")
        else:
            _emit(rec)
    if outcome is not None:
        summary = {"summary": True, "steps": outcome.steps,
                   "min_slack": min((r["slack"] for r in records), default=0),
                   "all_df_reducible": all(r["df_reducible"] for r in records),
                   "all_relaxed": all(r["relaxed"] for r in records)}
        if args.format == "text":
            print(f"summary: min_slack={summary['min_slack']} "
                  f"all_relaxed={summary['all_relaxed']} "
                  f"all_df_reducible={summary['all_df_reducible']}")
        else:
            _emit(summary)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpst",
                                description="session-typed language tools")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, running: bool):
        sp.add_argument("file")
        sp.add_argument("--solver-budget", type=int, default=1 << 16)
        sp.add_argument("--assert-runtime", action="store_true")
        sp.add_argument("--format", choices=("text", "records"),
                        default="text")
        if running:
            sp.add_argument("--seed", type=int, default=None)
            sp.add_argument("--max-steps", type=int, default=100_000)
            sp.add_argument("--checked", action="store_true")
            sp.add_argument("--erase-proofs", action="store_true")
            sp.add_argument("--unsafe-backdoor", action="store_true")

    sp = sub.add_parser("check", help="type-check a program")
    common(sp, running=False)
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("run", help="check then execute a program")
    common(sp, running=True)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("trace", help="execute and print one record per step")
    common(sp, running=True)
    sp.set_defaults(fn=cmd_trace)

    sp = sub.add_parser("analyze", help="execute with per-step df analysis")
    common(sp, running=True)
    sp.set_defaults(fn=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
