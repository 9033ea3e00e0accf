"""Command-line front end: check, stress, rmr-report, replay.

Exit codes: 0 clean, 1 a violation was found (its trace is written), 2 for
usage errors or a refused state-space guard.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import explore, rmr, stress, trace
from .model import MUTATIONS


def _add_check(sub):
    p = sub.add_parser("check", help="explore interleavings and check everything")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--depth", type=int, default=30, help="exhaustive action depth")
    p.add_argument("--crash-budget", type=int, default=0, help="crashes per process per attempt")
    p.add_argument("--abort-budget", type=int, default=0, help="abort signals per process per attempt")
    p.add_argument("--scheduler", choices=["exhaustive", "random", "fair_random"],
                   default="exhaustive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schedules", type=int, default=1000, help="random schedules to run")
    p.add_argument("--steps", type=int, default=200, help="actions per random schedule")
    p.add_argument("--mutation", choices=list(MUTATIONS), default=None,
                   help="run a seeded fault instead of the real algorithm")
    p.add_argument("--max-violations", type=int, default=16)
    p.add_argument("--trace-out", default="violation.jsonl",
                   help="where to write the first violation's step trace")
    p.add_argument("--json", action="store_true")


def _cmd_check(args) -> int:
    params = explore.ExploreParams(
        n=args.n, max_depth=args.depth, crash_budget=args.crash_budget,
        abort_budget=args.abort_budget, scheduler=args.scheduler,
        seed=args.seed, schedules=args.schedules, max_steps=args.steps,
        mutation=args.mutation, max_violations=args.max_violations,
    )
    if args.scheduler == "exhaustive":
        rep = explore.explore_exhaustive(params)
    else:
        rep = explore.explore_random(params)
    if args.json:
        print(json.dumps(rep.to_json(), indent=2))
    else:
        print(f"scheduler={rep.scheduler} n={rep.n} states={rep.states_visited} "
              f"transitions={rep.transitions} attempts={rep.completed_attempts} "
              f"time={rep.wall_time:.2f}s digest={rep.digest}")
        for v in rep.violations[:8]:
            print(f"  VIOLATION {v.kind} pid={v.pid} step={v.step}: {v.detail}")
        if rep.violations:
            print(f"  {len(rep.violations)} violation(s) total")
    if rep.violations:
        first = next((v for v in rep.violations if v.trace), None)
        if first is not None and args.trace_out:
            with open(args.trace_out, "w") as fp:
                trace.write_trace(fp, args.n, first.trace, mutation=args.mutation)
            if not args.json:
                print(f"  trace written to {args.trace_out}")
        return 1
    return 0


def _add_stress(sub):
    p = sub.add_parser("stress", help="threaded stress run of the native lock")
    p.add_argument("--threads", type=int, default=8)
    p.add_argument("--passages", type=int, default=100_000, help="total passages across threads")
    p.add_argument("--crash-rate", type=float, default=0.01)
    p.add_argument("--abort-rate", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--json", action="store_true")


def _cmd_stress(args) -> int:
    res = stress.run_stress(stress.StressParams(
        threads=args.threads, passages=args.passages,
        crash_rate=args.crash_rate, abort_rate=args.abort_rate,
        seed=args.seed, timeout=args.timeout,
    ))
    if args.json:
        print(json.dumps(res.to_json(), indent=2))
    else:
        print(f"passages={res.passages_done} cs_returns={res.cs_returns} "
              f"counter={res.counter} crashes={res.crashes_fired} "
              f"aborts={res.aborts_returned} recover_to_cs={res.recover_cs_returns} "
              f"time={res.wall_time:.2f}s")
        for v in res.violations:
            print(f"  VIOLATION {v}")
        if res.timed_out:
            print("  TIMED OUT (possible deadlock)")
    return 0 if res.ok else 1


def _add_rmr(sub):
    p = sub.add_parser("rmr-report", help="per-passage RMR accounting of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--model", choices=["dsm", "strict", "strict_cc", "relaxed", "relaxed_cc"],
                   default="dsm")
    p.add_argument("--json", action="store_true")


def _cmd_rmr(args) -> int:
    model = {"strict": rmr.STRICT_CC, "relaxed": rmr.RELAXED_CC}.get(args.model, args.model)
    if model == "dsm":
        model = rmr.DSM
    with open(args.trace) as fp:
        header, steps = trace.read_trace(fp)
    actions = [trace.action_from_record(r) for r in steps]
    stats = rmr.aggregate(header["n"], actions, model, mutation=header.get("mutation"))
    if args.json:
        print(json.dumps([s.to_json() for s in stats], indent=2))
    else:
        print("pid,passage,attempt,rmr,crashes,max_contention,ended_by_crash")
        for s in stats:
            print(f"{s.pid},{s.passage},{s.attempt},{s.rmr},{s.crashes},"
                  f"{s.max_contention},{int(s.ended_by_crash)}")
    return 0


def _add_replay(sub):
    p = sub.add_parser("replay", help="re-execute a trace and verify its hashes")
    p.add_argument("trace")


def _cmd_replay(args) -> int:
    with open(args.trace) as fp:
        header, steps = trace.read_trace(fp)
    try:
        trace.replay(header, steps)
    except trace.ReplayError as e:
        print(f"replay mismatch: {e}")
        return 1
    print(f"replayed {len(steps)} steps, all hashes match")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="rmelock",
                                 description="recoverable abortable lock toolkit")
    sub = ap.add_subparsers(dest="cmd", required=True)
    _add_check(sub)
    _add_stress(sub)
    _add_rmr(sub)
    _add_replay(sub)
    args = ap.parse_args(argv)
    try:
        if args.cmd == "check":
            return _cmd_check(args)
        if args.cmd == "stress":
            return _cmd_stress(args)
        if args.cmd == "rmr-report":
            return _cmd_rmr(args)
        if args.cmd == "replay":
            return _cmd_replay(args)
    except explore.StateSpaceGuard as e:
        print(f"refused: {e}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
