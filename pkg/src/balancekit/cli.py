"""Command-line entry point: ``balancekit {balance,analyze,ubcheck,bench,replay}``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as bio
from .balancer import (InvalidParameter, ReplayMismatch, ScheduleSpec, StopRule, classic_balance,
                       compute_T, raising_phase, replay, two_phase_balance)
from .bench import run_bench
from .diagnostics import (OracleBudgetExceeded, InconsistentChart, audit_bounds, chart,
                          potential_series, raising_limit)
from .graph import GraphError, apply_scaling, equivalent, rescale
from .instances import FAMILIES
from .ub import NotBalanced, Verdict, find_distinct_limits, is_ub, is_ub_balanced

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_REACHED = 2
EXIT_ORACLE = 3
EXIT_NOT_UB = 4
EXIT_INDETERMINATE = 5
EXIT_MISMATCH = 6
EXIT_AUDIT = 7

UB_EXIT = {Verdict.UB: EXIT_OK, Verdict.NOT_UB: EXIT_NOT_UB, Verdict.INDETERMINATE: EXIT_INDETERMINATE}
OUTPUT_SUFFIX = {"matrix-market": ".mtx", "csv": ".csv", "graph-json": ".json"}


class InputError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("BALANCEKIT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError(f"BALANCEKIT_SEED={env!r} is not an integer")


def _load(args) -> bio.LoadedInput:
    try:
        return bio.load_input(args.input, args.format)
    except (bio.ParseError, GraphError, OSError) as exc:
        raise InputError(str(exc))


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _schedule(args, n: int, seed: int, discipline: str) -> ScheduleSpec:
    if args.schedule == "cyclic":
        if not 1 <= args.start <= n:
            raise InputError(f"--start must lie in 1..{n}")
        return ScheduleSpec.cyclic(args.start - 1, seed=seed, discipline=discipline)
    if args.schedule == "greedy":
        return ScheduleSpec.greedy(seed=seed, discipline=discipline)
    return ScheduleSpec.uniform(seed, discipline=discipline)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_balance(args) -> int:
    seed = _seed(args)
    data = _load(args)
    alpha = data.alpha
    algo = args.algo
    sched = _schedule(args, alpha.n, seed, "classic" if algo == "classic" else "two-phase")
    if algo == "classic":
        beta, trace = classic_balance(alpha, args.epsilon, sched, args.max_ops)
    else:
        beta, trace = two_phase_balance(alpha, args.epsilon, sched, args.delta, max_ops=args.max_ops)
    out = _out_dir(args)
    stem = out / ("balanced" + OUTPUT_SUFFIX[data.format])
    if data.entries is None:
        bio.write_json(stem, bio.graph_to_json(beta))
    elif data.format == "matrix-market":
        bio.write_matrix_market(stem, apply_scaling(data.entries, trace.scaling))
    else:
        bio.write_csv(stem, apply_scaling(data.entries, trace.scaling))
    header = {"input": Path(args.input).name, "format": data.format, "algo": algo}
    bio.write_trace(out / "trace.jsonl", trace, seed, header)
    summary = {"seed": seed, "algo": algo, "epsilon": args.epsilon, "delta": trace.delta,
               "T": trace.T, "schedule": sched.to_dict(), "n": alpha.n, "m": alpha.m,
               "equivalent": equivalent(alpha, beta, 1e-8), **trace.summary()}
    bio.write_json(out / "summary.json", summary)
    _emit({k: summary[k] for k in ("seed", "ops", "rho", "rho_R", "rho_L", "reached")})
    if not trace.reached:
        print(f"target {args.epsilon:g} not reached: imbalance {trace.final_rho:.6g}", file=sys.stderr)
        return EXIT_NOT_REACHED
    return EXIT_OK


def cmd_analyze(args) -> int:
    seed = _seed(args)
    data = _load(args)
    alpha = data.alpha
    try:
        limit = raising_limit(alpha)
    except OracleBudgetExceeded as exc:
        print(f"oracle budget exceeded: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    ch = chart(alpha, limit)
    if args.corrupt_momentum:
        m = ch.m.copy()
        m[0] += args.corrupt_momentum
        ch = dataclasses.replace(ch, m=m)
    try:
        report = audit_bounds(alpha, ch, limit)
    except InconsistentChart as exc:
        print(f"inconsistent chart: {exc}", file=sys.stderr)
        return EXIT_AUDIT

    n = alpha.n
    budget = args.max_ops or max(1, compute_T(n, alpha.imbalance(), args.epsilon, args.delta or 1.0 / max(n, 2)))
    _, trace = raising_phase(alpha, StopRule(args.epsilon, budget), _schedule(args, n, seed, "two-phase"))
    every = args.sample_every or max(1, trace.ops // 100)
    series = potential_series(trace, alpha, every, limit=limit, with_phi=True, audit=True)

    out = _out_dir(args)
    bio.write_json(out / "chart.json", {"seed": seed, "oracle_epsilon": limit.oracle_epsilon,
                                        "oracle_residual": limit.residual, "r_star": limit.r_star.tolist(),
                                        "chart": ch.to_dict()})
    failing = sorted({name for rep in [report, *series.audits] for name in rep.failures()})
    bio.write_json(out / "audit.json", {
        "seed": seed,
        "initial": report.to_dict(),
        "samples": len(series.audits),
        "failing_samples": sum(not rep.passed for rep in series.audits),
        "failing_checks": failing,
    })
    (out / "series.csv").write_text(series.to_csv())
    _emit({"seed": seed, "y": ch.y.tolist(), "passed": not failing, "failing_checks": failing,
           "samples": len(series.audits)})
    if failing:
        for name in failing:
            print(f"audit failed: {name}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def cmd_ubcheck(args) -> int:
    seed = _seed(args)
    data = _load(args)
    alpha = data.alpha
    if args.balanced:
        tau = args.tau if args.tau is not None else 1e-9 * alpha.scale()
        try:
            report = is_ub_balanced(alpha, tau)
        except NotBalanced as exc:
            raise InputError(str(exc))
    else:
        report = is_ub(alpha, args.epsilon, args.tau, seed)
        if args.evidence:
            report.distinct_limits = find_distinct_limits(alpha, attempts=args.attempts)
    obj = {"seed": seed, **report.to_dict()}
    if report.distinct_limits is not None:
        pair = report.distinct_limits
        obj["distinct_limits"] = {"gap": pair.gap, "schedules": [s.to_dict() for s in pair.schedules],
                                  "first": bio.graph_to_json(pair.first), "second": bio.graph_to_json(pair.second)}
    if args.out_dir:
        bio.write_json(_out_dir(args) / "ub.json", obj)
    _emit({k: obj[k] for k in ("seed", "verdict", "witness_threshold", "components", "note")})
    return UB_EXIT[report.verdict]


def cmd_bench(args) -> int:
    seed = _seed(args)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    res = run_bench(args.family, sizes, args.reps, args.rho, args.epsilon, seed, args.workers)
    out = _out_dir(args)
    bio.write_json(out / "bench.json", res.to_dict())
    (out / "bench.csv").write_text(res.to_csv())
    _emit({"seed": seed, "family": res.family, "sizes": res.sizes, "medians": res.medians,
           "slope": res.slope, "intercept": res.intercept})
    return EXIT_OK


def cmd_replay(args) -> int:
    data = _load(args)
    try:
        header, trace = bio.read_trace(args.trace)
    except bio.ParseError as exc:
        raise InputError(str(exc))
    try:
        beta = replay(data.alpha, trace)
    except ReplayMismatch as exc:
        print(f"replay mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    recomputed = {"rho": beta.imbalance(), "rho_R": beta.raising_imbalance(), "rho_L": beta.lowering_imbalance()}
    recorded = {"rho": trace.final_rho, "rho_R": trace.final_rho_raise, "rho_L": trace.final_rho_lower}
    same = recomputed == recorded
    _emit({"seed": header.get("seed"), "steps": int(trace.vertices.size), "match": same, **recomputed})
    if not same:
        print(f"replay mismatch: summary {recorded} vs recomputed {recomputed}", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="balancekit", description="Max-balancing of non-negative matrices.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, input_=True):
        if input_:
            p.add_argument("input", help="matrix or graph file")
            p.add_argument("--format", choices=bio.FORMATS, help="input format (default: from suffix)")
        p.add_argument("--seed", type=int, help="RNG seed (default: $BALANCEKIT_SEED or 0)")
        p.add_argument("--out-dir", default="balancekit-out")

    def run_flags(p, epsilon):
        p.add_argument("--epsilon", type=float, default=epsilon)
        p.add_argument("--delta", type=float)
        p.add_argument("--schedule", choices=("random", "cyclic", "greedy"), default="random")
        p.add_argument("--start", type=int, default=1, help="first vertex of a cyclic sweep (1-based)")
        p.add_argument("--max-ops", type=int)

    p = sub.add_parser("balance", help="balance a matrix")
    common(p)
    run_flags(p, 1e-9)
    p.add_argument("--algo", choices=("two-phase", "classic"), default="two-phase")
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("analyze", help="height/level chart and bound audits")
    common(p)
    run_flags(p, 1e-9)
    p.add_argument("--sample-every", type=int)
    p.add_argument("--corrupt-momentum", type=float, default=0.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("ubcheck", help="decide the unique-balance property")
    common(p)
    p.set_defaults(out_dir=None)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--balanced", action="store_true", help="input is already balanced; test it directly")
    p.add_argument("--evidence", action="store_true", help="also search for two distinct balanced limits")
    p.add_argument("--attempts", type=int, default=8)
    p.set_defaults(func=cmd_ubcheck)

    p = sub.add_parser("bench", help="operation counts against n")
    common(p, input_=False)
    p.add_argument("--family", choices=FAMILIES, default="cycle")
    p.add_argument("--sizes", default="8,16,32,64")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--rho", type=float, default=4.0)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", help="re-run a recorded trace and compare")
    p.add_argument("trace")
    common(p)
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, InvalidParameter, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
