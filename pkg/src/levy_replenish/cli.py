"""Batch front door: parse a problem JSON, dispatch solve / value / simulate /
sweep / verify, emit CSV or JSON.

Floats in CSV output are written with repr so a re-parse reproduces the
in-memory values exactly.  Every file written via --out is referenced by a
sibling ``<out>.manifest.json`` run manifest.  The LEVY_REPLENISH_LOG
environment variable sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from . import __version__
from .levy_model import ValidationError, spec_from_json
from .barrier_solver import classical_bstar, solve_bstar, sweep, sweep_flags
from .policy_simulator import SimConfig, estimate_value, simulate_path_events
from .valuation import report as valuation_report
from .valuation import value as value_fn
from .verifier import AVAILABLE_CHECKS, run_all_checks

log = logging.getLogger("levy_replenish")

_EVENT_NAMES = {0: "jump", 1: "observation", 2: "replenishment", 3: "start", 4: "end"}


def _float_list(text):
    text = text.strip()
    if not text:
        return []
    return [float(v) for v in text.split(",")]


def _load_spec(path):
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_json(fh.read())


def _write_manifest(args, outputs):
    manifest = {
        "subcommand": args.command,
        "spec_path": args.spec,
        "options": {k: v for k, v in vars(args).items() if k not in ("func", "command")},
        "tool_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "outputs": outputs,
    }
    path = args.out + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    log.info("manifest written to %s", path)


def _emit(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        _write_manifest(args, [args.out])
        log.info("output written to %s", args.out)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def cmd_solve(args):
    spec = _load_spec(args.spec)
    sol = solve_bstar(spec)
    out = sol.to_dict()
    if args.compare_classical:
        out["classical_b_star"] = classical_bstar(spec)
    _emit(args, json.dumps(out, indent=2))
    return 0


def cmd_value(args):
    spec = _load_spec(args.spec)
    b = args.b if args.b is not None else solve_bstar(spec).b_star
    grid = _float_list(args.x) if args.x else []
    if args.format == "json":
        rows = [valuation_report(spec, b, x).to_dict() for x in grid]
        _emit(args, json.dumps({"b": b, "rows": rows}, indent=2))
        return 0
    lines = ["x,value,derivative,err_estimate"]
    for x in grid:
        rep = valuation_report(spec, b, x)
        lines.append(f"{x!r},{rep.value!r},{rep.derivative!r},{rep.err_estimate!r}")
    _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_simulate(args):
    spec = _load_spec(args.spec)
    b = args.b if args.b is not None else solve_bstar(spec).b_star
    config = SimConfig(paths=args.paths, horizon=args.horizon, dt=args.dt,
                       seed=args.seed, antithetic=args.antithetic)
    est = estimate_value(spec, b, args.x0, config)
    out = {"b": b, "x0": args.x0, "config": vars(args).copy()}
    out["config"] = {k: out["config"][k] for k in ("paths", "horizon", "dt", "seed", "antithetic")}
    est_doc = est.to_dict()
    for part in ("total", "inventory", "replenishment"):
        est_doc[part].pop("wall_clock", None)  # keep the document seed-reproducible
    out["estimate"] = est_doc
    if args.compare_formula:
        v = value_fn(spec, b, args.x0)
        se = est.total.std_error
        out["formula_value"] = v
        out["abs_z"] = abs(est.total.mean - v) / se if se > 0 else float("inf")
    outputs = []
    if args.trace:
        trace_path = args.trace_out or ((args.out or "trace") + ".trace.csv")
        with open(trace_path, "w", encoding="utf-8") as fh:
            fh.write("path,t,inventory,event\n")
            for p in range(min(args.trace, args.paths)):
                _, tt, uu, code = simulate_path_events(spec, b, args.x0, config,
                                                       config.seed, path_index=p)
                for t, u, c in zip(tt, uu, code):
                    fh.write(f"{p},{t!r},{u!r},{_EVENT_NAMES[int(c)]}\n")
        outputs.append(trace_path)
        out["trace_file"] = trace_path
    _emit(args, json.dumps(out, indent=2))
    return 0


def cmd_sweep(args):
    spec = _load_spec(args.spec)
    values = _float_list(args.values)
    grid = _float_list(args.x) if args.x else []
    rows = sweep(spec, args.param, values, grid)
    flags = sweep_flags(rows)
    log.info("sweep flags: %s", flags)
    if args.format == "json":
        _emit(args, json.dumps({"rows": [r.to_dict() for r in rows], "flags": flags}, indent=2))
        return 0
    header = ["param_name", "param_value", "b_star", "residual"] + [f"v@x={x!r}" for x in grid]
    lines = [",".join(header)]
    for r in rows:
        if r.error is not None:
            lines.append(f"{r.param_name},{r.param_value!r},error,error," +
                         ",".join([""] * len(grid)) + f"  # {r.error}")
            continue
        cells = [r.param_name, repr(r.param_value), repr(r.b_star), repr(r.residual)]
        cells += [repr(v) for v in r.values]
        lines.append(",".join(cells))
    _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_verify(args):
    spec = _load_spec(args.spec)
    tolerances = {}
    for item in args.tol or []:
        name, _, val = item.partition("=")
        if name not in AVAILABLE_CHECKS:
            raise SystemExit(f"unknown check {name!r}; available: {', '.join(AVAILABLE_CHECKS)}")
        tolerances[name] = float(val)
    checks = args.check or None
    if checks:
        unknown = [c for c in checks if c not in AVAILABLE_CHECKS]
        if unknown:
            raise SystemExit(
                f"unknown checks {unknown}; available: {', '.join(AVAILABLE_CHECKS)}")
    reports = run_all_checks(spec, seed=args.seed, checks=checks,
                             mc_paths=args.paths, tolerances=tolerances)
    lines = [json.dumps(r.to_dict()) for r in reports]
    _emit(args, "\n".join(lines) + "\n")
    return 0 if all(r.passed for r in reports) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="levy-replenish",
        description="periodic barrier replenishment: solve, value, simulate, sweep, verify")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--spec", required=True, help="problem JSON path")
        sp.add_argument("--out", default=None, help="output file (manifest written alongside)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("solve", help="find the optimal barrier")
    common(sp)
    sp.add_argument("--compare-classical", action="store_true",
                    help="also report the continuous-monitoring barrier")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("value", help="value function on an x grid")
    common(sp)
    sp.add_argument("--b", type=float, default=None, help="barrier (default: solved)")
    sp.add_argument("--x", default="", help="comma-separated evaluation points")
    sp.set_defaults(func=cmd_value)

    sp = sub.add_parser("simulate", help="Monte Carlo estimate of the policy value")
    common(sp)
    sp.add_argument("--b", type=float, default=None)
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--paths", type=int, required=True)
    sp.add_argument("--horizon", type=float, required=True)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--antithetic", action="store_true")
    sp.add_argument("--compare-formula", action="store_true")
    sp.add_argument("--trace", type=int, default=0, help="dump traces for the first N paths")
    sp.add_argument("--trace-out", default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="parameter sweep with re-solved barriers")
    common(sp)
    sp.add_argument("--param", choices=("C", "r", "b"), required=True)
    sp.add_argument("--values", required=True, help="comma-separated parameter values")
    sp.add_argument("--x", default="", help="comma-separated value-grid points")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="run the numerical certification checks")
    common(sp)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--paths", type=int, default=100_000)
    sp.add_argument("--check", action="append",
                    help=f"check to run (repeatable); available: {', '.join(AVAILABLE_CHECKS)}")
    sp.add_argument("--tol", action="append", help="override NAME=VALUE (repeatable)")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("LEVY_REPLENISH_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "paths", None) is not None and args.paths < 1:
        parser.error("--paths must be a positive integer")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"specification invalid: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
