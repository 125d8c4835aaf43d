"""Batch command-line front-end.

Commands:
  run <config.toml>   solve the configured problem; writes trace.csv,
                      summary.json and audits.json into the output directory;
                      exit code 0 iff the run converged
  suite <name>        run a named property suite (geometry | bregman |
                      monotonicity | convergence | recovery); exit 0 iff all
                      checks pass
  list-problems       print the built-in problem library

All floating-point output uses 17 significant digits so artifacts round-trip
exactly; identical config + seed produces byte-identical traces.  Parallel
runs are safe as long as each uses its own output directory.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bilevel import fejer_audit, limsup_condition_audit, solve_bilevel, step_decay_audit
from .config import load_run_config
from .errors import BregproxError, ConfigurationError
from .problems import ProblemSetup, list_problems
from .suites import SUITES, run_suite


def _g17(x: float) -> str:
    return f"{float(x):.17g}"


def write_trace_csv(traces, path: Path) -> None:
    if not traces:
        path.write_text("")
        return
    dim = len(traces[0].x_k.coords)
    header = (
        ["k"]
        + [f"x{i}" for i in range(dim)]
        + ["step_dist", "bregman_step", "mu_k", "lambda_k", "inner_iterations", "inner_gap"]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in traces:
            w.writerow(
                [t.k]
                + [_g17(c) for c in t.x_k.coords]
                + [
                    _g17(t.step_dist),
                    _g17(t.bregman_step),
                    _g17(t.mu_k),
                    _g17(t.lambda_k),
                    t.inner.iterations,
                    _g17(t.inner.gap),
                ]
            )


def run_audits(setup: ProblemSetup, result) -> dict:
    """Best-effort audit battery against the configured reference points."""
    audits: dict = {}
    sd = step_decay_audit(result.traces)
    audits["step_decay"] = {
        "passed": sd.passed,
        "final_step": sd.final_step,
        "final_bregman_step": sd.final_bregman,
        "window_maxima_decreasing": sd.window_maxima_decreasing,
        "insufficient_data": sd.insufficient_data,
    }
    if setup.references:
        ref = setup.references[0]
        try:
            fj = fejer_audit(
                result.traces, result.x_final, ref,
                F=setup.F, Q=setup.Q, omega=setup.omega, b=setup.bregman,
            )
            audits["fejer"] = {
                "passed": fj.passed,
                "max_violation": fj.max_violation,
                "tail_oscillation": fj.tail_oscillation,
                "perturbation_sum": fj.rho_sum,
            }
        except ConfigurationError as exc:
            audits["fejer"] = {"refused": str(exc)}
        try:
            ls = limsup_condition_audit(
                result.traces, result.x_final, setup.references,
                F=setup.F, omega=setup.omega, b=setup.bregman,
            )
            audits["upper_level_transfer"] = {
                "passed": ls.passed,
                "tail_values": ls.tail_values,
            }
        except ConfigurationError as exc:
            audits["upper_level_transfer"] = {"refused": str(exc)}
    return audits


class _Float17(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, np.ndarray):
            return [float(v) for v in o]
        return super().default(o)


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, cls=_Float17, sort_keys=True) + "\n")


def cmd_run(args) -> int:
    try:
        setup = load_run_config(args.config)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        setup.config = dataclasses.replace(setup.config, seed=args.seed)
    if args.max_iters is not None:
        setup.config = dataclasses.replace(setup.config, max_iters=args.max_iters)
    if args.out:
        out_dir = Path(args.out)
    elif setup.output_dir:
        out_dir = Path(setup.output_dir)
    else:
        out_dir = Path("runs") / setup.name
    out_dir.mkdir(parents=True, exist_ok=True)

    summary = {
        "name": setup.name,
        "description": setup.description,
        "version": __version__,
        "seed": setup.config.seed,
    }
    try:
        result = solve_bilevel(
            setup.F, setup.Q, setup.omega, setup.bregman, setup.schedule, setup.x0, setup.config
        )
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        summary["status"] = "configuration_error"
        summary["message"] = str(exc)
        _json_dump(summary, out_dir / "summary.json")
        return 2
    except BregproxError as exc:
        summary["status"] = "runtime_error"
        summary["message"] = str(exc)
        _json_dump(summary, out_dir / "summary.json")
        print(f"error: {exc}", file=sys.stderr)
        return 3

    write_trace_csv(result.traces, out_dir / "trace.csv")
    audits = run_audits(setup, result)
    _json_dump(audits, out_dir / "audits.json")

    summary.update(
        {
            "status": result.status,
            "message": result.message,
            "iterations": result.iterations,
            "x_final": [float(v) for v in result.x_final.coords],
            "lower_level_gap": result.ep_f_residual.gap if result.ep_f_residual else None,
            "upper_level_gap": result.bilevel_residual.gap if result.bilevel_residual else None,
            "audits": {k: v.get("passed", None) for k, v in audits.items()},
        }
    )
    if setup.expected is not None:
        dev = float(np.abs(result.x_final.coords - setup.expected.coords).max())
        summary["expected_deviation"] = dev
        summary["expected_within_tolerance"] = bool(dev <= setup.expected.tolerance)
    _json_dump(summary, out_dir / "summary.json")

    if not args.quiet:
        print(f"{setup.name}: {result.status} after {result.iterations} iterations")
        print(f"  x_final = [{', '.join(_g17(v) for v in result.x_final.coords)}]")
        print(f"  lower-level gap = {_g17(result.ep_f_residual.gap)}")
        print(f"  artifacts in {out_dir}")
    return 0 if result.converged else 1


def cmd_suite(args) -> int:
    if args.name not in SUITES:
        print(
            f"error: unknown suite {args.name!r}; available: {', '.join(sorted(SUITES))}",
            file=sys.stderr,
        )
        return 2
    rep = run_suite(args.name, seed=args.seed if args.seed is not None else 0)
    if not args.quiet:
        print("\n".join(rep.lines()))
    else:
        print(f"suite {rep.suite}: {'PASS' if rep.passed else 'FAIL'}")
    return 0 if rep.passed else 1


def cmd_list_problems(args) -> int:
    entries = list_problems()
    if not entries:
        print("no problems registered")
        return 0
    width = max(len(name) for name, _ in entries)
    for name, desc in entries:
        print(f"{name:<{width}}  {desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bregprox",
        description="Bilevel equilibrium solves on Hadamard manifolds via "
        "Bregman proximal iterations",
    )
    parser.add_argument("--version", action="version", version=f"bregprox {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="solve a configured problem")
    p_run.add_argument("config", help="path to a TOML run configuration")
    p_run.add_argument("--out", help="output directory (default: runs/<name>)")
    p_run.add_argument("--seed", type=int, help="override the configured seed")
    p_run.add_argument("--max-iters", type=int, dest="max_iters", help="override max iterations")
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_suite = sub.add_parser("suite", help="run a named property suite")
    p_suite.add_argument("name", help="|".join(sorted(SUITES)))
    p_suite.add_argument("--seed", type=int, default=None)
    p_suite.add_argument("--quiet", action="store_true")
    p_suite.set_defaults(func=cmd_suite)

    p_list = sub.add_parser("list-problems", help="print the problem library")
    p_list.set_defaults(func=cmd_list_problems)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
