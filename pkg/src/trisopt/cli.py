"""Command-line interface: solve one scenario, sweep a parameter, or self-test.

Exit codes: 0 success, 1 infeasible scenario, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, build_scenario, load_config
from .harness import SWEEP_VARIABLES, AlternatingResult, SweepResult, alternating_optimize, sweep

TRACE_HEADER = "iter,sum_rate,p_k,P_t,interference,delta"


def write_trace_csv(result: AlternatingResult, path: Path) -> None:
    lines = [TRACE_HEADER]
    for tr in result.traces:
        lines.append(
            f"{tr.iteration},{tr.sum_rate!r},{tr.p_k!r},{tr.p_t!r},{tr.interference!r},{tr.delta!r}"
        )
    path.write_text("\n".join(lines) + "\n")


def write_summary_json(result: AlternatingResult, path: Path) -> None:
    summary = {
        "sum_rate": result.sum_rate,
        "iterations": result.iterations,
        "feasible": result.feasible,
        "p_k": result.split.p_k,
        "p_t": result.split.p_total,
    }
    path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")


def write_sweep_csv(result: SweepResult, path: Path) -> None:
    lines = [
        f"{result.variable},mean_sum_rate,mean_iterations,feasible_fraction,mean_p_t,min_p_t,max_interference"
    ]
    for i, value in enumerate(result.grid):
        lines.append(
            f"{value!r},{result.mean_sum_rate[i]!r},{result.mean_iterations[i]!r},"
            f"{result.feasible_fraction[i]!r},{result.mean_p_t[i]!r},{result.min_p_t[i]!r},"
            f"{result.max_interference[i]!r}"
        )
    path.write_text("\n".join(lines) + "\n")


def _parse_sweep_spec(spec: str) -> tuple[str, list[float]]:
    parts = spec.split(":")
    if len(parts) != 4:
        raise ValueError(f"--sweep expects <var>:<start>:<stop>:<steps>, got {spec!r}")
    var, start_s, stop_s, steps_s = parts
    if var not in SWEEP_VARIABLES:
        raise ValueError(f"unknown sweep variable {var!r} (expected one of {SWEEP_VARIABLES})")
    start, stop, steps = float(start_s), float(stop_s), int(steps_s)
    if steps < 1 or stop <= start:
        raise ValueError(f"--sweep needs stop > start and steps >= 1, got {spec!r}")
    grid = [float(v) for v in np.linspace(start, stop, steps)]
    return var, grid


def run_cli(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="trisopt",
        description="Sum-rate optimization for a transmissive-RIS NOMA downlink under an interference cap.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p_solve = commands.add_parser("solve", help="optimize a single scenario; writes trace.csv and summary.json")
    p_solve.add_argument("--config", default="defaults", help="config file path or the literal 'defaults'")
    p_solve.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_solve.add_argument("--out", default="out", help="output directory")

    p_sweep = commands.add_parser("sweep", help="sweep one parameter; writes sweep_<var>.csv")
    p_sweep.add_argument("--config", default="defaults")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--out", default="out")
    p_sweep.add_argument("--trials", type=int, default=20, help="channel draws per grid point")
    p_sweep.add_argument("--sweep", required=True, metavar="VAR:START:STOP:STEPS")
    p_sweep.add_argument("--workers", type=int, default=1, help="parallel workers (result is identical)")

    commands.add_parser("selftest", help="run the built-in oracle checks")

    args = parser.parse_args(argv)

    if args.command == "selftest":
        from .selftest import run_selftest

        return 0 if run_selftest() else 1

    try:
        values = load_config(args.config)
        scenario = build_scenario(values, seed_override=args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.command == "solve":
        result = alternating_optimize(scenario)
        write_trace_csv(result, out_dir / "trace.csv")
        write_summary_json(result, out_dir / "summary.json")
        status = "feasible" if result.feasible else "infeasible"
        print(
            f"{status}: sum rate {result.sum_rate:.6f} b/s/Hz after {result.iterations} iterations "
            f"(p_k={result.split.p_k:.4f}, P_t={result.split.p_total:.4f} W)"
        )
        if result.report is not None:
            print(f"binding constraint: {result.report.binding_constraint} ({result.report.details})")
        return 0 if result.feasible else 1

    try:
        variable, grid = _parse_sweep_spec(args.sweep)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = sweep(scenario, variable, grid, trials=args.trials, workers=args.workers)
    write_sweep_csv(result, out_dir / f"sweep_{variable}.csv")
    n_ok = sum(1 for frac in result.feasible_fraction if frac > 0)
    print(f"sweep over {variable}: {len(grid)} points x {args.trials} trials, {n_ok} points with feasible trials")
    if n_ok == 0:
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
