"""
Command-line entry point: ``mosar solve | sweep | metrics``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import math
import sys
from collections.abc import Sequence
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from src import metrics
from src.harness import (
    RunTask,
    accounted_proportion_table,
    best_objectives,
    coverage_table,
    run_experiment,
    run_metrics,
    run_single,
    save_run,
)
from src.mosar_config import (
    HarnessSettings,
    configure_logging,
    parse_algorithms,
    parse_seeds,
    parse_sl_grid,
)
from src.mosar_models import (
    DEFAULT_SCHEDULES,
    FULL_SL_GRID,
    Algorithm,
    EnvelopeMode,
    ExperimentConfig,
    ProblemName,
    ProblemSpec,
    RunResult,
    Schedule,
)
from src.pareto import ContractViolation
from src.result_files import ResultFileError, batch_provenance, read_result, write_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

METRIC_NAMES = ("n", "igd", "hv", "c", "sm", "s", "p")


class UsageError(Exception):
    """Bad command-line input detected after argparse."""


# ============================================================================
# Parser
# ============================================================================


def _add_schedule_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("schedule (defaults depend on the problem)")
    group.add_argument("--tmax", type=float, help="Initial temperature")
    group.add_argument("--tmin", type=float, help="Final temperature")
    group.add_argument("--alpha", type=float, help="Cooling rate in (0, 1)")
    group.add_argument("--iters", type=int, help="Iterations per temperature level")


def build_parser(settings: HarnessSettings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mosar", description="Constrained multi-objective simulated annealing"
    )
    parser.add_argument("--log-level", default=None, help="Overrides LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="Run one annealing job")
    solve.add_argument("--problem", required=True, choices=[p.value for p in ProblemName])
    solve.add_argument("--algo", required=True, choices=[a.value for a in Algorithm])
    solve.add_argument("--seed", type=int, default=1)
    solve.add_argument("--sl", type=float, help="Cube side length (config problem)")
    solve.add_argument("--tnk-upper", type=float, default=100.0, help="TNK upper bound")
    solve.add_argument(
        "--envelope", choices=[m.value for m in EnvelopeMode], default=EnvelopeMode.EXACT.value
    )
    solve.add_argument("--literal-average", action="store_true")
    solve.add_argument("--verify-invariants", action="store_true")
    solve.add_argument("--out", type=Path, default=settings.output_dir, help="Output directory")
    _add_schedule_flags(solve)

    sweep = commands.add_parser("sweep", help="Run seed batches over a side-length grid")
    sweep.add_argument("--config", type=Path, help="ExperimentConfig JSON (flags are ignored)")
    sweep.add_argument(
        "--problem", choices=[p.value for p in ProblemName], default=ProblemName.CONFIG.value
    )
    sweep.add_argument("--sl-grid", help="Comma-separated side lengths, e.g. 9.4,9.0")
    sweep.add_argument("--full-grid", action="store_true", help="All 13 side lengths 9.4..8.2")
    sweep.add_argument("--seeds", default="1..10", help="e.g. 1..10 or 1,2,5")
    sweep.add_argument("--algos", default=",".join(a.value for a in Algorithm))
    sweep.add_argument(
        "--envelope", choices=[m.value for m in EnvelopeMode], default=EnvelopeMode.EXACT.value
    )
    sweep.add_argument("--tnk-upper", type=float, default=100.0)
    sweep.add_argument("--literal-average", action="store_true")
    sweep.add_argument("--workers", type=int, default=settings.workers)
    sweep.add_argument("--out", type=Path, default=settings.output_dir)
    _add_schedule_flags(sweep)

    metrics_cmd = commands.add_parser("metrics", help="Indicators of stored result files")
    metrics_cmd.add_argument("--inputs", required=True, help="Glob of result files")
    metrics_cmd.add_argument("--against", help="Glob of result files to compare with")
    metrics_cmd.add_argument(
        "--metrics", default=",".join(METRIC_NAMES), help=f"Subset of {','.join(METRIC_NAMES)}"
    )
    metrics_cmd.add_argument(
        "--resolution", type=int, default=metrics.DEFAULT_REFERENCE_RESOLUTION
    )
    metrics_cmd.add_argument("--out", type=Path, help="Write the per-file table as CSV")
    return parser


def _schedule(args: argparse.Namespace, problem: ProblemName) -> Schedule:
    overrides = {
        "t_max": args.tmax,
        "t_min": args.tmin,
        "alpha": args.alpha,
        "iters_per_temp": args.iters,
    }
    base = DEFAULT_SCHEDULES[problem].model_dump()
    base.update({k: v for k, v in overrides.items() if v is not None})
    return Schedule.model_validate(base)


# ============================================================================
# Commands
# ============================================================================


def cmd_solve(args: argparse.Namespace, settings: HarnessSettings) -> int:
    problem = ProblemName(args.problem)
    if problem == ProblemName.CONFIG and args.sl is None:
        raise UsageError("--sl is required for the configuration problem")
    spec = ProblemSpec(
        name=problem,
        side_length=args.sl if problem == ProblemName.CONFIG else None,
        tnk_upper=args.tnk_upper,
        envelope_mode=EnvelopeMode(args.envelope),
    )
    task = RunTask(
        problem=spec,
        algorithm=Algorithm(args.algo),
        seed=args.seed,
        schedule=_schedule(args, problem),
        literal_average=args.literal_average,
        verify_invariants=args.verify_invariants or settings.verify_invariants,
    )
    result = run_single(task)
    path = save_run(result, args.out)

    meta = result.metadata
    print(f"Result written to: {path}")
    print(f"Evaluations: {meta.evaluations} (+{meta.initial_evaluations} initial)")
    print(f"Archive size: {meta.archive_size}")
    print(f"Feasible solutions: {meta.feasible_count}")
    for name, value in best_objectives(result).items():
        print(f"  best {name}: {value:.6g}")
    return EXIT_OK


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"Cannot read experiment config {args.config}: {e}") from e
        return ExperimentConfig.model_validate(data)

    problem = ProblemName(args.problem)
    try:
        fields = {
            "problem": problem,
            "algorithms": parse_algorithms(args.algos),
            "seeds": parse_seeds(args.seeds),
            "envelope_mode": EnvelopeMode(args.envelope),
            "tnk_upper": args.tnk_upper,
            "literal_average": args.literal_average,
            "output_dir": args.out,
            "schedule": _schedule(args, problem),
        }
        if args.full_grid:
            fields["sl_grid"] = list(FULL_SL_GRID)
        elif args.sl_grid:
            fields["sl_grid"] = parse_sl_grid(args.sl_grid)
    except ValueError as e:
        raise UsageError(str(e)) from e
    return ExperimentConfig.model_validate(fields)


def cmd_sweep(args: argparse.Namespace, settings: HarnessSettings) -> int:
    config = _experiment_config(args)
    outcome = run_experiment(
        config,
        workers=max(1, args.workers),
        cache_dir=settings.cache_dir,
        verify_invariants=settings.verify_invariants,
    )
    print(f"{len(outcome.result_files)} result files written to: {config.output_dir}")
    print("\nCardinality:")
    print(outcome.tables.cardinality.to_string(index=False))
    print("\nMinimal spacing:")
    print(outcome.tables.minimal_spacing.to_string(index=False))
    print("\nAccounted proportion:")
    print(outcome.tables.accounted_proportion.to_string(index=False))
    return EXIT_OK


def _expand(pattern: str) -> list[Path]:
    matches = sorted(glob.glob(pattern))
    if not matches and Path(pattern).exists():
        matches = [pattern]
    return [Path(m) for m in matches]


def _metric_row(
    path: Path, result: RunResult, selected: set[str], settings: HarnessSettings, resolution: int
) -> dict[str, object]:
    meta = result.metadata
    values = run_metrics(result, settings.cache_dir, resolution)
    row: dict[str, object] = {
        "file": str(path),
        "problem": meta.problem.name.value,
        "side_length": meta.problem.side_length,
        "algorithm": meta.algorithm.value,
        "seed": meta.seed,
    }
    keys = {"n": "cardinality", "sm": "minimal_spacing", "s": "spacing", "igd": "igd", "hv": "hv"}
    for flag, key in keys.items():
        if flag in selected and key in values:
            value = values[key]
            row[key] = "empty" if key == "igd" and math.isinf(value) else value
    return row


def cmd_metrics(args: argparse.Namespace, settings: HarnessSettings) -> int:
    selected = {m.strip().lower() for m in args.metrics.split(",") if m.strip()}
    unknown = selected - set(METRIC_NAMES)
    if unknown or not selected:
        raise UsageError(f"Unknown metrics {sorted(unknown)}; choose from {','.join(METRIC_NAMES)}")

    inputs = _expand(args.inputs)
    against = _expand(args.against) if args.against else []
    if not inputs:
        raise UsageError(f"No result files match {args.inputs}")
    if args.against and not against:
        raise UsageError(f"No result files match {args.against}")

    loaded = {path: read_result(path) for path in [*inputs, *against]}
    table = pd.DataFrame(
        [_metric_row(p, loaded[p], selected, settings, args.resolution) for p in inputs]
    )
    print(table.to_string(index=False))

    extra: dict[str, pd.DataFrame] = {}
    if "c" in selected:
        if against:
            points = {p: loaded[p].metric_points() for p in [*inputs, *against]}
            rows = [
                {
                    "a": str(a),
                    "b": str(b),
                    "C(a,b)": metrics.coverage(points[a], points[b]),
                    "C(b,a)": metrics.coverage(points[b], points[a]),
                }
                for a in inputs
                for b in against
            ]
            extra["coverage"] = pd.DataFrame(rows)
        else:
            extra["coverage"] = coverage_table([loaded[p] for p in inputs])
    if "p" in selected:
        extra["accounted_proportion"] = accounted_proportion_table(list(loaded.values()))

    for name, frame in extra.items():
        print(f"\n{name.replace('_', ' ').capitalize()}:")
        print(frame.to_string(index=False))

    if args.out is not None:
        provenance = {
            "inputs": args.inputs,
            "against": args.against,
            "metrics": sorted(selected),
            "resolution": args.resolution,
            **batch_provenance(list(loaded.values())),
        }
        write_table(table, args.out, provenance)
        for name, frame in extra.items():
            write_table(frame, args.out.with_name(f"{args.out.stem}_{name}.csv"), provenance)
        print(f"\nMetrics written to: {args.out}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "metrics": cmd_metrics}


def main(argv: Sequence[str] | None = None) -> int:
    settings = HarnessSettings.from_env()
    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    configure_logging(args.log_level or settings.log_level)

    try:
        return COMMANDS[args.command](args, settings)
    except (UsageError, ValidationError, ContractViolation) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ResultFileError as e:
        print(f"Error: malformed result file {e.path}: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as e:
        logger.error("Run failed: %s", e)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILURE


def run_cli() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run_cli()
