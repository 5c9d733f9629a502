"""
Experiment orchestration: single runs, seed batches and side-length sweeps,
per-run metrics and the mean/std summary tables built from them.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from src import metrics
from src.annealer import run
from src.mosar_models import (
    Algorithm,
    ArchiveRecord,
    ExperimentConfig,
    MoveConfig,
    ProblemSpec,
    RunMetadata,
    RunResult,
    Schedule,
)
from src.problems import problem_from_spec
from src.result_files import (
    batch_provenance,
    run_file_stem,
    write_front_csv,
    write_result,
    write_table,
)

logger = logging.getLogger(__name__)

SUMMARY_FILES = {
    "cardinality": "cardinality.csv",
    "minimal_spacing": "minimal_spacing.csv",
    "coverage": "coverage.csv",
    "accounted_proportion": "accounted_proportion.csv",
    "runs": "runs.csv",
}


class RunTask(BaseModel):
    """Everything one worker needs to reproduce a run"""

    problem: ProblemSpec
    algorithm: Algorithm
    seed: int
    schedule: Schedule
    move: MoveConfig = Field(default_factory=MoveConfig)
    literal_average: bool = False
    verify_invariants: bool = False
    experiment_seeds: list[int] | None = None


# ============================================================================
# Single Runs
# ============================================================================


def run_single(task: RunTask) -> RunResult:
    """Run one annealing job and package its archive with full provenance."""
    problem = problem_from_spec(task.problem)
    started = time.perf_counter()
    outcome = run(
        problem,
        task.algorithm,
        task.schedule,
        task.move,
        task.seed,
        literal_average=task.literal_average,
        verify_invariants=task.verify_invariants,
    )
    elapsed = time.perf_counter() - started
    logger.info(
        "Completed %s on %s seed=%d in %.2fs",
        task.algorithm.value,
        problem.name,
        task.seed,
        elapsed,
    )

    descriptor = problem.descriptor
    records = [
        ArchiveRecord(
            id=entry.id,
            decision=list(entry.decision),
            objectives=list(entry.objectives.values),
            feasible=entry.objectives.feasible,
        )
        for entry in outcome.archive
    ]
    metadata = RunMetadata(
        problem=task.problem,
        algorithm=task.algorithm,
        seed=task.seed,
        schedule=task.schedule,
        move=task.move,
        literal_average=task.literal_average,
        experiment_seeds=task.experiment_seeds,
        evaluations=outcome.evaluations,
        initial_evaluations=outcome.initial_evaluations,
        constraint_count=descriptor.constraint_count,
        objective_names=list(descriptor.objective_names),
        metric_projection=descriptor.metric_projection,
        archive_size=len(records),
        feasible_count=sum(r.feasible for r in records),
        first_feasible_temperature=outcome.first_feasible_temperature,
        case_counts=outcome.case_counts,
        trace=outcome.trace,
    )
    return RunResult(metadata=metadata, records=records, wall_clock_seconds=elapsed)


def execute_runs(tasks: Sequence[RunTask], workers: int = 1) -> list[RunResult]:
    """Run tasks in order, on a process pool when `workers` > 1. Results keep task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [run_single(task) for task in tasks]
    logger.info("Running %d tasks on %d worker processes", len(tasks), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_single, tasks))


def save_run(result: RunResult, output_dir: Path) -> Path:
    """Write the result file and its plot-ready front CSV; returns the result path."""
    stem = run_file_stem(result.metadata)
    path = write_result(result, output_dir / f"{stem}.txt")
    write_front_csv(result, output_dir / f"{stem}.front.csv")
    return path


# ============================================================================
# Per-Run Metrics
# ============================================================================


def run_metrics(
    result: RunResult,
    cache_dir: Path | None = None,
    resolution: int = metrics.DEFAULT_REFERENCE_RESOLUTION,
) -> dict[str, float]:
    """Indicators of one run. IGD and HV only exist for the benchmarks."""
    points = result.metric_points()
    values: dict[str, float] = {
        "cardinality": metrics.cardinality(points),
        "minimal_spacing": metrics.minimal_spacing(points),
        "spacing": metrics.spacing(points),
    }
    problem = result.metadata.problem.name
    if problem in metrics.REFERENCE_BOXES:
        front = metrics.reference_front(problem, resolution, cache_dir)
        values["igd"] = metrics.igd(points, front)
        values["hv"] = metrics.hypervolume_2d(points, front)
    return values


def _instance(result: RunResult) -> tuple[str, float]:
    problem = result.metadata.problem
    side_length = problem.side_length if problem.side_length is not None else math.nan
    return problem.name.value, side_length


def runs_frame(
    results: Iterable[RunResult],
    cache_dir: Path | None = None,
    resolution: int = metrics.DEFAULT_REFERENCE_RESOLUTION,
) -> pd.DataFrame:
    """One row per run with its configuration and indicators."""
    rows: list[dict[str, Any]] = []
    for result in results:
        problem, side_length = _instance(result)
        meta = result.metadata
        rows.append(
            {
                "problem": problem,
                "side_length": side_length,
                "algorithm": meta.algorithm.value,
                "seed": meta.seed,
                "evaluations": meta.evaluations,
                "archive_size": meta.archive_size,
                "first_feasible_temperature": meta.first_feasible_temperature,
                "wall_clock_seconds": result.wall_clock_seconds,
                **run_metrics(result, cache_dir, resolution),
            }
        )
    return pd.DataFrame(rows)


# ============================================================================
# Summary Tables
# ============================================================================


@dataclass
class SummaryTables:
    """Mean/std tables over seeds, plus the per-run table they derive from."""

    runs: pd.DataFrame
    cardinality: pd.DataFrame
    minimal_spacing: pd.DataFrame
    coverage: pd.DataFrame
    accounted_proportion: pd.DataFrame
    extra: dict[str, pd.DataFrame] = field(default_factory=dict)
    provenance: dict[str, Any] = field(default_factory=dict)

    def write(self, output_dir: Path) -> list[Path]:
        """Every table gets the same provenance header."""
        written = [
            write_table(getattr(self, name), output_dir / filename, self.provenance)
            for name, filename in SUMMARY_FILES.items()
        ]
        written.extend(
            write_table(frame, output_dir / f"{name}.csv", self.provenance)
            for name, frame in self.extra.items()
        )
        return written


GROUP_KEYS = ["problem", "side_length", "algorithm"]


def mean_std_table(frame: pd.DataFrame, column: str) -> pd.DataFrame:
    """Mean and sample standard deviation of a per-run column per instance and algorithm."""
    table = (
        frame.groupby(GROUP_KEYS, dropna=False, sort=False)[column]
        .agg(mean="mean", std="std", runs="count")
        .reset_index()
    )
    return table


def _grouped_results(
    results: Sequence[RunResult],
) -> dict[tuple[str, float], dict[str, dict[int, RunResult]]]:
    groups: dict[tuple[str, float], dict[str, dict[int, RunResult]]] = {}
    for result in results:
        by_algorithm = groups.setdefault(_instance(result), {})
        by_algorithm.setdefault(result.metadata.algorithm.value, {})[result.metadata.seed] = result
    return groups


def coverage_table(results: Sequence[RunResult]) -> pd.DataFrame:
    """C(A, B) mean/std over seeds for every ordered algorithm pair, runs paired by seed."""
    rows: list[dict[str, Any]] = []
    for (problem, side_length), by_algorithm in _grouped_results(results).items():
        for a, b in permutations(by_algorithm, 2):
            seeds = sorted(set(by_algorithm[a]) & set(by_algorithm[b]))
            values = [
                metrics.coverage(
                    by_algorithm[a][seed].metric_points(), by_algorithm[b][seed].metric_points()
                )
                for seed in seeds
            ]
            series = pd.Series(values, dtype=float)
            rows.append(
                {
                    "problem": problem,
                    "side_length": side_length,
                    "pair": f"C({a},{b})",
                    "a": a,
                    "b": b,
                    "mean": series.mean(),
                    "std": series.std(),
                    "runs": len(values),
                }
            )
    columns = ["problem", "side_length", "pair", "a", "b", "mean", "std", "runs"]
    return pd.DataFrame(rows, columns=columns)


def accounted_proportion_table(results: Sequence[RunResult]) -> pd.DataFrame:
    """One row per instance, one column per algorithm."""
    rows: list[dict[str, Any]] = []
    for (problem, side_length), by_algorithm in _grouped_results(results).items():
        shares = metrics.accounted_proportion(
            {
                algorithm: [r.metric_points() for r in by_seed.values()]
                for algorithm, by_seed in by_algorithm.items()
            }
        )
        rows.append({"problem": problem, "side_length": side_length, **shares})
    return pd.DataFrame(rows)


def summarize(
    results: Sequence[RunResult],
    cache_dir: Path | None = None,
    resolution: int = metrics.DEFAULT_REFERENCE_RESOLUTION,
) -> SummaryTables:
    frame = runs_frame(results, cache_dir, resolution)
    extra = {
        column: mean_std_table(frame, column)
        for column in ("spacing", "igd", "hv")
        if column in frame.columns and frame[column].notna().any()
    }
    return SummaryTables(
        runs=frame,
        cardinality=mean_std_table(frame, "cardinality"),
        minimal_spacing=mean_std_table(frame, "minimal_spacing"),
        coverage=coverage_table(results),
        accounted_proportion=accounted_proportion_table(results),
        extra=extra,
        provenance=batch_provenance(results),
    )


# ============================================================================
# Experiments
# ============================================================================


def experiment_tasks(config: ExperimentConfig, verify_invariants: bool = False) -> list[RunTask]:
    schedule = config.resolved_schedule()
    return [
        RunTask(
            problem=spec,
            algorithm=algorithm,
            seed=seed,
            schedule=schedule,
            move=config.move,
            literal_average=config.literal_average,
            verify_invariants=verify_invariants,
            experiment_seeds=list(config.seeds),
        )
        for spec in config.problem_specs()
        for algorithm in config.algorithms
        for seed in config.seeds
    ]


@dataclass
class ExperimentOutcome:
    results: list[RunResult]
    result_files: list[Path]
    tables: SummaryTables
    table_files: list[Path]


def run_experiment(
    config: ExperimentConfig,
    workers: int = 1,
    cache_dir: Path | None = None,
    verify_invariants: bool = False,
) -> ExperimentOutcome:
    """Run every task of the experiment, persist each run, then write the summary tables."""
    tasks = experiment_tasks(config, verify_invariants)
    logger.info(
        "Experiment on %s: %d instance(s) x %d algorithm(s) x %d seed(s) = %d runs",
        config.problem.value,
        len(config.problem_specs()),
        len(config.algorithms),
        len(config.seeds),
        len(tasks),
    )
    results = execute_runs(tasks, workers)
    result_files = [save_run(result, config.output_dir) for result in results]
    tables = summarize(results, cache_dir)
    tables.provenance["experiment"] = config.model_dump(mode="json")
    table_files = tables.write(config.output_dir)
    return ExperimentOutcome(results, result_files, tables, table_files)


def best_objectives(result: RunResult) -> dict[str, float]:
    """Smallest value of each metric objective over the feasible members."""
    points = result.metric_points()
    i, j = result.metadata.metric_projection
    names = result.metadata.objective_names or [f"f{k + 1}" for k in range(max(i, j) + 1)]
    if len(points) == 0:
        return {}
    return {names[i]: float(np.min(points[:, 0])), names[j]: float(np.min(points[:, 1]))}
