"""
Reading and writing run result files.

A result file is plain text: ``#`` header lines carrying the run metadata as JSON,
then one archive member per line as tab-separated groups
(id, decision, objectives, feasible flag). Floats use 17 significant digits, so
a file round-trips bit for bit.

CSV tables derived from runs start with `# key: json` lines carrying the seed list
and the configuration values they were computed from.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import pandas as pd
from pydantic import ValidationError

from src.mosar_models import ArchiveRecord, ProblemName, RunMetadata, RunResult

MAGIC_LINE = "# mosar-result v1"
META_PREFIX = "# meta: "
WALL_CLOCK_PREFIX = "# wall_clock_seconds: "
COLUMNS_LINE = "# columns: id\tdecision\tobjectives\tfeasible"
PROVENANCE_PREFIX = "# "


class ResultFileError(ValueError):
    """A result file is missing, truncated or malformed."""

    def __init__(self, path: Path | str, message: str) -> None:
        self.path = Path(path)
        super().__init__(f"{self.path}: {message}")


def _floats(values: list[float]) -> str:
    return " ".join(format(v, ".17g") for v in values)


def run_file_stem(metadata: RunMetadata) -> str:
    """File name stem that identifies a run inside a batch directory."""
    problem = metadata.problem
    parts = [problem.name.value]
    if problem.name == ProblemName.CONFIG:
        parts.append(f"sl{problem.side_length:g}")
    parts.extend((metadata.algorithm.value, f"s{metadata.seed}"))
    return "_".join(parts)


def format_result(result: RunResult) -> str:
    lines = [
        MAGIC_LINE,
        META_PREFIX + result.metadata.model_dump_json(),
        WALL_CLOCK_PREFIX + format(result.wall_clock_seconds, ".17g"),
        COLUMNS_LINE,
    ]
    for record in result.records:
        lines.append(
            "\t".join(
                (
                    str(record.id),
                    _floats(record.decision),
                    _floats(record.objectives),
                    "1" if record.feasible else "0",
                )
            )
        )
    return "\n".join(lines) + "\n"


def write_result(result: RunResult, path: Path) -> Path:
    """Write a result file, creating parent directories."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_result(result), encoding="utf-8")
    return path


def _parse_record(path: Path, line_number: int, line: str) -> ArchiveRecord:
    groups = line.split("\t")
    if len(groups) != 4:
        raise ResultFileError(path, f"line {line_number}: expected 4 tab-separated groups")
    try:
        return ArchiveRecord(
            id=int(groups[0]),
            decision=[float(v) for v in groups[1].split()],
            objectives=[float(v) for v in groups[2].split()],
            feasible=groups[3].strip() == "1",
        )
    except ValueError as e:
        raise ResultFileError(path, f"line {line_number}: {e}") from e


def parse_result(text: str, path: Path | str = "<string>") -> RunResult:
    """Parse result file contents; raises ResultFileError."""
    path = Path(path)
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC_LINE:
        raise ResultFileError(path, "not a result file (missing header)")

    metadata: RunMetadata | None = None
    wall_clock = 0.0
    records: list[ArchiveRecord] = []
    for line_number, line in enumerate(lines[1:], start=2):
        if line.startswith(META_PREFIX):
            try:
                metadata = RunMetadata.model_validate(json.loads(line[len(META_PREFIX) :]))
            except (json.JSONDecodeError, ValidationError) as e:
                raise ResultFileError(path, f"invalid metadata: {e}") from e
        elif line.startswith(WALL_CLOCK_PREFIX):
            try:
                wall_clock = float(line[len(WALL_CLOCK_PREFIX) :])
            except ValueError as e:
                raise ResultFileError(path, f"invalid wall clock: {e}") from e
        elif line.startswith("#") or not line.strip():
            continue
        else:
            records.append(_parse_record(path, line_number, line))

    if metadata is None:
        raise ResultFileError(path, "metadata line missing")
    if len(records) != metadata.archive_size:
        raise ResultFileError(
            path, f"archive size {metadata.archive_size} but {len(records)} rows (truncated?)"
        )
    return RunResult(metadata=metadata, records=records, wall_clock_seconds=wall_clock)


def read_result(path: Path) -> RunResult:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ResultFileError(path, f"cannot read: {e}") from e
    return parse_result(text, path)


def validate_result_file(path: Path) -> tuple[bool, RunResult | None, str]:
    """
    Validate a result file.

    Returns:
        Tuple of (is_valid, result, error_message)
    """
    try:
        return True, read_result(path), ""
    except ResultFileError as e:
        return False, None, str(e)


def deterministic_payload(text: str) -> str:
    """File contents without the wall-clock line, for reproducibility checks."""
    return "\n".join(line for line in text.splitlines() if not line.startswith(WALL_CLOCK_PREFIX))


def front_frame(result: RunResult) -> pd.DataFrame:
    """Feasible members on the two metric objectives, one row per point."""
    i, j = result.metadata.metric_projection
    names = result.metadata.objective_names or [f"f{k + 1}" for k in range(max(i, j) + 1)]
    return pd.DataFrame(
        {
            "id": [r.id for r in result.feasible_records],
            names[i]: [r.objectives[i] for r in result.feasible_records],
            names[j]: [r.objectives[j] for r in result.feasible_records],
        }
    )


def write_front_csv(result: RunResult, path: Path) -> Path:
    return write_table(front_frame(result), path, run_provenance(result.metadata), "%.17g")


# ============================================================================
# Tables With Provenance Headers
# ============================================================================

RUN_CONFIG_FIELDS = {
    "problem",
    "algorithm",
    "seed",
    "experiment_seeds",
    "schedule",
    "move",
    "literal_average",
}


def run_provenance(metadata: RunMetadata) -> dict[str, Any]:
    """Configuration values that reproduce one run."""
    return metadata.model_dump(mode="json", include=RUN_CONFIG_FIELDS)


def batch_provenance(results: Sequence[RunResult]) -> dict[str, Any]:
    """Seed list of a batch plus each distinct run configuration in it."""
    configurations: list[dict[str, Any]] = []
    experiment_seeds: list[int] = []
    for result in results:
        config = run_provenance(result.metadata)
        config.pop("seed")
        experiment_seeds.extend(config.pop("experiment_seeds") or [])
        if config not in configurations:
            configurations.append(config)
    return {
        "seeds": sorted({result.metadata.seed for result in results}),
        "experiment_seeds": sorted(set(experiment_seeds)),
        "configurations": configurations,
    }


def write_table(
    frame: pd.DataFrame,
    path: Path,
    provenance: Mapping[str, Any],
    float_format: str = "%.10g",
) -> Path:
    """CSV preceded by one ``# key: json`` line per provenance entry."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for key, value in provenance.items():
            handle.write(f"{PROVENANCE_PREFIX}{key}: {json.dumps(value, sort_keys=True)}\n")
        frame.to_csv(handle, index=False, float_format=float_format)
    return path


def read_table(path: Path, **kwargs: Any) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", **kwargs)


def read_provenance(path: Path) -> dict[str, Any]:
    """Provenance header of a table written by `write_table`."""
    provenance: dict[str, Any] = {}
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith(PROVENANCE_PREFIX):
                break
            key, _, value = line[len(PROVENANCE_PREFIX) :].partition(": ")
            try:
                provenance[key] = json.loads(value)
            except json.JSONDecodeError as e:
                raise ResultFileError(path, f"bad provenance line for {key!r}: {e}") from e
    return provenance
