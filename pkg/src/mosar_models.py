"""
Annealing Toolkit Models

Pydantic models for validating run configuration, experiment definitions and the
metadata persisted with every run. Hot-path values (objective vectors, archive
entries, cylinder poses) are plain dataclasses in their own modules.
"""

from __future__ import annotations

import math
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

# ============================================================================
# Enums
# ============================================================================


class ProblemName(str, Enum):
    """Problems selectable by name"""

    SRN = "srn"
    TNK = "tnk"
    CONFIG = "config"


class Algorithm(str, Enum):
    """Annealing algorithms"""

    AMOSA = "amosa"
    MOSAR1 = "mosar1"
    MOSAR2 = "mosar2"


class EnvelopeMode(str, Enum):
    """How cylinder extents along an axis are computed"""

    EXACT = "exact"
    PAPER_LITERAL = "paper"


class BoundaryPolicy(str, Enum):
    """What happens to a perturbed variable that leaves its bounds"""

    CLAMP = "clamp"
    WRAP = "wrap"
    REFLECT = "reflect"


# ============================================================================
# Annealing Parameters
# ============================================================================


class Schedule(BaseModel):
    """
    Geometric cooling schedule T <- alpha * T from t_max while T > t_min,
    with a fixed number of candidate evaluations per temperature level.
    """

    t_max: float = Field(..., gt=0, description="Initial temperature")
    t_min: float = Field(..., gt=0, description="Final temperature (exclusive)")
    alpha: float = Field(..., gt=0, lt=1, description="Cooling rate")
    iters_per_temp: int = Field(..., gt=0, description="Iterations per temperature level")

    class Config:
        frozen = True

    @model_validator(mode="after")
    def check_temperature_order(self) -> Schedule:
        """Ensure the schedule actually cools"""
        if not self.t_max > self.t_min:
            raise ValueError(f"t_max ({self.t_max}) must be greater than t_min ({self.t_min})")
        return self

    def temperatures(self) -> list[float]:
        """Temperature of every level, computed as t_max * alpha**i to avoid drift."""
        levels: list[float] = []
        level = 0
        while (temperature := self.t_max * self.alpha**level) > self.t_min:
            levels.append(temperature)
            level += 1
        return levels

    @property
    def level_count(self) -> int:
        return len(self.temperatures())

    @property
    def evaluation_budget(self) -> int:
        """Main-loop candidate evaluations of one run."""
        return self.level_count * self.iters_per_temp


DEFAULT_SCHEDULES: dict[ProblemName, Schedule] = {
    ProblemName.SRN: Schedule(t_max=100.0, t_min=1e-4, alpha=0.8, iters_per_temp=81),
    ProblemName.TNK: Schedule(t_max=100.0, t_min=1e-4, alpha=0.8, iters_per_temp=162),
    ProblemName.CONFIG: Schedule(t_max=1000.0, t_min=1e-2, alpha=0.95, iters_per_temp=200),
}


class MoveConfig(BaseModel):
    """
    Laplace move routine parameters.

    The configuration problem moves one cylinder per iteration, either translating it
    (scale in inches) or rotating it (scale in degrees). Benchmarks move one variable
    with a scale proportional to its range.
    """

    translation_scale: float = Field(0.5, gt=0, description="Laplace scale for x, y, z (inches)")
    rotation_scale: float = Field(30.0, gt=0, description="Laplace scale for theta, phi (degrees)")
    translation_probability: float = Field(
        0.5, ge=0, le=1, description="Probability that a move is a translation"
    )
    benchmark_scale_fraction: float = Field(
        1.0 / 20.0, gt=0, description="Benchmark Laplace scale as a fraction of the move range"
    )

    class Config:
        frozen = True


# ============================================================================
# Configuration Problem Scene
# ============================================================================


class CylinderSpec(BaseModel):
    """Cylinder dimensions in inches"""

    radius: float = Field(..., gt=0, description="Radius r (inches)")
    length: float = Field(..., gt=0, description="Axis length l (inches)")

    class Config:
        frozen = True


DEFAULT_CYLINDER_SPECS: tuple[CylinderSpec, ...] = (
    CylinderSpec(radius=0.625, length=5.0),
    CylinderSpec(radius=0.625, length=5.0),
    CylinderSpec(radius=0.5, length=4.0),
    CylinderSpec(radius=0.5, length=4.0),
    CylinderSpec(radius=0.5, length=4.0),
    CylinderSpec(radius=0.375, length=3.0),
)

# (start cylinder, end cylinder), 0-based: cylinder k is index k - 1
DEFAULT_CONNECTIVITY: tuple[tuple[int, int], ...] = (
    (0, 5),
    (5, 1),
    (1, 3),
    (3, 2),
    (2, 4),
    (4, 0),
)


class SceneConfig(BaseModel):
    """
    Cube and cylinder set of the configuration problem.

    The cube spans [0, side_length] on every axis. Line limits apply to the
    connections 2 -> 4 (5 - a inches) and 4 -> 3 (3 - a inches).
    """

    side_length: float = Field(..., gt=0, description="Cube side length SL (inches)")
    specs: tuple[CylinderSpec, ...] = Field(DEFAULT_CYLINDER_SPECS, description="Six cylinders")
    connectivity: tuple[tuple[int, int], ...] = Field(
        DEFAULT_CONNECTIVITY, description="Connective lines as (start, end) cylinder indices"
    )
    line_slack: float = Field(1.0, ge=0, description="Connective-length slack a")
    clearance: float = Field(0.5, ge=0, description="Minimum spacing between cylinder bodies")

    class Config:
        frozen = True

    @field_validator("specs")
    @classmethod
    def validate_six_cylinders(cls, v: tuple[CylinderSpec, ...]) -> tuple[CylinderSpec, ...]:
        if len(v) != 6:
            raise ValueError(f"Scene needs exactly six cylinders, got {len(v)}")
        return v

    @field_validator("connectivity")
    @classmethod
    def validate_connectivity(
        cls, v: tuple[tuple[int, int], ...]
    ) -> tuple[tuple[int, int], ...]:
        if tuple(tuple(pair) for pair in v) != DEFAULT_CONNECTIVITY:
            raise ValueError("Connectivity must be the fixed six-line loop 1-6-2-4-3-5-1")
        return v

    @property
    def radii(self) -> np.ndarray:
        return np.array([spec.radius for spec in self.specs])

    @property
    def lengths(self) -> np.ndarray:
        return np.array([spec.length for spec in self.specs])

    @property
    def line_limits(self) -> dict[tuple[int, int], float]:
        """Upper bounds of the two restricted connective lines."""
        return {(1, 3): 5.0 - self.line_slack, (3, 2): 3.0 - self.line_slack}


# ============================================================================
# Problem and Experiment Definitions
# ============================================================================


DESK_SL_GRID: tuple[float, ...] = (9.4, 9.0, 8.6, 8.2)
FULL_SL_GRID: tuple[float, ...] = tuple(round(9.4 - 0.1 * i, 1) for i in range(13))


class ProblemSpec(BaseModel):
    """Problem name plus the parameters needed to build it"""

    name: ProblemName
    side_length: float | None = Field(None, gt=0, description="Cube side length (config only)")
    tnk_upper: float = Field(100.0, gt=0, description="Upper bound of both TNK variables")
    envelope_mode: EnvelopeMode = Field(EnvelopeMode.EXACT, description="Extent computation")

    class Config:
        frozen = True

    @model_validator(mode="after")
    def check_side_length(self) -> ProblemSpec:
        """Configuration problem needs a cube"""
        if self.name == ProblemName.CONFIG and self.side_length is None:
            raise ValueError("side_length is required for the configuration problem")
        return self

    def params(self) -> dict[str, Any]:
        """Only the parameters that matter for this problem."""
        if self.name == ProblemName.CONFIG:
            return {"side_length": self.side_length, "envelope_mode": self.envelope_mode.value}
        if self.name == ProblemName.TNK:
            return {"tnk_upper": self.tnk_upper}
        return {}


class ExperimentConfig(BaseModel):
    """
    Batch of runs: every algorithm on every seed, and for the configuration
    problem on every cube side length of the grid.
    """

    problem: ProblemName = Field(..., description="Problem to solve")
    algorithms: list[Algorithm] = Field(
        default_factory=lambda: list(Algorithm), min_length=1, description="Algorithms to compare"
    )
    seeds: list[int] = Field(
        default_factory=lambda: list(range(1, 11)), min_length=1, description="RNG seeds"
    )
    sl_grid: list[float] = Field(
        default_factory=lambda: list(DESK_SL_GRID), description="Cube side lengths (config only)"
    )
    schedule: Schedule | None = Field(None, description="Overrides the problem default schedule")
    move: MoveConfig = Field(default_factory=MoveConfig)
    envelope_mode: EnvelopeMode = EnvelopeMode.EXACT
    tnk_upper: float = Field(100.0, gt=0)
    literal_average: bool = Field(
        False, description="Use k instead of k + 1 when averaging in the re-seed branch"
    )
    output_dir: Path = Field(Path("results"), description="Where result files are written")

    @field_validator("sl_grid")
    @classmethod
    def validate_sl_grid(cls, v: list[float]) -> list[float]:
        if any(not math.isfinite(sl) or sl <= 0 for sl in v):
            raise ValueError("Every side length must be a positive finite number")
        return v

    @model_validator(mode="after")
    def check_grid_for_config(self) -> ExperimentConfig:
        if self.problem == ProblemName.CONFIG and not self.sl_grid:
            raise ValueError("Configuration experiments need at least one side length")
        return self

    def resolved_schedule(self) -> Schedule:
        return self.schedule or DEFAULT_SCHEDULES[self.problem]

    def problem_specs(self) -> list[ProblemSpec]:
        """One problem per side length for config, a single problem otherwise."""
        if self.problem == ProblemName.CONFIG:
            return [
                ProblemSpec(name=self.problem, side_length=sl, envelope_mode=self.envelope_mode)
                for sl in self.sl_grid
            ]
        return [ProblemSpec(name=self.problem, tnk_upper=self.tnk_upper)]


# ============================================================================
# Run Results
# ============================================================================


class LevelTrace(BaseModel):
    """Archive state at the end of one temperature level"""

    temperature: float
    archive_size: int
    feasible_count: int


class ArchiveRecord(BaseModel):
    """One archive member as persisted"""

    id: int
    decision: list[float]
    objectives: list[float]
    feasible: bool


class RunMetadata(BaseModel):
    """
    Everything needed to reproduce and interpret one run. Echoed into every
    result file header.
    """

    problem: ProblemSpec
    algorithm: Algorithm
    seed: int
    schedule: Schedule
    move: MoveConfig
    literal_average: bool = False
    experiment_seeds: list[int] | None = Field(
        None, description="Seed list of the batch this run belongs to"
    )
    evaluations: int = Field(..., ge=0, description="Main-loop candidate evaluations")
    initial_evaluations: int = Field(..., ge=0, description="Archive initialization evaluations")
    constraint_count: int = Field(..., ge=0)
    objective_names: list[str] = Field(default_factory=list)
    metric_projection: tuple[int, int]
    archive_size: int = Field(..., ge=0)
    feasible_count: int = Field(..., ge=0)
    first_feasible_temperature: float | None = Field(
        None, description="Temperature when a feasible solution first entered the archive"
    )
    case_counts: dict[str, int] = Field(default_factory=dict)
    trace: list[LevelTrace] = Field(default_factory=list)


class RunResult(BaseModel):
    """Final archive of one annealing run plus its metadata"""

    metadata: RunMetadata
    records: list[ArchiveRecord]
    wall_clock_seconds: float = Field(0.0, ge=0)

    @property
    def feasible_records(self) -> list[ArchiveRecord]:
        return [record for record in self.records if record.feasible]

    def metric_points(self) -> np.ndarray:
        """Feasible members projected on the two metric objectives, shape (n, 2)."""
        i, j = self.metadata.metric_projection
        points = [(r.objectives[i], r.objectives[j]) for r in self.feasible_records]
        return np.array(points, dtype=float).reshape(-1, 2)
