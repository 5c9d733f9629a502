"""
Optimization problems behind a uniform interface.

Each problem maps a decision vector to a combined objective vector whose trailing
entries are constraint violations (zero when satisfied).
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from src.geometry import CylinderPose, SceneSummary, scene_summary
from src.mosar_models import BoundaryPolicy, EnvelopeMode, ProblemName, ProblemSpec, SceneConfig
from src.pareto import ContractViolation, ObjectiveVector

OPEN_BOUND_MARGIN = 1e-9
BENCHMARK_OBJECTIVE_NAMES = ("f1", "f2", "c1", "c2")
TNK_MOVE_SPAN = math.pi


@dataclass(frozen=True, slots=True)
class MoveGroup:
    """Free variables of one cylinder, split by move kind."""

    cylinder: int
    translation: tuple[int, ...]
    rotation: tuple[int, ...]


@dataclass(frozen=True)
class ProblemDescriptor:
    """Static shape of a problem: bounds, objectives and which of them are constraints."""

    name: str
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    policies: tuple[BoundaryPolicy, ...]
    objective_count: int
    constraint_indices: tuple[int, ...]
    metric_projection: tuple[int, int] = (0, 1)
    variable_names: tuple[str, ...] = ()
    objective_names: tuple[str, ...] = ()
    move_groups: tuple[MoveGroup, ...] = field(default_factory=tuple)
    move_spans: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        k = len(self.lower)
        if len(self.upper) != k or len(self.policies) != k:
            raise ContractViolation(f"{self.name}: bounds and policies differ in length")
        if not all(math.isfinite(v) for v in (*self.lower, *self.upper)):
            raise ContractViolation(f"{self.name}: bounds must be finite")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper, strict=True)):
            raise ContractViolation(f"{self.name}: every lower bound must be below its upper")
        if any(not 0 <= i < self.objective_count for i in self.constraint_indices):
            raise ContractViolation(f"{self.name}: constraint index out of range")
        if len(self.metric_projection) != 2:
            raise ContractViolation(f"{self.name}: metric projection needs two indices")
        if self.move_spans and (
            len(self.move_spans) != k or any(not 0 < s < math.inf for s in self.move_spans)
        ):
            raise ContractViolation(f"{self.name}: one positive move span per variable")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def constraint_count(self) -> int:
        return len(self.constraint_indices)

    @property
    def lower_array(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def upper_array(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    @property
    def ranges(self) -> np.ndarray:
        return self.upper_array - self.lower_array

    @property
    def move_ranges(self) -> np.ndarray:
        """Spans that benchmark move scales are fractions of; the bound ranges by default."""
        if self.move_spans:
            return np.asarray(self.move_spans, dtype=float)
        return self.ranges


def random_decision(descriptor: ProblemDescriptor, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw inside the decision box."""
    return rng.uniform(descriptor.lower_array, descriptor.upper_array)


# ============================================================================
# Problem Base
# ============================================================================


class Problem(ABC):
    """Evaluates decision vectors of a fixed descriptor."""

    descriptor: ProblemDescriptor

    @property
    def name(self) -> str:
        return self.descriptor.name

    @abstractmethod
    def evaluate(self, decision: Sequence[float] | np.ndarray) -> ObjectiveVector:
        """Combined objective vector of one decision."""

    def random_decision(self, rng: np.random.Generator) -> np.ndarray:
        return random_decision(self.descriptor, rng)

    def _check(self, decision: Sequence[float] | np.ndarray) -> np.ndarray:
        x = np.asarray(decision, dtype=float)
        if x.shape != (self.descriptor.dimension,):
            raise ContractViolation(
                f"{self.name} expects {self.descriptor.dimension} variables, got {x.shape}"
            )
        return x


# ============================================================================
# Benchmarks
# ============================================================================


def srn_objectives(x1: Any, x2: Any) -> tuple[Any, Any, Any, Any]:
    """SRN objectives and violations; works on scalars and arrays alike."""
    f1 = 2.0 + (x1 - 2.0) ** 2 + (x2 - 2.0) ** 2
    f2 = 9.0 * x1 - (x2 - 1.0) ** 2
    c1 = np.maximum(0.0, x1**2 + x2**2 - 225.0)
    c2 = np.maximum(0.0, x1 - 3.0 * x2 + 10.0)
    return f1, f2, c1, c2


def tnk_objectives(x1: Any, x2: Any) -> tuple[Any, Any, Any, Any]:
    """TNK objectives (the variables themselves) and violations."""
    c1 = np.maximum(0.0, 1.0 + 0.1 * np.cos(16.0 * np.arctan2(x2, x1)) - x1**2 - x2**2)
    c2 = np.maximum(0.0, (x1 - 0.5) ** 2 + (x2 - 0.5) ** 2 - 0.5)
    return x1, x2, c1, c2


def _vector(values: tuple[Any, ...], constraint_count: int) -> ObjectiveVector:
    return ObjectiveVector.of((float(v) for v in values), constraint_count)


def evaluate_srn(x: Sequence[float] | np.ndarray) -> ObjectiveVector:
    return _vector(srn_objectives(float(x[0]), float(x[1])), 2)


def evaluate_tnk(x: Sequence[float] | np.ndarray) -> ObjectiveVector:
    return _vector(tnk_objectives(float(x[0]), float(x[1])), 2)


class SRNProblem(Problem):
    """Two variables in [-20, 20]^2, two objectives, two constraints."""

    def __init__(self) -> None:
        self.descriptor = ProblemDescriptor(
            name=ProblemName.SRN.value,
            lower=(-20.0, -20.0),
            upper=(20.0, 20.0),
            policies=(BoundaryPolicy.CLAMP,) * 2,
            objective_count=4,
            constraint_indices=(2, 3),
            variable_names=("x1", "x2"),
            objective_names=BENCHMARK_OBJECTIVE_NAMES,
        )

    def evaluate(self, decision: Sequence[float] | np.ndarray) -> ObjectiveVector:
        return evaluate_srn(self._check(decision))


class TNKProblem(Problem):
    """
    Two variables in the open box (0, upper)^2, two objectives, two constraints.
    Open bounds are kept by clamping a hair inside them.

    Moves are scaled to the classic (0, pi) box however far the bounds are enlarged;
    the feasible region never leaves it.
    """

    def __init__(self, upper: float = 100.0, move_span: float = TNK_MOVE_SPAN) -> None:
        if upper <= 2 * OPEN_BOUND_MARGIN:
            raise ContractViolation(f"TNK upper bound too small: {upper}")
        self.upper = upper
        span = min(move_span, upper - 2 * OPEN_BOUND_MARGIN)
        self.descriptor = ProblemDescriptor(
            name=ProblemName.TNK.value,
            lower=(OPEN_BOUND_MARGIN,) * 2,
            upper=(upper - OPEN_BOUND_MARGIN,) * 2,
            policies=(BoundaryPolicy.CLAMP,) * 2,
            objective_count=4,
            constraint_indices=(2, 3),
            variable_names=("x1", "x2"),
            objective_names=BENCHMARK_OBJECTIVE_NAMES,
            move_spans=(span, span),
        )

    def evaluate(self, decision: Sequence[float] | np.ndarray) -> ObjectiveVector:
        return evaluate_tnk(self._check(decision))


# ============================================================================
# Configuration Problem
# ============================================================================

CONFIG_OBJECTIVE_NAMES = ("volume", "line_length", "p_bounds", "p_lines", "p_clearance")


def _config_layout() -> tuple[tuple[str, ...], tuple[MoveGroup, ...]]:
    names: list[str] = ["x1", "y1"]
    groups: list[MoveGroup] = [MoveGroup(0, (0, 1), ())]
    for cylinder in range(1, 5):
        start = len(names)
        names.extend(f"{v}{cylinder + 1}" for v in ("x", "y", "z", "theta", "phi"))
        groups.append(
            MoveGroup(cylinder, (start, start + 1, start + 2), (start + 3, start + 4))
        )
    groups.append(MoveGroup(5, (len(names), len(names) + 1), ()))
    names.extend(("y6", "z6"))
    return tuple(names), tuple(groups)


CONFIG_VARIABLE_NAMES, CONFIG_MOVE_GROUPS = _config_layout()


class ConfigurationProblem(Problem):
    """
    Six cylinders in a cube of side SL: minimize envelope volume and connective
    length subject to containment, line-length and clearance penalties.

    Cylinder 1 sits on the top face pointing down; cylinder 6 sits on the x = SL
    face pointing along -x. Those fixed variables are not part of the decision.
    """

    def __init__(
        self,
        side_length: float,
        envelope_mode: EnvelopeMode = EnvelopeMode.EXACT,
        scene: SceneConfig | None = None,
    ) -> None:
        self.scene = scene or SceneConfig(side_length=side_length)
        if scene is not None and scene.side_length != side_length:
            raise ContractViolation("Scene side length disagrees with side_length")
        self.envelope_mode = EnvelopeMode(envelope_mode)
        sl = self.scene.side_length

        kinds = {
            "theta": (180.0, BoundaryPolicy.REFLECT),
            "phi": (360.0, BoundaryPolicy.WRAP),
        }
        upper_and_policy = [
            kinds.get(name.rstrip("0123456789"), (sl, BoundaryPolicy.CLAMP))
            for name in CONFIG_VARIABLE_NAMES
        ]

        self.descriptor = ProblemDescriptor(
            name=ProblemName.CONFIG.value,
            lower=(0.0,) * len(CONFIG_VARIABLE_NAMES),
            upper=tuple(hi for hi, _ in upper_and_policy),
            policies=tuple(policy for _, policy in upper_and_policy),
            objective_count=5,
            constraint_indices=(2, 3, 4),
            variable_names=CONFIG_VARIABLE_NAMES,
            objective_names=CONFIG_OBJECTIVE_NAMES,
            move_groups=CONFIG_MOVE_GROUPS,
        )

    @property
    def side_length(self) -> float:
        return self.scene.side_length

    def decode(self, decision: Sequence[float] | np.ndarray) -> list[CylinderPose]:
        """Six poses with the fixed contact variables filled in."""
        d = self._check(decision).tolist()
        sl = self.side_length
        poses = [CylinderPose(d[0], d[1], sl, 180.0, 0.0)]
        for cylinder in range(4):
            x, y, z, theta, phi = d[2 + 5 * cylinder : 7 + 5 * cylinder]
            poses.append(CylinderPose(x, y, z, theta, phi))
        poses.append(CylinderPose(sl, d[22], d[23], 90.0, 180.0))
        return poses

    def describe(self, decision: Sequence[float] | np.ndarray) -> SceneSummary:
        return scene_summary(self.decode(decision), self.scene, self.envelope_mode)

    def evaluate(self, decision: Sequence[float] | np.ndarray) -> ObjectiveVector:
        return ObjectiveVector(self.describe(decision).objectives, 3)


def evaluate_config(
    decision: Sequence[float] | np.ndarray,
    scene: SceneConfig,
    envelope_mode: EnvelopeMode = EnvelopeMode.EXACT,
) -> ObjectiveVector:
    return ConfigurationProblem(scene.side_length, envelope_mode, scene).evaluate(decision)


# ============================================================================
# Registry
# ============================================================================

_REGISTRY: dict[ProblemName, Callable[..., Problem]] = {
    ProblemName.SRN: lambda **_: SRNProblem(),
    ProblemName.TNK: lambda tnk_upper=100.0, **_: TNKProblem(tnk_upper),
    ProblemName.CONFIG: lambda side_length=None, envelope_mode=EnvelopeMode.EXACT, **_: (
        ConfigurationProblem(_require_side_length(side_length), envelope_mode)
    ),
}


def _require_side_length(side_length: float | None) -> float:
    if side_length is None:
        raise ContractViolation("The configuration problem needs side_length")
    return float(side_length)


def get_problem(name: str | ProblemName, **params: Any) -> Problem:
    """Build a problem by name ("srn", "tnk", "config")."""
    try:
        key = ProblemName(name)
    except ValueError as e:
        raise ContractViolation(f"Unknown problem: {name}") from e
    return _REGISTRY[key](**params)


def problem_from_spec(spec: ProblemSpec) -> Problem:
    return get_problem(spec.name, **spec.params())
