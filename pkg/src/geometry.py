"""
Cylinder geometry for the configuration problem.

Six cylinders live in an axis-aligned cube [0, SL]^3. Everything here is a pure
function of the poses; lengths are inches and angles degrees.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import IntEnum
from typing import Any

import numpy as np

from src.mosar_models import CylinderSpec, EnvelopeMode, SceneConfig

SEGMENT_EPSILON = 1e-12
PARALLEL_TOLERANCE = 1e-12


class Axis(IntEnum):
    X = 0
    Y = 1
    Z = 2


# ============================================================================
# Poses
# ============================================================================


def normalize_angles(theta: float, phi: float) -> tuple[float, float]:
    """Map (theta, phi) to theta in [0, 180], phi in [0, 360) with the same direction."""
    theta = theta % 360.0
    if theta > 180.0:
        theta = 360.0 - theta
        phi += 180.0
    return theta, phi % 360.0


@dataclass(frozen=True, slots=True)
class CylinderPose:
    """Base-center position plus axis direction (yaw theta, pitch phi)."""

    x: float
    y: float
    z: float
    theta: float
    phi: float

    @property
    def base(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def normalized(self) -> CylinderPose:
        theta, phi = normalize_angles(self.theta, self.phi)
        return CylinderPose(self.x, self.y, self.z, theta, phi)


def axis_direction(theta: float, phi: float) -> np.ndarray:
    """Unit axis vector (sin t cos p, sin t sin p, cos t)."""
    t, p = np.radians(theta), np.radians(phi)
    return np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])


def cylinder_end(pose: CylinderPose, spec: CylinderSpec) -> np.ndarray:
    """Center of the far cap."""
    return pose.base + spec.length * axis_direction(pose.theta, pose.phi)


@dataclass(frozen=True)
class _Layout:
    bases: np.ndarray  # (n, 3)
    ends: np.ndarray  # (n, 3)
    directions: np.ndarray  # (n, 3)
    radii: np.ndarray  # (n,)


def _layout(poses: Sequence[CylinderPose], specs: Sequence[CylinderSpec]) -> _Layout:
    if len(poses) != len(specs):
        raise ValueError(f"{len(poses)} poses for {len(specs)} cylinders")
    angles = np.radians(np.array([(p.theta, p.phi) for p in poses], dtype=float))
    sin_t = np.sin(angles[:, 0])
    directions = np.column_stack(
        (sin_t * np.cos(angles[:, 1]), sin_t * np.sin(angles[:, 1]), np.cos(angles[:, 0]))
    )
    bases = np.array([(p.x, p.y, p.z) for p in poses], dtype=float)
    lengths = np.array([s.length for s in specs], dtype=float)
    radii = np.array([s.radius for s in specs], dtype=float)
    return _Layout(bases, bases + lengths[:, np.newaxis] * directions, directions, radii)


# ============================================================================
# Extents and Envelope
# ============================================================================


def _cap_extents(layout: _Layout, mode: EnvelopeMode) -> tuple[np.ndarray, np.ndarray]:
    """How far the body reaches past the axis end points, below and above, shape (n, 3)."""
    r = layout.radii[:, np.newaxis]
    u = layout.directions
    if mode == EnvelopeMode.EXACT:
        reach = r * np.sqrt(np.clip(1.0 - u**2, 0.0, None))
        return reach, reach
    # Literal form: |r sin t cos p|, |r sin t sin p| on x and y; z mixes |r cos t| and |r sin t|.
    above = r * np.abs(u)
    below = above.copy()
    below[:, Axis.Z] = layout.radii * np.sqrt(np.clip(1.0 - u[:, Axis.Z] ** 2, 0.0, None))
    return below, above


def _extent_bounds(layout: _Layout, mode: EnvelopeMode) -> tuple[np.ndarray, np.ndarray]:
    below, above = _cap_extents(layout, mode)
    lows = np.minimum(layout.bases, layout.ends) - below
    highs = np.maximum(layout.bases, layout.ends) + above
    return lows, highs


def axis_extent(
    pose: CylinderPose,
    spec: CylinderSpec,
    axis: Axis,
    mode: EnvelopeMode = EnvelopeMode.EXACT,
) -> tuple[float, float]:
    """(min, max) reach of one cylinder body along an axis."""
    lows, highs = _extent_bounds(_layout([pose], [spec]), mode)
    return float(lows[0, axis]), float(highs[0, axis])


@dataclass(frozen=True, slots=True)
class Envelope:
    """Axis-aligned bounding box of all cylinders."""

    lows: tuple[float, float, float]
    highs: tuple[float, float, float]

    @property
    def x_e(self) -> float:
        return self.highs[0] - self.lows[0]

    @property
    def y_e(self) -> float:
        return self.highs[1] - self.lows[1]

    @property
    def z_e(self) -> float:
        return self.highs[2] - self.lows[2]

    @property
    def volume(self) -> float:
        return self.x_e * self.y_e * self.z_e


def _envelope(layout: _Layout, mode: EnvelopeMode) -> Envelope:
    lows, highs = _extent_bounds(layout, mode)
    lo, hi = lows.min(axis=0), highs.max(axis=0)
    return Envelope(
        (float(lo[0]), float(lo[1]), float(lo[2])), (float(hi[0]), float(hi[1]), float(hi[2]))
    )


def envelope(
    poses: Sequence[CylinderPose],
    scene: SceneConfig,
    mode: EnvelopeMode = EnvelopeMode.EXACT,
) -> Envelope:
    return _envelope(_layout(poses, scene.specs), mode)


# ============================================================================
# Connective Lines
# ============================================================================


def _window_distance(layout: _Layout, i: int, j: int) -> float:
    midpoint = 0.5 * (layout.bases[i] + layout.ends[i])
    return float(np.linalg.norm(midpoint - layout.bases[j]))


def window_distance(
    i: int, j: int, poses: Sequence[CylinderPose], specs: Sequence[CylinderSpec]
) -> float:
    """Distance from the axis midpoint of cylinder i to the base center of cylinder j."""
    if i == j:
        raise ValueError("Window distance needs two different cylinders")
    return _window_distance(_layout(poses, specs), i, j)


def _connective_lengths(layout: _Layout, scene: SceneConfig) -> dict[tuple[int, int], float]:
    return {(i, j): _window_distance(layout, i, j) for i, j in scene.connectivity}


def total_connective_length(poses: Sequence[CylinderPose], scene: SceneConfig) -> float:
    return sum(_connective_lengths(_layout(poses, scene.specs), scene).values())


# ============================================================================
# Segment Distances
# ============================================================================


def segment_distances(
    a0: np.ndarray, a1: np.ndarray, b0: np.ndarray, b1: np.ndarray
) -> np.ndarray:
    """
    Minimum distance between closed segments a0-a1 and b0-b1, broadcast over the
    leading dimensions. Clamped closest-point parameterization; segments may be points.
    """
    a0, a1, b0, b1 = (np.asarray(v, dtype=float) for v in (a0, a1, b0, b1))
    d1, d2, r = a1 - a0, b1 - b0, a0 - b0
    a = np.sum(d1 * d1, axis=-1)
    e = np.sum(d2 * d2, axis=-1)
    f = np.sum(d2 * r, axis=-1)
    c = np.sum(d1 * r, axis=-1)
    b = np.sum(d1 * d2, axis=-1)

    a_point = a <= SEGMENT_EPSILON
    e_point = e <= SEGMENT_EPSILON
    safe_a = np.where(a_point, 1.0, a)
    safe_e = np.where(e_point, 1.0, e)

    denom = a * e - b * b
    parallel = denom <= PARALLEL_TOLERANCE * a * e
    s = np.where(parallel, 0.0, np.clip((b * f - c * e) / np.where(parallel, 1.0, denom), 0, 1))
    t = (b * s + f) / safe_e
    s = np.where(
        t < 0.0,
        np.clip(-c / safe_a, 0.0, 1.0),
        np.where(t > 1.0, np.clip((b - c) / safe_a, 0.0, 1.0), s),
    )
    t = np.clip(t, 0.0, 1.0)

    # one or both segments collapsed to a point
    s = np.where(a_point, 0.0, np.where(e_point, np.clip(-c / safe_a, 0.0, 1.0), s))
    t = np.where(e_point, 0.0, np.where(a_point, np.clip(f / safe_e, 0.0, 1.0), t))

    closest_a = a0 + d1 * s[..., np.newaxis]
    closest_b = b0 + d2 * t[..., np.newaxis]
    return np.linalg.norm(closest_a - closest_b, axis=-1)


def segment_segment_distance(
    a0: Sequence[float], a1: Sequence[float], b0: Sequence[float], b1: Sequence[float]
) -> float:
    return float(segment_distances(np.asarray(a0), np.asarray(a1), np.asarray(b0), np.asarray(b1)))


def _axis_distance_matrix(layout: _Layout) -> np.ndarray:
    n = len(layout.radii)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    distances = segment_distances(layout.bases[i], layout.ends[i], layout.bases[j], layout.ends[j])
    np.fill_diagonal(distances, 0.0)
    return distances


def pairwise_axis_distances(
    poses: Sequence[CylinderPose], specs: Sequence[CylinderSpec]
) -> np.ndarray:
    """Matrix D(i, j) of shortest distances between cylinder axes."""
    return _axis_distance_matrix(_layout(poses, specs))


# ============================================================================
# Penalties
# ============================================================================


def _penalty_bounds(bounds: Envelope, side_length: float) -> float:
    over = sum(max(0.0, hi - side_length) for hi in bounds.highs)
    under = sum(max(0.0, -lo) for lo in bounds.lows)
    return over + under


def _penalty_lines(lengths: dict[tuple[int, int], float], scene: SceneConfig) -> float:
    return sum(max(0.0, lengths[pair] - limit) for pair, limit in scene.line_limits.items())


def _penalty_clearance(layout: _Layout, scene: SceneConfig) -> float:
    required = layout.radii[:, np.newaxis] + layout.radii[np.newaxis, :] + scene.clearance
    shortfall = np.clip(required - _axis_distance_matrix(layout), 0.0, None)
    np.fill_diagonal(shortfall, 0.0)
    # ordered pairs: every violating pair counts twice
    return float(shortfall.sum())


def penalty_bounds(
    poses: Sequence[CylinderPose],
    scene: SceneConfig,
    mode: EnvelopeMode = EnvelopeMode.EXACT,
) -> float:
    """Total overshoot of the envelope past the six cube faces."""
    return _penalty_bounds(envelope(poses, scene, mode), scene.side_length)


def penalty_lines(poses: Sequence[CylinderPose], scene: SceneConfig) -> float:
    """Excess length of the two restricted connective lines."""
    lengths = _connective_lengths(_layout(poses, scene.specs), scene)
    return _penalty_lines(lengths, scene)


def penalty_clearance(poses: Sequence[CylinderPose], scene: SceneConfig) -> float:
    """Summed clearance shortfall between cylinder axes over ordered pairs."""
    return _penalty_clearance(_layout(poses, scene.specs), scene)


# ============================================================================
# Full Evaluation
# ============================================================================


@dataclass(frozen=True)
class SceneSummary:
    """Every geometric quantity of one layout."""

    envelope: Envelope
    extents: np.ndarray  # (6, 3, 2): per cylinder, per axis, (min, max)
    connective_lengths: dict[tuple[int, int], float]
    axis_distances: np.ndarray
    penalty_bounds: float
    penalty_lines: float
    penalty_clearance: float

    @property
    def connective_length(self) -> float:
        return sum(self.connective_lengths.values())

    @property
    def objectives(self) -> tuple[float, float, float, float, float]:
        return (
            self.envelope.volume,
            self.connective_length,
            self.penalty_bounds,
            self.penalty_lines,
            self.penalty_clearance,
        )

    @property
    def feasible(self) -> bool:
        return max(self.penalty_bounds, self.penalty_lines, self.penalty_clearance) <= 1e-9

    def to_dict(self) -> dict[str, Any]:
        return {
            "envelope": {
                "lows": list(self.envelope.lows),
                "highs": list(self.envelope.highs),
                "x_e": self.envelope.x_e,
                "y_e": self.envelope.y_e,
                "z_e": self.envelope.z_e,
                "volume": self.envelope.volume,
            },
            "extents": self.extents.tolist(),
            "connective_lengths": {
                f"{i + 1}-{j + 1}": length for (i, j), length in self.connective_lengths.items()
            },
            "connective_length": self.connective_length,
            "axis_distances": self.axis_distances.tolist(),
            "penalties": {
                "bounds": self.penalty_bounds,
                "lines": self.penalty_lines,
                "clearance": self.penalty_clearance,
            },
            "feasible": self.feasible,
        }


def scene_summary(
    poses: Sequence[CylinderPose],
    scene: SceneConfig,
    mode: EnvelopeMode = EnvelopeMode.EXACT,
) -> SceneSummary:
    layout = _layout(poses, scene.specs)
    lows, highs = _extent_bounds(layout, mode)
    bounds = _envelope(layout, mode)
    lengths = _connective_lengths(layout, scene)
    return SceneSummary(
        envelope=bounds,
        extents=np.stack((lows, highs), axis=-1),
        connective_lengths=lengths,
        axis_distances=_axis_distance_matrix(layout),
        penalty_bounds=_penalty_bounds(bounds, scene.side_length),
        penalty_lines=_penalty_lines(lengths, scene),
        penalty_clearance=_penalty_clearance(layout, scene),
    )
