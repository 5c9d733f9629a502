"""
Quality indicators for two-objective Pareto sets.

Every indicator accepts either a `ParetoSet` or a raw ``(n, 2)`` array of
feasible points. Reference fronts for the benchmark problems are generated by
brute force on a decision grid and cached on disk.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from cachetools import LRUCache
from scipy.spatial.distance import cdist

from src.mosar_config import HarnessSettings
from src.mosar_models import ProblemName
from src.pareto import FEASIBILITY_TOLERANCE, ContractViolation, nondominated_filter
from src.problems import srn_objectives, tnk_objectives

logger = logging.getLogger(__name__)

HV_REFERENCE_FACTOR = 1.1
MIN_REFERENCE_RESOLUTION = 1000
DEFAULT_REFERENCE_RESOLUTION = 2000

# Decision boxes searched for reference fronts. TNK's feasible region lies inside
# the circle of radius sqrt(0.5) around (0.5, 0.5), whatever the search bounds.
REFERENCE_BOXES: dict[ProblemName, tuple[tuple[float, float], tuple[float, float]]] = {
    ProblemName.SRN: ((-20.0, 20.0), (-20.0, 20.0)),
    ProblemName.TNK: ((0.0, 0.5 + math.sqrt(0.5)), (0.0, 0.5 + math.sqrt(0.5))),
}


@dataclass(frozen=True)
class ParetoSet:
    """Feasible points of one run projected on two objectives."""

    points: np.ndarray
    algorithm: str | None = None
    seed: int | None = None

    @classmethod
    def of(
        cls,
        points: Sequence[Sequence[float]] | np.ndarray,
        algorithm: str | None = None,
        seed: int | None = None,
    ) -> ParetoSet:
        return cls(np.asarray(points, dtype=float).reshape(-1, 2), algorithm, seed)

    def __len__(self) -> int:
        return int(self.points.shape[0])


PointsLike = ParetoSet | np.ndarray | Sequence[Sequence[float]]


def _points(ps: PointsLike) -> np.ndarray:
    if isinstance(ps, ParetoSet):
        return ps.points
    return np.asarray(ps, dtype=float).reshape(-1, 2)


# ============================================================================
# Indicators
# ============================================================================


def cardinality(ps: PointsLike) -> int:
    return len(_points(ps))


def igd(pf: PointsLike, pf_star: PointsLike) -> float:
    """Mean distance from each reference point to its nearest front point; inf if pf is empty."""
    front, reference = _points(pf), _points(pf_star)
    if len(reference) == 0:
        raise ContractViolation("IGD needs a non-empty reference front")
    if len(front) == 0:
        return math.inf
    return float(cdist(reference, front).min(axis=1).mean())


def _normalization(reference: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ideal = reference.min(axis=0)
    span = reference.max(axis=0) - ideal
    return ideal, np.where(span > 0, span, 1.0)


def hypervolume_2d(pf: PointsLike, reference_source: PointsLike, normalize: bool = True) -> float:
    """
    Fraction of the box [0, r*] dominated by the front, r* = 1.1 x the upper
    bound of `reference_source`.

    With `normalize` both sets are first mapped by the ideal and nadir of
    `reference_source`, so r* = (1.1, 1.1). Points are clipped at the origin.
    """
    front, reference = _points(pf), _points(reference_source)
    if len(front) == 0:
        return 0.0
    if len(reference) == 0:
        raise ContractViolation("Hypervolume needs a non-empty reference source")
    if normalize:
        ideal, span = _normalization(reference)
        front = (front - ideal) / span
        reference = (reference - ideal) / span
    ref_point = HV_REFERENCE_FACTOR * reference.max(axis=0)
    if np.any(ref_point <= 0):
        raise ContractViolation(f"Reference point {ref_point} does not span a box from the origin")

    front = np.clip(front, 0.0, None)
    front = front[np.all(front < ref_point, axis=1)]
    if len(front) == 0:
        return 0.0
    front = _nondominated_2d(front)

    area = 0.0
    for i, (f1, f2) in enumerate(front):
        next_f1 = front[i + 1, 0] if i + 1 < len(front) else ref_point[0]
        area += (next_f1 - f1) * (ref_point[1] - f2)
    return float(area / (ref_point[0] * ref_point[1]))


def coverage(a: PointsLike, b: PointsLike) -> float:
    """Share of b strictly dominated by some point of a (1 / 0 / 0.5 when sets are empty)."""
    pa, pb = _points(a), _points(b)
    if len(pa) == 0 and len(pb) == 0:
        return 0.5
    if len(pb) == 0:
        return 1.0
    if len(pa) == 0:
        return 0.0
    x = pa[:, np.newaxis, :]
    y = pb[np.newaxis, :, :]
    dominated = np.any(np.all(x <= y, axis=2) & np.any(x < y, axis=2), axis=0)
    return float(dominated.mean())


def minimal_spacing(
    ps: PointsLike, standardization: tuple[Sequence[float], Sequence[float]] | None = None
) -> float:
    """
    Spread of nearest-neighbor chain distances.

    Distances are Manhattan over objectives divided by their range, (lows, highs)
    taken from `standardization` or from the set itself. Every point is tried as
    chain seed and the chain of least total length is kept. One point or none gives 1.
    """
    points = _points(ps)
    n = len(points)
    if n <= 1:
        return 1.0
    if standardization is None:
        lows, highs = points.min(axis=0), points.max(axis=0)
    else:
        lows, highs = np.asarray(standardization[0]), np.asarray(standardization[1])
    span = np.abs(highs - lows)
    scaled = points / np.where(span > 0, span, 1.0)
    distances = cdist(scaled, scaled, metric="cityblock")

    best_chain: np.ndarray | None = None
    best_total = math.inf
    for seed in range(n):
        chain = np.empty(n - 1)
        marked = np.zeros(n, dtype=bool)
        marked[seed] = True
        last = seed
        for step in range(n - 1):
            candidates = np.where(marked, np.inf, distances[last])
            last = int(np.argmin(candidates))
            chain[step] = candidates[last]
            marked[last] = True
        total = float(chain.sum())
        if total < best_total:
            best_total, best_chain = total, chain

    assert best_chain is not None
    return float(np.sqrt(np.mean((best_chain.mean() - best_chain) ** 2)))


def spacing(ps: PointsLike) -> float:
    """Schott's spacing on raw Manhattan nearest-neighbor distances; 1 for fewer than two points."""
    points = _points(ps)
    if len(points) < 2:
        return 1.0
    distances = cdist(points, points, metric="cityblock")
    np.fill_diagonal(distances, np.inf)
    nearest = distances.min(axis=1)
    return float(np.std(nearest, ddof=1))


# ============================================================================
# Set Combination
# ============================================================================


def _nondominated_2d(points: np.ndarray) -> np.ndarray:
    """Distinct non-dominated rows sorted by the first objective."""
    ordered = points[np.lexsort((points[:, 1], points[:, 0]))]
    best_before = np.minimum.accumulate(np.concatenate(([np.inf], ordered[:-1, 1])))
    return ordered[ordered[:, 1] < best_before]


def nondominated_union(sets: Sequence[PointsLike]) -> np.ndarray:
    """Distinct non-dominated points of the union of `sets`."""
    stacked = [_points(s) for s in sets]
    if not stacked or sum(len(s) for s in stacked) == 0:
        return np.empty((0, 2))
    return _nondominated_2d(np.vstack(stacked))


def accounted_proportion(
    runs: Mapping[str, Sequence[PointsLike]], literal: bool = False
) -> dict[str, float]:
    """
    Share of the combined non-dominated set contributed by each algorithm.

    A point reached by several algorithms counts once for each of them, so the
    shares sum to 1 whenever the combined set is non-empty. `literal` divides
    the size of each algorithm's own set by the number of distinct combined points.
    """
    if not runs:
        raise ContractViolation("Accounted proportion needs at least one algorithm")
    per_algorithm = {name: nondominated_union(sets) for name, sets in runs.items()}
    labels = np.concatenate(
        [np.full(len(points), i) for i, points in enumerate(per_algorithm.values())]
    ).astype(int)
    tagged = np.vstack(list(per_algorithm.values()))
    if len(tagged) == 0:
        return dict.fromkeys(runs, 0.0)

    survivors = nondominated_filter(tagged)
    if literal:
        distinct = len(np.unique(tagged[survivors], axis=0))
        return {name: len(points) / distinct for name, points in per_algorithm.items()}
    counts = np.bincount(labels[survivors], minlength=len(per_algorithm))
    return {name: float(counts[i] / len(survivors)) for i, name in enumerate(per_algorithm)}


# ============================================================================
# Reference Fronts
# ============================================================================

_FRONT_CACHE: LRUCache[tuple[str, int, str], np.ndarray] = LRUCache(maxsize=8)


def reference_front_path(problem: ProblemName, resolution: int, cache_dir: Path) -> Path:
    return cache_dir / f"{problem.value}_r{resolution}.txt"


def generate_reference_front(problem: ProblemName, resolution: int) -> np.ndarray:
    """Non-dominated feasible objective points of a resolution x resolution decision grid."""
    if problem not in REFERENCE_BOXES:
        raise ContractViolation(f"No reference front for problem {problem.value}")
    if resolution < MIN_REFERENCE_RESOLUTION:
        raise ContractViolation(
            f"Reference resolution must be at least {MIN_REFERENCE_RESOLUTION}, got {resolution}"
        )
    (lo1, hi1), (lo2, hi2) = REFERENCE_BOXES[problem]
    x1, x2 = np.meshgrid(np.linspace(lo1, hi1, resolution), np.linspace(lo2, hi2, resolution))
    kernel = srn_objectives if problem == ProblemName.SRN else tnk_objectives
    f1, f2, c1, c2 = kernel(x1.ravel(), x2.ravel())
    feasible = (c1 <= FEASIBILITY_TOLERANCE) & (c2 <= FEASIBILITY_TOLERANCE)
    points = np.column_stack((f1[feasible], f2[feasible]))
    front = _nondominated_2d(points)
    logger.info(
        "Generated %s reference front at resolution %d: %d feasible grid points, %d on the front",
        problem.value,
        resolution,
        len(points),
        len(front),
    )
    return front


def reference_front(
    problem: ProblemName | str,
    resolution: int = DEFAULT_REFERENCE_RESOLUTION,
    cache_dir: Path | None = None,
) -> np.ndarray:
    """Reference front from memory, then disk, then brute force (stored on the way)."""
    problem = ProblemName(problem)
    if cache_dir is None:
        cache_dir = HarnessSettings.from_env().cache_dir
    key = (problem.value, resolution, str(cache_dir))
    if key in _FRONT_CACHE:
        return _FRONT_CACHE[key]

    path = reference_front_path(problem, resolution, cache_dir)
    if path.exists():
        logger.debug("Loading reference front from %s", path)
        front = np.loadtxt(path, ndmin=2).reshape(-1, 2)
    else:
        front = generate_reference_front(problem, resolution)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            np.savetxt(path, front, fmt="%.17g")
        except OSError as e:
            logger.warning("Could not cache reference front at %s: %s", path, e)

    front.setflags(write=False)
    _FRONT_CACHE[key] = front
    return front
