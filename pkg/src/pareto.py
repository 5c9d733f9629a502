"""
Pareto-dominance primitives shared by the annealers and the metrics.

All objectives are minimized. Constrained problems append their constraint
violations as trailing objectives, so one dominance check covers both.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

logger = logging.getLogger(__name__)

FEASIBILITY_TOLERANCE = 1e-9


class ContractViolation(ValueError):
    """A caller broke a documented precondition."""


class DominanceRelation(str, Enum):
    """Outcome of comparing a against b"""

    A_DOMINATES_B = "a_dominates_b"
    B_DOMINATES_A = "b_dominates_a"
    NON_DOMINATED = "non_dominated"
    EQUAL = "equal"


class ArchiveCase(str, Enum):
    """How a new point relates to the whole archive"""

    DOMINATES_K = "dominates_k"
    DOMINATED_BY_K = "dominated_by_k"
    MUTUALLY_NON_DOMINATED = "mutually_non_dominated"


# ============================================================================
# Value Types
# ============================================================================


@dataclass(frozen=True, slots=True)
class ObjectiveVector:
    """
    Combined objective values: true objectives first, then `constraint_count`
    violation magnitudes (each >= 0, zero when the constraint holds).
    """

    values: tuple[float, ...]
    constraint_count: int = 0

    def __post_init__(self) -> None:
        if len(self.values) < 1:
            raise ContractViolation("Objective vector needs at least one value")
        if not 0 <= self.constraint_count <= len(self.values):
            raise ContractViolation(
                f"constraint_count {self.constraint_count} outside [0, {len(self.values)}]"
            )
        if any(v < 0 for v in self.violations):
            raise ContractViolation(f"Negative constraint violation in {self.values}")

    @classmethod
    def of(cls, values: Iterable[float], constraint_count: int = 0) -> ObjectiveVector:
        return cls(tuple(float(v) for v in values), constraint_count)

    @property
    def dimension(self) -> int:
        return len(self.values)

    @property
    def violations(self) -> tuple[float, ...]:
        return self.values[len(self.values) - self.constraint_count :]

    @property
    def objectives(self) -> tuple[float, ...]:
        return self.values[: len(self.values) - self.constraint_count]

    @property
    def feasible(self) -> bool:
        return all(v <= FEASIBILITY_TOLERANCE for v in self.violations)


@dataclass(frozen=True, slots=True)
class ArchiveEntry:
    """A decision vector together with its evaluation and a tie-breaking id."""

    decision: tuple[float, ...]
    objectives: ObjectiveVector
    id: int


@dataclass(frozen=True, slots=True)
class ObjectiveRanges:
    """Per-objective (min, max) over some population."""

    lows: tuple[float, ...]
    highs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lows) != len(self.highs):
            raise ContractViolation("Range bounds differ in length")
        if any(lo > hi for lo, hi in zip(self.lows, self.highs, strict=True)):
            raise ContractViolation(f"Range min above max: {self.lows} / {self.highs}")

    @property
    def widths(self) -> tuple[float, ...]:
        """R_i per objective; zero-width objectives fall back to 1."""
        return tuple((hi - lo) or 1.0 for lo, hi in zip(self.lows, self.highs, strict=True))


# ============================================================================
# Pairwise Operations
# ============================================================================


def _values(v: ObjectiveVector | Sequence[float]) -> Sequence[float]:
    return v.values if isinstance(v, ObjectiveVector) else v


def compare(
    a: ObjectiveVector | Sequence[float], b: ObjectiveVector | Sequence[float]
) -> DominanceRelation:
    """Pareto relation between a and b under minimization."""
    av, bv = _values(a), _values(b)
    if len(av) != len(bv):
        raise ContractViolation(f"Dimension mismatch: {len(av)} vs {len(bv)}")
    a_better = b_better = False
    for x, y in zip(av, bv, strict=True):
        if x < y:
            a_better = True
        elif y < x:
            b_better = True
        if a_better and b_better:
            return DominanceRelation.NON_DOMINATED
    if a_better:
        return DominanceRelation.A_DOMINATES_B
    if b_better:
        return DominanceRelation.B_DOMINATES_A
    return DominanceRelation.EQUAL


def dominates(a: ObjectiveVector | Sequence[float], b: ObjectiveVector | Sequence[float]) -> bool:
    return compare(a, b) is DominanceRelation.A_DOMINATES_B


def delta_dom(
    a: ObjectiveVector | Sequence[float],
    b: ObjectiveVector | Sequence[float],
    ranges: ObjectiveRanges,
) -> float:
    """
    Amount of domination between a and b: product of |a_i - b_i| / R_i over the
    objectives where they differ. Identical vectors give 0.
    """
    av, bv = _values(a), _values(b)
    if len(av) != len(bv) or len(av) != len(ranges.lows):
        raise ContractViolation(
            f"Dimension mismatch: {len(av)}, {len(bv)}, ranges {len(ranges.lows)}"
        )
    product = 1.0
    differs = False
    for x, y, width in zip(av, bv, ranges.widths, strict=True):
        if x != y:
            differs = True
            product *= abs(x - y) / width
    return product if differs else 0.0


def delta_dom_many(matrix: np.ndarray, b: Sequence[float], ranges: ObjectiveRanges) -> np.ndarray:
    """Vectorized `delta_dom` of every row of `matrix` against b."""
    diff = np.abs(np.asarray(matrix, dtype=float) - np.asarray(b, dtype=float))
    scaled = np.where(diff == 0.0, 1.0, diff / np.asarray(ranges.widths))
    product = np.prod(scaled, axis=-1)
    return np.where(np.any(diff != 0.0, axis=-1), product, 0.0)


def objective_ranges(entries: Sequence[ObjectiveVector | Sequence[float]]) -> ObjectiveRanges:
    """Per-objective min/max over a non-empty population."""
    if len(entries) == 0:
        raise ContractViolation("Cannot compute ranges of an empty population")
    matrix = np.array([_values(e) for e in entries], dtype=float)
    return ObjectiveRanges(tuple(matrix.min(axis=0).tolist()), tuple(matrix.max(axis=0).tolist()))


# ============================================================================
# Sorting and Filtering
# ============================================================================


def fast_nondominated_sort(
    entries: Sequence[ObjectiveVector | Sequence[float]] | np.ndarray,
    objective_subset: Sequence[int] | None = None,
) -> list[list[int]]:
    """
    Partition entries into Pareto fronts by index (Deb's fast non-dominated sort).

    Only the objectives in `objective_subset` take part in the comparison; by
    default all of them do. Equal projections land in the same front.
    """
    if len(entries) == 0:
        return []
    dimension = len(_values(entries[0]))
    subset = list(range(dimension)) if objective_subset is None else list(objective_subset)
    if not subset or any(not 0 <= i < dimension for i in subset):
        raise ContractViolation(f"Invalid objective subset {subset} for dimension {dimension}")

    projected = np.array([_values(e) for e in entries], dtype=float)[:, subset]
    a = projected[:, np.newaxis, :]
    b = projected[np.newaxis, :, :]
    dom = np.all(a <= b, axis=2) & np.any(a < b, axis=2)

    n = len(entries)
    dominated_sets = [np.flatnonzero(dom[i]).tolist() for i in range(n)]
    domination_count = dom.sum(axis=0).astype(int).tolist()

    fronts: list[list[int]] = [[i for i in range(n) if domination_count[i] == 0]]
    while fronts[-1]:
        next_front: list[int] = []
        for p in fronts[-1]:
            for q in dominated_sets[p]:
                domination_count[q] -= 1
                if domination_count[q] == 0:
                    next_front.append(q)
        fronts.append(sorted(next_front))
    fronts.pop()
    return fronts


def nondominated_filter(points: np.ndarray) -> np.ndarray:
    """Indices of the rows of `points` no other row dominates (equal rows are all kept)."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] == 0:
        return np.array([], dtype=int)
    a = points[:, np.newaxis, :]
    b = points[np.newaxis, :, :]
    dominated = np.any(np.all(a <= b, axis=2) & np.any(a < b, axis=2), axis=0)
    return np.flatnonzero(~dominated)


# ============================================================================
# Archive
# ============================================================================


@dataclass(frozen=True, slots=True)
class Classification:
    """Which archive case a new point triggers, with the ids involved."""

    case: ArchiveCase
    ids: tuple[int, ...] = ()

    @property
    def k(self) -> int:
        return len(self.ids)


@dataclass
class Archive:
    """
    Mutually non-dominating set of entries. Not thread-safe; one archive per run.
    """

    _entries: list[ArchiveEntry] = field(default_factory=list)
    _matrix: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[ArchiveEntry]:
        return iter(self._entries)

    @property
    def entries(self) -> list[ArchiveEntry]:
        return list(self._entries)

    def feasible_entries(self) -> list[ArchiveEntry]:
        return [e for e in self._entries if e.objectives.feasible]

    def objective_matrix(self) -> np.ndarray:
        """Objective values of all members, shape (n, M); rebuilt after changes."""
        if self._matrix is None:
            self._matrix = np.array([e.objectives.values for e in self._entries], dtype=float)
        return self._matrix

    def get(self, entry_id: int) -> ArchiveEntry:
        for entry in self._entries:
            if entry.id == entry_id:
                return entry
        raise KeyError(entry_id)

    def contains_objectives(self, objectives: ObjectiveVector) -> bool:
        if not self._entries:
            return False
        return bool(np.any(np.all(self.objective_matrix() == objectives.values, axis=1)))

    def _relations(self, new: ObjectiveVector) -> tuple[np.ndarray, np.ndarray]:
        matrix = self.objective_matrix()
        if matrix.shape[1] != new.dimension:
            raise ContractViolation(
                f"Dimension mismatch: archive {matrix.shape[1]} vs new {new.dimension}"
            )
        point = np.asarray(new.values)
        members_dominate = np.all(matrix <= point, axis=1) & np.any(matrix < point, axis=1)
        new_dominates = np.all(point <= matrix, axis=1) & np.any(point < matrix, axis=1)
        return members_dominate, new_dominates

    def classify(self, new: ObjectiveVector) -> Classification:
        """Case of the annealing pseudo-code triggered by `new`."""
        if not self._entries:
            return Classification(ArchiveCase.MUTUALLY_NON_DOMINATED)
        members_dominate, new_dominates = self._relations(new)
        if new_dominates.any():
            ids = tuple(self._entries[i].id for i in np.flatnonzero(new_dominates))
            return Classification(ArchiveCase.DOMINATES_K, ids)
        if members_dominate.any():
            ids = tuple(self._entries[i].id for i in np.flatnonzero(members_dominate))
            return Classification(ArchiveCase.DOMINATED_BY_K, ids)
        return Classification(ArchiveCase.MUTUALLY_NON_DOMINATED)

    def insert(self, entry: ArchiveEntry) -> bool:
        """
        Remove every member `entry` dominates and add it, unless a member with equal
        objectives is already present. Returns whether the entry was added.
        """
        if not self._entries:
            self._entries.append(entry)
            self._matrix = None
            return True
        members_dominate, new_dominates = self._relations(entry.objectives)
        if members_dominate.any():
            raise ContractViolation(f"Entry {entry.id} is dominated by the archive")
        if new_dominates.any():
            removed = [e.id for e, hit in zip(self._entries, new_dominates, strict=True) if hit]
            logger.debug("Entry %s removes %d archive members: %s", entry.id, len(removed), removed)
            self._entries = [
                e for e, hit in zip(self._entries, new_dominates, strict=True) if not hit
            ]
            self._matrix = None
        elif self.contains_objectives(entry.objectives):
            return False
        self._entries.append(entry)
        self._matrix = None
        return True

    def is_mutually_nondominating(self) -> bool:
        """Full O(n^2) check of the archive invariant (duplicates count as violations)."""
        matrix = self.objective_matrix()
        if matrix.shape[0] < 2:
            return True
        a = matrix[:, np.newaxis, :]
        b = matrix[np.newaxis, :, :]
        dom = np.all(a <= b, axis=2) & np.any(a < b, axis=2)
        equal = np.all(a == b, axis=2)
        np.fill_diagonal(equal, False)
        return not dom.any() and not equal.any()
