"""
Archive-based multi-objective simulated annealing.

Three algorithms share one loop and differ only in how a candidate that the
archive dominates is handled:

- ``amosa``: re-seeds when the candidate dominates the current solution.
- ``mosar1`` / ``mosar2``: re-seed only when a current solution outside the
  archive dominates the candidate. Version 1 picks the re-seed point with the
  smallest amount of domination over the whole archive; version 2 first restricts
  the archive to the best front of its constraint violations.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit

from src.mosar_models import Algorithm, BoundaryPolicy, LevelTrace, MoveConfig, Schedule
from src.pareto import (
    Archive,
    ArchiveCase,
    ArchiveEntry,
    ContractViolation,
    DominanceRelation,
    ObjectiveRanges,
    ObjectiveVector,
    compare,
    delta_dom,
    delta_dom_many,
    fast_nondominated_sort,
)
from src.problems import Problem, ProblemDescriptor

logger = logging.getLogger(__name__)

INITIAL_ARCHIVE_SAMPLES = 100


class ReseedVariant(str, Enum):
    """How the re-seed candidate is picked from the archive"""

    V1 = "v1"
    V2 = "v2"


class StepCase(str, Enum):
    """Branch of the case analysis a step went through"""

    DOMINATES_ARCHIVE = "case_1"
    CURRENT_IN_ARCHIVE_DOMINATES = "case_2a_1"
    CURRENT_OUTSIDE_ARCHIVE_DOMINATES = "case_2a_2"
    NEW_DOMINATES_CURRENT = "case_2b"
    NON_DOMINATED_WITH_CURRENT = "case_2c"
    NON_DOMINATED_WITH_ARCHIVE = "case_3"


class StepAction(str, Enum):
    """What happened to the current solution"""

    ACCEPTED = "accepted"
    RESEEDED = "reseeded"
    REJECTED = "rejected"


RESEED_VARIANTS: dict[Algorithm, ReseedVariant] = {
    Algorithm.MOSAR1: ReseedVariant.V1,
    Algorithm.MOSAR2: ReseedVariant.V2,
}


# ============================================================================
# Moves
# ============================================================================


def sample_laplace(mu: float, scale: float, rng: np.random.Generator) -> float:
    """One Laplace(mu, scale) draw by inverse CDF."""
    if scale <= 0:
        raise ContractViolation(f"Laplace scale must be positive, got {scale}")
    u = rng.random() - 0.5
    while abs(u) >= 0.5:
        u = rng.random() - 0.5
    return mu - scale * math.copysign(1.0, u) * math.log1p(-2.0 * abs(u)) if u else mu


def apply_boundary(value: float, lower: float, upper: float, policy: BoundaryPolicy) -> float:
    """Bring a perturbed variable back into [lower, upper] (wrap yields [lower, upper))."""
    span = upper - lower
    if policy == BoundaryPolicy.CLAMP:
        return min(max(value, lower), upper)
    if policy == BoundaryPolicy.WRAP:
        return lower + (value - lower) % span
    folded = (value - lower) % (2.0 * span)
    return lower + (folded if folded <= span else 2.0 * span - folded)


def perturb(
    decision: np.ndarray,
    descriptor: ProblemDescriptor,
    move: MoveConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Copy of `decision` with one local move applied.

    Problems with move groups move one group per call, translating or rotating it;
    a group without variables of the drawn kind is redrawn. Other problems move a
    single variable with a scale proportional to its move range.
    """
    x = np.array(decision, dtype=float)
    if descriptor.move_groups:
        translate = rng.random() < move.translation_probability
        indices: tuple[int, ...] = ()
        while not indices:
            group = descriptor.move_groups[int(rng.integers(len(descriptor.move_groups)))]
            indices = group.translation if translate else group.rotation
        scales = [move.translation_scale if translate else move.rotation_scale] * len(indices)
    else:
        i = int(rng.integers(descriptor.dimension))
        indices = (i,)
        scales = [float(descriptor.move_ranges[i]) * move.benchmark_scale_fraction]

    for i, scale in zip(indices, scales, strict=True):
        x[i] = apply_boundary(
            sample_laplace(float(x[i]), scale, rng),
            descriptor.lower[i],
            descriptor.upper[i],
            descriptor.policies[i],
        )
    return x


# ============================================================================
# Annealing State
# ============================================================================


@dataclass
class AnnealState:
    """Mutable state of one run. Owned by a single thread."""

    current: ArchiveEntry
    current_in_archive: bool
    archive: Archive
    rng: np.random.Generator
    constraint_indices: tuple[int, ...] = ()
    temperature: float = math.inf
    eval_count: int = 0
    next_id: int = 0
    literal_average: bool = False
    verify_invariants: bool = False
    case_counts: Counter[str] = field(default_factory=Counter)

    def new_entry(self, decision: np.ndarray, objectives: ObjectiveVector) -> ArchiveEntry:
        entry = ArchiveEntry(tuple(float(v) for v in decision), objectives, self.next_id)
        self.next_id += 1
        return entry

    def record(self, case: StepCase, action: StepAction) -> None:
        self.case_counts[case.value] += 1
        self.case_counts[f"{case.value}_{action.value}"] += 1

    def check_invariants(self) -> None:
        if not self.archive.is_mutually_nondominating():
            raise ContractViolation("Archive lost mutual non-domination")
        if self.current_in_archive != self.archive.contains_objectives(self.current.objectives):
            raise ContractViolation(
                f"current_in_archive={self.current_in_archive} disagrees with archive membership"
            )


def step_ranges(state: AnnealState, new: ObjectiveVector) -> ObjectiveRanges:
    """Objective ranges over the archive plus the current and new solutions."""
    population = np.vstack(
        (state.archive.objective_matrix(), state.current.objectives.values, new.values)
    )
    return ObjectiveRanges(
        tuple(population.min(axis=0).tolist()), tuple(population.max(axis=0).tolist())
    )


def acceptance_probability(average_delta: float, temperature: float) -> float:
    """1 / (1 + exp(average_delta / T))"""
    return _checked(float(expit(-average_delta / temperature)))


def reseed_probability(delta: float) -> float:
    """1 / (1 + exp(-delta))"""
    return _checked(float(expit(delta)))


def _checked(probability: float) -> float:
    # expit saturates to exactly 0 or 1 in double precision for large arguments
    if not 0.0 <= probability <= 1.0:
        raise ContractViolation(f"Probability outside [0, 1]: {probability}")
    return probability


def _argmin_entry(
    entries: Sequence[ArchiveEntry], deltas: np.ndarray
) -> tuple[ArchiveEntry, float]:
    best = min(range(len(entries)), key=lambda i: (deltas[i], entries[i].id))
    return entries[best], float(deltas[best])


def select_reseed(
    archive: Archive,
    new: ObjectiveVector,
    variant: ReseedVariant,
    constraint_indices: Sequence[int] = (),
    ranges: ObjectiveRanges | None = None,
) -> ArchiveEntry:
    """
    Archive member with the smallest amount of domination over `new`.

    V2 only considers the first front of a non-dominated sort on the constraint
    objectives; without constraint objectives it behaves like V1. Ties go to the
    lowest id.
    """
    return _select_reseed(archive, new, variant, constraint_indices, ranges)[0]


def _select_reseed(
    archive: Archive,
    new: ObjectiveVector,
    variant: ReseedVariant,
    constraint_indices: Sequence[int],
    ranges: ObjectiveRanges | None,
) -> tuple[ArchiveEntry, float]:
    if len(archive) == 0:
        raise ContractViolation("Cannot re-seed from an empty archive")
    entries = archive.entries
    matrix = archive.objective_matrix()
    if ranges is None:
        population = np.vstack((matrix, new.values))
        ranges = ObjectiveRanges(
            tuple(population.min(axis=0).tolist()), tuple(population.max(axis=0).tolist())
        )
    candidates = list(range(len(entries)))
    if variant == ReseedVariant.V2 and constraint_indices:
        candidates = fast_nondominated_sort(matrix, constraint_indices)[0]
    deltas = delta_dom_many(matrix[candidates], new.values, ranges)
    return _argmin_entry([entries[i] for i in candidates], deltas)


# ============================================================================
# Steps
# ============================================================================


def _accept(state: AnnealState, new: ArchiveEntry, in_archive: bool) -> None:
    state.current = new
    state.current_in_archive = in_archive


def _draw(state: AnnealState, probability: float) -> bool:
    return bool(state.rng.random() < probability)


def _step(
    state: AnnealState,
    new: ArchiveEntry,
    algorithm: Algorithm,
) -> tuple[StepCase, StepAction]:
    classification = state.archive.classify(new.objectives)

    if classification.case != ArchiveCase.DOMINATED_BY_K:
        state.archive.insert(new)
        _accept(state, new, True)
        if classification.case == ArchiveCase.DOMINATES_K:
            return StepCase.DOMINATES_ARCHIVE, StepAction.ACCEPTED
        return StepCase.NON_DOMINATED_WITH_ARCHIVE, StepAction.ACCEPTED

    ranges = step_ranges(state, new.objectives)
    dominating = [state.archive.get(i) for i in classification.ids]
    k = len(dominating)
    dominating_deltas = delta_dom_many(
        np.array([e.objectives.values for e in dominating]), new.objectives.values, ranges
    )
    relation = compare(state.current.objectives, new.objectives)

    if relation == DominanceRelation.A_DOMINATES_B:
        if algorithm == Algorithm.AMOSA or state.current_in_archive:
            case = StepCase.CURRENT_IN_ARCHIVE_DOMINATES
            if _draw(state, acceptance_probability(dominating_deltas.sum() / k, state.temperature)):
                _accept(state, new, False)
                return case, StepAction.ACCEPTED
            return case, StepAction.REJECTED

        case = StepCase.CURRENT_OUTSIDE_ARCHIVE_DOMINATES
        selected, selected_delta = _select_reseed(
            state.archive,
            new.objectives,
            RESEED_VARIANTS[algorithm],
            state.constraint_indices,
            ranges,
        )
        if _draw(state, reseed_probability(selected_delta)):
            _accept(state, selected, True)
            return case, StepAction.RESEEDED
        current_delta = delta_dom(state.current.objectives, new.objectives, ranges)
        denominator = k if state.literal_average else k + 1
        average = (dominating_deltas.sum() + current_delta) / denominator
        if _draw(state, acceptance_probability(average, state.temperature)):
            _accept(state, new, False)
            return case, StepAction.ACCEPTED
        return case, StepAction.REJECTED

    if relation == DominanceRelation.B_DOMINATES_A:
        case = StepCase.NEW_DOMINATES_CURRENT
        if algorithm == Algorithm.AMOSA:
            closest, closest_delta = _argmin_entry(dominating, dominating_deltas)
            if _draw(state, reseed_probability(closest_delta)):
                _accept(state, closest, True)
                return case, StepAction.RESEEDED
        _accept(state, new, False)
        return case, StepAction.ACCEPTED

    case = StepCase.NON_DOMINATED_WITH_CURRENT
    if _draw(state, acceptance_probability(dominating_deltas.sum() / k, state.temperature)):
        _accept(state, new, False)
        return case, StepAction.ACCEPTED
    return case, StepAction.REJECTED


def _finish(state: AnnealState, case: StepCase, action: StepAction) -> StepCase:
    state.record(case, action)
    if state.verify_invariants:
        state.check_invariants()
    return case


def mosar_step(
    state: AnnealState, new: ArchiveEntry, variant: ReseedVariant = ReseedVariant.V1
) -> StepCase:
    """Apply one MOSA/R step for an evaluated candidate; returns the branch taken."""
    algorithm = Algorithm.MOSAR1 if variant == ReseedVariant.V1 else Algorithm.MOSAR2
    return _finish(state, *_step(state, new, algorithm))


def amosa_step(state: AnnealState, new: ArchiveEntry) -> StepCase:
    """Apply one AMOSA step for an evaluated candidate; returns the branch taken."""
    return _finish(state, *_step(state, new, Algorithm.AMOSA))


# ============================================================================
# Run
# ============================================================================


@dataclass
class AnnealResult:
    """Raw outcome of one run, before it is wrapped for persistence."""

    archive: Archive
    evaluations: int
    initial_evaluations: int
    trace: list[LevelTrace]
    case_counts: dict[str, int]
    first_feasible_temperature: float | None

    @property
    def feasible_entries(self) -> list[ArchiveEntry]:
        return self.archive.feasible_entries()


def initialize_state(
    problem: Problem,
    rng: np.random.Generator,
    samples: int = INITIAL_ARCHIVE_SAMPLES,
) -> AnnealState:
    """Archive of the non-dominated members of `samples` random decisions."""
    archive = Archive()
    next_id = 0
    for _ in range(samples):
        decision = problem.random_decision(rng)
        entry = ArchiveEntry(tuple(decision.tolist()), problem.evaluate(decision), next_id)
        next_id += 1
        if archive.classify(entry.objectives).case != ArchiveCase.DOMINATED_BY_K:
            archive.insert(entry)
    members = archive.entries
    current = members[int(rng.integers(len(members)))]
    return AnnealState(
        current=current,
        current_in_archive=True,
        archive=archive,
        rng=rng,
        constraint_indices=problem.descriptor.constraint_indices,
        eval_count=samples,
        next_id=next_id,
    )


def run(
    problem: Problem,
    algorithm: Algorithm,
    schedule: Schedule,
    move: MoveConfig,
    seed: int,
    literal_average: bool = False,
    verify_invariants: bool = False,
) -> AnnealResult:
    """Anneal `problem` from a fresh random archive; deterministic for a given seed."""
    algorithm = Algorithm(algorithm)
    rng = np.random.default_rng(seed)
    state = initialize_state(problem, rng)
    state.literal_average = literal_average
    state.verify_invariants = verify_invariants
    initial_evaluations = state.eval_count
    if verify_invariants:
        state.check_invariants()

    temperatures = schedule.temperatures()
    first_feasible = schedule.t_max if state.archive.feasible_entries() else None
    descriptor = problem.descriptor
    trace: list[LevelTrace] = []

    logger.info(
        "Starting %s on %s: seed=%d levels=%d iters=%d archive=%d",
        algorithm.value,
        problem.name,
        seed,
        len(temperatures),
        schedule.iters_per_temp,
        len(state.archive),
    )

    for temperature in temperatures:
        state.temperature = temperature
        for _ in range(schedule.iters_per_temp):
            decision = perturb(np.asarray(state.current.decision), descriptor, move, rng)
            entry = state.new_entry(decision, problem.evaluate(decision))
            state.eval_count += 1
            if algorithm == Algorithm.AMOSA:
                case = amosa_step(state, entry)
            else:
                case = mosar_step(state, entry, RESEED_VARIANTS[algorithm])
            if (
                first_feasible is None
                and case in (StepCase.DOMINATES_ARCHIVE, StepCase.NON_DOMINATED_WITH_ARCHIVE)
                and entry.objectives.feasible
            ):
                first_feasible = temperature
                logger.info(
                    "First feasible solution at T=%.6g (evaluation %d)",
                    temperature,
                    state.eval_count,
                )

        feasible_count = len(state.archive.feasible_entries())
        trace.append(
            LevelTrace(
                temperature=temperature,
                archive_size=len(state.archive),
                feasible_count=feasible_count,
            )
        )
        logger.debug(
            "T=%.6g archive=%d feasible=%d", temperature, len(state.archive), feasible_count
        )

    logger.info(
        "Finished %s on %s: seed=%d evaluations=%d archive=%d feasible=%d",
        algorithm.value,
        problem.name,
        seed,
        state.eval_count - initial_evaluations,
        len(state.archive),
        len(state.archive.feasible_entries()),
    )
    return AnnealResult(
        archive=state.archive,
        evaluations=state.eval_count - initial_evaluations,
        initial_evaluations=initial_evaluations,
        trace=trace,
        case_counts=dict(state.case_counts),
        first_feasible_temperature=first_feasible,
    )
