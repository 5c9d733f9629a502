"""
Tests for the move routine, the step case analysis, re-seeding and full runs.
"""

import math

import numpy as np
import pytest

from src.annealer import (
    INITIAL_ARCHIVE_SAMPLES,
    AnnealState,
    ReseedVariant,
    StepCase,
    acceptance_probability,
    amosa_step,
    apply_boundary,
    initialize_state,
    mosar_step,
    perturb,
    reseed_probability,
    run,
    sample_laplace,
    select_reseed,
)
from src.mosar_models import (
    DEFAULT_SCHEDULES,
    Algorithm,
    BoundaryPolicy,
    MoveConfig,
    ProblemName,
    Schedule,
)
from src.pareto import (
    Archive,
    ArchiveEntry,
    ContractViolation,
    ObjectiveRanges,
    ObjectiveVector,
    delta_dom,
    objective_ranges,
)
from src.problems import CONFIG_MOVE_GROUPS, ConfigurationProblem, SRNProblem, TNKProblem

DRAWS = 100_000


@pytest.fixture
def tiny_schedule():
    """Four levels of 20 iterations"""
    return Schedule(t_max=10.0, t_min=1.0, alpha=0.5, iters_per_temp=20)


def build_archive(points, constraint_count=0):
    archive = Archive()
    for i, values in enumerate(points):
        archive.insert(ArchiveEntry((float(i),), ObjectiveVector.of(values, constraint_count), i))
    return archive


def make_state(points, current, in_archive, seed=0, temperature=1.0):
    """State over an archive of `points`; `current` is an archive id or an outside vector."""
    archive = build_archive(points)
    if in_archive:
        current_entry = archive.get(current)
    else:
        current_entry = ArchiveEntry((-1.0,), ObjectiveVector.of(current), 100)
    return AnnealState(
        current=current_entry,
        current_in_archive=in_archive,
        archive=archive,
        rng=np.random.default_rng(seed),
        temperature=temperature,
        next_id=200,
        verify_invariants=True,
    )


def candidate(values, entry_id=150):
    return ArchiveEntry((-2.0,), ObjectiveVector.of(values), entry_id)


def first_draws(seed, n=2):
    """What the state's generator will return for its next draws."""
    rng = np.random.default_rng(seed)
    return [rng.random() for _ in range(n)]


class TestLaplace:
    def test_median(self):
        rng = np.random.default_rng(1)
        draws = np.array([sample_laplace(3.0, 2.0, rng) for _ in range(DRAWS)])
        assert abs(np.median(draws) - 3.0) <= 0.02 * 2.0

    def test_half_mass_within_ln2_scale(self):
        rng = np.random.default_rng(2)
        draws = np.array([sample_laplace(0.0, 1.5, rng) for _ in range(DRAWS)])
        fraction = np.mean(np.abs(draws) <= 1.5 * math.log(2.0))
        assert fraction == pytest.approx(0.5, abs=0.01)

    def test_scale_family(self):
        rng = np.random.default_rng(3)
        unit = np.array([sample_laplace(0.0, 1.0, rng) for _ in range(DRAWS)])
        scaled = np.array([sample_laplace(0.0, 4.0, rng) for _ in range(DRAWS)])

        unit_iqr = np.subtract(*np.percentile(unit, [75, 25]))
        scaled_iqr = np.subtract(*np.percentile(scaled, [75, 25]))
        assert scaled_iqr / unit_iqr == pytest.approx(4.0, rel=0.03)

    def test_scale_must_be_positive(self):
        with pytest.raises(ContractViolation):
            sample_laplace(0.0, 0.0, np.random.default_rng(0))


class TestBoundaries:
    @pytest.mark.parametrize(
        "value, upper, policy, expected",
        [
            (12.0, 10.0, BoundaryPolicy.CLAMP, 10.0),
            (-1.0, 10.0, BoundaryPolicy.CLAMP, 0.0),
            (370.0, 360.0, BoundaryPolicy.WRAP, 10.0),
            (-10.0, 360.0, BoundaryPolicy.WRAP, 350.0),
            (360.0, 360.0, BoundaryPolicy.WRAP, 0.0),
            (190.0, 180.0, BoundaryPolicy.REFLECT, 170.0),
            (-10.0, 180.0, BoundaryPolicy.REFLECT, 10.0),
            (540.0, 180.0, BoundaryPolicy.REFLECT, 180.0),
        ],
    )
    def test_policies(self, value, upper, policy, expected):
        assert apply_boundary(value, 0.0, upper, policy) == pytest.approx(expected)

    def test_inside_value_untouched(self):
        for policy in BoundaryPolicy:
            assert apply_boundary(42.0, 0.0, 90.0, policy) == pytest.approx(42.0)


class TestPerturb:
    def test_benchmark_moves_one_variable(self):
        descriptor = SRNProblem().descriptor
        rng = np.random.default_rng(4)
        x = np.zeros(2)
        for _ in range(1000):
            moved = perturb(x, descriptor, MoveConfig(), rng)
            assert np.count_nonzero(moved != x) == 1
            assert np.all(np.abs(moved) <= 20.0)

    @pytest.mark.parametrize(
        ("problem", "scale"), [(SRNProblem(), 2.0), (TNKProblem(), math.pi / 20.0)]
    )
    def test_benchmark_step_scale(self, problem, scale):
        """Median step is scale * ln 2 for Laplace moves, whatever the bounds."""
        descriptor = problem.descriptor
        x = 0.5 * (descriptor.lower_array + descriptor.upper_array)
        rng = np.random.default_rng(8)
        steps = [np.abs(perturb(x, descriptor, MoveConfig(), rng) - x).sum() for _ in range(20_000)]

        assert np.median(steps) == pytest.approx(scale * math.log(2.0), rel=0.05)

    def test_input_not_modified(self):
        x = np.array([1.0, 2.0])
        perturb(x, TNKProblem().descriptor, MoveConfig(), np.random.default_rng(0))
        assert x.tolist() == [1.0, 2.0]

    def test_config_moves_one_cylinder(self):
        problem = ConfigurationProblem(9.4)
        descriptor = problem.descriptor
        x = 0.5 * (descriptor.lower_array + descriptor.upper_array)
        rng = np.random.default_rng(5)
        for _ in range(1000):
            changed = set(np.flatnonzero(perturb(x, descriptor, MoveConfig(), rng) != x))
            assert changed
            assert any(
                changed <= set(group.translation) or changed <= set(group.rotation)
                for group in CONFIG_MOVE_GROUPS
            )

    def test_rotation_skips_cylinders_without_angles(self):
        descriptor = ConfigurationProblem(9.4).descriptor
        x = 0.5 * (descriptor.lower_array + descriptor.upper_array)
        rotation_only = MoveConfig(translation_probability=0.0)
        angle_indices = {i for group in CONFIG_MOVE_GROUPS for i in group.rotation}
        rng = np.random.default_rng(6)
        for _ in range(500):
            changed = set(np.flatnonzero(perturb(x, descriptor, rotation_only, rng) != x))
            assert changed and changed <= angle_indices

    def test_translation_keeps_angles(self):
        descriptor = ConfigurationProblem(9.4).descriptor
        x = 0.5 * (descriptor.lower_array + descriptor.upper_array)
        angle_indices = {i for group in CONFIG_MOVE_GROUPS for i in group.rotation}
        rng = np.random.default_rng(7)
        for _ in range(500):
            moved = perturb(x, descriptor, MoveConfig(translation_probability=1.0), rng)
            assert not set(np.flatnonzero(moved != x)) & angle_indices
            assert np.all(moved <= descriptor.upper_array)
            assert np.all(moved >= descriptor.lower_array)


class TestProbabilities:
    def test_acceptance(self):
        assert acceptance_probability(0.5, 2.0) == pytest.approx(1.0 / (1.0 + math.exp(0.25)))

    def test_reseed(self):
        assert reseed_probability(0.12) == pytest.approx(0.5300, abs=1e-4)

    def test_reseed_saturates(self):
        assert reseed_probability(50.0) == pytest.approx(1.0)

    def test_acceptance_falls_as_temperature_falls(self):
        values = [acceptance_probability(0.3, t) for t in (100.0, 10.0, 1.0, 0.1)]

        assert all(0.0 < p < 1.0 for p in values)
        assert values == sorted(values, reverse=True)
        assert len(set(values)) == len(values)


class TestSelectReseed:
    def test_single_member(self):
        archive = build_archive([(2.0, 3.0)])
        for variant in ReseedVariant:
            assert select_reseed(archive, ObjectiveVector.of([4, 4]), variant).id == 0

    def test_front_restriction_on_constraints(self):
        archive = build_archive([(5, 5, 0, 0, 0), (1, 1, 1, 0, 0)], constraint_count=3)
        new = ObjectiveVector.of([1.1, 1.1, 1, 0, 0], 3)

        assert select_reseed(archive, new, ReseedVariant.V1).id == 1
        assert select_reseed(archive, new, ReseedVariant.V2, constraint_indices=(2, 3, 4)).id == 0

    def test_v2_without_constraints_behaves_like_v1(self):
        archive = build_archive([(1, 5), (5, 1)])
        new = ObjectiveVector.of([6.5, 7.5])
        assert (
            select_reseed(archive, new, ReseedVariant.V2).id
            == select_reseed(archive, new, ReseedVariant.V1).id
            == 1
        )

    def test_ties_go_to_lowest_id(self):
        archive = build_archive([(0, 2), (2, 0)])
        assert select_reseed(archive, ObjectiveVector.of([2, 2]), ReseedVariant.V1).id == 0

    def test_v1_is_exhaustive_argmin(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            t = np.sort(rng.uniform(0, 1, size=5))
            points = list(zip(t.tolist(), (1.0 - t).tolist()))
            archive = build_archive(points)
            new = ObjectiveVector.of(rng.uniform(1.0, 2.0, size=2))
            ranges = objective_ranges([*points, new.values])

            deltas = [delta_dom(p, new, ranges) for p in points]
            expected = min(range(len(points)), key=lambda i: (deltas[i], i))
            assert select_reseed(archive, new, ReseedVariant.V1).id == expected

    def test_empty_archive(self):
        with pytest.raises(ContractViolation):
            select_reseed(Archive(), ObjectiveVector.of([1, 1]), ReseedVariant.V1)


class TestStepCases:
    def test_new_dominates_whole_archive(self):
        state = make_state([(1, 5), (5, 1)], current=(6, 6), in_archive=False)
        new = candidate((0, 0))

        assert mosar_step(state, new) == StepCase.DOMINATES_ARCHIVE
        assert [e.id for e in state.archive] == [new.id]
        assert state.current is new
        assert state.current_in_archive

    def test_non_dominated_with_archive(self):
        state = make_state([(1, 5), (5, 1)], current=0, in_archive=True)
        new = candidate((2, 2))

        assert amosa_step(state, new) == StepCase.NON_DOMINATED_WITH_ARCHIVE
        assert len(state.archive) == 3
        assert state.current is new

    def test_current_in_archive_dominates(self):
        seed, temperature = 0, 1.0
        state = make_state([(1, 5)], current=0, in_archive=True, seed=seed, temperature=temperature)
        new = candidate((2, 6))

        case = mosar_step(state, new, ReseedVariant.V2)

        # ranges (1..2, 5..6) give an amount of domination of exactly 1
        probability = 1.0 / (1.0 + math.exp(1.0 / temperature))
        accepted = first_draws(seed, 1)[0] < probability
        assert case == StepCase.CURRENT_IN_ARCHIVE_DOMINATES
        assert (state.current is new) == accepted
        assert state.current_in_archive != accepted
        assert len(state.archive) == 1

    def test_current_outside_archive_dominates_reseeds_or_accepts(self):
        seed = 3
        state = make_state([(1, 5), (5, 1)], current=(6, 7), in_archive=False, seed=seed)
        outside = state.current
        new = candidate((6.5, 7.5))

        case = mosar_step(state, new, ReseedVariant.V1)

        ranges = ObjectiveRanges((1.0, 1.0), (6.5, 7.5))
        closest = delta_dom((5, 1), (6.5, 7.5), ranges)
        average = (
            delta_dom((1, 5), (6.5, 7.5), ranges) + closest + delta_dom((6, 7), (6.5, 7.5), ranges)
        ) / 3
        reseed_draw, accept_draw = first_draws(seed)
        assert case == StepCase.CURRENT_OUTSIDE_ARCHIVE_DOMINATES
        if reseed_draw < reseed_probability(closest):
            assert state.current.id == 1
            assert state.current_in_archive
        elif accept_draw < acceptance_probability(average, state.temperature):
            assert state.current is new
        else:
            assert state.current is outside
        assert state.case_counts[case.value] == 1

    def test_amosa_does_not_reseed_when_current_dominates(self):
        state = make_state([(1, 5), (5, 1)], current=(6, 7), in_archive=False)
        assert amosa_step(state, candidate((6.5, 7.5))) == StepCase.CURRENT_IN_ARCHIVE_DOMINATES

    def test_mosar_accepts_new_dominating_current(self):
        state = make_state([(1, 5), (5, 1)], current=(6, 7), in_archive=False)
        new = candidate((5.5, 6))

        assert mosar_step(state, new) == StepCase.NEW_DOMINATES_CURRENT
        assert state.current is new
        assert not state.current_in_archive

    def test_amosa_reseeds_to_closest_dominating_member(self):
        seed = 9
        state = make_state([(1, 5), (5, 1)], current=(6, 7), in_archive=False, seed=seed)
        new = candidate((5.5, 6))

        case = amosa_step(state, new)

        # (5, 1) is closer to the candidate than (1, 5) under ranges (1..6, 1..7)
        ranges = ObjectiveRanges((1.0, 1.0), (6.0, 7.0))
        probability = reseed_probability(delta_dom((5, 1), (5.5, 6), ranges))
        assert case == StepCase.NEW_DOMINATES_CURRENT
        if first_draws(seed, 1)[0] < probability:
            assert state.current.id == 1
            assert state.current_in_archive
        else:
            assert state.current is new
            assert not state.current_in_archive

    def test_non_dominated_with_current(self):
        state = make_state([(1, 5), (5, 1)], current=1, in_archive=True)
        assert mosar_step(state, candidate((2, 6))) == StepCase.NON_DOMINATED_WITH_CURRENT
        assert len(state.archive) == 2

    @pytest.mark.parametrize("algorithm", list(Algorithm))
    def test_random_walk_keeps_invariants(self, algorithm):
        rng = np.random.default_rng(21)
        state = make_state([(10, 40), (25, 25), (40, 10)], current=1, in_archive=True, seed=22)
        cases = set()
        for i in range(10_000):
            state.temperature = 10.0 * 0.999**i
            new = candidate(rng.integers(0, 50, size=2).tolist(), entry_id=1000 + i)
            if algorithm == Algorithm.AMOSA:
                cases.add(amosa_step(state, new))
            else:
                variant = ReseedVariant.V1 if algorithm == Algorithm.MOSAR1 else ReseedVariant.V2
                cases.add(mosar_step(state, new, variant))

        assert sum(state.case_counts[c.value] for c in StepCase) == 10_000
        assert {StepCase.DOMINATES_ARCHIVE, StepCase.NON_DOMINATED_WITH_ARCHIVE} <= cases
        assert state.archive.is_mutually_nondominating()


class TestRun:
    def test_initial_archive(self):
        problem = SRNProblem()
        state = initialize_state(problem, np.random.default_rng(0))

        assert state.eval_count == INITIAL_ARCHIVE_SAMPLES
        assert state.next_id == INITIAL_ARCHIVE_SAMPLES
        assert state.current_in_archive
        assert state.archive.get(state.current.id) is state.current
        assert state.archive.is_mutually_nondominating()

    def test_budget_and_trace(self, tiny_schedule):
        result = run(SRNProblem(), Algorithm.MOSAR2, tiny_schedule, MoveConfig(), seed=1)

        assert result.evaluations == tiny_schedule.evaluation_budget == 80
        assert result.initial_evaluations == INITIAL_ARCHIVE_SAMPLES
        assert [level.temperature for level in result.trace] == tiny_schedule.temperatures()
        assert result.archive.is_mutually_nondominating()

    def test_same_seed_same_archive(self, tiny_schedule):
        def archive_of(seed):
            outcome = run(TNKProblem(), Algorithm.AMOSA, tiny_schedule, MoveConfig(), seed=seed)
            return [(e.id, e.decision, e.objectives.values) for e in outcome.archive]

        assert archive_of(4) == archive_of(4)
        assert archive_of(4) != archive_of(5)

    @pytest.mark.parametrize("algorithm", list(Algorithm))
    def test_config_run_with_invariant_checks(self, algorithm, tiny_schedule):
        result = run(
            ConfigurationProblem(9.4),
            algorithm,
            tiny_schedule,
            MoveConfig(),
            seed=2,
            verify_invariants=True,
        )

        assert sum(result.case_counts.get(c.value, 0) for c in StepCase) == 80
        assert len(result.archive) >= 1

    def test_first_feasible_temperature_is_a_level(self, tiny_schedule):
        result = run(SRNProblem(), Algorithm.MOSAR1, tiny_schedule, MoveConfig(), seed=3)
        # SRN has a large feasible region, so random sampling already finds it
        assert result.first_feasible_temperature == tiny_schedule.t_max
        assert result.feasible_entries

    @pytest.mark.slow
    def test_srn_default_schedule_finds_feasible_front(self):
        schedule = DEFAULT_SCHEDULES[ProblemName.SRN]
        result = run(SRNProblem(), Algorithm.MOSAR2, schedule, MoveConfig(), seed=1)

        assert result.evaluations == 5022
        assert len(result.feasible_entries) >= 5
