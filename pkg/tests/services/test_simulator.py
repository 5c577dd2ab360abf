from itertools import product

import numpy as np
import pytest

from scardo.config import settings
from scardo.errors import PreconditionError, ValidationFailure
from scardo.models.population import ExplicitGraph
from scardo.models.tensor import TransitionTensor
from scardo.services.attribute_space import build_space
from scardo.services.ranking import build_threshold_ranking, uniform_ranking, validate_ranking
from scardo.services.simulator import (
    DRAWS_PER_ITERATION,
    build_population,
    one_step_expectation,
    one_step_law,
    run,
    step,
    transition_probabilities,
)
from scardo.services.transition import (
    build_opinion_tensor,
    identity_tensor,
    lift_opinion_tensor,
    make_stubborn,
    validate_tensor,
)
from tests.conftest import random_stochastic


def _count_vectors(size, total):
    """Every vector of ``size`` nonnegative integers summing to ``total``."""
    for head in product(range(total + 1), repeat=size - 1):
        if sum(head) <= total:
            yield list(head) + [total - sum(head)]


def _enumerate_one_step(counts, tensor, ranking):
    """Brute force over (recipient, donor, gate, outcome) on the complete graph.

    Returns E[Y(t+1)] - Y(t) and the (M, M) move probabilities.
    """
    agents = [q for q, count in enumerate(counts) for _ in range(count)]
    size = len(agents)
    dense = tensor.dense()
    change = np.zeros(len(counts))
    moves = np.zeros((len(counts), len(counts)))
    for recipient, donor in product(range(size), repeat=2):
        if recipient == donor:
            continue
        pick = 1.0 / (size * (size - 1))
        s, l = agents[recipient], agents[donor]  # noqa: E741
        passes = ranking.entries[s, l]
        for k in range(len(counts)):
            weight = pick * passes * dense[s, l, k]
            if k != s:
                change[k] += weight
                change[s] -= weight
                moves[s, k] += weight
    return change, moves


@pytest.fixture
def small_components():
    space = build_space([3])
    rng = np.random.default_rng(5)
    tensor = validate_tensor(space, random_stochastic(rng, (3, 3, 3)))
    ranking = validate_ranking(space, rng.random((3, 3)))
    return space, tensor, ranking


class TestBuildPopulation:
    def test_counts_assigned_in_index_order(self, example_space):
        """Counts fill agents z_1 first, then z_2, and so on."""
        state = build_population(example_space, counts=[2, 0, 1, 1])
        assert state.corteges() == [1, 1, 3, 4]
        assert state.counts == [2, 0, 1, 1]
        assert state.N == 4

    def test_agent_corteges(self, example_space):
        """Per-agent 1-based corteges are tallied into counts."""
        state = build_population(example_space, agent_corteges=[4, 4, 2])
        assert state.counts == [0, 1, 0, 2]

    def test_bad_cortege(self, example_space):
        with pytest.raises(ValidationFailure, match="agent 2 has cortege index 5"):
            build_population(example_space, agent_corteges=[1, 5])

    def test_size_mismatch(self, example_space):
        with pytest.raises(ValidationFailure, match="covers 3 agents, expected 4"):
            build_population(example_space, counts=[1, 1, 1, 0], n_agents=4)

    def test_exactly_one_source(self, example_space):
        with pytest.raises(ValidationFailure, match="exactly one"):
            build_population(example_space)


class TestStep:
    def test_consumes_four_uniforms(self, example_space, example_ranking, adoption_tensor):
        """One iteration draws exactly four uniforms, blocked or not."""
        state = build_population(example_space, counts=[1, 1, 1, 1])
        rng = np.random.default_rng(99)
        reference = np.random.default_rng(99)
        for _ in range(25):
            step(state, adoption_tensor, example_ranking, rng)
            reference.random(DRAWS_PER_ITERATION)
        assert rng.random() == reference.random()
        assert state.t == 25

    def test_blocked_iterations_advance_time(self, example_space, adoption_tensor):
        """A ranking that blocks everything still advances t."""
        blocked = validate_ranking(example_space, np.zeros((4, 4)))
        state = build_population(example_space, counts=[2, 1, 1, 2])
        rng = np.random.default_rng(1)
        for _ in range(10):
            step(state, adoption_tensor, blocked, rng)
        assert state.t == 10
        assert state.counts == [2, 1, 1, 2]

    def test_single_agent_complete_graph(self, example_space, adoption_tensor):
        """The complete-graph protocol needs a donor distinct from the recipient."""
        state = build_population(example_space, counts=[1, 0, 0, 0])
        with pytest.raises(ValidationFailure, match="at least 2 agents"):
            step(state, adoption_tensor, uniform_ranking(example_space), np.random.default_rng(0))

    def test_isolated_agents_never_change(self, example_space, adoption_tensor):
        """On an explicit graph an isolated recipient is a no-op that still counts."""
        graph = ExplicitGraph(n_agents=3, neighbors=((1,), (0,), ()))
        state = build_population(example_space, agent_corteges=[1, 3, 4], graph=graph)
        rng = np.random.default_rng(8)
        for _ in range(300):
            step(state, adoption_tensor, uniform_ranking(example_space), rng)
        assert state.agent_corteges[2] == 3
        assert state.isolated_iterations > 0
        assert state.t == 300
        state.check_invariants()

    def test_empirical_law(self, small_components):
        """Observed move frequencies agree with one_step_law."""
        space, tensor, ranking = small_components
        state = build_population(space, counts=[2, 1, 2])
        moves, stay = one_step_law(state, tensor, ranking)

        agents, counts = list(state.agent_corteges), list(state.counts)
        observed = np.zeros((3, 3))
        trials = 20_000
        rng = np.random.default_rng(2024)
        for _ in range(trials):
            step(state, tensor, ranking, rng)
            if state.counts != counts:
                delta = np.asarray(state.counts) - np.asarray(counts)
                observed[int(np.argmin(delta)), int(np.argmax(delta))] += 1
            state.agent_corteges[:] = agents
            state.counts[:] = counts

        frequencies = observed / trials
        spread = np.sqrt(np.maximum(moves, 1e-12) / trials)
        assert np.all(np.abs(frequencies - moves) <= 5 * spread + 1e-4)
        assert 1 - frequencies.sum() == pytest.approx(stay, abs=5 * np.sqrt(0.25 / trials))

    def test_two_agents_adopt_donor_cortege(self):
        """With 'always adopt the donor cortege', one step leaves both agents on one cortege."""
        space = build_space([3])
        tensor = build_opinion_tensor(3, "voter", mu=1.0)
        ranking = uniform_ranking(space)
        outcomes = set()
        for seed in range(40):
            state = build_population(space, agent_corteges=[1, 3])
            step(state, tensor, ranking, np.random.default_rng(seed))
            corteges = state.corteges()
            assert corteges in ([1, 1], [3, 3])
            assert sorted(state.counts) == [0, 0, 2]
            outcomes.add(corteges[0])
        assert outcomes == {1, 3}

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "cardinalities, counts, seed",
        [
            ([3], [2, 1, 2], 5),
            ([4], [3, 0, 1, 0], 9),
            ([2, 2], [1, 2, 2, 1], 13),
        ],
    )
    def test_empirical_law_million_trials(self, cardinalities, counts, seed):
        """A million single iterations agree with one_step_law within 4 standard errors."""
        space = build_space(cardinalities)
        size = space.M
        rng = np.random.default_rng(seed)
        tensor = validate_tensor(space, random_stochastic(rng, (size, size, size)))
        ranking = validate_ranking(space, rng.random((size, size)))
        state = build_population(space, counts=counts)
        moves, stay = one_step_law(state, tensor, ranking)

        agents, start = list(state.agent_corteges), list(state.counts)
        observed = np.zeros((size, size))
        trials = 1_000_000
        for _ in range(trials):
            step(state, tensor, ranking, rng)
            if state.counts != start:
                delta = np.asarray(state.counts) - np.asarray(start)
                observed[int(np.argmin(delta)), int(np.argmax(delta))] += 1
                state.agent_corteges[:] = agents
                state.counts[:] = start

        frequencies = observed / trials
        spread = np.sqrt(moves * (1 - moves) / trials)
        assert np.all(np.abs(frequencies - moves) <= 4 * spread)
        assert 1 - frequencies.sum() == pytest.approx(
            stay, abs=4 * np.sqrt(stay * (1 - stay) / trials)
        )


class TestRun:
    def test_matches_successive_steps(self, example_space, example_ranking, adoption_tensor):
        """Block-drawn uniforms give the same path as step-by-step draws."""
        initial = build_population(example_space, counts=[20, 5, 5, 20])
        trajectory = run(
            example_space, adoption_tensor, example_ranking, initial, 500, 100, seed=3
        )

        state = initial.model_copy(deep=True)
        rng = np.random.default_rng(3)
        for _ in range(500):
            step(state, adoption_tensor, example_ranking, rng)
        assert trajectory.counts[-1].tolist() == state.counts

    def test_sampling_schedule(self, example_space, example_ranking, adoption_tensor):
        """Samples at 0, every interval and at the final iteration."""
        trajectory = run(
            example_space,
            adoption_tensor,
            example_ranking,
            [1, 2, 3, 4, 1, 2],
            10,
            4,
            seed=0,
        )
        assert trajectory.iterations.tolist() == [0, 4, 8, 10]
        np.testing.assert_allclose(trajectory.taus, [0, 4 / 6, 8 / 6, 10 / 6])

    def test_zero_iterations(self, example_space, example_ranking, adoption_tensor):
        """A run of length 0 holds only the initial sample."""
        trajectory = run(
            example_space, adoption_tensor, example_ranking, [1, 4], 0, 5, seed=0
        )
        assert len(trajectory) == 1
        assert trajectory.counts[0].tolist() == [1, 0, 0, 1]

    def test_deterministic(self, example_space, example_ranking, adoption_tensor):
        """Same inputs and seed give identical samples."""
        initial = build_population(example_space, counts=[10, 10, 10, 10])
        first = run(example_space, adoption_tensor, example_ranking, initial, 2000, 40, 17)
        second = run(example_space, adoption_tensor, example_ranking, initial, 2000, 40, 17)
        np.testing.assert_array_equal(first.counts, second.counts)
        assert initial.t == 0

    def test_static_block_sums_exact(self, example_space, example_ranking, adoption_tensor):
        """Age never changes, so the per-age totals are constant."""
        initial = build_population(example_space, counts=[30, 10, 10, 50])
        trajectory = run(
            example_space, adoption_tensor, example_ranking, initial, 5000, 50, seed=4
        )
        ages = trajectory.counts[:, [0, 2]].sum(axis=1)
        assert np.all(ages == 40)

    def test_stubborn_never_lose(self):
        """Self-absorbing bot corteges only gain agents."""
        space = build_space([2, 2])
        base = build_opinion_tensor(2, "voter", mu=0.8)
        tensor = make_stubborn(lift_opinion_tensor(space, base), [2, 4])
        initial = build_population(space, counts=[20, 5, 20, 5])
        trajectory = run(space, tensor, uniform_ranking(space), initial, 4000, 20, seed=12)
        bots = trajectory.counts[:, [1, 3]]
        assert np.all(np.diff(bots, axis=0) >= 0)

    def test_identity_tensor_never_moves(self, example_space, example_ranking):
        initial = build_population(example_space, counts=[3, 1, 4, 1])
        trajectory = run(
            example_space, identity_tensor(example_space), example_ranking, initial, 300, 30, 0
        )
        assert np.all(trajectory.counts == [3, 1, 4, 1])

    @pytest.mark.slow
    def test_voter_mean_is_conserved(self):
        """Pure voter dynamics keep E[Y_1(t)] = Y_1(0) across 200 seeds."""
        space = build_space([2])
        tensor = build_opinion_tensor(2, "voter", mu=0.5)
        initial = build_population(space, counts=[300, 700])
        finals = np.array(
            [
                run(space, tensor, uniform_ranking(space), initial, 10_000, 10_000, seed)
                .counts[-1][0]
                for seed in range(200)
            ],
            dtype=float,
        )
        error = finals.std(ddof=1) / np.sqrt(finals.size)
        assert error > 0
        assert abs(finals.mean() - 300) <= 3 * error


class TestOneStepExpectation:
    def test_exhaustive_enumeration(self, small_components):
        """Closed form equals brute force for every state with N <= 5, M = 3."""
        space, tensor, ranking = small_components
        for size in range(2, 6):
            for counts in _count_vectors(3, size):
                state = build_population(space, counts=counts)
                change, moves = _enumerate_one_step(counts, tensor, ranking)
                np.testing.assert_allclose(
                    one_step_expectation(state, tensor, ranking), change, atol=1e-12
                )

                law, stay = one_step_law(state, tensor, ranking)
                np.testing.assert_allclose(law, moves, atol=1e-12)
                assert stay == pytest.approx(1 - moves.sum(), abs=1e-12)

                gain, loss = transition_probabilities(state, tensor, ranking)
                np.testing.assert_allclose(gain, moves.sum(axis=0), atol=1e-12)
                np.testing.assert_allclose(loss, moves.sum(axis=1), atol=1e-12)

    def test_large_n_variant_within_two_over_n(self, small_components):
        """The /N form differs from the exact one by at most 2/N."""
        space, tensor, ranking = small_components
        for size in range(2, 6):
            for counts in _count_vectors(3, size):
                state = build_population(space, counts=counts)
                exact = one_step_expectation(state, tensor, ranking)
                approximate = one_step_expectation(state, tensor, ranking, "large_n")
                assert np.max(np.abs(exact - approximate)) <= 2 / size

    def test_two_attribute_enumeration(self, example_space, adoption_tensor, example_ranking):
        """Enumeration also matches on the lifted, masked four-cortege model."""
        for counts in _count_vectors(4, 4):
            state = build_population(example_space, counts=counts)
            change, _ = _enumerate_one_step(counts, adoption_tensor, example_ranking)
            np.testing.assert_allclose(
                one_step_expectation(state, adoption_tensor, example_ranking),
                change,
                atol=1e-12,
            )

    def test_seminal_reduction(self):
        """With one attribute and a threshold gate the seminal expectations come out."""
        opinions = 3
        space = build_space([opinions])
        base = build_opinion_tensor(opinions, "assimilative", mu=0.6, confidence=1)
        tensor = lift_opinion_tensor(space, base)
        ranking = build_threshold_ranking(space, 1, 0.25)
        p = base.dense()

        for size in range(2, 6):
            for counts in _count_vectors(opinions, size):
                state = build_population(space, counts=counts)
                expected = np.zeros(opinions)
                for q in range(opinions):
                    for s, l in product(range(opinions), repeat=2):  # noqa: E741
                        blocked = 0.25 if abs(s - l) > 1 else 0.0
                        pair = counts[s] * (counts[l] - (s == l)) / (size * (size - 1))
                        expected[q] += pair * (1 - blocked) * p[s, l, q]
                        if s == q:
                            expected[q] -= pair * (1 - blocked)
                np.testing.assert_allclose(
                    one_step_expectation(state, tensor, ranking), expected, atol=1e-12
                )

    def test_lift_commutes_with_opinion_aggregation(self):
        """Summing the lifted expectation over opinion blocks gives the opinion-only one."""
        opinions, ages = 3, 2
        space = build_space([opinions, ages])
        opinion_space = build_space([opinions])
        base = build_opinion_tensor(opinions, "assimilative", mu=0.6, confidence=1)
        tensor = lift_opinion_tensor(space, base)
        ranking = build_threshold_ranking(space, 1, 0.25)
        opinion_tensor = lift_opinion_tensor(opinion_space, base)
        opinion_ranking = build_threshold_ranking(opinion_space, 1, 0.25)

        for counts in _count_vectors(opinions * ages, 4):
            state = build_population(space, counts=counts)
            blocks = np.asarray(counts).reshape(opinions, ages).sum(axis=1)
            aggregated = build_population(opinion_space, counts=blocks.tolist())
            np.testing.assert_allclose(
                one_step_expectation(state, tensor, ranking).reshape(opinions, ages).sum(axis=1),
                one_step_expectation(aggregated, opinion_tensor, opinion_ranking),
                atol=1e-12,
            )

    def test_law_on_sparse_storage(self, example_space, example_ranking, monkeypatch):
        """CSR tensors give the same law without building the dense M^3 array."""
        raw = random_stochastic(np.random.default_rng(21), (4, 4, 4))
        dense = validate_tensor(example_space, raw)
        monkeypatch.setattr(settings, "DENSE_TENSOR_LIMIT", 2)
        sparse = validate_tensor(example_space, raw)
        assert sparse.is_sparse and not dense.is_sparse

        expected = {}
        for counts in _count_vectors(4, 4):
            expected[tuple(counts)] = _enumerate_one_step(counts, dense, example_ranking)[1]

        def refuse(self):
            raise AssertionError("dense tensor requested")

        monkeypatch.setattr(TransitionTensor, "dense", refuse)
        for counts, moves in expected.items():
            state = build_population(example_space, counts=list(counts))
            law, stay = one_step_law(state, sparse, example_ranking)
            np.testing.assert_allclose(law, moves, atol=1e-12)
            assert stay == pytest.approx(1 - moves.sum(), abs=1e-12)

    def test_sum_is_zero(self, small_components):
        """Agents are conserved in expectation."""
        space, tensor, ranking = small_components
        state = build_population(space, counts=[3, 0, 2])
        assert one_step_expectation(state, tensor, ranking).sum() == pytest.approx(
            0.0, abs=1e-15
        )

    def test_explicit_graph_rejected(self, example_space, adoption_tensor):
        graph = ExplicitGraph(n_agents=2, neighbors=((1,), (0,)))
        state = build_population(example_space, agent_corteges=[1, 2], graph=graph)
        with pytest.raises(PreconditionError, match="complete graph"):
            one_step_expectation(state, adoption_tensor, uniform_ranking(example_space))
