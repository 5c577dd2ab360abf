import logging
from bisect import bisect_right
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse

from ..config import settings
from ..errors import PreconditionError, SimulationError, ValidationFailure
from ..models.population import ExplicitGraph, PopulationState
from ..models.ranking import RankingMatrix
from ..models.space import AttributeSpace
from ..models.tensor import TransitionTensor
from ..models.trajectory import SimTrajectory

logger = logging.getLogger(__name__)

# Uniform draws per iteration, in this order: recipient, donor, gate, outcome.
DRAWS_PER_ITERATION = 4

Denominator = Literal["exact", "large_n"]
InitialAssignment = Union[PopulationState, Sequence[int]]


def build_population(
    space: AttributeSpace,
    *,
    counts: Optional[Sequence[int]] = None,
    agent_corteges: Optional[Sequence[int]] = None,
    graph: Optional[ExplicitGraph] = None,
    n_agents: Optional[int] = None,
) -> PopulationState:
    """Build the initial population from target counts or 1-based per-agent corteges.

    Counts are assigned in index order: the first Y_1 agents get z_1, the
    next Y_2 get z_2, and so on.
    """

    if (counts is None) == (agent_corteges is None):
        raise ValidationFailure("give exactly one of counts or agent_corteges")

    if counts is not None:
        if len(counts) != space.M:
            raise ValidationFailure(
                f"counts vector has length {len(counts)}, expected {space.M}"
            )
        for index, count in enumerate(counts, start=1):
            if count < 0:
                raise ValidationFailure(f"count for cortege {index} is negative")
        agents = [
            cortege for cortege, count in enumerate(counts) for _ in range(int(count))
        ]
    else:
        agents = []
        for agent, cortege in enumerate(agent_corteges, start=1):
            if not 1 <= cortege <= space.M:
                raise ValidationFailure(
                    f"agent {agent} has cortege index {cortege} outside 1..{space.M}"
                )
            agents.append(int(cortege) - 1)

    if n_agents is not None and len(agents) != n_agents:
        raise ValidationFailure(
            f"initial assignment covers {len(agents)} agents, expected {n_agents}"
        )
    if not agents:
        raise ValidationFailure("population is empty")

    tally = np.bincount(np.asarray(agents, dtype=np.int64), minlength=space.M)
    return PopulationState(
        space=space,
        agent_corteges=agents,
        counts=tally.tolist(),
        graph=graph,
    )


class _Protocol:
    """Precomputed lookup tables for the one-to-one protocol."""

    def __init__(self, tensor: TransitionTensor, ranking: RankingMatrix) -> None:
        if tensor.space != ranking.space:
            raise ValidationFailure("tensor and ranking belong to different spaces")
        self.M = tensor.M
        self.tensor = tensor
        self.gate: List[List[float]] = ranking.entries.tolist()
        self._outcomes: Dict[int, Tuple[List[int], List[float]]] = {}

    def outcome(self, recipient: int, donor: int, draw: float) -> int:
        """Inverse-CDF sample from P^a_{s,l,.} with cumulative order k = 1..M."""
        position = recipient * self.M + donor
        table = self._outcomes.get(position)
        if table is None:
            distribution = self.tensor.row(recipient, donor)
            columns = np.flatnonzero(distribution)
            table = (
                columns.tolist(),
                np.cumsum(distribution[columns]).tolist(),
            )
            self._outcomes[position] = table
        columns, cumulative = table
        return columns[min(bisect_right(cumulative, draw), len(columns) - 1)]


def _check_components(
    state: PopulationState, tensor: TransitionTensor, ranking: RankingMatrix
) -> None:
    if tensor.space != state.space or ranking.space != state.space:
        raise ValidationFailure("tensor or ranking does not match the population space")
    if state.is_complete and state.N < 2:
        raise ValidationFailure("the complete-graph protocol needs at least 2 agents")


def _advance(state: PopulationState, protocol: _Protocol, uniforms: np.ndarray) -> None:
    """Run one iteration per row of ``uniforms`` (shape (n, 4)) in place."""

    agents = state.agent_corteges
    counts = state.counts
    gate = protocol.gate
    size = len(agents)
    neighbors = None if state.graph is None else state.graph.neighbors
    debug = settings.DEBUG
    t = state.t
    isolated = 0

    for u_recipient, u_donor, u_gate, u_outcome in uniforms.tolist():
        t += 1
        recipient = min(int(u_recipient * size), size - 1)

        if neighbors is None:
            donor = min(int(u_donor * (size - 1)), size - 2)
            if donor >= recipient:
                donor += 1
        else:
            adjacent = neighbors[recipient]
            if not adjacent:
                isolated += 1
                continue
            donor = adjacent[min(int(u_donor * len(adjacent)), len(adjacent) - 1)]

        s = agents[recipient]
        l = agents[donor]  # noqa: E741
        if u_gate >= gate[s][l]:
            continue

        k = protocol.outcome(s, l, u_outcome)
        if k != s:
            agents[recipient] = k
            counts[s] -= 1
            counts[k] += 1

        if debug and sum(counts) != size:
            raise SimulationError(f"agent count drifted at iteration {t}")

    state.t = t
    state.isolated_iterations += isolated


def step(
    state: PopulationState,
    tensor: TransitionTensor,
    ranking: RankingMatrix,
    rng: np.random.Generator,
) -> PopulationState:
    """Advance the population by one iteration of the one-to-one protocol.

    Consumes exactly four uniforms from ``rng`` whether or not the
    interaction passes the ranking gate.
    """

    _check_components(state, tensor, ranking)
    _advance(state, _Protocol(tensor, ranking), rng.random((1, DRAWS_PER_ITERATION)))
    return state


def run(
    space: AttributeSpace,
    tensor: TransitionTensor,
    ranking: RankingMatrix,
    initial: InitialAssignment,
    iterations: int,
    sample_interval: int,
    seed: int,
    *,
    n_agents: Optional[int] = None,
    graph: Optional[ExplicitGraph] = None,
    replica: int = 0,
    config_digest: str = "",
) -> SimTrajectory:
    """Run the protocol for ``iterations`` steps and sample the counts.

    Samples are taken at t = 0, every ``sample_interval`` iterations and at
    the final iteration. Identical inputs and seed give identical output.
    """

    if iterations < 0:
        raise ValidationFailure(f"iterations must be nonnegative, got {iterations}")
    if sample_interval < 1:
        raise ValidationFailure(f"sample interval must be positive, got {sample_interval}")

    if isinstance(initial, PopulationState):
        if initial.space != space:
            raise ValidationFailure("initial population belongs to a different space")
        if n_agents is not None and initial.N != n_agents:
            raise ValidationFailure(
                f"initial assignment covers {initial.N} agents, expected {n_agents}"
            )
        state = initial.model_copy(deep=True)
    else:
        state = build_population(
            space, agent_corteges=initial, graph=graph, n_agents=n_agents
        )

    _check_components(state, tensor, ranking)
    if state.graph is not None and state.graph.isolated():
        logger.warning(
            "%s agents have no neighbors; their iterations are no-ops",
            len(state.graph.isolated()),
        )

    protocol = _Protocol(tensor, ranking)
    rng = np.random.default_rng(seed)
    start = state.t
    target = start + iterations

    sampled_at = [state.t]
    samples = [list(state.counts)]
    logger.info(
        "Running %s iterations on N=%s agents (M=%s, seed=%s, replica=%s)",
        iterations,
        state.N,
        space.M,
        seed,
        replica,
    )

    next_sample = start + sample_interval
    while state.t < target:
        stop = min(next_sample, target)
        while state.t < stop:
            block = min(settings.RNG_BLOCK, stop - state.t)
            _advance(state, protocol, rng.random((block, DRAWS_PER_ITERATION)))
        sampled_at.append(state.t)
        samples.append(list(state.counts))
        if state.t == next_sample:
            next_sample += sample_interval
        logger.debug("Sampled t=%s counts=%s", state.t, state.counts)

    if settings.DEBUG:
        state.check_invariants()

    return SimTrajectory(
        space=space,
        n_agents=state.N,
        iterations=np.asarray(sampled_at, dtype=np.int64),
        counts=np.asarray(samples, dtype=np.int64),
        seed=seed,
        replica=replica,
        config_digest=config_digest,
    )


def _pair_weights(
    state: PopulationState, ranking: RankingMatrix, denominator: Denominator
) -> np.ndarray:
    """A_{s,l} = Y_s/N * (Y_l - delta_{s,l})/D * f_{s,l}; D = N - 1 (exact) or N."""

    if not state.is_complete:
        raise PreconditionError("one-step expectations are defined on the complete graph only")
    if state.N < 2:
        raise ValidationFailure("the complete-graph protocol needs at least 2 agents")
    if denominator not in ("exact", "large_n"):
        raise ValidationFailure(f"unknown denominator {denominator!r}")

    counts = np.asarray(state.counts, dtype=float)
    size = state.N
    donors = size - 1 if denominator == "exact" else size
    pairs = counts[:, None] * (counts[None, :] - np.eye(counts.shape[0]))
    return pairs * ranking.entries / (size * donors)


def one_step_expectation(
    state: PopulationState,
    tensor: TransitionTensor,
    ranking: RankingMatrix,
    denominator: Denominator = "exact",
) -> np.ndarray:
    """E[Y(t+1)] - Y(t) on the complete graph.

    ``denominator="exact"`` draws the donor among the N - 1 other agents, as
    the simulator does; ``"large_n"`` uses the large-N form (Y_l - delta)/N.
    """

    _check_components(state, tensor, ranking)
    weights = _pair_weights(state, ranking, denominator)
    gains = tensor.rows.T @ weights.ravel()
    return np.asarray(gains, dtype=float).ravel() - weights.sum(axis=1)


def transition_probabilities(
    state: PopulationState,
    tensor: TransitionTensor,
    ranking: RankingMatrix,
) -> Tuple[np.ndarray, np.ndarray]:
    """Pr(Y_q(t+1) = Y_q(t) + 1) and Pr(Y_q(t+1) = Y_q(t) - 1) for every q."""

    _check_components(state, tensor, ranking)
    weights = _pair_weights(state, ranking, "exact")
    staying = tensor.self_probabilities()

    arrivals = np.asarray(tensor.rows.T @ weights.ravel(), dtype=float).ravel()
    gain = arrivals - (weights * staying).sum(axis=1)
    loss = (weights * (1.0 - staying)).sum(axis=1)
    return gain, loss


def one_step_law(
    state: PopulationState,
    tensor: TransitionTensor,
    ranking: RankingMatrix,
) -> Tuple[np.ndarray, float]:
    """Distribution of the next cortege move.

    Returns an (M, M) array whose entry [s, k] (0-based, s != k) is the
    probability that one agent moves z_s -> z_k in the next iteration, and
    the probability that the counts stay unchanged.
    """

    _check_components(state, tensor, ranking)
    weights = _pair_weights(state, ranking, "exact")
    size = tensor.M
    positions = np.arange(size * size)
    # row s of the selector sums the weighted rows s*M .. s*M + M - 1
    selector = scipy.sparse.csr_array(
        (weights.ravel(), (positions // size, positions)), shape=(size, size * size)
    )
    moves = selector @ tensor.moving_rows()
    if scipy.sparse.issparse(moves):
        moves = moves.toarray()
    moves = np.asarray(moves, dtype=float)
    return moves, float(1.0 - moves.sum())
