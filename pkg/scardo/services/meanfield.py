import logging
import math
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
import scipy.integrate

from ..config import settings
from ..errors import PreconditionError, SimulationError, ValidationFailure
from ..models.ranking import RankingMatrix
from ..models.report import (
    ComparisonReport,
    InitialConditionTarget,
    PerturbationTarget,
    RankingEntryTarget,
    SensitivityReport,
    TensorEntryTarget,
)
from ..models.space import AttributeSpace
from ..models.tensor import TransitionTensor
from ..models.trajectory import MeanFieldTrajectory, SimTrajectory
from .attribute_space import aggregate_opinion_fractions
from .ranking import validate_ranking
from .transition import shift_mass

logger = logging.getLogger(__name__)

Method = Literal["rk4", "lsoda"]


class _VectorField:
    """dy_q/dtau = sum_{s != q, l} f_{s,l} y_s y_l p^a_{s,l,q}
    - y_q sum_l f_{q,l} y_l (1 - p^a_{q,l,q}).

    Self outcomes appear on neither side, so rows that keep the recipient
    in place contribute exactly zero.
    """

    def __init__(self, tensor: TransitionTensor, ranking: RankingMatrix) -> None:
        if tensor.space != ranking.space:
            raise ValidationFailure("tensor and ranking belong to different spaces")
        self.arrivals = tensor.moving_rows().T
        self.gate = ranking.entries
        self.leaving = ranking.entries * (1.0 - tensor.self_probabilities())

    def __call__(self, y: np.ndarray) -> np.ndarray:
        weights = np.multiply.outer(y, y)
        weights *= self.gate
        arrivals = np.asarray(self.arrivals @ weights.ravel(), dtype=float).ravel()
        return arrivals - y * (self.leaving @ y)


def rhs(
    y: Sequence[float],
    tensor: TransitionTensor,
    ranking: RankingMatrix,
) -> np.ndarray:
    """Right-hand side of the mean-field system at ``y``.

    ``y`` need not be nonnegative; the integrator may evaluate states just
    outside the simplex.
    """

    vector = np.asarray(y, dtype=float)
    if vector.shape != (tensor.M,):
        raise ValidationFailure(f"state has shape {vector.shape}, expected ({tensor.M},)")
    if not np.all(np.isfinite(vector)):
        raise ValidationFailure("state contains non-finite entries")
    return _VectorField(tensor, ranking)(vector)


def _initial_state(space: AttributeSpace, y0: Sequence[float]) -> np.ndarray:
    start = np.asarray(y0, dtype=float)
    if start.shape != (space.M,):
        raise PreconditionError(f"y0 has shape {start.shape}, expected ({space.M},)")
    if not np.all(np.isfinite(start)):
        raise PreconditionError("y0 contains non-finite entries")
    negative = np.flatnonzero(start < 0)
    if negative.size:
        raise PreconditionError(f"y0 component {int(negative[0]) + 1} is negative")
    mass = start.sum()
    if abs(mass - 1.0) > settings.STOCHASTIC_TOLERANCE:
        raise PreconditionError(f"y0 sums to {mass!r}, expected 1")
    return start / mass


def integrate(
    y0: Sequence[float],
    tensor: TransitionTensor,
    ranking: RankingMatrix,
    horizon: float,
    step: Optional[float] = None,
    *,
    sample_interval: Optional[float] = None,
    equilibrium_tolerance: Optional[float] = None,
    method: Method = "rk4",
) -> MeanFieldTrajectory:
    """Solve the Cauchy problem y(0) = y0 on [0, horizon].

    The default method is classical fixed-step RK4, which is reproducible
    bit for bit. Samples are stored every ``sample_interval`` units of tau
    (plus tau = 0 and the final point); the simplex monitors are updated on
    every step. Nothing is clamped or projected. With
    ``equilibrium_tolerance`` set, integration stops once ||rhs||_inf drops
    below it.
    """

    space = tensor.space
    start = _initial_state(space, y0)
    step = settings.RK4_STEP if step is None else step
    sample_interval = (
        settings.ODE_SAMPLE_INTERVAL if sample_interval is None else sample_interval
    )
    if horizon <= 0:
        raise PreconditionError(f"horizon must be positive, got {horizon}")
    if step <= 0:
        raise PreconditionError(f"step must be positive, got {step}")
    if sample_interval <= 0:
        raise PreconditionError(f"sample interval must be positive, got {sample_interval}")

    field = _VectorField(tensor, ranking)
    if method == "rk4":
        trajectory = _integrate_rk4(
            space, field, start, horizon, step, sample_interval, equilibrium_tolerance
        )
    elif method == "lsoda":
        trajectory = _integrate_lsoda(
            space, field, start, horizon, sample_interval, equilibrium_tolerance
        )
    else:
        raise PreconditionError(f"unknown integration method {method!r}")

    logger.info(
        "Integrated to tau=%s with %s (samples=%s, max |sum y - 1|=%.3g, min y=%.3g)",
        float(trajectory.taus[-1]),
        method,
        len(trajectory),
        trajectory.max_mass_error,
        trajectory.min_fraction,
    )
    if trajectory.max_mass_error > 1e-8 or trajectory.min_fraction < -1e-8:
        logger.warning(
            "Trajectory left the simplex beyond 1e-8 (mass error %.3g, min y %.3g)",
            trajectory.max_mass_error,
            trajectory.min_fraction,
        )
    return trajectory


def _integrate_rk4(
    space: AttributeSpace,
    field: _VectorField,
    y: np.ndarray,
    horizon: float,
    step: float,
    sample_interval: float,
    equilibrium_tolerance: Optional[float],
) -> MeanFieldTrajectory:
    n_steps = max(1, math.ceil(horizon / step - 1e-9))
    every = max(1, round(sample_interval / step))

    taus = [0.0]
    states = [y.copy()]
    max_mass_error = abs(float(y.sum()) - 1.0)
    min_fraction = float(y.min())
    equilibrium_tau = None
    tau = 0.0

    for n in range(1, n_steps + 1):
        h = step if n < n_steps else horizon - (n_steps - 1) * step

        k1 = field(y)
        if equilibrium_tolerance is not None and np.max(np.abs(k1)) < equilibrium_tolerance:
            equilibrium_tau = tau
            logger.debug("Equilibrium reached at tau=%s", tau)
            break
        k2 = field(y + 0.5 * h * k1)
        k3 = field(y + 0.5 * h * k2)
        k4 = field(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tau = n * step if n < n_steps else horizon

        if not np.all(np.isfinite(y)):
            raise SimulationError(f"mean-field state became non-finite at tau={tau}")
        max_mass_error = max(max_mass_error, abs(float(y.sum()) - 1.0))
        min_fraction = min(min_fraction, float(y.min()))

        if n % every == 0 or n == n_steps:
            taus.append(tau)
            states.append(y)

    if taus[-1] != tau:
        taus.append(tau)
        states.append(y)

    return MeanFieldTrajectory(
        space=space,
        taus=np.asarray(taus),
        states=np.vstack(states),
        step=step,
        method="rk4",
        max_mass_error=max_mass_error,
        min_fraction=min_fraction,
        equilibrium_tau=equilibrium_tau,
    )


def _integrate_lsoda(
    space: AttributeSpace,
    field: _VectorField,
    y: np.ndarray,
    horizon: float,
    sample_interval: float,
    equilibrium_tolerance: Optional[float],
) -> MeanFieldTrajectory:
    grid = np.arange(0.0, horizon, sample_interval)
    grid = np.append(grid[grid < horizon * (1.0 - 1e-12)], horizon)

    events = None
    if equilibrium_tolerance is not None:

        def settled(_tau, state):
            return float(np.max(np.abs(field(state)))) - equilibrium_tolerance

        settled.terminal = True
        events = [settled]

    solution = scipy.integrate.solve_ivp(
        lambda _tau, state: field(state),
        (0.0, horizon),
        y,
        method="LSODA",
        t_eval=grid,
        events=events,
        rtol=settings.LSODA_RTOL,
        atol=settings.LSODA_ATOL,
    )
    if not solution.success:
        raise SimulationError(f"LSODA integration failed: {solution.message}")

    states = solution.y.T
    if not np.all(np.isfinite(states)):
        raise SimulationError("mean-field state became non-finite")

    equilibrium_tau = None
    if events is not None and solution.t_events[0].size:
        equilibrium_tau = float(solution.t_events[0][0])

    return MeanFieldTrajectory(
        space=space,
        taus=solution.t,
        states=states,
        step=None,
        method="lsoda",
        max_mass_error=float(np.max(np.abs(states.sum(axis=1) - 1.0))),
        min_fraction=float(states.min()),
        equilibrium_tau=equilibrium_tau,
    )


def opinion_trajectory(trajectory: MeanFieldTrajectory, space: AttributeSpace) -> np.ndarray:
    """Opinion-camp fractions y° for every stored sample, shape (samples, m1)."""

    if trajectory.space != space:
        raise ValidationFailure("trajectory belongs to a different attribute space")
    return np.vstack([aggregate_opinion_fractions(space, y) for y in trajectory.states])


def compare_trajectories(sim: SimTrajectory, mf: MeanFieldTrajectory) -> ComparisonReport:
    """Maximum deviation |Y_q(tau N)/N - y_q(tau)| over the common tau range.

    The ODE solution is linearly interpolated at the simulation's sample
    times.
    """

    if sim.space != mf.space:
        raise ValidationFailure("trajectories belong to different attribute spaces")

    sim_taus = sim.taus
    low = max(float(sim_taus[0]), float(mf.taus[0]))
    high = min(float(sim_taus[-1]), float(mf.taus[-1]))
    if low > high:
        raise PreconditionError(
            f"trajectories do not overlap in tau (sim {sim_taus[0]}..{sim_taus[-1]}, "
            f"mean field {mf.taus[0]}..{mf.taus[-1]})"
        )

    slack = 1e-12 * max(1.0, high)
    window = (sim_taus >= low - slack) & (sim_taus <= high + slack)
    taus = np.clip(sim_taus[window], low, high)

    observed = sim.fractions()[window]
    expected = np.column_stack(
        [np.interp(taus, mf.taus, mf.states[:, q]) for q in range(mf.space.M)]
    )
    errors = np.abs(observed - expected)

    space = sim.space
    blocks = (space.opinion_count, space.block_size)
    opinion_errors = np.abs(
        observed.reshape(-1, *blocks).sum(axis=2) - expected.reshape(-1, *blocks).sum(axis=2)
    )

    per_cortege = errors.max(axis=0)
    report = ComparisonReport(
        sup_error=float(per_cortege.max()),
        per_cortege_max=per_cortege.tolist(),
        per_opinion_max=opinion_errors.max(axis=0).tolist(),
        tau_start=low,
        tau_end=high,
        samples=int(taus.shape[0]),
        n_agents=sim.n_agents,
        seed=sim.seed,
        replica=sim.replica,
    )
    logger.info(
        "Compared replica %s (N=%s) over tau in [%s, %s]: sup error %.4g",
        sim.replica,
        sim.n_agents,
        low,
        high,
        report.sup_error,
    )
    return report


def _perturbed(
    y0: np.ndarray,
    tensor: TransitionTensor,
    ranking: RankingMatrix,
    target: PerturbationTarget,
    amount: float,
) -> Tuple[np.ndarray, TransitionTensor, RankingMatrix]:
    size = tensor.M

    if isinstance(target, TensorEntryTarget):
        try:
            shifted = shift_mass(tensor, target.s, target.l, target.k, amount)
        except ValidationFailure as exc:
            raise PreconditionError(str(exc)) from exc
        return y0, shifted, ranking

    if isinstance(target, RankingEntryTarget):
        if not (target.s <= size and target.l <= size):
            raise PreconditionError(f"ranking entry ({target.s}, {target.l}) is outside 1..{size}")
        entries = np.array(ranking.entries)
        entries[target.s - 1, target.l - 1] += amount
        value = entries[target.s - 1, target.l - 1]
        if not 0.0 <= value <= 1.0:
            raise PreconditionError(
                f"perturbing f({target.s}, {target.l}) by {amount!r} leaves [0, 1]"
            )
        return y0, tensor, validate_ranking(ranking.space, entries)

    if isinstance(target, InitialConditionTarget):
        if target.against is None:
            raise PreconditionError(
                "perturbing y0 without a compensating component leaves the simplex"
            )
        if target.against == target.component:
            raise PreconditionError("component and compensating component coincide")
        if not (target.component <= size and target.against <= size):
            raise PreconditionError(f"initial-condition components must lie in 1..{size}")
        start = y0.copy()
        start[target.component - 1] += amount
        start[target.against - 1] -= amount
        if np.any(start < 0) or np.any(start > 1):
            raise PreconditionError(f"perturbing y0 by {amount!r} leaves the simplex")
        return start, tensor, ranking

    raise PreconditionError(f"unsupported perturbation target {target!r}")


def parameter_sensitivity(
    y0: Sequence[float],
    tensor: TransitionTensor,
    ranking: RankingMatrix,
    horizon: float,
    step: Optional[float],
    target: PerturbationTarget,
    epsilon: float,
) -> SensitivityReport:
    """Central difference (y(horizon; theta+eps) - y(horizon; theta-eps)) / 2 eps."""

    if epsilon <= 0:
        raise PreconditionError(f"epsilon must be positive, got {epsilon}")

    start = _initial_state(tensor.space, y0)
    finals = []
    for sign in (1.0, -1.0):
        shifted_y0, shifted_tensor, shifted_ranking = _perturbed(
            start, tensor, ranking, target, sign * epsilon
        )
        trajectory = integrate(
            shifted_y0,
            shifted_tensor,
            shifted_ranking,
            horizon,
            step,
            sample_interval=horizon,
        )
        finals.append(trajectory.states[-1])

    sensitivity = (finals[0] - finals[1]) / (2.0 * epsilon)
    logger.info(
        "Sensitivity to %s at eps=%s: ||dy/dtheta||_inf=%.4g",
        target.kind,
        epsilon,
        float(np.max(np.abs(sensitivity))),
    )
    return SensitivityReport(
        target=target,
        epsilon=epsilon,
        horizon=horizon,
        sensitivity=sensitivity.tolist(),
        opinion_sensitivity=aggregate_opinion_fractions(tensor.space, sensitivity).tolist(),
    )
