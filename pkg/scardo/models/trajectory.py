from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import ValidationFailure
from .space import AttributeSpace


def _opinion_blocks(space: AttributeSpace, values: np.ndarray) -> np.ndarray:
    return values.reshape(values.shape[0], space.opinion_count, space.block_size).sum(
        axis=2
    )


class SimTrajectory(BaseModel):
    """Sampled cortege counts Y(t) of one stochastic run."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    space: AttributeSpace
    n_agents: int = Field(..., ge=1)
    iterations: np.ndarray
    counts: np.ndarray
    seed: int
    replica: int = 0
    config_digest: str = ""

    @model_validator(mode="after")
    def _check_samples(self) -> "SimTrajectory":
        if self.counts.ndim != 2 or self.counts.shape != (
            self.iterations.shape[0],
            self.space.M,
        ):
            raise ValidationFailure(
                f"counts have shape {self.counts.shape}, expected "
                f"({self.iterations.shape[0]}, {self.space.M})"
            )
        if np.any(np.diff(self.iterations) <= 0):
            raise ValidationFailure("sample iterations must be strictly increasing")
        if np.any(self.counts.sum(axis=1) != self.n_agents):
            raise ValidationFailure(f"a sample's counts do not sum to N={self.n_agents}")
        return self

    @property
    def taus(self) -> np.ndarray:
        return self.iterations / self.n_agents

    def fractions(self) -> np.ndarray:
        return self.counts / self.n_agents

    def opinion_fractions(self) -> np.ndarray:
        return _opinion_blocks(self.space, self.fractions())

    def __len__(self) -> int:
        return int(self.iterations.shape[0])


class MeanFieldState(BaseModel):
    """Point (tau, y) of the mean-field system."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    tau: float
    y: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.y.sum())


class MeanFieldTrajectory(BaseModel):
    """Sampled solution y(tau) of the mean-field ODE plus invariant monitors.

    ``max_mass_error`` is max |sum(y) - 1| and ``min_fraction`` is min y over
    every integration step, not only the stored samples.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    space: AttributeSpace
    taus: np.ndarray
    states: np.ndarray
    step: Optional[float] = None
    method: Literal["rk4", "lsoda"] = "rk4"
    max_mass_error: float = 0.0
    min_fraction: float = 0.0
    equilibrium_tau: Optional[float] = None

    @model_validator(mode="after")
    def _check_samples(self) -> "MeanFieldTrajectory":
        if self.states.ndim != 2 or self.states.shape != (
            self.taus.shape[0],
            self.space.M,
        ):
            raise ValidationFailure(
                f"states have shape {self.states.shape}, expected "
                f"({self.taus.shape[0]}, {self.space.M})"
            )
        if np.any(np.diff(self.taus) <= 0):
            raise ValidationFailure("sample times must be strictly increasing")
        return self

    def at(self, sample: int) -> MeanFieldState:
        return MeanFieldState(tau=float(self.taus[sample]), y=self.states[sample])

    def opinion_fractions(self) -> np.ndarray:
        return _opinion_blocks(self.space, self.states)

    def __len__(self) -> int:
        return int(self.taus.shape[0])


class TrajectoryTable(BaseModel):
    """A trajectory CSV read back: header names and the value matrix."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    columns: List[str]
    values: np.ndarray

    def column(self, name: str) -> np.ndarray:
        try:
            position = self.columns.index(name)
        except ValueError:
            raise ValidationFailure(f"no column named {name!r}") from None
        return self.values[:, position]
