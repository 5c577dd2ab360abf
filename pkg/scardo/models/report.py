from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, Field


class TensorEntryTarget(BaseModel):
    """Perturb p^a_{s,l,k}; the self entry p^a_{s,l,s} absorbs the opposite change."""

    kind: Literal["tensor"] = "tensor"
    s: int = Field(..., ge=1)
    l: int = Field(..., ge=1)  # noqa: E741
    k: int = Field(..., ge=1)


class RankingEntryTarget(BaseModel):
    """Perturb f_{s,l}."""

    kind: Literal["ranking"] = "ranking"
    s: int = Field(..., ge=1)
    l: int = Field(..., ge=1)  # noqa: E741


class InitialConditionTarget(BaseModel):
    """Perturb y0_q; ``against`` names the component that compensates."""

    kind: Literal["initial"] = "initial"
    component: int = Field(..., ge=1)
    against: Optional[int] = Field(default=None, ge=1)


PerturbationTarget = Annotated[
    Union[TensorEntryTarget, RankingEntryTarget, InitialConditionTarget],
    Field(discriminator="kind"),
]


class ComparisonReport(BaseModel):
    """Stochastic-vs-mean-field errors |Y_q(tau N)/N - y_q(tau)| over a common grid."""

    sup_error: float
    per_cortege_max: List[float]
    per_opinion_max: List[float]
    tau_start: float
    tau_end: float
    samples: int
    n_agents: int
    seed: int
    replica: int = 0


class SensitivityReport(BaseModel):
    """Central-difference derivative of y(horizon) with respect to one parameter."""

    target: PerturbationTarget
    epsilon: float
    horizon: float
    sensitivity: List[float]
    opinion_sensitivity: List[float]


class ComparisonSummary(BaseModel):
    """Comparison reports of every replica against one mean-field solution."""

    config_digest: str
    horizon: float
    worst_sup_error: float
    replicas: List[ComparisonReport]


class ConfigSummary(BaseModel):
    """What ``validate`` reports about a parsed config."""

    cardinalities: List[int]
    corteges: int
    agents: int
    iterations: int
    horizon: float
    seed: int
    replicas: int
    tensor_storage: Literal["dense", "sparse"]
    config_digest: str
