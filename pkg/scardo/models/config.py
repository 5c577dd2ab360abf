from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .population import PopulationState
from .ranking import RankingMatrix
from .report import PerturbationTarget
from .space import AttributeSpace, Label
from .tensor import TransitionTensor

DenseEntries = Union[List[List[List[float]]], List[List[float]]]


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SpaceSpec(_Spec):
    cardinalities: List[int] = Field(..., min_length=1)
    labels: Optional[List[List[Label]]] = None


class SparseEntry(_Spec):
    s: int = Field(..., ge=1)
    l: int = Field(..., ge=1)  # noqa: E741
    k: int = Field(..., ge=1)
    p: float


class DenseTensorSpec(_Spec):
    kind: Literal["dense"] = "dense"
    entries: DenseEntries


class SparseTensorSpec(_Spec):
    kind: Literal["sparse"] = "sparse"
    entries: List[SparseEntry]


class BaseTensorSpec(_Spec):
    """Opinion-only tensor a recipe starts from."""

    kind: Literal["dense", "identity", "voter", "assimilative", "repulsive"]
    entries: Optional[DenseEntries] = None
    mu: float = 1.0
    confidence: Optional[int] = None
    threshold: int = 0

    @model_validator(mode="after")
    def _check_entries(self) -> "BaseTensorSpec":
        if (self.kind == "dense") != (self.entries is not None):
            raise ValueError("entries are required for kind 'dense' and only for it")
        return self


class StubbornSpec(_Spec):
    corteges: Optional[List[int]] = None
    attribute: Optional[int] = None
    values: Optional[List[int]] = None

    @model_validator(mode="after")
    def _check_form(self) -> "StubbornSpec":
        by_attribute = self.attribute is not None or self.values is not None
        if (self.corteges is not None) == by_attribute:
            raise ValueError("give either corteges or attribute + values")
        if by_attribute and (self.attribute is None or self.values is None):
            raise ValueError("attribute and values must be given together")
        return self


class RecipeTensorSpec(_Spec):
    kind: Literal["recipe"] = "recipe"
    base: BaseTensorSpec
    lift: bool = True
    static_attributes: List[int] = Field(default_factory=list)
    mask_mode: Literal["self", "renormalize"] = "self"
    stubborn: Optional[StubbornSpec] = None


TensorSpec = Annotated[
    Union[DenseTensorSpec, SparseTensorSpec, RecipeTensorSpec],
    Field(discriminator="kind"),
]


class UniformRankingSpec(_Spec):
    kind: Literal["uniform"] = "uniform"


class DenseRankingSpec(_Spec):
    kind: Literal["dense"] = "dense"
    entries: List[List[float]]


class ThresholdRankingSpec(_Spec):
    kind: Literal["threshold"] = "threshold"
    threshold: float
    block_probability: float


class AdditiveRankingSpec(_Spec):
    kind: Literal["additive"] = "additive"
    penalties: List[float]


RankingSpec = Annotated[
    Union[
        UniformRankingSpec,
        DenseRankingSpec,
        ThresholdRankingSpec,
        AdditiveRankingSpec,
    ],
    Field(discriminator="kind"),
]


class GraphSpec(_Spec):
    kind: Literal["complete", "edge_list"] = "complete"
    path: Optional[str] = None

    @model_validator(mode="after")
    def _check_path(self) -> "GraphSpec":
        if (self.kind == "edge_list") != (self.path is not None):
            raise ValueError("path is required for kind 'edge_list' and only for it")
        return self


class PopulationSpec(_Spec):
    size: int = Field(..., ge=1)
    initial_counts: Optional[List[int]] = None
    agents: Optional[List[int]] = None
    graph: GraphSpec = Field(default_factory=GraphSpec)

    @model_validator(mode="after")
    def _check_initial(self) -> "PopulationSpec":
        if (self.initial_counts is None) == (self.agents is None):
            raise ValueError("give exactly one of initial_counts or agents")
        if self.initial_counts is not None and sum(self.initial_counts) != self.size:
            raise ValueError(
                f"initial_counts sum to {sum(self.initial_counts)}, size is {self.size}"
            )
        if self.agents is not None and len(self.agents) != self.size:
            raise ValueError(f"agents lists {len(self.agents)} entries, size is {self.size}")
        return self


class RunSpec(_Spec):
    seed: int = Field(..., ge=0)
    iterations: Optional[int] = Field(default=None, ge=0)
    horizon: Optional[float] = Field(default=None, gt=0)
    step: Optional[float] = Field(default=None, gt=0)
    sample_interval: Optional[int] = Field(default=None, ge=1)
    ode_sample_interval: Optional[float] = Field(default=None, gt=0)
    equilibrium_tolerance: Optional[float] = Field(default=None, gt=0)
    replicas: int = Field(default=1, ge=1)
    method: Literal["rk4", "lsoda"] = "rk4"

    @model_validator(mode="after")
    def _check_length(self) -> "RunSpec":
        if self.iterations is None and self.horizon is None:
            raise ValueError("give iterations or horizon")
        return self


class OutputSpec(_Spec):
    directory: Optional[str] = None
    prefix: str = Field(default="run", min_length=1)
    formats: List[Literal["csv"]] = Field(default_factory=lambda: ["csv"])


class SensitivitySpec(_Spec):
    target: PerturbationTarget
    epsilon: float = Field(..., gt=0)


class RunConfig(_Spec):
    """One self-contained experiment, as written in the config file.

    Schema only; ``services.runconfig.parse_config`` builds the components.
    """

    space: SpaceSpec
    tensor: TensorSpec
    ranking: RankingSpec = Field(default_factory=UniformRankingSpec)
    population: PopulationSpec
    run: RunSpec
    output: OutputSpec = Field(default_factory=OutputSpec)
    sensitivity: Optional[SensitivitySpec] = None

    @property
    def iterations(self) -> int:
        if self.run.iterations is not None:
            return self.run.iterations
        return round(self.run.horizon * self.population.size)

    @property
    def horizon(self) -> float:
        """Mean-field horizon in tau; defaults to iterations / N."""
        if self.run.horizon is not None:
            return self.run.horizon
        return self.run.iterations / self.population.size

    @property
    def sample_interval(self) -> int:
        return self.run.sample_interval or self.population.size


class Experiment(BaseModel):
    """A validated config plus the space, tensor, ranking and population it describes.

    ``base_dir`` is where relative paths in the config were resolved.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    config: RunConfig
    space: AttributeSpace
    tensor: TransitionTensor
    ranking: RankingMatrix
    population: PopulationState
    base_dir: Path = Path(".")

    def fresh_population(self) -> PopulationState:
        """A private copy of the initial population (t = 0)."""
        return self.population.model_copy(deep=True)

    def initial_fractions(self) -> np.ndarray:
        return self.population.fractions()
