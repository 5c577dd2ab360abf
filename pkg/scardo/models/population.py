from typing import List, Optional, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import SimulationError, ValidationFailure
from .space import AttributeSpace


class ExplicitGraph(BaseModel):
    """Undirected interaction graph over agents 0..N-1."""

    model_config = ConfigDict(frozen=True)

    n_agents: int = Field(..., ge=1)
    neighbors: Tuple[Tuple[int, ...], ...]

    @model_validator(mode="after")
    def _check_neighbors(self) -> "ExplicitGraph":
        if len(self.neighbors) != self.n_agents:
            raise ValidationFailure(
                f"graph lists neighbors for {len(self.neighbors)} agents, "
                f"expected {self.n_agents}"
            )
        return self

    @classmethod
    def from_networkx(cls, graph: nx.Graph, n_agents: int) -> "ExplicitGraph":
        """Build from a networkx graph whose nodes are 1-based agent ids."""

        for node in graph.nodes:
            if not isinstance(node, (int, np.integer)) or not 1 <= node <= n_agents:
                raise ValidationFailure(f"agent id {node!r} is outside 1..{n_agents}")

        neighbors = []
        for agent in range(1, n_agents + 1):
            if agent in graph:
                adjacent = sorted(
                    int(other) - 1 for other in graph.neighbors(agent) if other != agent
                )
            else:
                adjacent = []
            neighbors.append(tuple(adjacent))
        return cls(n_agents=n_agents, neighbors=tuple(neighbors))

    def isolated(self) -> List[int]:
        """0-based ids of agents without neighbors."""
        return [agent for agent, adjacent in enumerate(self.neighbors) if not adjacent]


class PopulationState(BaseModel):
    """N agents, their corteges (0-based internally) and the counts Y_q.

    ``graph`` is None for the complete graph.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    space: AttributeSpace
    agent_corteges: List[int]
    counts: List[int]
    t: int = Field(default=0, ge=0)
    graph: Optional[ExplicitGraph] = None
    isolated_iterations: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_consistency(self) -> "PopulationState":
        if len(self.counts) != self.space.M:
            raise ValidationFailure(
                f"counts vector has length {len(self.counts)}, expected {self.space.M}"
            )
        if self.graph is not None and self.graph.n_agents != len(self.agent_corteges):
            raise ValidationFailure(
                f"graph has {self.graph.n_agents} agents, population has "
                f"{len(self.agent_corteges)}"
            )
        self.check_invariants()
        return self

    @property
    def N(self) -> int:
        return len(self.agent_corteges)

    @property
    def is_complete(self) -> bool:
        return self.graph is None

    @property
    def tau(self) -> float:
        return self.t / self.N

    def corteges(self) -> List[int]:
        """1-based cortege index of every agent."""
        return [cortege + 1 for cortege in self.agent_corteges]

    def fractions(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.N

    def check_invariants(self) -> None:
        """Counts must sum to N and match the per-agent corteges."""
        if sum(self.counts) != self.N:
            raise SimulationError(
                f"counts sum to {sum(self.counts)}, population has {self.N} agents"
            )
        recomputed = np.bincount(
            np.asarray(self.agent_corteges, dtype=np.int64), minlength=self.space.M
        )
        if recomputed.shape[0] != self.space.M or recomputed.tolist() != list(self.counts):
            raise SimulationError("counts are out of sync with agent corteges")
