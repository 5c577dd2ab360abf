import logging
from pathlib import Path

import networkx as nx

from ..errors import ValidationFailure
from ..models.population import ExplicitGraph

logger = logging.getLogger(__name__)


def load_edge_list(path: Path, n_agents: int) -> ExplicitGraph:
    """Read a whitespace-separated edge list of 1-based agent ids.

    Lines starting with ``#`` are ignored. Agents missing from the file are
    isolated.
    """

    try:
        graph = nx.read_edgelist(path, nodetype=int, comments="#", data=False)
    except (TypeError, ValueError) as exc:
        raise ValidationFailure(f"edge list {path} is malformed: {exc}") from exc

    explicit = ExplicitGraph.from_networkx(graph, n_agents)
    logger.debug(
        "Loaded %s edges over %s agents from %s",
        graph.number_of_edges(),
        n_agents,
        path,
    )
    return explicit
