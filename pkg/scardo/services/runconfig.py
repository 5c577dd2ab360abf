import hashlib
import json
import logging
from pathlib import Path
from typing import Callable, Optional, TypeVar, Union

import numpy as np
from pydantic import ValidationError

from ..adapters.graph import load_edge_list
from ..errors import ConfigError, ScardoError, ValidationFailure
from ..models.config import (
    DenseRankingSpec,
    DenseTensorSpec,
    Experiment,
    RankingSpec,
    RecipeTensorSpec,
    RunConfig,
    RunSpec,
    SparseTensorSpec,
    TensorSpec,
    ThresholdRankingSpec,
    UniformRankingSpec,
)
from ..models.population import ExplicitGraph
from ..models.ranking import RankingMatrix
from ..models.space import AttributeSpace
from ..models.tensor import TransitionTensor
from .attribute_space import build_space
from .ranking import (
    build_additive_penalty_ranking,
    build_threshold_ranking,
    uniform_ranking,
    validate_ranking,
)
from .simulator import build_population
from .transition import (
    build_opinion_tensor,
    lift_opinion_tensor,
    make_stubborn,
    mask_static_attributes,
    stubborn_by_attribute,
    validate_tensor,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")


def _describe(exc: ValidationError) -> str:
    messages = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error.get("loc", ()))
        original = error.get("ctx", {}).get("error")
        if isinstance(original, ScardoError):
            message = str(original)
        else:
            message = error.get("msg", "invalid value")
        messages.append(f"{location}: {message}" if location else message)
    return "; ".join(messages)


def _build(section: str, factory: Callable[[], T]) -> T:
    try:
        return factory()
    except ScardoError as exc:
        raise ConfigError(f"{section}: {exc}", path=section) from exc


def _sparse_tensor(space: AttributeSpace, spec: SparseTensorSpec) -> TransitionTensor:
    size = space.M
    raw = np.zeros((size, size, size))
    for entry in spec.entries:
        if max(entry.s, entry.l, entry.k) > size:
            raise ValidationFailure(
                f"sparse entry ({entry.s}, {entry.l}, {entry.k}) is outside 1..{size}"
            )
        raw[entry.s - 1, entry.l - 1, entry.k - 1] += entry.p
    return validate_tensor(space, raw)


def _recipe_tensor(space: AttributeSpace, spec: RecipeTensorSpec) -> TransitionTensor:
    base = spec.base
    if spec.lift:
        opinions = space.opinion_count
    else:
        if space.L != 1:
            raise ValidationFailure("an unlifted recipe needs a space with one attribute")
        opinions = space.M

    if base.kind == "dense":
        seminal = base.entries
    else:
        seminal = build_opinion_tensor(
            opinions,
            base.kind,
            mu=base.mu,
            confidence=base.confidence,
            threshold=base.threshold,
        )

    if spec.lift:
        tensor = lift_opinion_tensor(space, seminal)
    elif isinstance(seminal, TransitionTensor):
        tensor = validate_tensor(space, seminal.rows)
    else:
        tensor = validate_tensor(space, seminal)

    if spec.static_attributes:
        tensor = mask_static_attributes(tensor, spec.static_attributes, spec.mask_mode)

    if spec.stubborn is not None:
        if spec.stubborn.corteges is not None:
            stubborn = spec.stubborn.corteges
        else:
            stubborn = stubborn_by_attribute(
                space, spec.stubborn.attribute, spec.stubborn.values
            )
        tensor = make_stubborn(tensor, stubborn)
    return tensor


def build_tensor(space: AttributeSpace, spec: TensorSpec) -> TransitionTensor:
    """Build the tensor a config describes: dense, sparse triplets or a recipe."""

    if isinstance(spec, DenseTensorSpec):
        return validate_tensor(space, spec.entries)
    if isinstance(spec, SparseTensorSpec):
        return _sparse_tensor(space, spec)
    return _recipe_tensor(space, spec)


def build_ranking(space: AttributeSpace, spec: RankingSpec) -> RankingMatrix:
    if isinstance(spec, UniformRankingSpec):
        return uniform_ranking(space)
    if isinstance(spec, DenseRankingSpec):
        return validate_ranking(space, spec.entries)
    if isinstance(spec, ThresholdRankingSpec):
        return build_threshold_ranking(space, spec.threshold, spec.block_probability)
    return build_additive_penalty_ranking(space, spec.penalties)


def _load_graph(config: RunConfig, base_dir: Path) -> Optional[ExplicitGraph]:
    graph = config.population.graph
    if graph.kind == "complete":
        return None
    path = Path(graph.path)
    if not path.is_absolute():
        path = base_dir / path
    try:
        return load_edge_list(path, config.population.size)
    except OSError as exc:
        raise ValidationFailure(f"cannot read edge list {path}: {exc}") from exc


def build_experiment(
    config: RunConfig,
    base_dir: Optional[Union[str, Path]] = None,
) -> Experiment:
    """Construct every component of a schema-valid config.

    Failures raise ConfigError prefixed (and pathed) with the config section
    they come from. Relative edge-list paths resolve against ``base_dir``.
    """

    directory = Path(base_dir or ".")
    space = _build(
        "space",
        lambda: build_space(config.space.cardinalities, config.space.labels),
    )
    tensor = _build("tensor", lambda: build_tensor(space, config.tensor))
    ranking = _build("ranking", lambda: build_ranking(space, config.ranking))
    graph = _build("population.graph", lambda: _load_graph(config, directory))
    population = _build(
        "population",
        lambda: build_population(
            space,
            counts=config.population.initial_counts,
            agent_corteges=config.population.agents,
            graph=graph,
            n_agents=config.population.size,
        ),
    )
    return Experiment(
        config=config,
        space=space,
        tensor=tensor,
        ranking=ranking,
        population=population,
        base_dir=directory,
    )


def parse_config(
    text: str,
    base_dir: Optional[Union[str, Path]] = None,
) -> Experiment:
    """Parse and fully validate a JSON run config.

    Raises ConfigError for syntax errors (with line and column), schema
    violations (with the dotted path of the field) and component
    validation failures (with the validator's message).
    """

    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc

    if not isinstance(document, dict):
        raise ConfigError("a run config must be a JSON object")

    try:
        config = RunConfig.model_validate(document)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = ".".join(str(part) for part in first.get("loc", ())) or None
        raise ConfigError(_describe(exc), path=path) from exc

    experiment = build_experiment(config, base_dir)
    logger.debug(
        "Parsed config: M=%s, N=%s, seed=%s",
        experiment.space.M,
        config.population.size,
        config.run.seed,
    )
    return experiment


def load_config(path: Union[str, Path]) -> Experiment:
    """Read and parse a config file; relative paths inside resolve next to it."""

    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {source}: {exc}", path=str(source)) from exc
    return parse_config(text, base_dir=source.parent)


def config_digest(experiment: Experiment) -> str:
    """SHA-256 of the canonical JSON form of a validated config."""

    canonical = json.dumps(
        experiment.config.model_dump(mode="json"),
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def override_run(experiment: Experiment, **changes) -> Experiment:
    """Copy of ``experiment`` with some run fields replaced (components are reused)."""

    if not changes:
        return experiment
    try:
        run = RunSpec.model_validate({**experiment.config.run.model_dump(), **changes})
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from exc
    config = experiment.config.model_copy(update={"run": run})
    return experiment.model_copy(update={"config": config})
