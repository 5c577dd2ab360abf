import logging
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from ..errors import ValidationFailure, unwrap_validation_error
from ..models.space import AttributeSpace, Cortege, Label

logger = logging.getLogger(__name__)


def build_space(
    cardinalities: Sequence[int],
    labels: Optional[Sequence[Sequence[Label]]] = None,
) -> AttributeSpace:
    """Build the attribute space X^1 x ... x X^L (attribute 1 is the opinion)."""

    try:
        space = AttributeSpace(
            cardinalities=tuple(int(size) for size in cardinalities),
            labels=None if labels is None else tuple(tuple(names) for names in labels),
        )
    except ValidationError as exc:
        raise unwrap_validation_error(exc) from None
    logger.debug("Built attribute space %s with M=%s", space.cardinalities, space.M)
    return space


def cortege_to_index(
    space: AttributeSpace,
    cortege: Union[Cortege, Sequence[int]],
) -> int:
    """Return the 1-based opinion-major index z_q of a cortege.

    The cortege holds 1-based value indices, one per attribute.
    """

    values = cortege.values if isinstance(cortege, Cortege) else tuple(cortege)
    if len(values) != space.L:
        raise ValidationFailure(
            f"cortege has {len(values)} components, space has {space.L} attributes"
        )

    for attribute, (value, size) in enumerate(zip(values, space.cardinalities), start=1):
        if not 1 <= value <= size:
            raise ValidationFailure(
                f"attribute {attribute} value {value} is outside 1..{size}"
            )

    return space.encode([value - 1 for value in values]) + 1


def index_to_cortege(space: AttributeSpace, index: int) -> Cortege:
    """Inverse of cortege_to_index."""

    if not 1 <= index <= space.M:
        raise ValidationFailure(f"cortege index {index} is outside 1..{space.M}")

    return Cortege(values=tuple(value + 1 for value in space.decode(index - 1)))


def labels_to_index(space: AttributeSpace, labels: Sequence[Label]) -> int:
    """Return the 1-based index of a cortege written with value labels, e.g. (-1, "a")."""

    if len(labels) != space.L:
        raise ValidationFailure(
            f"cortege has {len(labels)} components, space has {space.L} attributes"
        )
    values = [
        space.value_of_label(attribute, label)
        for attribute, label in enumerate(labels, start=1)
    ]
    return cortege_to_index(space, values)


def aggregate_opinion_fractions(space: AttributeSpace, y: Sequence[float]) -> np.ndarray:
    """Sum cortege fractions over each opinion block, giving the opinion camps y°."""

    vector = np.asarray(y, dtype=float)
    if vector.ndim != 1 or vector.shape[0] != space.M:
        raise ValidationFailure(
            f"fraction vector has shape {vector.shape}, expected ({space.M},)"
        )
    if not np.all(np.isfinite(vector)):
        raise ValidationFailure("fraction vector contains non-finite entries")

    return vector.reshape(space.opinion_count, space.block_size).sum(axis=1)
