import logging
from typing import Sequence

import numpy as np

from ..errors import ValidationFailure
from ..models.ranking import RankingMatrix
from ..models.space import AttributeSpace

logger = logging.getLogger(__name__)


def validate_ranking(space: AttributeSpace, raw) -> RankingMatrix:
    """Validate an M x M matrix of communication probabilities."""

    size = space.M
    entries = np.array(raw, dtype=float)
    if entries.shape != (size, size):
        raise ValidationFailure(
            f"ranking matrix has shape {entries.shape}, expected ({size}, {size})"
        )

    outside = np.argwhere(~((entries >= 0.0) & (entries <= 1.0)))
    if outside.size:
        recipient, donor = (int(position) for position in outside[0])
        raise ValidationFailure(
            f"ranking entry (s={recipient + 1}, l={donor + 1}) = "
            f"{entries[recipient, donor]!r} is outside [0, 1]"
        )

    entries.setflags(write=False)
    return RankingMatrix(space=space, entries=entries)


def uniform_ranking(space: AttributeSpace) -> RankingMatrix:
    """All-ones F: the ranking gate never blocks (plain SCARDO)."""
    return validate_ranking(space, np.ones((space.M, space.M)))


def build_threshold_ranking(
    space: AttributeSpace,
    threshold: float,
    block_probability: float,
) -> RankingMatrix:
    """Seminal rule: pairs whose opinions are more than ``threshold`` positions
    apart are blocked with probability ``block_probability``.

    Non-opinion attributes play no role here.
    """

    if threshold < 0:
        raise ValidationFailure(f"threshold {threshold} must be nonnegative")
    if not 0.0 <= block_probability <= 1.0:
        raise ValidationFailure(
            f"block probability {block_probability} is outside [0, 1]"
        )

    positions = np.arange(space.M) // space.block_size
    distance = np.abs(positions[:, None] - positions[None, :])
    entries = np.where(distance <= threshold, 1.0, 1.0 - block_probability)
    return validate_ranking(space, entries)


def build_additive_penalty_ranking(
    space: AttributeSpace,
    penalties: Sequence[float],
) -> RankingMatrix:
    """f_{s,l} = clamp(1 - sum of penalties of the attributes where z_s and z_l differ)."""

    weights = np.asarray(penalties, dtype=float)
    if weights.shape != (space.L,):
        raise ValidationFailure(
            f"got {weights.shape[0] if weights.ndim else 0} penalties "
            f"for {space.L} attributes"
        )
    negative = np.flatnonzero(weights < 0)
    if negative.size:
        raise ValidationFailure(
            f"penalty for attribute {int(negative[0]) + 1} is negative"
        )

    table = space.value_table()
    mismatch = table[:, None, :] != table[None, :, :]
    entries = np.clip(1.0 - mismatch.astype(float) @ weights, 0.0, 1.0)
    logger.debug("Built additive ranking with penalties %s", weights.tolist())
    return validate_ranking(space, entries)
