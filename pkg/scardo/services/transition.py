import logging
from typing import Callable, Collection, FrozenSet, Iterable, Literal, Optional, Tuple, Union

import numpy as np
import scipy.sparse

from ..config import settings
from ..errors import ValidationFailure
from ..models.space import AttributeSpace
from ..models.tensor import TransitionTensor
from .attribute_space import build_space

logger = logging.getLogger(__name__)

MaskMode = Literal["self", "renormalize"]
OpinionKind = Literal["identity", "voter", "assimilative", "repulsive"]
StubbornSelection = Union[Callable[[int], bool], Iterable[int]]

Triplets = Tuple[np.ndarray, np.ndarray, np.ndarray]


def validate_tensor(space: AttributeSpace, raw) -> TransitionTensor:
    """Validate raw entries p^a_{s,l,k} and return a row-stochastic tensor.

    ``raw`` is an (M, M, M) array-like, an (M*M, M) array-like, or a scipy
    sparse matrix of shape (M*M, M). Rows whose sum is within the
    stochastic tolerance of 1 are renormalized; anything further off is
    rejected.
    """

    size = space.M
    tolerance = settings.STOCHASTIC_TOLERANCE

    if scipy.sparse.issparse(raw):
        matrix = scipy.sparse.csr_array(raw, dtype=float)
        if matrix.shape != (size * size, size):
            raise ValidationFailure(
                f"sparse tensor has shape {matrix.shape}, expected ({size * size}, {size})"
            )
        matrix.sum_duplicates()
        positions = np.repeat(np.arange(size * size), np.diff(matrix.indptr))
        _check_entries(space, positions, matrix.indices, matrix.data)
        sums = np.asarray(matrix.sum(axis=1)).ravel()
    else:
        array = np.array(raw, dtype=float)
        if array.shape == (size, size, size):
            array = array.reshape(size * size, size)
        elif array.shape != (size * size, size):
            raise ValidationFailure(
                f"tensor has shape {array.shape}, expected ({size}, {size}, {size})"
            )
        positions, columns = np.nonzero(array)
        _check_entries(space, positions, columns, array[positions, columns])
        sums = array.sum(axis=1)

    deviation = np.abs(sums - 1.0)
    rejected = np.flatnonzero(deviation > tolerance)
    if rejected.size:
        position = int(rejected[0])
        recipient, donor = divmod(position, size)
        raise ValidationFailure(
            f"row (s={recipient + 1}, l={donor + 1}) sums to {sums[position]!r}, "
            "expected 1"
        )

    renormalized = int(np.count_nonzero(deviation))
    if renormalized:
        logger.debug("Renormalizing %s tensor rows within tolerance", renormalized)

    if scipy.sparse.issparse(raw):
        matrix.data = matrix.data / np.repeat(sums, np.diff(matrix.indptr))
        rows = matrix if size > settings.DENSE_TENSOR_LIMIT else matrix.toarray()
    else:
        array = array / sums[:, None]
        rows = (
            scipy.sparse.csr_array(array)
            if size > settings.DENSE_TENSOR_LIMIT
            else array
        )

    if isinstance(rows, np.ndarray):
        rows.setflags(write=False)
    return TransitionTensor(space=space, rows=rows)


def _check_entries(
    space: AttributeSpace,
    positions: np.ndarray,
    columns: np.ndarray,
    values: np.ndarray,
) -> None:
    if not np.all(np.isfinite(values)):
        raise ValidationFailure("tensor contains non-finite entries")
    negative = np.flatnonzero(values < 0)
    if negative.size:
        first = int(negative[0])
        recipient, donor = divmod(int(positions[first]), space.M)
        raise ValidationFailure(
            f"negative entry {values[first]!r} at "
            f"(s={recipient + 1}, l={donor + 1}, k={int(columns[first]) + 1})"
        )


def _triplets(tensor: TransitionTensor) -> Triplets:
    if tensor.is_sparse:
        coo = tensor.rows.tocoo()
        return (
            np.asarray(coo.row, dtype=np.int64),
            np.asarray(coo.col, dtype=np.int64),
            np.asarray(coo.data, dtype=float),
        )
    positions, columns = np.nonzero(tensor.rows)
    return positions, columns, np.asarray(tensor.rows[positions, columns], dtype=float)


def _pack(space: AttributeSpace, positions, columns, values) -> TransitionTensor:
    """Assemble triplets (duplicates summed) and run them through validation."""

    size = space.M
    shape = (size * size, size)
    if size > settings.DENSE_TENSOR_LIMIT:
        raw = scipy.sparse.csr_array((values, (positions, columns)), shape=shape)
    else:
        raw = np.zeros(shape)
        np.add.at(raw, (positions, columns), values)
    return validate_tensor(space, raw)


def identity_tensor(space: AttributeSpace) -> TransitionTensor:
    """p^a_{s,l,s} = 1 for every recipient and donor: nobody ever changes."""

    size = space.M
    positions = np.arange(size * size)
    return _pack(space, positions, positions // size, np.ones(size * size))


def build_opinion_tensor(
    opinion_count: int,
    kind: OpinionKind,
    *,
    mu: float = 1.0,
    confidence: Optional[int] = None,
    threshold: int = 0,
) -> TransitionTensor:
    """Build a seminal opinion-only transition tensor (an L = 1 space).

    Opinions are positions 0..m-1 of the arranged set X.

    - ``voter``: adopt the donor's opinion with probability ``mu``.
    - ``assimilative``: move one position toward the donor with probability
      ``mu``; with ``confidence`` set, only when the opinions are at most
      that far apart (bounded confidence).
    - ``repulsive``: move one position away from a donor farther than
      ``threshold`` with probability ``mu`` (staying put at the ends), and one
      position toward a closer donor.
    """

    if not 0.0 <= mu <= 1.0:
        raise ValidationFailure(f"mu={mu} is outside [0, 1]")
    if confidence is not None and confidence < 0:
        raise ValidationFailure(f"confidence={confidence} must be nonnegative")
    if threshold < 0:
        raise ValidationFailure(f"threshold={threshold} must be nonnegative")

    space = build_space([opinion_count])
    entries = np.zeros((opinion_count,) * 3)

    for recipient in range(opinion_count):
        for donor in range(opinion_count):
            target = recipient
            distance = abs(recipient - donor)
            toward = recipient + int(np.sign(donor - recipient))

            if kind == "identity":
                target = recipient
            elif kind == "voter":
                target = donor
            elif kind == "assimilative":
                if confidence is None or distance <= confidence:
                    target = toward
            elif kind == "repulsive":
                if distance > threshold:
                    away = recipient - int(np.sign(donor - recipient))
                    target = min(max(away, 0), opinion_count - 1)
                else:
                    target = toward
            else:
                raise ValidationFailure(f"unknown opinion tensor kind {kind!r}")

            if target == recipient or kind == "identity":
                entries[recipient, donor, recipient] = 1.0
            else:
                entries[recipient, donor, target] = mu
                entries[recipient, donor, recipient] = 1.0 - mu

    return validate_tensor(space, entries)


def lift_opinion_tensor(space: AttributeSpace, base) -> TransitionTensor:
    """Embed a seminal m1 x m1 x m1 tensor into the augmented space.

    The recipient may only change its opinion: p^a_{s,l,k} = p_{o(s),o(l),o(k)}
    when z_k keeps every non-opinion value of z_s, and 0 otherwise.
    """

    opinions = space.opinion_count
    if not isinstance(base, TransitionTensor):
        base = validate_tensor(build_space([opinions]), base)
    if base.space.M != opinions:
        raise ValidationFailure(
            f"base tensor covers {base.space.M} opinions, space has {opinions}"
        )

    size = space.M
    block = space.block_size
    seminal = base.dense()

    corteges = np.arange(size)
    opinion = corteges // block
    rest = corteges % block

    recipients = np.repeat(corteges, size)
    donors = np.tile(corteges, size)
    positions = recipients * size + donors

    all_positions, all_columns, all_values = [], [], []
    for target in range(opinions):
        values = seminal[opinion[recipients], opinion[donors], target]
        keep = values != 0
        all_positions.append(positions[keep])
        all_columns.append(target * block + rest[recipients[keep]])
        all_values.append(values[keep])

    return _pack(
        space,
        np.concatenate(all_positions),
        np.concatenate(all_columns),
        np.concatenate(all_values),
    )


def mask_static_attributes(
    tensor: TransitionTensor,
    static_attrs: Collection[int],
    mode: MaskMode = "self",
) -> TransitionTensor:
    """Forbid every cortege change that alters one of the static attributes.

    With ``mode="self"`` the forbidden mass of each row is added to the
    self entry p^a_{s,l,s}. With ``mode="renormalize"`` the remaining allowed
    outcomes are rescaled proportionally; rows with no allowed mass left fall
    back to the self entry.
    """

    space = tensor.space
    attributes = sorted(set(static_attrs))
    for attribute in attributes:
        if attribute == 1:
            raise ValidationFailure("attribute 1 is the opinion and cannot be static")
        if not 2 <= attribute <= space.L:
            raise ValidationFailure(
                f"static attribute {attribute} is outside 2..{space.L}"
            )
    if mode not in ("self", "renormalize"):
        raise ValidationFailure(f"unknown mask mode {mode!r}")
    if not attributes:
        return tensor

    size = space.M
    table = space.value_table()[:, [attribute - 1 for attribute in attributes]]
    positions, columns, values = _triplets(tensor)
    recipients = positions // size

    allowed = np.all(table[recipients] == table[columns], axis=1)
    removed = np.bincount(
        positions[~allowed], weights=values[~allowed], minlength=size * size
    )
    positions, columns, values = positions[allowed], columns[allowed], values[allowed]

    absorbing = np.flatnonzero(removed)
    if mode == "renormalize":
        kept = np.bincount(positions, weights=values, minlength=size * size)
        scalable = kept > 0
        values = values / np.where(scalable, kept, 1.0)[positions]
        absorbing = absorbing[~scalable[absorbing]]

    logger.debug(
        "Masked static attributes %s (%s rows touched, mode=%s)",
        attributes,
        int(np.count_nonzero(removed)),
        mode,
    )
    return _pack(
        space,
        np.concatenate([positions, absorbing]),
        np.concatenate([columns, absorbing // size]),
        np.concatenate([values, removed[absorbing]]),
    )


def stubborn_by_attribute(
    space: AttributeSpace,
    attribute: int,
    values: Collection[int],
) -> FrozenSet[int]:
    """1-based indices of corteges whose ``attribute`` takes one of ``values``.

    Used for the native-vs-bot encoding, where one attribute marks bots.
    """

    if not 1 <= attribute <= space.L:
        raise ValidationFailure(f"attribute {attribute} is outside 1..{space.L}")
    size = space.cardinalities[attribute - 1]
    for value in values:
        if not 1 <= value <= size:
            raise ValidationFailure(
                f"attribute {attribute} value {value} is outside 1..{size}"
            )

    column = space.value_table()[:, attribute - 1] + 1
    return frozenset(int(index) + 1 for index in np.flatnonzero(np.isin(column, list(values))))


def make_stubborn(tensor: TransitionTensor, stubborn_corteges: StubbornSelection) -> TransitionTensor:
    """Make the rows of stubborn recipients self-absorbing (p^a_{s,l,s} = 1)."""

    space = tensor.space
    size = space.M
    if callable(stubborn_corteges):
        chosen = {q for q in range(1, size + 1) if stubborn_corteges(q)}
    else:
        chosen = set(int(q) for q in stubborn_corteges)
    for q in chosen:
        if not 1 <= q <= size:
            raise ValidationFailure(f"stubborn cortege {q} is outside 1..{size}")
    if not chosen:
        return tensor

    mask = np.zeros(size, dtype=bool)
    mask[[q - 1 for q in chosen]] = True

    positions, columns, values = _triplets(tensor)
    keep = ~mask[positions // size]

    stubborn = np.flatnonzero(mask)
    stubborn_positions = (stubborn[:, None] * size + np.arange(size)[None, :]).ravel()
    return _pack(
        space,
        np.concatenate([positions[keep], stubborn_positions]),
        np.concatenate([columns[keep], stubborn_positions // size]),
        np.concatenate([values[keep], np.ones(stubborn_positions.size)]),
    )


def shift_mass(
    tensor: TransitionTensor,
    recipient: int,
    donor: int,
    outcome: int,
    amount: float,
) -> TransitionTensor:
    """Move ``amount`` of probability from p^a_{s,l,s} to p^a_{s,l,k} (1-based).

    A negative amount moves mass back to the self entry. The row stays
    stochastic; results outside [0, 1] are rejected.
    """

    space = tensor.space
    size = space.M
    for name, index in (("s", recipient), ("l", donor), ("k", outcome)):
        if not 1 <= index <= size:
            raise ValidationFailure(f"{name}={index} is outside 1..{size}")
    if outcome == recipient:
        raise ValidationFailure("outcome equals the recipient; the self entry compensates")

    row = tensor.row(recipient - 1, donor - 1)
    shifted = row[outcome - 1] + amount
    remaining = row[recipient - 1] - amount
    if not (0.0 <= shifted <= 1.0 and 0.0 <= remaining <= 1.0):
        raise ValidationFailure(
            f"shifting {amount!r} in row (s={recipient}, l={donor}) pushes a "
            "probability outside [0, 1]"
        )

    positions, columns, values = _triplets(tensor)
    position = (recipient - 1) * size + (donor - 1)
    return _pack(
        space,
        np.concatenate([positions, [position, position]]),
        np.concatenate([columns, [outcome - 1, recipient - 1]]),
        np.concatenate([values, [amount, -amount]]),
    )
