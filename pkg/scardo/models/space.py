from math import prod
from typing import Hashable, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import ValidationFailure

Label = Union[int, float, str]

# Cortege indices must stay addressable as int64 array offsets.
INDEX_LIMIT = int(np.iinfo(np.int64).max)


class Cortege(BaseModel):
    """Attribute-value tuple (i_1..i_L) of one agent, 1-based per attribute."""

    model_config = ConfigDict(frozen=True)

    values: Tuple[int, ...] = Field(..., min_length=1)


class AttributeSpace(BaseModel):
    """Discrete attributes X^1..X^L with opinion-major cortege numbering.

    Attribute 1 is always the opinion. Cortege indices run over the opinion
    blocks first; inside a block the remaining attributes are ordered
    lexicographically with attribute 2 as the most significant digit.
    """

    model_config = ConfigDict(frozen=True)

    cardinalities: Tuple[int, ...]
    labels: Optional[Tuple[Tuple[Label, ...], ...]] = None

    @model_validator(mode="after")
    def _check_cardinalities(self) -> "AttributeSpace":
        if not self.cardinalities:
            raise ValidationFailure("an attribute space needs at least one attribute")

        total = 1
        for attribute, size in enumerate(self.cardinalities, start=1):
            if size < 1:
                raise ValidationFailure(
                    f"attribute {attribute} has cardinality {size}; "
                    "every attribute needs at least one value"
                )
            total *= size
            if total > INDEX_LIMIT:
                raise ValidationFailure(
                    f"cortege count overflows at attribute {attribute} "
                    f"(cardinality {size})"
                )

        if self.labels is not None:
            if len(self.labels) != len(self.cardinalities):
                raise ValidationFailure(
                    f"labels given for {len(self.labels)} attributes, "
                    f"space has {len(self.cardinalities)}"
                )
            for attribute, (names, size) in enumerate(
                zip(self.labels, self.cardinalities), start=1
            ):
                if len(names) != size:
                    raise ValidationFailure(
                        f"attribute {attribute} has {size} values "
                        f"but {len(names)} labels"
                    )
                if len(set(names)) != len(names):
                    raise ValidationFailure(
                        f"attribute {attribute} has duplicate labels"
                    )

        return self

    @property
    def L(self) -> int:
        return len(self.cardinalities)

    @property
    def M(self) -> int:
        return prod(self.cardinalities)

    @property
    def opinion_count(self) -> int:
        return self.cardinalities[0]

    @property
    def block_size(self) -> int:
        """Number of corteges sharing one opinion value."""
        return self.M // self.cardinalities[0]

    @property
    def strides(self) -> Tuple[int, ...]:
        """Positional weights of each attribute in the cortege index."""
        return tuple(
            prod(self.cardinalities[position + 1 :])
            for position in range(len(self.cardinalities))
        )

    @property
    def opinion_attribute(self) -> int:
        return 1

    def encode(self, values: Sequence[int]) -> int:
        """0-based value tuple -> 0-based cortege index (no range checks)."""
        return sum(value * stride for value, stride in zip(values, self.strides))

    def decode(self, index: int) -> Tuple[int, ...]:
        """0-based cortege index -> 0-based value tuple (no range checks)."""
        values = []
        for stride in self.strides:
            value, index = divmod(index, stride)
            values.append(value)
        return tuple(values)

    def value_table(self) -> np.ndarray:
        """(M, L) array of 0-based attribute values for every cortege."""
        grids = np.indices(self.cardinalities).reshape(self.L, -1)
        return grids.T.copy()

    def opinion_of(self, index: int) -> int:
        """0-based opinion position of a 0-based cortege index."""
        return index // self.block_size

    def label_of(self, attribute: int, value: int) -> Hashable:
        """Label of a 1-based value of a 1-based attribute (the value itself if unlabeled)."""
        if self.labels is None:
            return value
        return self.labels[attribute - 1][value - 1]

    def value_of_label(self, attribute: int, label: Label) -> int:
        """1-based value index of a label on a 1-based attribute."""
        if self.labels is None:
            raise ValidationFailure("space has no labels")
        names = self.labels[attribute - 1]
        for position, name in enumerate(names, start=1):
            if name == label or str(name) == str(label):
                return position
        raise ValidationFailure(f"attribute {attribute} has no value labeled {label!r}")
