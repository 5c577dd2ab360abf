from typing import Union

import numpy as np
import scipy.sparse
from pydantic import BaseModel, ConfigDict, model_validator

from ..errors import ValidationFailure
from .space import AttributeSpace

RowStorage = Union[np.ndarray, scipy.sparse.csr_array]


class TransitionTensor(BaseModel):
    """Augmented transition tensor P^a over the corteges of a space.

    ``rows`` holds the M*M distributions P^a_{s,l,.} stacked along the first
    axis (row ``s*M + l``, 0-based), either as a dense (M*M, M) array or as a
    CSR array for large spaces. Instances come out of
    ``services.transition.validate_tensor``; direct construction only checks
    shapes.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    space: AttributeSpace
    rows: RowStorage

    @model_validator(mode="after")
    def _check_shape(self) -> "TransitionTensor":
        size = self.space.M
        if self.rows.shape != (size * size, size):
            raise ValidationFailure(
                f"tensor rows have shape {self.rows.shape}, "
                f"expected ({size * size}, {size})"
            )
        return self

    @property
    def M(self) -> int:
        return self.space.M

    @property
    def is_sparse(self) -> bool:
        return scipy.sparse.issparse(self.rows)

    def dense(self) -> np.ndarray:
        """Return the tensor as an (M, M, M) array indexed [s, l, k], 0-based."""
        size = self.M
        matrix = self.rows.toarray() if self.is_sparse else self.rows
        return np.asarray(matrix, dtype=float).reshape(size, size, size)

    def row(self, recipient: int, donor: int) -> np.ndarray:
        """Distribution P^a_{s,l,.} for 0-based recipient/donor corteges."""
        position = recipient * self.M + donor
        if self.is_sparse:
            return self.rows[[position], :].toarray().ravel()
        return np.array(self.rows[position], dtype=float)

    def probability(self, recipient: int, donor: int, outcome: int) -> float:
        """p^a_{s,l,k} for 1-based indices."""
        return float(self.row(recipient - 1, donor - 1)[outcome - 1])

    def self_probabilities(self) -> np.ndarray:
        """(M, M) array of p^a_{s,l,s}, indexed [s, l] 0-based."""
        size = self.M
        if self.is_sparse:
            coo = self.rows.tocoo()
            diagonal = np.zeros(size * size)
            hit = coo.col == coo.row // size
            diagonal[coo.row[hit]] = coo.data[hit]
        else:
            positions = np.arange(size * size)
            diagonal = np.asarray(self.rows[positions, positions // size], dtype=float)
        return diagonal.reshape(size, size)

    def moving_rows(self) -> RowStorage:
        """``rows`` with every self outcome p^a_{s,l,s} set to zero."""
        size = self.M
        if self.is_sparse:
            coo = self.rows.tocoo()
            keep = coo.col != coo.row // size
            return scipy.sparse.csr_array(
                (coo.data[keep], (coo.row[keep], coo.col[keep])), shape=self.rows.shape
            )
        positions = np.arange(size * size)
        rows = np.array(self.rows, dtype=float)
        rows[positions, positions // size] = 0.0
        return rows
