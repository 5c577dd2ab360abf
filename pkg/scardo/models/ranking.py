import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from ..errors import ValidationFailure
from .space import AttributeSpace


class RankingMatrix(BaseModel):
    """Ranking gate F: f_{s,l} is the chance recipient s and donor l communicate."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    space: AttributeSpace
    entries: np.ndarray

    @model_validator(mode="after")
    def _check_shape(self) -> "RankingMatrix":
        size = self.space.M
        if self.entries.shape != (size, size):
            raise ValidationFailure(
                f"ranking matrix has shape {self.entries.shape}, expected ({size}, {size})"
            )
        return self

    @property
    def M(self) -> int:
        return self.space.M

    def probability(self, recipient: int, donor: int) -> float:
        """f_{s,l} for 1-based corteges."""
        return float(self.entries[recipient - 1, donor - 1])

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))

    def is_antidiagonal_symmetric(self) -> bool:
        """Symmetry about the secondary diagonal: f_{s,l} = f_{M+1-l, M+1-s}."""
        return bool(np.array_equal(self.entries, self.entries[::-1, ::-1].T))
