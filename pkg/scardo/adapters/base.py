from abc import ABC, abstractmethod
from pathlib import Path
from typing import Generic, TypeVar

T = TypeVar("T")


class BaseWriter(Generic[T], ABC):
    """Base interface for result serialization."""

    @abstractmethod
    def write(self, data: T, path: Path) -> Path:
        """Write data to path and return the path written."""
        pass

    @abstractmethod
    def read(self, path: Path):
        """Read back what write produced."""
        pass
