from pathlib import Path

from ..errors import ValidationFailure
from .base import BaseWriter
from .csv import Trajectory, TrajectoryCsvWriter, read_trajectory
from .report import ReportJsonWriter

__all__ = [
    "BaseWriter",
    "ReportJsonWriter",
    "TrajectoryCsvWriter",
    "get_writer",
    "read_trajectory",
    "write_trajectory",
]


def get_writer(format: str) -> BaseWriter:
    if format == "csv":
        return TrajectoryCsvWriter()
    if format == "json":
        return ReportJsonWriter()

    raise ValidationFailure(f"Unknown output format: {format}")


def write_trajectory(trajectory: Trajectory, path: Path, format: str = "csv") -> Path:
    """Serialize a stochastic or mean-field trajectory."""
    if format != "csv":
        raise ValidationFailure(f"trajectories can only be written as csv, not {format!r}")
    return get_writer(format).write(trajectory, path)
