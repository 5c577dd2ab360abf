import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from ..errors import ValidationFailure
from ..models.trajectory import MeanFieldTrajectory, SimTrajectory, TrajectoryTable
from .base import BaseWriter

logger = logging.getLogger(__name__)

Trajectory = Union[SimTrajectory, MeanFieldTrajectory]

INTEGER_FORMAT = "%d"
FLOAT_FORMAT = "%.17g"


def _sim_layout(trajectory: SimTrajectory) -> Tuple[List[str], np.ndarray, List[str]]:
    space = trajectory.space
    size = space.M
    header = (
        ["t", "tau"]
        + [f"Y_{q}" for q in range(1, size + 1)]
        + [f"y_{q}" for q in range(1, size + 1)]
        + [f"yo_{o}" for o in range(1, space.opinion_count + 1)]
    )
    values = np.column_stack(
        [
            trajectory.iterations,
            trajectory.taus,
            trajectory.counts,
            trajectory.fractions(),
            trajectory.opinion_fractions(),
        ]
    )
    formats = (
        [INTEGER_FORMAT, FLOAT_FORMAT]
        + [INTEGER_FORMAT] * size
        + [FLOAT_FORMAT] * (size + space.opinion_count)
    )
    return header, values, formats


def _meanfield_layout(
    trajectory: MeanFieldTrajectory,
) -> Tuple[List[str], np.ndarray, List[str]]:
    space = trajectory.space
    header = (
        ["tau"]
        + [f"y_{q}" for q in range(1, space.M + 1)]
        + [f"yo_{o}" for o in range(1, space.opinion_count + 1)]
    )
    values = np.column_stack(
        [trajectory.taus, trajectory.states, trajectory.opinion_fractions()]
    )
    return header, values, [FLOAT_FORMAT] * len(header)


class TrajectoryCsvWriter(BaseWriter[Trajectory]):
    """Plot-ready CSV: one header line, one row per stored sample.

    Stochastic runs write t, tau, Y_1..Y_M, y_1..y_M, yo_1..yo_m1; mean-field
    runs write tau, y_1..y_M, yo_1..yo_m1. Floats carry 17 significant
    digits, so reading the file back gives the same doubles.
    """

    def write(self, data: Trajectory, path: Path) -> Path:
        if isinstance(data, SimTrajectory):
            header, values, formats = _sim_layout(data)
        elif isinstance(data, MeanFieldTrajectory):
            header, values, formats = _meanfield_layout(data)
        else:
            raise ValidationFailure(f"cannot write {type(data).__name__} as CSV")

        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8", newline="\n") as handle:
            np.savetxt(
                handle,
                values,
                fmt=formats,
                delimiter=",",
                header=",".join(header),
                comments="",
            )
        logger.info("Wrote %s samples to %s", values.shape[0], target)
        return target

    def read(self, path: Path) -> TrajectoryTable:
        return read_trajectory(path)


def read_trajectory(path: Path) -> TrajectoryTable:
    """Parse a CSV written by TrajectoryCsvWriter."""

    source = Path(path)
    with source.open("r", encoding="utf-8") as handle:
        columns = handle.readline().strip().split(",")
        values = np.loadtxt(handle, delimiter=",", dtype=float, ndmin=2)
    if values.size and values.shape[1] != len(columns):
        raise ValidationFailure(
            f"{source} has {values.shape[1]} value columns but {len(columns)} headers"
        )
    return TrajectoryTable(columns=columns, values=values)
