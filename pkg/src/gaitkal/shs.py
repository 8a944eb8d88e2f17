"""Step-and-heading baseline: detected steps, Scarlet lengths, heading."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imu_core import WalkRecord
from .orientation import VERTICAL, transform_stream
from .stepper import FsmThresholds, StepEvent, detect_steps, scarlet_step_length
from .strapdown import integrate_trapezoid

log = logging.getLogger(__name__)

HEADING_SOURCES = ("fixed-zero", "gyro-integrated")


@dataclass(frozen=True)
class ShsConfig:
    thresholds: FsmThresholds
    scarlet_K: float
    heading_source: str = "fixed-zero"

    def __post_init__(self) -> None:
        if not self.scarlet_K > 0:
            raise ValueError(f"scarlet_K must be positive, got {self.scarlet_K}")
        if self.heading_source not in HEADING_SOURCES:
            raise ValueError(f"heading_source must be one of {HEADING_SOURCES}")


@dataclass(frozen=True, eq=False)
class ShsTrajectory:
    """Position after each step; ``x`` runs along the initial walking direction."""

    steps: tuple[StepEvent, ...]
    t_end: np.ndarray
    lengths: np.ndarray
    heading: np.ndarray
    x: np.ndarray
    y: np.ndarray
    warnings: tuple[str, ...] = ()

    @property
    def total_distance(self) -> float:
        return float(np.sum(self.lengths))

    @property
    def endpoint(self) -> np.ndarray:
        if self.x.shape[0] == 0:
            return np.zeros(2)
        return np.array([self.x[-1], self.y[-1]])

    def __len__(self) -> int:
        return self.lengths.shape[0]


def run_shs(record: WalkRecord, cfg: ShsConfig) -> ShsTrajectory:
    if len(record.stream) < 2:
        raise ValueError("stream needs at least 2 samples")
    nav = transform_stream(record.stream)
    steps = detect_steps(nav.forward, nav.t, cfg.thresholds)
    if not steps:
        log.warning("walk %s: no steps detected, empty trajectory", record.label)
        empty = np.zeros(0)
        return ShsTrajectory((), empty, empty, empty, empty, empty, ("no steps detected",))

    lengths = np.array([scarlet_step_length(s, cfg.scarlet_K) for s in steps])
    ends = np.array([s.end_idx for s in steps])
    if cfg.heading_source == "gyro-integrated":
        yaw_rate = nav.rotate(record.stream.gyro)[:, VERTICAL]
        heading = integrate_trapezoid(nav.t, yaw_rate, 0.0)[ends]
    else:
        heading = np.zeros(len(steps))
    x = np.cumsum(lengths * np.cos(heading))
    y = np.cumsum(lengths * np.sin(heading))
    return ShsTrajectory(tuple(steps), np.asarray(nav.t)[ends], lengths, heading, x, y)


TRAJECTORY_COLUMNS = ("step_idx", "t_end", "length_m", "x", "y")


def write_trajectory_csv(path: str | Path, traj: ShsTrajectory) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for k in range(len(traj)):
            w.writerow([k, repr(float(traj.t_end[k])), repr(float(traj.lengths[k])),
                        repr(float(traj.x[k])), repr(float(traj.y[k]))])
    return path
