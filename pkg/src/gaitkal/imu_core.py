"""Sensor data model and walk-log ingestion.

Frame conventions
-----------------
Phone frame follows the Android sensor axes: X to the right of the screen,
Y up along the long edge, Z out of the screen. The phone rides vertically in
a belt pocket with the screen facing the walking direction, so in the
reference pose gravity reads ``(0, -g, 0)`` and forward motion is along +Z.

Walk log CSV
------------
Header row required, columns exactly::

    t,acc_x,acc_y,acc_z,gyro_x,gyro_y,gyro_z,grav_x,grav_y,grav_z

``acc_*`` is linear acceleration with gravity already removed (m/s^2),
``gyro_*`` angular rate (rad/s), ``grav_*`` the gravity vector (m/s^2).
Floats are written with ``repr`` so a write/read cycle is lossless.

A walk may carry two sidecars next to ``<name>.csv``:
``<name>.truth.csv`` (``t,true_v,true_p``) and ``<name>.json`` (metadata,
including the true step boundaries).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, NamedTuple

import numpy as np

from .errors import ParseError, ValidationError

WALK_COLUMNS = (
    "t",
    "acc_x", "acc_y", "acc_z",
    "gyro_x", "gyro_y", "gyro_z",
    "grav_x", "grav_y", "grav_z",
)
TRUTH_COLUMNS = ("t", "true_v", "true_p")

NOMINAL_RATE = 100.0
GRAVITY_RANGE = (9.0, 10.6)
GAP_TOLERANCE = 0.2


class Vec3(NamedTuple):
    x: float
    y: float
    z: float


def _frozen(a: Any, shape_tail: tuple[int, ...] = ()) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if shape_tail and arr.shape[1:] != shape_tail:
        raise ValueError(f"expected trailing shape {shape_tail}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ImuSample:
    t: float
    acc: Vec3
    gyro: Vec3
    gravity: Vec3


@dataclass(frozen=True, eq=False)
class SensorStream:
    """Column-oriented IMU stream.

    Arrays are copied and frozen on construction; ``acc``, ``gyro`` and
    ``gravity`` have shape ``(n, 3)``. Iterating yields :class:`ImuSample`.
    Timestamps must be strictly increasing.
    """

    t: np.ndarray
    acc: np.ndarray
    gyro: np.ndarray
    gravity: np.ndarray
    nominal_rate: float = NOMINAL_RATE

    def __post_init__(self) -> None:
        t = _frozen(self.t)
        if t.ndim != 1:
            raise ValueError("t must be one-dimensional")
        n = t.shape[0]
        object.__setattr__(self, "t", t)
        for name in ("acc", "gyro", "gravity"):
            arr = _frozen(getattr(self, name), (3,))
            if arr.shape[0] != n:
                raise ValueError(f"{name} has {arr.shape[0]} rows, t has {n}")
            object.__setattr__(self, name, arr)
        if self.nominal_rate <= 0:
            raise ValueError("nominal_rate must be positive")
        bad = np.flatnonzero(np.diff(t) <= 0)
        if bad.size:
            # 1-based row of the offending sample
            raise ValidationError("timestamps not strictly increasing", row=int(bad[0]) + 2)

    @classmethod
    def from_samples(cls, samples, nominal_rate: float = NOMINAL_RATE) -> "SensorStream":
        samples = list(samples)
        return cls(
            t=[s.t for s in samples],
            acc=np.reshape([tuple(s.acc) for s in samples], (-1, 3)),
            gyro=np.reshape([tuple(s.gyro) for s in samples], (-1, 3)),
            gravity=np.reshape([tuple(s.gravity) for s in samples], (-1, 3)),
            nominal_rate=nominal_rate,
        )

    def __len__(self) -> int:
        return self.t.shape[0]

    def __getitem__(self, i: int) -> ImuSample:
        return ImuSample(
            float(self.t[i]),
            Vec3(*map(float, self.acc[i])),
            Vec3(*map(float, self.gyro[i])),
            Vec3(*map(float, self.gravity[i])),
        )

    def __iter__(self) -> Iterator[ImuSample]:
        return (self[i] for i in range(len(self)))

    @property
    def samples(self) -> list[ImuSample]:
        return list(self)

    def equals(self, other: "SensorStream", atol: float = 0.0) -> bool:
        if len(self) != len(other) or self.nominal_rate != other.nominal_rate:
            return False
        return all(
            np.allclose(getattr(self, k), getattr(other, k), rtol=0.0, atol=atol)
            for k in ("t", "acc", "gyro", "gravity")
        )


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Reference hip kinematics along the walking direction.

    ``true_step_boundaries`` holds the sample index at which each true step
    begins.
    """

    t: np.ndarray
    true_v: np.ndarray
    true_p: np.ndarray
    true_step_boundaries: np.ndarray = field(default_factory=lambda: np.zeros(0, int))

    def __post_init__(self) -> None:
        for name in ("t", "true_v", "true_p"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        b = np.array(self.true_step_boundaries, dtype=int)
        b.flags.writeable = False
        object.__setattr__(self, "true_step_boundaries", b)
        n = self.t.shape[0]
        if self.true_v.shape != (n,) or self.true_p.shape != (n,):
            raise ValueError("truth arrays must share one length")

    @property
    def n_steps(self) -> int:
        return int(self.true_step_boundaries.shape[0])


@dataclass(frozen=True, eq=False)
class WalkRecord:
    stream: SensorStream
    truth: GroundTruth | None = None
    label: str = ""
    declared_distance: float | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.truth is not None and len(self.stream):
            span = (self.truth.t[0], self.truth.t[-1])
            if span[0] > self.stream.t[0] + 1e-9 or span[1] < self.stream.t[-1] - 1e-9:
                raise ValidationError("truth time span does not cover the stream")


@dataclass(frozen=True)
class StreamWarning:
    kind: str  # "gravity" | "gap" | "nonfinite"
    index: int
    message: str


def validate_stream(stream: SensorStream) -> list[StreamWarning]:
    """Report gravity outliers, sample-gap violations and non-finite values.

    Pure: the stream is never modified and identical input gives an
    identical list. Warnings are ordered by sample index, then kind.
    """
    warnings: list[StreamWarning] = []
    n = len(stream)
    if n == 0:
        return warnings

    finite = (
        np.isfinite(stream.acc).all(axis=1)
        & np.isfinite(stream.gyro).all(axis=1)
        & np.isfinite(stream.gravity).all(axis=1)
        & np.isfinite(stream.t)
    )
    for i in np.flatnonzero(~finite):
        warnings.append(StreamWarning("nonfinite", int(i), f"non-finite component at sample {i}"))

    gnorm = np.linalg.norm(stream.gravity, axis=1)
    lo, hi = GRAVITY_RANGE
    with np.errstate(invalid="ignore"):
        out = finite & ((gnorm < lo) | (gnorm > hi))
    for i in np.flatnonzero(out):
        warnings.append(
            StreamWarning("gravity", int(i), f"|gravity| = {gnorm[i]:.3f} m/s^2 outside [{lo}, {hi}]")
        )

    if n > 1:
        nominal = 1.0 / stream.nominal_rate
        gaps = np.diff(stream.t)
        with np.errstate(invalid="ignore"):
            bad = np.abs(gaps - nominal) > GAP_TOLERANCE * nominal
        for i in np.flatnonzero(bad):
            # cite the sample that arrives late
            warnings.append(
                StreamWarning("gap", int(i) + 1, f"gap of {gaps[i]:.4f} s before sample {i + 1}")
            )

    order = {"nonfinite": 0, "gravity": 1, "gap": 2}
    warnings.sort(key=lambda w: (w.index, order[w.kind]))
    return warnings


def parse_walk_log(path: str | Path, nominal_rate: float = NOMINAL_RATE) -> WalkRecord:
    """Read a walk-log CSV into a :class:`WalkRecord` (stream only)."""
    path = Path(path)
    rows: list[list[float]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if tuple(h.strip() for h in header) != WALK_COLUMNS:
            raise ParseError(f"header must be {','.join(WALK_COLUMNS)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(WALK_COLUMNS):
                raise ParseError(
                    f"expected {len(WALK_COLUMNS)} columns, got {len(row)}", line=lineno
                )
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise ParseError(f"non-numeric value ({exc})", line=lineno) from None

    data = np.array(rows, dtype=float).reshape(-1, len(WALK_COLUMNS))
    stream = SensorStream(
        t=data[:, 0],
        acc=data[:, 1:4],
        gyro=data[:, 4:7],
        gravity=data[:, 7:10],
        nominal_rate=nominal_rate,
    )
    if len(stream) and stream.t[0] < 0:
        raise ValidationError("negative timestamp", row=1)
    return WalkRecord(stream=stream, label=path.stem)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_walk_log(path: str | Path, stream: SensorStream) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WALK_COLUMNS)
        for i in range(len(stream)):
            w.writerow(
                [_fmt(stream.t[i])]
                + [_fmt(x) for x in stream.acc[i]]
                + [_fmt(x) for x in stream.gyro[i]]
                + [_fmt(x) for x in stream.gravity[i]]
            )
    return path


def write_truth(path: str | Path, truth: GroundTruth) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_COLUMNS)
        for row in zip(truth.t, truth.true_v, truth.true_p):
            w.writerow([_fmt(x) for x in row])
    return path


def read_truth(path: str | Path, boundaries=()) -> GroundTruth:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRUTH_COLUMNS:
            raise ParseError(f"header must be {','.join(TRUTH_COLUMNS)}", line=1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ParseError("expected 3 columns", line=lineno)
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise ParseError("non-numeric value", line=lineno) from None
    data = np.array(rows, dtype=float).reshape(-1, 3)
    return GroundTruth(data[:, 0], data[:, 1], data[:, 2], np.asarray(boundaries, dtype=int))


def sidecar_paths(path: str | Path) -> tuple[Path, Path]:
    path = Path(path)
    return path.with_suffix(".truth.csv"), path.with_suffix(".json")


def save_walk(path: str | Path, record: WalkRecord) -> Path:
    """Write the walk CSV plus truth/metadata sidecars when available."""
    path = Path(path)
    write_walk_log(path, record.stream)
    truth_path, meta_path = sidecar_paths(path)
    meta = dict(record.meta)
    meta.update(
        label=record.label,
        seed=record.seed,
        declared_distance=record.declared_distance,
        nominal_rate=record.stream.nominal_rate,
    )
    if record.truth is not None:
        write_truth(truth_path, record.truth)
        meta["true_step_boundaries"] = [int(i) for i in record.truth.true_step_boundaries]
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_walk(path: str | Path) -> WalkRecord:
    """Parse a walk CSV and attach its sidecars if they exist."""
    path = Path(path)
    truth_path, meta_path = sidecar_paths(path)
    meta: dict = {}
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{meta_path}: invalid JSON ({exc})") from None
    rate = float(meta.get("nominal_rate", NOMINAL_RATE))
    base = parse_walk_log(path, nominal_rate=rate)
    truth = None
    if truth_path.exists():
        truth = read_truth(truth_path, meta.get("true_step_boundaries", ()))
    dist = meta.get("declared_distance")
    seed = meta.get("seed")
    extra = {
        k: v
        for k, v in meta.items()
        if k not in ("label", "seed", "declared_distance", "nominal_rate", "true_step_boundaries")
    }
    return WalkRecord(
        stream=base.stream,
        truth=truth,
        label=meta.get("label") or base.label,
        declared_distance=None if dist is None else float(dist),
        seed=None if seed is None else int(seed),
        meta=extra,
    )


def list_walks(directory: str | Path) -> list[Path]:
    """Walk CSVs in ``directory`` (sidecars excluded), sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ParseError(f"{directory}: not a directory")
    return sorted(p for p in directory.glob("*.csv") if not p.name.endswith(".truth.csv"))
