"""Phone attitude from the gravity vector and rotation into the navigation frame.

Angle convention
----------------
Only the two tilt angles observable from gravity are estimated; rotation
about the gravity axis (roll in this pipeline's naming, i.e. heading) is
fixed at zero. With ``Rx`` and ``Rz`` the usual right-handed elementary
rotations, the phone attitude is::

    R(pitch, yaw) = Rz(yaw) @ Rx(pitch)      # pitch applied first, then yaw

and gravity seen by the phone is ``R @ (0, -g, 0)``. Navigation-frame
acceleration is ``R.T @ acc_phone``. The navigation frame keeps the axis
labels of the reference pose: index 0 lateral, 1 vertical (up), 2 forward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import DegenerateInputError
from .imu_core import ImuSample, SensorStream, Vec3

LATERAL, VERTICAL, FORWARD = 0, 1, 2
MIN_GRAVITY = 1.0


@dataclass(frozen=True)
class EulerAngles:
    pitch: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0

    def __post_init__(self) -> None:
        if self.roll != 0.0:
            raise ValueError("roll is fixed at zero in this pipeline")


@dataclass(frozen=True)
class NavSample:
    t: float
    acc_nav: Vec3


def rotation_matrix(pitch, yaw) -> np.ndarray:
    """Phone attitude ``Rz(yaw) @ Rx(pitch)``; broadcasts over array inputs.

    Returns shape ``(..., 3, 3)``.
    """
    pitch = np.asarray(pitch, dtype=float)
    yaw = np.asarray(yaw, dtype=float)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    zero = np.zeros_like(cp * cy)
    one = np.ones_like(zero)
    rows = [
        [cy * one, -sy * cp, sy * sp],
        [sy * one, cy * cp, -cy * sp],
        [zero, sp * one, cp * one],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def _angles(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx, gy, gz = g[..., 0], g[..., 1], g[..., 2]
    pitch = np.arctan2(-gz, np.hypot(gx, gy))
    yaw = np.arctan2(gx, -gy)
    # atan2 gives [-pi, pi]; keep yaw in (-pi, pi]
    yaw = np.where(yaw <= -np.pi, np.pi, yaw)
    return pitch + 0.0, yaw + 0.0


def euler_from_gravity(gravity) -> EulerAngles:
    """Tilt angles that rotate the reference gravity ``(0, -g, 0)`` onto ``gravity``.

    Pitch is returned in [-pi/2, pi/2] and yaw in (-pi, pi], so both signs of
    each angle are recovered.
    """
    g = np.asarray(gravity, dtype=float)
    norm = float(np.linalg.norm(g))
    if not math.isfinite(norm) or norm <= MIN_GRAVITY:
        raise DegenerateInputError(f"|gravity| = {norm:.3g} m/s^2 is too small to define a tilt")
    pitch, yaw = _angles(g)
    return EulerAngles(float(pitch), float(yaw), 0.0)


def to_nav_frame(sample: ImuSample, angles: EulerAngles) -> NavSample:
    if angles.roll != 0.0:
        raise ValueError("roll must be zero")
    r = rotation_matrix(angles.pitch, angles.yaw)
    acc = r.T @ np.asarray(sample.acc, dtype=float)
    return NavSample(sample.t, Vec3(*map(float, acc)))


def from_nav_frame(acc_nav, angles: EulerAngles) -> np.ndarray:
    """Inverse of :func:`to_nav_frame` for an acceleration vector."""
    return rotation_matrix(angles.pitch, angles.yaw) @ np.asarray(acc_nav, dtype=float)


@dataclass(frozen=True, eq=False)
class NavStream:
    """Navigation-frame accelerations for a whole stream, shape ``(n, 3)``."""

    t: np.ndarray
    acc_nav: np.ndarray
    pitch: np.ndarray
    yaw: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]

    def __getitem__(self, i: int) -> NavSample:
        return NavSample(float(self.t[i]), Vec3(*map(float, self.acc_nav[i])))

    def __iter__(self) -> Iterator[NavSample]:
        return (self[i] for i in range(len(self)))

    @property
    def forward(self) -> np.ndarray:
        return self.acc_nav[:, FORWARD]

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        """Rotate other phone-frame vectors (e.g. gyro) with the same attitudes."""
        r = rotation_matrix(self.pitch, self.yaw)
        return np.einsum("nji,nj->ni", r, np.asarray(vectors, dtype=float))


def transform_stream(stream: SensorStream, smooth_window: int = 0) -> NavStream:
    """Rotate every sample into the navigation frame using its own gravity reading.

    ``smooth_window`` > 1 applies a centred moving average to gravity before
    the angles are computed; the default leaves the readings untouched.
    """
    n = len(stream)
    if n < 2:
        raise DegenerateInputError("stream needs at least 2 samples")
    g = np.array(stream.gravity)
    if smooth_window > 1:
        kernel = np.ones(smooth_window) / smooth_window
        pad = smooth_window // 2
        padded = np.pad(g, ((pad, smooth_window - 1 - pad), (0, 0)), mode="edge")
        g = np.stack([np.convolve(padded[:, k], kernel, mode="valid") for k in range(3)], axis=1)
    norms = np.linalg.norm(g, axis=1)
    bad = np.flatnonzero(~(norms > MIN_GRAVITY))
    if bad.size:
        i = int(bad[0])
        raise DegenerateInputError(f"|gravity| = {norms[i]:.3g} m/s^2 is degenerate", index=i)
    pitch, yaw = _angles(g)
    r = rotation_matrix(pitch, yaw)
    acc_nav = np.einsum("nji,nj->ni", r, stream.acc)
    return NavStream(np.array(stream.t), acc_nav, pitch, yaw)
