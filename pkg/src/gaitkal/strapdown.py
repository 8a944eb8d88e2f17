"""Trapezoidal double integration of walking-direction acceleration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .orientation import FORWARD, NavStream


@dataclass(frozen=True, eq=False)
class KinematicTrace:
    t: np.ndarray
    a: np.ndarray
    v: np.ndarray
    p: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]


def integrate_trapezoid(t, f, f0: float) -> np.ndarray:
    """Cumulative trapezoid integral starting from ``f0``.

    ``out[i] = out[i-1] + (t[i] - t[i-1]) * (f[i] + f[i-1]) / 2``, accumulated
    left to right exactly in that order.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if t.ndim != 1 or t.shape != f.shape:
        raise ValueError(f"t and f must be 1-D of equal length, got {t.shape} and {f.shape}")
    if t.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    dt = np.diff(t)
    if not np.all(dt > 0):
        raise ValueError("t must be strictly increasing")
    incr = dt * (f[1:] + f[:-1]) / 2.0
    return np.cumsum(np.concatenate(([float(f0)], incr)))


def propagate(nav, v0: float = 0.0, p0: float = 0.0) -> KinematicTrace:
    """Velocity and distance along the walking direction.

    ``nav`` is a :class:`NavStream` or any sequence of ``NavSample``.
    """
    if len(nav) < 2:
        raise ValueError("need at least 2 samples")
    if isinstance(nav, NavStream):
        t, a = np.array(nav.t), np.array(nav.forward)
    else:
        t = np.array([s.t for s in nav], dtype=float)
        a = np.array([s.acc_nav[FORWARD] for s in nav], dtype=float)
    v = integrate_trapezoid(t, a, v0)
    p = integrate_trapezoid(t, v, p0)
    return KinematicTrace(t, a, v, p)
