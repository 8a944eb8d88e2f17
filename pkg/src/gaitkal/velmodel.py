"""Parametric hip-velocity models over one step.

All three models are functions of the time since step start ``t`` and the
step period ``T``:

* Gaussian:    ``A + (K/T) * exp(-(t - a*T)**2 / (2*(b*T)**2))``
* Sinusoidal:  ``K*T + a*sin(2*pi*t/T)``
* Sawtooth:    ``K*T + a*saw(2*pi*t/T, b)``

``saw`` is the asymmetric triangle wave of :func:`scipy.signal.sawtooth`:
range [-1, 1], rising over the first fraction ``b`` of the period, peak +1
at phase ``b``, back to -1 at the period end. The Gaussian ``K`` is in
metres so that ``K/T`` is a velocity; for the other two ``K`` is in 1/s.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np
from scipy.signal import sawtooth
from scipy.special import erf

from .errors import CalibrationError

log = logging.getLogger(__name__)

_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianModel:
    A: float = 0.9
    K: float = 0.15
    a: float = 0.4
    b: float = 0.15
    tag = "gaussian"

    def __post_init__(self) -> None:
        if not self.b > 0:
            raise ValueError("b must be positive")
        if not 0 < self.a < 1:
            raise ValueError("a must lie in (0, 1)")
        if self.A < 0:
            raise ValueError("A must be non-negative")


@dataclass(frozen=True)
class SinusoidalModel:
    K: float = 1.29
    a: float = 0.25
    tag = "sin"

    def __post_init__(self) -> None:
        if self.a < 0:
            raise ValueError("a must be non-negative")


@dataclass(frozen=True)
class SawtoothModel:
    K: float = 1.67
    a: float = 0.2
    b: float = 0.25
    tag = "saw"

    def __post_init__(self) -> None:
        if not 0 < self.b <= 1:
            raise ValueError("b must lie in (0, 1]")
        if self.a < 0:
            raise ValueError("a must be non-negative")


VelocityModel = Union[GaussianModel, SinusoidalModel, SawtoothModel]
MODEL_TYPES = {"gaussian": GaussianModel, "sin": SinusoidalModel, "saw": SawtoothModel}


def model_from_dict(tag: str, params: dict) -> VelocityModel:
    try:
        cls = MODEL_TYPES[tag]
    except KeyError:
        raise ValueError(f"unknown model {tag!r}; expected one of {sorted(MODEL_TYPES)}") from None
    return cls(**params)


def model_to_dict(model: VelocityModel) -> dict:
    return {k: float(v) for k, v in vars(model).items()}


def _check(t, T):
    T = np.asarray(T, dtype=float)
    if not np.all(T > 0):
        raise ValueError(f"step period must be positive, got {T}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > T):
        raise ValueError(f"t must lie in [0, T={T}]")
    return t, (float(T) if T.ndim == 0 else T)


def _out(x, t):
    return float(x) if np.ndim(t) == 0 else x


def model_velocity(model: VelocityModel, t, T):
    """Model velocity (m/s) at time ``t`` since step start.

    ``t`` and ``T`` may be arrays of matching shape.
    """
    t, T = _check(t, T)
    if isinstance(model, GaussianModel):
        sigma = model.b * T
        v = model.A + (model.K / T) * np.exp(-((t - model.a * T) ** 2) / (2.0 * sigma**2))
    elif isinstance(model, SinusoidalModel):
        v = model.K * T + model.a * np.sin(2.0 * np.pi * t / T)
    elif isinstance(model, SawtoothModel):
        v = model.K * T + model.a * sawtooth(2.0 * np.pi * t / T, model.b)
    else:
        raise TypeError(f"not a velocity model: {model!r}")
    return _out(v, t)


def model_acceleration(model: VelocityModel, t, T):
    """Analytic time derivative of :func:`model_velocity`.

    For the sawtooth the one-sided slope of the segment containing ``t`` is
    returned (the rising slope at the peak itself).
    """
    t, T = _check(t, T)
    if isinstance(model, GaussianModel):
        sigma = model.b * T
        d = t - model.a * T
        acc = -(model.K / T) * d / sigma**2 * np.exp(-(d**2) / (2.0 * sigma**2))
    elif isinstance(model, SinusoidalModel):
        acc = model.a * (2.0 * np.pi / T) * np.cos(2.0 * np.pi * t / T)
    elif isinstance(model, SawtoothModel):
        u = t / T
        rise = 2.0 * model.a / (model.b * T)
        fall = -2.0 * model.a / ((1.0 - model.b) * T) if model.b < 1 else 0.0
        acc = np.where(u <= model.b, rise, fall)
    else:
        raise TypeError(f"not a velocity model: {model!r}")
    return _out(acc, t)


def model_displacement(model: VelocityModel, t, T):
    """Closed-form integral of the model velocity from 0 to ``t``."""
    t, T = _check(t, T)
    if isinstance(model, GaussianModel):
        s = model.b * T * math.sqrt(2.0)
        mu = model.a * T
        bump = (model.K / T) * model.b * T * math.sqrt(math.pi / 2.0)
        x = model.A * t + bump * (erf((t - mu) / s) - erf(-mu / s))
    elif isinstance(model, SinusoidalModel):
        x = model.K * T * t + model.a * T / (2.0 * np.pi) * (1.0 - np.cos(2.0 * np.pi * t / T))
    elif isinstance(model, SawtoothModel):
        u = t / T
        b = model.b
        rising = -u + u**2 / b
        with np.errstate(divide="ignore", invalid="ignore"):
            falling = (u - b) - (u - b) ** 2 / (1.0 - b) if b < 1 else np.zeros_like(u)
        x = model.K * T * t + model.a * T * np.where(u <= b, rising, falling)
    else:
        raise TypeError(f"not a velocity model: {model!r}")
    return _out(x, t)


def mean_model_speed(model: VelocityModel, T: float) -> float:
    """Trapezoid average of the model velocity over one step (1000-point grid)."""
    if not T > 0:
        raise ValueError("T must be positive")
    t = np.linspace(0.0, T, 1000)
    return float(np.trapezoid(model_velocity(model, t, T), t) / T)


def gaussian_mean_speed(model: GaussianModel, T: float) -> float:
    """Closed-form mean ignoring the truncated tails: ``A + (K/T) * b * sqrt(2*pi)``."""
    return model.A + (model.K / T) * model.b * _SQRT2PI


# ---------------------------------------------------------------------------
# calibration of the scale constant K
# ---------------------------------------------------------------------------

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo: float, hi: float, tol: float = 1e-4, max_iter: int = 200):
    """Minimise a unimodal scalar function on ``[lo, hi]``.

    Returns ``(x_min, f(x_min), n_evals)``. Raises :class:`CalibrationError`
    when the bracket has not shrunk below ``tol`` within ``max_iter``.
    """
    a, b = float(lo), float(hi)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    n = 2
    while b - a > tol:
        if n >= max_iter:
            raise CalibrationError(
                f"golden-section search did not converge in {max_iter} evaluations "
                f"(bracket [{a:.6g}, {b:.6g}])"
            )
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
        n += 1
    x = (a + b) / 2.0
    return x, f(x), n + 1


K_BOUNDS = (0.1, 10.0)


def calibrate_model_k(
    walks,
    model: VelocityModel,
    thresholds,
    cfg=None,
    pct: float = 10.0,
    mode: str = "kalman",
    bounds: tuple[float, float] = K_BOUNDS,
    tol: float = 1e-4,
) -> float:
    """Average over walks of the K that minimises each walk's endpoint error.

    Every other model parameter stays fixed. Each walk needs a declared
    distance; the search is golden-section over ``bounds``.
    """
    from .fusion import FilterConfig, prepare_walk, run_prepared

    cfg = cfg or FilterConfig()
    walks = list(walks)
    if not walks:
        raise CalibrationError("no calibration walks")
    ks = []
    for rec in walks:
        if rec.declared_distance is None:
            raise CalibrationError(f"walk {rec.label!r} has no declared distance")
        prep = prepare_walk(rec, thresholds)
        if not prep.steps:
            log.warning("walk %s: no steps detected, excluded from K calibration", rec.label)
            continue

        def objective(k, prep=prep, target=rec.declared_distance):
            trace, _ = run_prepared(prep, replace(model, K=k), cfg, pct, mode)
            return abs(trace.p[-1] - trace.p[0] - target)

        k, err, _ = golden_section(objective, *bounds, tol=tol)
        if min(k - bounds[0], bounds[1] - k) < 2 * tol:
            log.warning(
                "walk %s: optimum K=%.5g sits on the search bound %s (residual %.3g m)",
                rec.label, k, bounds, err,
            )
        log.debug("walk %s: K=%.5f residual %.4f m", rec.label, k, err)
        ks.append(k)
    if not ks:
        raise CalibrationError("every calibration walk was excluded")
    return float(np.mean(ks))


def calibrate_gaussian_k(
    walks, fixed: GaussianModel | None = None, thresholds=None, cfg=None, pct: float = 10.0
) -> float:
    """K of the Gaussian model with ``A``, ``a``, ``b`` held at ``fixed``."""
    from .stepper import FsmThresholds

    fixed = fixed or GaussianModel()
    return calibrate_model_k(walks, fixed, thresholds or FsmThresholds(), cfg, pct)
