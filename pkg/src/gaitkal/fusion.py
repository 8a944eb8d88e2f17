"""Error-state complementary Kalman filter fed by model-velocity corrections.

The filter tracks the INS error ``dx = [dp, dv, dtheta, domega]`` (position,
velocity, heading, angular rate; all along or about the walking direction).
Between corrections the error propagates as

    dp' = dp + dt*dv        dtheta' = dtheta + dt*domega
    dv' = dv                domega' = domega

and a correction measures ``(dv, dtheta)``. After every update the estimate
is fed back into the INS trace and the error state returns to zero.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericalError
from .imu_core import WalkRecord
from .orientation import transform_stream
from .stepper import MAX_PERIOD, MIN_PERIOD, FsmThresholds, StepEvent, detect_steps
from .strapdown import KinematicTrace, integrate_trapezoid
from .velmodel import VelocityModel, model_velocity

log = logging.getLogger(__name__)

H = np.array([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
H.flags.writeable = False

MODES = ("kalman", "naive")


@dataclass(frozen=True)
class ErrorState:
    d_p: float = 0.0
    d_v: float = 0.0
    d_theta: float = 0.0
    d_omega: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.d_p, self.d_v, self.d_theta, self.d_omega])

    @classmethod
    def from_array(cls, x) -> "ErrorState":
        return cls(*map(float, x))


def _diag(values) -> np.ndarray:
    return np.diag(np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class FilterConfig:
    """Filter noise model and step-context defaults.

    ``Q`` is per-sample process noise, ``R`` the (velocity, heading)
    measurement noise. ``default_T`` is the step period assumed for the first
    step, before any period has been observed.
    """

    Q: np.ndarray = field(default_factory=lambda: _diag([1e-6, 1e-4, 1e-8, 1e-6]))
    R: np.ndarray = field(default_factory=lambda: _diag([0.05**2, np.deg2rad(10.0) ** 2]))
    dt: float = 0.01
    default_T: float = 0.5
    P0: np.ndarray = field(default_factory=lambda: _diag([1e-4, 1e-4, 1e-4, 1e-6]))

    def __post_init__(self) -> None:
        for name, shape in (("Q", (4, 4)), ("R", (2, 2)), ("P0", (4, 4))):
            m = np.array(getattr(self, name), dtype=float)
            if m.ndim == 1:
                m = np.diag(m)
            if m.shape != shape:
                raise ValueError(f"{name} must be {shape}, got {m.shape}")
            if not np.allclose(m, m.T) or np.linalg.eigvalsh(m).min() < -1e-12:
                raise ValueError(f"{name} must be symmetric positive semi-definite")
            m.flags.writeable = False
            object.__setattr__(self, name, m)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.default_T > 0:
            raise ValueError("default_T must be positive")

    def as_dict(self) -> dict:
        return dict(
            Q=self.Q.tolist(), R=self.R.tolist(), P0=self.P0.tolist(),
            dt=self.dt, default_T=self.default_T,
        )


def transition_matrix(dt: float) -> np.ndarray:
    return np.array(
        [[1.0, dt, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, dt], [0.0, 0.0, 0.0, 1.0]]
    )


def _as_vec(state) -> np.ndarray:
    return state.as_array() if isinstance(state, ErrorState) else np.asarray(state, dtype=float)


def predict(state, P, cfg: FilterConfig):
    """One-sample propagation: ``x <- F x``, ``P <- F P F^T + Q``."""
    F = transition_matrix(cfg.dt)
    x = F @ _as_vec(state)
    P = F @ np.asarray(P, dtype=float) @ F.T + cfg.Q
    P = 0.5 * (P + P.T)
    return (ErrorState.from_array(x) if isinstance(state, ErrorState) else x), P


def update(state, P, measured_error, cfg: FilterConfig):
    """Kalman measurement update for a (velocity, heading) error measurement.

    Uses the Joseph form of the covariance update, which equals
    ``(I - K H) P`` for the optimal gain and keeps ``P`` positive
    semi-definite under rounding.
    """
    x = _as_vec(state)
    P = np.asarray(P, dtype=float)
    z = np.asarray(measured_error, dtype=float)
    PHt = P[:, 1:3]  # P @ H.T
    S = PHt[1:3] + cfg.R
    s11, s12, s22 = S[0, 0], 0.5 * (S[0, 1] + S[1, 0]), S[1, 1]
    # closed-form eigenvalues of the symmetric 2x2 innovation covariance
    half_tr = 0.5 * (s11 + s22)
    disc = np.hypot(0.5 * (s11 - s22), s12)
    lo, hi = half_tr - disc, half_tr + disc
    if not (np.isfinite(hi) and lo > hi * 1e-15):
        raise NumericalError(
            f"singular innovation covariance S={S.tolist()} (P diag {np.diag(P).tolist()})"
        )
    det = s11 * s22 - s12 * s12
    S_inv = np.array([[s22, -s12], [-s12, s11]]) / det
    gain = PHt @ S_inv
    x = x + gain @ (z - x[1:3])
    IKH = np.eye(4) - gain @ H
    P = IKH @ P @ IKH.T + gain @ cfg.R @ gain.T
    P = 0.5 * (P + P.T)
    return (ErrorState.from_array(x) if isinstance(state, ErrorState) else x), P


def velocity_error_measurement(ins_velocity: float, model: VelocityModel, t_in_step: float, T: float) -> float:
    return float(ins_velocity) - model_velocity(model, t_in_step, T)


def apply_feedback(trace: KinematicTrace, idx: int, state) -> KinematicTrace:
    """Return a copy of ``trace`` with the error estimate removed at ``idx``.

    Only sample ``idx`` changes; the pipeline re-integrates the samples after
    it from the corrected values.
    """
    n = len(trace)
    if not -n <= idx < n:
        raise IndexError(f"index {idx} outside trace of length {n}")
    x = _as_vec(state)
    v, p = trace.v.copy(), trace.p.copy()
    v[idx] -= x[1]
    p[idx] -= x[0]
    return KinematicTrace(trace.t, trace.a, v, p)


@dataclass(frozen=True)
class CorrectionSchedule:
    correction_pct: float
    indices: tuple  # one tuple of sample indices per step

    def flat(self) -> list[tuple[int, int]]:
        """``(sample_index, step_number)`` pairs in time order."""
        return [(i, k) for k, idx in enumerate(self.indices) for i in idx]

    @property
    def n_corrections(self) -> int:
        return sum(len(i) for i in self.indices)


def build_schedule(steps, correction_pct: float) -> CorrectionSchedule:
    """``floor(N * pct / 100)`` equally spaced indices inside each step of N samples."""
    if not 0 <= correction_pct <= 100:
        raise ValueError("correction_pct must lie in [0, 100]")
    per_step = []
    for st in steps:
        n = st.end_idx - st.start_idx + 1
        m = int(n * correction_pct // 100)
        per_step.append(tuple(st.start_idx + (j * n) // m for j in range(m)) if m else ())
    return CorrectionSchedule(float(correction_pct), tuple(per_step))


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PreparedWalk:
    """Orientation and step detection done once; reused across model/pct runs."""

    label: str
    t: np.ndarray
    a: np.ndarray
    steps: list[StepEvent]
    warnings: tuple = ()


def prepare_walk(record: WalkRecord, thr: FsmThresholds) -> PreparedWalk:
    if len(record.stream) < 2:
        raise ValueError("stream needs at least 2 samples")
    nav = transform_stream(record.stream)
    steps = detect_steps(nav.forward, nav.t, thr)
    warnings = ()
    if not steps:
        warnings = ("no steps detected; running uncorrected",)
        log.warning("walk %s: no steps detected, running uncorrected", record.label)
    return PreparedWalk(record.label, np.array(nav.t), np.array(nav.forward), steps, warnings)


@dataclass(eq=False)
class Diagnostics:
    mode: str
    pct: float
    correction_idx: list = field(default_factory=list)
    innovations: list = field(default_factory=list)  # velocity error measured at each correction
    model_v: list = field(default_factory=list)
    v_raw: np.ndarray | None = None
    n_steps: int = 0
    warnings: tuple = ()
    endpoint: float = float("nan")


class _CovariancePropagator:
    """``n`` consecutive predicts of a zero error state, cached by ``n``."""

    def __init__(self, cfg: FilterConfig) -> None:
        self.cfg = cfg
        self.F = transition_matrix(cfg.dt)
        self.cache: dict[int, tuple[np.ndarray, np.ndarray]] = {0: (np.eye(4), np.zeros((4, 4)))}

    def _get(self, n: int):
        if n not in self.cache:
            Fk, Qk = self._get(n - 1)
            # F^n and sum_{k<n} F^k Q F^k^T
            self.cache[n] = (self.F @ Fk, self.F @ Qk @ self.F.T + self.cfg.Q)
        return self.cache[n]

    def __call__(self, P: np.ndarray, n: int) -> np.ndarray:
        if n > 900:
            for _ in range(n // 900):
                P = self(P, 900)
            n %= 900
        Fn, Qn = self._get(n)
        P = Fn @ P @ Fn.T + Qn
        return 0.5 * (P + P.T)


def _step_period(steps, k: int, t: np.ndarray, default_T: float) -> float:
    """Period of the step before ``k`` (start to start when contiguous)."""
    if k == 0:
        return default_T
    prev = steps[k - 1]
    if prev.end_idx + 1 == steps[k].start_idx:
        T = float(t[steps[k].start_idx] - t[prev.start_idx])
    else:
        T = prev.period_T
    return min(max(T, MIN_PERIOD), MAX_PERIOD)


def run_prepared(
    prep: PreparedWalk,
    model: VelocityModel,
    cfg: FilterConfig,
    pct: float,
    mode: str = "kalman",
    v0: float = 0.0,
    p0: float = 0.0,
) -> tuple[KinematicTrace, Diagnostics]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    t, a = prep.t, prep.a
    schedule = build_schedule(prep.steps, pct)
    diag = Diagnostics(mode, float(pct), n_steps=len(prep.steps), warnings=prep.warnings)

    v = integrate_trapezoid(t, a, v0)
    p = integrate_trapezoid(t, v, p0)
    diag.v_raw = v.copy()
    if schedule.n_corrections == 0:
        diag.endpoint = float(p[-1])
        return KinematicTrace(t, a.copy(), v, p), diag

    flat = schedule.flat()
    idx = np.array([i for i, _ in flat])
    step_no = np.array([k for _, k in flat])
    periods = np.array([_step_period(prep.steps, k, t, cfg.default_T) for k in range(len(prep.steps))])
    starts = np.array([st.start_idx for st in prep.steps])
    T = periods[step_no]
    t_in = np.clip(t[idx] - t[starts[step_no]], 0.0, T)
    mv = model_velocity(model, t_in, T)

    # A correction at sample c shifts v by dv_c and p by dp_c there; integrating
    # the same acceleration afterwards carries v + dv_c and p + dp_c + dv_c*(t - t_c).
    dv = np.zeros(idx.shape[0])
    dp = np.zeros(idx.shape[0])
    innov = np.empty(idx.shape[0])
    cov = _CovariancePropagator(cfg)
    P = np.array(cfg.P0)
    zero = np.zeros(4)
    v_shift = 0.0
    last = 0
    for j in range(idx.shape[0]):
        c = idx[j]
        innov[j] = v[c] + v_shift - mv[j]
        if mode == "kalman":
            P = cov(P, c - last)
            x, P = update(zero, P, (innov[j], 0.0), cfg)
            dv[j], dp[j] = -x[1], -x[0]
        else:
            dv[j] = -innov[j]
        v_shift += dv[j]
        last = c

    seg = np.searchsorted(idx, np.arange(t.shape[0]), side="right") - 1
    has = seg >= 0
    dv_cum = np.cumsum(dv)
    # p offset = sum_c (dp_c - dv_c * t_c) + t * sum_c dv_c, over corrections c <= i
    base_cum = np.cumsum(dp - dv * t[idx])
    v = v.copy()
    v[has] += dv_cum[seg[has]]
    p[has] += base_cum[seg[has]] + t[has] * dv_cum[seg[has]]
    if not (np.isfinite(v[-1]) and np.isfinite(p[-1])):
        raise NumericalError("non-finite INS state after corrections")
    diag.correction_idx = idx.tolist()
    diag.innovations = innov.tolist()
    diag.model_v = mv.tolist()
    diag.endpoint = float(p[-1])
    return KinematicTrace(t, a.copy(), v, p), diag


def run_ins_corrected(
    record: WalkRecord,
    model: VelocityModel,
    thr: FsmThresholds,
    cfg: FilterConfig | None = None,
    pct: float = 10.0,
    mode: str = "kalman",
    v0: float = 0.0,
    p0: float = 0.0,
) -> tuple[KinematicTrace, Diagnostics]:
    """Orientation, strapdown integration, step detection and scheduled corrections.

    ``mode="kalman"`` updates the error-state filter at each scheduled sample
    and feeds the estimate back; ``mode="naive"`` overwrites the velocity with
    the model value there. With ``pct=0`` the result equals plain strapdown
    propagation.
    """
    prep = prepare_walk(record, thr)
    return run_prepared(prep, model, cfg or FilterConfig(), pct, mode, v0, p0)


TRACE_COLUMNS = ("t", "v_raw", "v_corrected", "p_corrected", "correction_applied")


def write_trace_csv(path: str | Path, trace: KinematicTrace, diag: Diagnostics) -> Path:
    path = Path(path)
    applied = np.zeros(len(trace), dtype=int)
    applied[np.asarray(diag.correction_idx, dtype=int)] = 1
    v_raw = diag.v_raw if diag.v_raw is not None else trace.v
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for i in range(len(trace)):
            w.writerow([repr(float(trace.t[i])), repr(float(v_raw[i])), repr(float(trace.v[i])),
                        repr(float(trace.p[i])), int(applied[i])])
    return path
