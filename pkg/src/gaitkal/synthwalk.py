"""Synthetic straight walks with exact hip kinematics and corrupted phone sensors.

A walk is a chain of segments, each with closed-form velocity, acceleration
and displacement:

    rest -> initiation ramp -> step 1 .. step N -> stopping ramp -> rest

Step ``k`` follows the truth waveform with period ``T_k`` and scale
``K_k = K * (1 + eps_k)``; a linear blend ``c_k * (1 - tau/T_k)`` removes the
velocity jump with whatever precedes the step. With a zero-length ramp the
first step starts from rest (or the last step ends at rest) through the same
kind of blend. ``K`` is solved so that the walk covers ``walk_distance``
(the total distance is affine in ``K``). Step durations are snapped to the
sample grid, so each true step starts on a sample, and where acceleration
jumps at a joint the sample there takes the mean of both one-sided limits
(which keeps trapezoid integration of the samples consistent with the
closed-form velocity). Samples also drop the trapezoid rule's leading
error term ``dt**2/12 * a''``, so that an ideal strapdown integrator
reproduces the true velocity to ``O(dt**4)`` rather than ``O(dt**2)``.

Sensor channels (phone frame, see :mod:`gaitkal.imu_core`):

* gravity = R(pitch, yaw) @ (0, -g, 0) + white noise
* acc     = R(pitch, yaw) @ (0, 0, a_forward) + bias + white noise
* gyro    = phone angular rate + bias + white noise

Random numbers come from ``numpy.random.Generator(PCG64(seed))`` and are
drawn in a fixed order, so a seed reproduces a walk exactly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .imu_core import GroundTruth, SensorStream, WalkRecord
from .orientation import rotation_matrix
from .velmodel import (
    GaussianModel,
    SinusoidalModel,
    VelocityModel,
    model_acceleration,
    model_displacement,
    model_to_dict,
    model_velocity,
)

RNG_ALGORITHM = "PCG64"
G = 9.80665


@dataclass(frozen=True)
class GaitProfile:
    step_period_mean: float = 0.53
    step_period_jitter: float = 0.015
    n_steps: int = 40
    truth_waveform: VelocityModel = field(default_factory=GaussianModel)
    walk_distance: float = 40.0
    amplitude_jitter: float = 0.0
    lead_in: float = 1.0
    init_duration: float = 2.0
    stop_duration: float = 1.0
    lead_out: float = 1.0
    rate: float = 100.0

    def __post_init__(self) -> None:
        if not 0.3 <= self.step_period_mean <= 1.0:
            raise ValueError("step_period_mean must lie in [0.3, 1.0] s")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if min(self.step_period_jitter, self.amplitude_jitter, self.lead_in, self.lead_out,
               self.init_duration, self.stop_duration) < 0:
            raise ValueError("jitters, rest and ramp durations must be non-negative")
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["truth_waveform"] = {"tag": self.truth_waveform.tag, **model_to_dict(self.truth_waveform)}
        return d


@dataclass(frozen=True)
class SensorErrorModel:
    """Per-walk sensor corruption.

    ``acc_bias`` is the magnitude of the constant accelerometer bias on each
    phone axis; the sign of each axis is drawn from the seed. ``tilt_offset``
    bounds the static pitch/yaw mounting offsets, drawn uniformly.
    """

    acc_bias: float = 0.15
    acc_noise_std: float = 0.15
    gyro_bias: float = 0.005
    gyro_noise_std: float = 0.01
    gravity_noise_std: float = 0.05
    tilt_sway_amplitude: float = 0.03
    tilt_offset: float = 0.1

    def __post_init__(self) -> None:
        if min(self.acc_noise_std, self.gyro_noise_std, self.gravity_noise_std) < 0:
            raise ValueError("noise standard deviations must be non-negative")
        if min(self.acc_bias, self.gyro_bias, self.tilt_sway_amplitude, self.tilt_offset) < 0:
            raise ValueError("bias and tilt magnitudes must be non-negative")

    @classmethod
    def noiseless(cls) -> "SensorErrorModel":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# truth kinematics
# ---------------------------------------------------------------------------


@dataclass
class _Kinematics:
    v: np.ndarray
    a: np.ndarray
    p: np.ndarray
    boundaries: np.ndarray


def _acceleration_curvature(model: VelocityModel, tau, T: float) -> np.ndarray:
    """Second time derivative of the model acceleration."""
    if isinstance(model, GaussianModel):
        sigma = model.b * T
        d = tau - model.a * T
        bump = (model.K / T) * np.exp(-(d**2) / (2.0 * sigma**2))
        return bump * (3.0 * d / sigma**4 - d**3 / sigma**6)
    if isinstance(model, SinusoidalModel):
        w = 2.0 * np.pi / T
        return -model.a * w**3 * np.cos(w * tau)
    return np.zeros_like(tau)  # piecewise-linear sawtooth


def _layout(profile: GaitProfile, step_samples: np.ndarray):
    r = profile.rate
    n_rest0 = int(round(profile.lead_in * r))
    n_init = int(round(profile.init_duration * r))
    n_stop = int(round(profile.stop_duration * r))
    n_rest1 = int(round(profile.lead_out * r))
    lengths = [n_rest0, n_init, *step_samples.tolist(), n_stop, n_rest1]
    return lengths


def _kinematics(profile: GaitProfile, step_samples: np.ndarray, scales: np.ndarray, K: float) -> _Kinematics:
    dt = 1.0 / profile.rate
    lengths = _layout(profile, step_samples)
    n_total = sum(lengths) + 1
    v = np.zeros(n_total)
    a = np.zeros(n_total)
    p = np.zeros(n_total)

    models = [replace(profile.truth_waveform, K=K * s) for s in scales]
    periods = step_samples * dt
    v_first = model_velocity(models[0], 0.0, periods[0])
    v_last = model_velocity(models[-1], periods[-1], periods[-1])

    i0 = 0
    offset = 0.0
    a_left = 0.0
    boundaries = []
    n_steps = len(models)
    for seg, n in enumerate(lengths):
        if n == 0:
            continue
        tau = np.arange(n + 1) * dt  # includes the segment end point
        if seg == 0 or seg == len(lengths) - 1:
            sv = np.zeros_like(tau)
            sa = np.zeros_like(tau)
            sp = np.zeros_like(tau)
            scurv = np.zeros_like(tau)
        elif seg == 1:
            dur = n * dt
            sv = v_first * 0.5 * (1.0 - np.cos(np.pi * tau / dur))
            sa = v_first * 0.5 * np.pi / dur * np.sin(np.pi * tau / dur)
            scurv = -v_first * 0.5 * (np.pi / dur) ** 3 * np.sin(np.pi * tau / dur)
            sp = v_first * 0.5 * (tau - dur / np.pi * np.sin(np.pi * tau / dur))
        elif seg == len(lengths) - 2:
            dur = n * dt
            sv = v_last * 0.5 * (1.0 + np.cos(np.pi * tau / dur))
            sa = -v_last * 0.5 * np.pi / dur * np.sin(np.pi * tau / dur)
            scurv = v_last * 0.5 * (np.pi / dur) ** 3 * np.sin(np.pi * tau / dur)
            sp = v_last * 0.5 * (tau + dur / np.pi * np.sin(np.pi * tau / dur))
        else:
            k = seg - 2
            m, T = models[k], periods[k]
            tau = np.minimum(tau, T)
            if k > 0:
                prev_end = model_velocity(models[k - 1], periods[k - 1], periods[k - 1])
            else:
                prev_end = v_first if lengths[1] else 0.0
            c = prev_end - model_velocity(m, 0.0, T)
            # without a stopping ramp the last step itself blends down to rest
            d = -model_velocity(m, T, T) if k == n_steps - 1 and not lengths[-2] else 0.0
            sv = model_velocity(m, tau, T) + c * (1.0 - tau / T) + d * tau / T
            sa = model_acceleration(m, tau, T) + (d - c) / T
            scurv = _acceleration_curvature(m, tau, T)
            sp = model_displacement(m, tau, T) + c * (tau - tau**2 / (2.0 * T)) + d * tau**2 / (2.0 * T)
            boundaries.append(i0)
        # remove the trapezoid rule's leading error term from the samples
        sa = sa - dt * dt / 12.0 * scurv
        v[i0 : i0 + n] = sv[:-1]
        a[i0 : i0 + n] = sa[:-1]
        if i0 > 0:
            # acceleration may jump at a segment joint: sample the mid value
            a[i0] = 0.5 * (a_left + sa[0])
        a_left = sa[-1]
        p[i0 : i0 + n] = offset + sp[:-1]
        offset += sp[-1]
        i0 += n
    # final sample: end of the last segment (at rest)
    v[-1], a[-1], p[-1] = 0.0, 0.5 * a_left, offset
    assert len(boundaries) == n_steps
    return _Kinematics(v, a, p, np.array(boundaries, dtype=int))


def _solve_scale(profile: GaitProfile, step_samples, scales) -> float:
    d0 = _kinematics(profile, step_samples, scales, 0.0).p[-1]
    d1 = _kinematics(profile, step_samples, scales, 1.0).p[-1]
    if d1 == d0:
        raise ValueError("walk distance does not depend on the waveform scale")
    K = (profile.walk_distance - d0) / (d1 - d0)
    if not K > 0:
        raise ValueError(
            f"cannot reach {profile.walk_distance} m with {profile.n_steps} steps: "
            f"the fixed part of the waveform already covers {d0:.2f} m"
        )
    return K


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def generate(profile: GaitProfile, errs: SensorErrorModel, seed: int) -> WalkRecord:
    """Deterministic synthetic walk (sensor stream plus ground truth) for ``seed``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    dt = 1.0 / profile.rate

    periods = rng.normal(profile.step_period_mean, profile.step_period_jitter, profile.n_steps)
    periods = np.clip(periods, 0.3, 1.0)
    step_samples = np.maximum(np.round(periods * profile.rate).astype(int), 2)
    scales = 1.0 + profile.amplitude_jitter * rng.standard_normal(profile.n_steps)
    scales = np.clip(scales, 0.5, 1.5)

    K = _solve_scale(profile, step_samples, scales)
    kin = _kinematics(profile, step_samples, scales, K)
    n = kin.v.shape[0]
    t = np.arange(n) * dt

    pitch0, yaw0 = rng.uniform(-errs.tilt_offset, errs.tilt_offset, 2)
    sway_period = 2.0 * profile.step_period_mean
    sway_phase = rng.uniform(0.0, 2.0 * np.pi)
    pitch = pitch0 + errs.tilt_sway_amplitude * np.sin(2.0 * np.pi * t / sway_period + sway_phase)
    pitch_rate = errs.tilt_sway_amplitude * (2.0 * np.pi / sway_period) * np.cos(
        2.0 * np.pi * t / sway_period + sway_phase
    )
    yaw = np.full(n, yaw0)
    R = rotation_matrix(pitch, yaw)

    acc_nav = np.zeros((n, 3))
    acc_nav[:, 2] = kin.a
    acc_true = np.einsum("nij,nj->ni", R, acc_nav)
    grav_true = np.einsum("nij,j->ni", R, np.array([0.0, -G, 0.0]))
    # phone angular rate for R = Rz(yaw) Rx(pitch) with constant yaw
    gyro_true = -pitch_rate[:, None] * np.stack([np.cos(yaw), np.sin(yaw), np.zeros(n)], axis=1)

    acc_bias = errs.acc_bias * rng.choice([-1.0, 1.0], 3)
    gyro_bias = errs.gyro_bias * rng.choice([-1.0, 1.0], 3)
    acc = acc_true + acc_bias + errs.acc_noise_std * rng.standard_normal((n, 3))
    gyro = gyro_true + gyro_bias + errs.gyro_noise_std * rng.standard_normal((n, 3))
    grav = grav_true + errs.gravity_noise_std * rng.standard_normal((n, 3))

    stream = SensorStream(t, acc, gyro, grav, nominal_rate=profile.rate)
    truth = GroundTruth(t, kin.v, kin.p, kin.boundaries)
    meta = {
        "rng": RNG_ALGORITHM,
        "profile": profile.to_dict(),
        "errors": asdict(errs),
        "truth_scale_K": float(K),
        "acc_bias_vector": acc_bias.tolist(),
    }
    return WalkRecord(
        stream=stream,
        truth=truth,
        label=f"walk-{seed:05d}",
        declared_distance=float(profile.walk_distance),
        seed=int(seed),
        meta=meta,
    )


def differentiate_position(p, t) -> np.ndarray:
    """Central differences inside, one-sided differences at both ends."""
    p = np.asarray(p, dtype=float)
    t = np.asarray(t, dtype=float)
    if p.ndim != 1 or p.shape != t.shape:
        raise ValueError("p and t must be 1-D of equal length")
    if p.shape[0] < 3:
        raise ValueError("need at least 3 samples")
    if not np.all(np.diff(t) > 0):
        raise ValueError("t must be strictly increasing")
    return np.gradient(p, t, edge_order=1)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleSpec:
    """Ranges from which each seed draws its walker and its phone.

    Defaults give 40 m walks of roughly 45 s whose uncorrected double
    integration drifts by 80-250 m, matching the magnitude reported for
    real phones on such walks.
    """

    walk_distance: float = 40.0
    period_range: tuple[float, float] = (0.48, 0.60)
    period_jitter: float = 0.015
    speed_range: tuple[float, float] = (1.0, 1.06)
    amplitude_jitter: float = 0.05
    shift: float = 0.9
    shift_spread: float = 0.01
    mean_fraction: float = 0.4
    mean_fraction_spread: float = 0.02
    step_fraction: float = 0.15
    step_fraction_spread: float = 0.01
    acc_bias_range: tuple[float, float] = (0.10, 0.20)
    errors: SensorErrorModel = field(default_factory=SensorErrorModel)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSpec":
        d = dict(d)
        if "errors" in d:
            d["errors"] = SensorErrorModel(**d["errors"])
        for k in ("period_range", "speed_range", "acc_bias_range"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def ensemble_walk(seed: int, spec: EnsembleSpec | None = None) -> WalkRecord:
    """One ensemble member: walker and phone drawn from ``seed``, then :func:`generate`."""
    spec = spec or EnsembleSpec()
    # separate stream from the one generate() uses for the same seed
    rng = np.random.Generator(np.random.PCG64([seed, 1]))
    T = rng.uniform(*spec.period_range)
    speed = rng.uniform(*spec.speed_range)
    waveform = GaussianModel(
        A=spec.shift + spec.shift_spread * rng.uniform(-1, 1),
        K=1.0,
        a=spec.mean_fraction + spec.mean_fraction_spread * rng.uniform(-1, 1),
        b=spec.step_fraction + spec.step_fraction_spread * rng.uniform(-1, 1),
    )
    bias = rng.uniform(*spec.acc_bias_range)
    ramps = waveform.A * 1.5  # approx. distance covered while starting and stopping
    n_steps = max(1, int(round((spec.walk_distance - ramps) / (speed * T))))
    profile = GaitProfile(
        step_period_mean=T,
        step_period_jitter=spec.period_jitter,
        n_steps=n_steps,
        truth_waveform=waveform,
        walk_distance=spec.walk_distance,
        amplitude_jitter=spec.amplitude_jitter,
    )
    return generate(profile, replace(spec.errors, acc_bias=bias), seed)


def ensemble(seeds, spec: EnsembleSpec | None = None) -> list[WalkRecord]:
    return [ensemble_walk(int(s), spec) for s in seeds]


def drift_lower_bound(acc_bias: float, duration: float) -> float:
    """``0.5 * b * T**2``: distance error of an uncorrected constant bias."""
    return 0.5 * acc_bias * duration * duration


def walk_duration(record: WalkRecord) -> float:
    t = record.stream.t
    return float(t[-1] - t[0])


__all__ = [
    "EnsembleSpec",
    "GaitProfile",
    "GroundTruth",
    "RNG_ALGORITHM",
    "SensorErrorModel",
    "differentiate_position",
    "drift_lower_bound",
    "ensemble",
    "ensemble_walk",
    "generate",
    "walk_duration",
]
