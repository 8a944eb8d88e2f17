import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from gaitkal.errors import CalibrationError
from gaitkal.stepper import FsmThresholds
from gaitkal.synthwalk import GaitProfile, SensorErrorModel, generate
from gaitkal.velmodel import (
    GaussianModel,
    SawtoothModel,
    SinusoidalModel,
    calibrate_gaussian_k,
    calibrate_model_k,
    gaussian_mean_speed,
    golden_section,
    mean_model_speed,
    model_acceleration,
    model_displacement,
    model_from_dict,
    model_to_dict,
    model_velocity,
)

PUBLISHED_MODELS = [GaussianModel(), SinusoidalModel(), SawtoothModel()]
periods = st.floats(0.3, 1.0)
fractions = st.floats(0.0, 1.0)


class TestPublishedValues:
    def test_defaults(self):
        g, s, w = PUBLISHED_MODELS
        assert (g.A, g.a, g.b) == (0.9, 0.4, 0.15)
        assert (s.K, s.a) == (1.29, 0.25)
        assert (w.K, w.a, w.b) == (1.67, 0.2, 0.25)

    @pytest.mark.parametrize("T", [0.4, 0.5, 0.8])
    def test_gaussian_peak(self, T):
        m = GaussianModel(K=0.2)
        assert model_velocity(m, 0.4 * T, T) == m.A + m.K / T

    def test_sinusoid_at_zero(self):
        assert model_velocity(SinusoidalModel(), 0.0, 0.5) == pytest.approx(0.645, abs=1e-15)

    def test_sawtooth_peak(self):
        assert model_velocity(SawtoothModel(), 0.25 * 0.5, 0.5) == pytest.approx(1.035, abs=1e-12)


@pytest.mark.parametrize("t, T", [(-0.01, 0.5), (0.51, 0.5), (0.1, 0.0)])
def test_out_of_range(t, T):
    with pytest.raises(ValueError):
        model_velocity(GaussianModel(), t, T)


@pytest.mark.parametrize(
    "cls, kwargs",
    [
        (GaussianModel, {"b": 0.0}),
        (GaussianModel, {"a": 1.0}),
        (GaussianModel, {"A": -0.1}),
        (SinusoidalModel, {"a": -1.0}),
        (SawtoothModel, {"b": 0.0}),
        (SawtoothModel, {"b": 1.1}),
    ],
)
def test_invalid_parameters(cls, kwargs):
    with pytest.raises(ValueError):
        cls(**kwargs)


@given(periods, st.floats(0.0, 0.3))
def test_gaussian_symmetry(T, frac):
    m = GaussianModel(K=0.3)
    d = frac * T
    assert model_velocity(m, m.a * T + d, T) == pytest.approx(model_velocity(m, m.a * T - d, T), abs=1e-12)


@given(st.floats(0.3, 0.5), fractions)
def test_gaussian_shape_scales_with_period(T, u):
    m = GaussianModel(A=0.0, K=0.3)
    v1 = model_velocity(m, u * T, T)
    v2 = model_velocity(m, u * 2 * T, 2 * T)
    assert v2 == pytest.approx(0.5 * v1, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("model", PUBLISHED_MODELS[1:])
@given(T=periods)
def test_periodic_continuity(model, T):
    assert model_velocity(model, 0.0, T) == pytest.approx(model_velocity(model, T, T), abs=1e-12)


@pytest.mark.parametrize("model", PUBLISHED_MODELS)
@given(T=periods, u=fractions)
def test_positive_for_published_values(model, T, u):
    v = model_velocity(model, u * T, T)
    assert math.isfinite(v) and v > 0


@pytest.mark.parametrize("model", PUBLISHED_MODELS + [GaussianModel(A=0.0, K=1.0, a=0.5, b=0.12)])
@pytest.mark.parametrize("T", [0.35, 0.5, 0.9])
def test_derivative_and_integral_agree_with_quadrature(model, T):
    ts = np.linspace(0.0, T, 11)
    for t in ts[1:]:
        x, _ = quad(lambda s: model_velocity(model, s, T), 0.0, t, points=[model.b * T] if model.tag == "saw" else None)
        assert model_displacement(model, t, T) == pytest.approx(x, abs=1e-10)
    h = 1e-6
    for t in ts[1:-1]:
        if model.tag == "saw" and abs(t - model.b * T) < 1e-3:
            continue
        fd = (model_velocity(model, t + h, T) - model_velocity(model, t - h, T)) / (2 * h)
        assert model_acceleration(model, t, T) == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_array_inputs():
    t = np.array([0.0, 0.1, 0.2])
    T = np.array([0.5, 0.5, 0.4])
    v = model_velocity(SinusoidalModel(), t, T)
    assert v.shape == (3,)
    assert v[2] == model_velocity(SinusoidalModel(), 0.2, 0.4)


class TestMeanSpeed:
    def test_sinusoid(self):
        m = SinusoidalModel()
        assert mean_model_speed(m, 0.5) == pytest.approx(m.K * 0.5, abs=1e-6)

    def test_gaussian_closed_form(self):
        m = GaussianModel(K=0.2)
        T = 0.55
        assert mean_model_speed(m, T) == pytest.approx(gaussian_mean_speed(m, T), rel=1e-2)
        assert gaussian_mean_speed(m, T) == m.A + (m.K / T) * m.b * T * math.sqrt(2 * math.pi) / T

    @pytest.mark.parametrize("model", PUBLISHED_MODELS)
    @pytest.mark.parametrize("T", [0.3, 0.6, 1.0])
    def test_non_negative(self, model, T):
        assert mean_model_speed(model, T) >= 0


@pytest.mark.parametrize("centre", [0.37, 1.0, 4.2, 9.1])
def test_golden_section_matches_scipy(centre):
    f = lambda k: abs(k - centre) + 0.1 * (k - centre) ** 2  # noqa: E731
    x, fx, n = golden_section(f, 0.1, 10.0, tol=1e-6)
    ref = minimize_scalar(f, bounds=(0.1, 10.0), method="bounded", options={"xatol": 1e-8})
    assert x == pytest.approx(ref.x, abs=1e-5)
    assert n < 60


def test_golden_section_iteration_cap():
    with pytest.raises(CalibrationError):
        golden_section(lambda k: k * k, -1.0, 1.0, tol=1e-12, max_iter=10)


def test_dict_round_trip():
    for m in PUBLISHED_MODELS:
        assert model_from_dict(m.tag, model_to_dict(m)) == m
    with pytest.raises(ValueError):
        model_from_dict("trapezoid", {})


# plant-and-recover: the truth waveform is a Gaussian model with a known K*
PLANTED = GaitProfile(
    step_period_mean=0.5,
    step_period_jitter=0.0,
    n_steps=30,
    truth_waveform=GaussianModel(A=0.0, K=1.0, a=0.5, b=0.12),
    walk_distance=20.0,
    init_duration=0.0,
    stop_duration=0.0,
)


@pytest.fixture(scope="module")
def planted():
    rec = generate(PLANTED, SensorErrorModel.noiseless(), seed=0)
    a = np.array(rec.stream.acc[:, 2])
    return rec, FsmThresholds().scaled(float(np.std(a)))


def test_plant_and_recover(planted):
    rec, thr = planted
    k_star = rec.meta["truth_scale_K"]
    base = replace(PLANTED.truth_waveform, K=1.0)
    k = calibrate_model_k([rec], base, thr, pct=10)
    assert k == pytest.approx(k_star, rel=0.02)


def test_identical_walks_same_k(planted):
    rec, thr = planted
    base = PLANTED.truth_waveform
    assert calibrate_gaussian_k([rec, rec], base, thr) == calibrate_gaussian_k([rec], base, thr)


def test_calibration_needs_distance(planted):
    rec, thr = planted
    with pytest.raises(CalibrationError):
        calibrate_model_k([replace(rec, declared_distance=None)], GaussianModel(), thr)
    with pytest.raises(CalibrationError):
        calibrate_model_k([], GaussianModel(), thr)
