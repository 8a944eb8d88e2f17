import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitkal.errors import DegenerateInputError
from gaitkal.imu_core import ImuSample, SensorStream, Vec3
from gaitkal.orientation import (
    FORWARD,
    EulerAngles,
    euler_from_gravity,
    from_nav_frame,
    rotation_matrix,
    to_nav_frame,
    transform_stream,
)
from gaitkal.synthwalk import GaitProfile, SensorErrorModel, generate

from .conftest import G, still_stream

REF = np.array([0.0, -9.81, 0.0])
angle = st.floats(-np.pi / 2 + 0.1, np.pi / 2 - 0.1)
component = st.floats(-50, 50, allow_nan=False)


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def test_reference_pose():
    assert euler_from_gravity(REF) == EulerAngles(0.0, 0.0, 0.0)


def test_pitch_recovered():
    alpha = 0.2
    g = (0.0, -9.81 * np.cos(alpha), -9.81 * np.sin(alpha))
    assert euler_from_gravity(g).pitch == pytest.approx(alpha, abs=1e-9)


def test_pitch_then_tilt_recovered():
    g = _rz(0.1) @ _rx(0.3) @ REF
    ang = euler_from_gravity(g)
    assert ang.pitch == pytest.approx(0.3, abs=1e-9)
    assert ang.yaw == pytest.approx(0.1, abs=1e-9)


@pytest.mark.parametrize("pitch", [-0.7, 0.7])
@pytest.mark.parametrize("yaw", [-0.9, 0.9])
def test_all_quadrants(pitch, yaw):
    ang = euler_from_gravity(rotation_matrix(pitch, yaw) @ REF)
    np.testing.assert_allclose([ang.pitch, ang.yaw], [pitch, yaw], atol=1e-12)


@given(angle, angle)
def test_gravity_angle_round_trip(pitch, yaw):
    ang = euler_from_gravity(rotation_matrix(pitch, yaw) @ REF)
    assert abs(ang.pitch - pitch) < 1e-9 and abs(ang.yaw - yaw) < 1e-9


def test_matches_elementary_rotations():
    np.testing.assert_allclose(rotation_matrix(0.3, -0.4), _rz(-0.4) @ _rx(0.3), atol=1e-15)


@pytest.mark.parametrize("g", [(0.0, 0.0, 0.0), (0.0, 0.5, 0.0), (np.nan, -9.8, 0.0)])
def test_degenerate_gravity(g):
    with pytest.raises(DegenerateInputError):
        euler_from_gravity(g)


def test_roll_must_be_zero():
    with pytest.raises(ValueError):
        EulerAngles(0.0, 0.0, 0.1)


def test_identity_rotation():
    s = ImuSample(0.0, Vec3(1.0, 2.0, 3.0), Vec3(0, 0, 0), Vec3(*REF))
    assert tuple(to_nav_frame(s, EulerAngles()).acc_nav) == (1.0, 2.0, 3.0)


def test_pure_pitch_acts_in_yz_plane():
    a = np.array([0.5, 1.0, 2.0])
    s = ImuSample(0.0, Vec3(*a), Vec3(0, 0, 0), Vec3(*REF))
    p = 0.25
    out = np.array(to_nav_frame(s, EulerAngles(pitch=p)).acc_nav)
    c, sn = np.cos(p), np.sin(p)
    # R^T for a rotation about X: [[c, s], [-s, c]] on (y, z)
    np.testing.assert_allclose(out, [a[0], c * a[1] + sn * a[2], -sn * a[1] + c * a[2]], atol=1e-15)


@given(angle, angle, component, component, component)
@settings(max_examples=200)
def test_isometry_and_inverse(pitch, yaw, x, y, z):
    acc = np.array([x, y, z])
    ang = EulerAngles(pitch, yaw)
    nav = np.array(to_nav_frame(ImuSample(0.0, Vec3(x, y, z), Vec3(0, 0, 0), Vec3(*REF)), ang).acc_nav)
    assert abs(np.linalg.norm(nav) - np.linalg.norm(acc)) <= 1e-12 * max(1.0, np.linalg.norm(acc))
    np.testing.assert_allclose(from_nav_frame(nav, ang), acc, atol=1e-12 * max(1.0, np.abs(acc).max()))


def test_constant_reference_gravity_leaves_acc_unchanged():
    s = still_stream(20, acc=(0.3, -0.2, 1.1), gravity=(0.0, -G, 0.0))
    nav = transform_stream(s)
    np.testing.assert_array_equal(nav.acc_nav, s.acc)


def test_two_samples_in_two_out():
    assert len(transform_stream(still_stream(2))) == 2
    with pytest.raises(DegenerateInputError):
        transform_stream(still_stream(1))


def test_degenerate_sample_is_named():
    g = np.tile((0.0, -G, 0.0), (10, 1))
    g[6] = 0.0
    s = SensorStream(np.arange(10) / 100.0, np.zeros((10, 3)), np.zeros((10, 3)), g)
    with pytest.raises(DegenerateInputError) as exc:
        transform_stream(s)
    assert exc.value.index == 6


def test_time_varying_pitch_matches_truth():
    prof = GaitProfile(n_steps=10, walk_distance=8.0)
    tilted = SensorErrorModel(0.0, 0.0, 0.0, 0.0, 0.0, tilt_sway_amplitude=0.05, tilt_offset=0.2)
    rec = generate(prof, tilted, seed=2)
    # same seed without tilt carries the ground-truth forward acceleration verbatim
    ref = generate(prof, SensorErrorModel.noiseless(), seed=2)
    nav = transform_stream(rec.stream)
    np.testing.assert_allclose(nav.acc_nav[:, FORWARD], ref.stream.acc[:, 2], atol=1e-12)
    assert np.max(np.abs(nav.acc_nav[:, :FORWARD])) < 1e-12


def test_smoothing_option():
    s = still_stream(30)
    nav = transform_stream(s, smooth_window=5)
    np.testing.assert_allclose(nav.pitch, 0.0, atol=1e-15)
