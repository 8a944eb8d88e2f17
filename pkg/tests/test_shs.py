import numpy as np
import pytest

from gaitkal.imu_core import WalkRecord
from gaitkal.shs import TRAJECTORY_COLUMNS, ShsConfig, run_shs, write_trajectory_csv
from gaitkal.stepper import FsmThresholds, scarlet_step_length

from .conftest import forward_stream, still_stream

THR = FsmThresholds(0.3, 1.0, -0.3, -1.0)


def _square_walk(n_steps=10):
    one = np.repeat([2.0, -2.0], 25)
    x = np.concatenate([np.zeros(50), np.tile(one, n_steps), np.zeros(50)])
    return WalkRecord(forward_stream(x), label="square")


def test_no_steps(caplog):
    traj = run_shs(WalkRecord(still_stream(300), label="still"), ShsConfig(THR, 1.5))
    assert traj.total_distance == 0.0 and len(traj) == 0
    assert traj.warnings and "no steps" in caplog.text
    np.testing.assert_array_equal(traj.endpoint, [0.0, 0.0])


def test_ten_steps_half_ratio():
    traj = run_shs(_square_walk(), ShsConfig(THR, 1.5))
    assert len(traj) == 10
    assert traj.total_distance == pytest.approx(7.5, abs=1e-12)


def test_total_is_sum_of_lengths(noisy_walk):
    from gaitkal.orientation import transform_stream

    nav = transform_stream(noisy_walk.stream)
    thr = THR.scaled(float(np.std(nav.forward)))
    traj = run_shs(noisy_walk, ShsConfig(thr, 1.2))
    assert len(traj) > 50
    lengths = [scarlet_step_length(s, 1.2) for s in traj.steps]
    assert traj.total_distance == pytest.approx(sum(lengths), abs=1e-12)
    # fixed-zero heading: every position lies on the x axis
    np.testing.assert_array_equal(traj.y, 0.0)
    assert np.all(np.diff(traj.x) >= 0)


def test_gyro_heading_on_straight_walk(noisy_walk):
    from gaitkal.orientation import transform_stream

    nav = transform_stream(noisy_walk.stream)
    thr = THR.scaled(float(np.std(nav.forward)))
    traj = run_shs(noisy_walk, ShsConfig(thr, 1.2, heading_source="gyro-integrated"))
    # gyro bias only: heading wanders slowly, total distance is unchanged
    assert np.max(np.abs(traj.heading)) < 0.5
    assert traj.total_distance == pytest.approx(run_shs(noisy_walk, ShsConfig(thr, 1.2)).total_distance)


@pytest.mark.parametrize("kwargs", [dict(scarlet_K=0.0), dict(scarlet_K=1.0, heading_source="compass")])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ShsConfig(THR, **kwargs)


def test_trajectory_csv(tmp_path):
    traj = run_shs(_square_walk(4), ShsConfig(THR, 1.5))
    lines = write_trajectory_csv(tmp_path / "t.csv", traj).read_text().splitlines()
    assert lines[0] == ",".join(TRAJECTORY_COLUMNS)
    assert len(lines) == 5
    assert float(lines[-1].split(",")[3]) == pytest.approx(3.0)
