import numpy as np
import pytest

from gaitkal.imu_core import SensorStream
from gaitkal.synthwalk import GaitProfile, SensorErrorModel, ensemble, generate
from gaitkal.velmodel import GaussianModel

G = 9.80665


def still_stream(n=200, rate=100.0, acc=(0.0, 0.0, 0.0), gravity=(0.0, -G, 0.0)):
    t = np.arange(n) / rate
    return SensorStream(
        t=t,
        acc=np.tile(acc, (n, 1)),
        gyro=np.zeros((n, 3)),
        gravity=np.tile(gravity, (n, 1)),
        nominal_rate=rate,
    )


def forward_stream(a_forward, rate=100.0):
    """Reference-pose stream whose forward (phone +Z) acceleration is ``a_forward``."""
    a_forward = np.asarray(a_forward, dtype=float)
    n = a_forward.shape[0]
    acc = np.zeros((n, 3))
    acc[:, 2] = a_forward
    return SensorStream(
        t=np.arange(n) / rate,
        acc=acc,
        gyro=np.zeros((n, 3)),
        gravity=np.tile((0.0, -G, 0.0), (n, 1)),
        nominal_rate=rate,
    )


# model-consistent noiseless walk: symmetric bump with no shift, so each
# truth step is exactly the model and steps join at zero acceleration
CONSISTENT_MODEL = GaussianModel(A=0.0, K=1.0, a=0.5, b=0.12)
CONSISTENT_PROFILE = GaitProfile(
    step_period_mean=0.5,
    step_period_jitter=0.0,
    n_steps=30,
    truth_waveform=CONSISTENT_MODEL,
    walk_distance=20.0,
    init_duration=0.0,
    stop_duration=0.0,
)


@pytest.fixture(scope="session")
def consistent_walk():
    return generate(CONSISTENT_PROFILE, SensorErrorModel.noiseless(), seed=0)


@pytest.fixture(scope="session")
def noisy_walk():
    return ensemble([7])[0]


@pytest.fixture(scope="session")
def small_cal():
    return ensemble(range(1000, 1004))


@pytest.fixture(scope="session")
def small_test():
    return ensemble(range(3))


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
