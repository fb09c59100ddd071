import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from semloft.gridmap import NoiseModel, classify, synth_map

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def noisy_map(env, flip=0.05, clutter=0.0, seed=0):
    return classify(synth_map(env.world, env.dims, NoiseModel.symmetric(flip, seed=seed, clutter_density=clutter)))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
