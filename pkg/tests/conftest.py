import numpy as np
import pytest

from edgetrigger import SimConfig
from edgetrigger.detectors.tinyml import train_and_calibrate

DESK_SEED = 7


@pytest.fixture(scope="session")
def desk_cfg():
    return SimConfig(node_count=20, duration_s=7200.0, seed=DESK_SEED)


@pytest.fixture(scope="session")
def trained_model():
    """Default-config autoencoder and threshold, trained once per session."""
    result, theta = train_and_calibrate(SimConfig())
    return result, theta


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    verdicts = getattr(test_acceptance, "VERDICTS", {})
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(verdicts):
        terminalreporter.write_line(verdicts[n])
