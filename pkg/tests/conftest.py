import numpy as np
import pytest

from flowobs.augmentation import CrossoverModelConfig
from flowobs.battery import BatteryParams
from flowobs.synthesis import SynthesisConfig, synthesize


@pytest.fixture(scope="session")
def params():
    return BatteryParams()


@pytest.fixture(scope="session")
def model_cfg():
    return CrossoverModelConfig(order_l=3, lam=(0.5, 0.025), varrho=1e-4)


@pytest.fixture(scope="session")
def nominal_synthesis(model_cfg, params):
    return SynthesisConfig(beta=1e-4, kappa_z=0.01, q_min=2.25e-3, q_max=18e-3,
                           cfg=model_cfg, params=params)


@pytest.fixture(scope="session")
def nominal_result(nominal_synthesis):
    return synthesize(nominal_synthesis)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log
    if acceptance_log.LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(acceptance_log.LINES):
            terminalreporter.write_line(line)
