import warnings

import numpy as np
import pytest

from kipamp.config import bundled_config_path, load_config
from kipamp.model import TWO_PI, DeviceParams

MHZ = TWO_PI * 1e6


def small_device(K0=-TWO_PI * 1e3, lossless=False, kappa_e2=0.05, g=4.0, detuning=2.0):
    """A 5 GHz pair with g/kappa ~ 4: fast enough for time-domain checks.

    Rates are in units of 2*pi*1 MHz except ``K0``.
    """
    ki1, ki2 = (0.0, 0.0) if lossless else (0.1, 0.1)
    return DeviceParams(TWO_PI * 5e9 - 0.5 * detuning * MHZ, TWO_PI * 5e9 + 0.5 * detuning * MHZ,
                        0.5 * MHZ, ki1 * MHZ, kappa_e2 * MHZ, ki2 * MHZ, g * MHZ, K0)


@pytest.fixture(scope="session")
def nbtin():
    return load_config(bundled_config_path("nbtin"))


@pytest.fixture(scope="session")
def nbn():
    return load_config(bundled_config_path("nbn"))


@pytest.fixture(autouse=True)
def _quiet_weak_port():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="kappa_e2/kappa_e1")
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":abc"))):
            terminalreporter.write_line(line)
