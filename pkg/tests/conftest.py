import numpy as np
import pytest
from scipy import integrate

from sdmimo.numerics import EULER_GAMMA


def quad_si(x):
    return integrate.quad(lambda t: np.sinc(t / np.pi), 0, x, limit=400, epsabs=1e-13, epsrel=1e-13)[0]


def quad_ci(x):
    tail = integrate.quad(lambda t: (np.cos(t) - 1) / t, 0, x, limit=400, epsabs=1e-13, epsrel=1e-13)[0]
    return EULER_GAMMA + np.log(x) + tail


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


# one summary line per acceptance criterion, echoed after the test session
_ACCEPTANCE = []


@pytest.fixture
def acceptance_log():
    def log(number, title, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number}: {title} -- {detail}"
        print(line)
        _ACCEPTANCE.append((number, line))
        return passed
    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
