import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from quasimarkov.spectral import SpectralModel

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ar1_half():
    return SpectralModel.ar1(0.5)


@pytest.fixture(scope="session")
def ma1():
    return SpectralModel.ma1()


@pytest.fixture(scope="session")
def white():
    return SpectralModel.white()


@pytest.fixture(scope="session")
def power_law_075():
    return SpectralModel.power_law(0.75)


def ar1_toeplitz(alpha, n):
    """Covariance matrix of a unit-variance AR(1) on ``n`` consecutive times."""
    idx = np.arange(n)
    return alpha ** np.abs(idx[:, None] - idx[None, :])


def random_spd(rng, n, jitter=0.1):
    a = rng.standard_normal((n, n))
    return a @ a.T / n + jitter * np.eye(n)


# acceptance criteria report one summary line each at the end of the run
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (passed, detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
