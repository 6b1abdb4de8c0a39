import numpy as np
import pytest

from cdsysid.dynamics import ControllerParams
from cdsysid.modal import generate_synthetic_response

CASE_STUDY = dict(lambda_bar_hz=176.0, mu=1.0, a_hz=700.0, tau_d_s=900e-6, fs_hz=10_000.0)

ACCEPTANCE_LINES = []


def case_params(sigma, **overrides):
    return ControllerParams.from_sigma(sigma, **(CASE_STUDY | overrides))


@pytest.fixture(scope="session")
def model8():
    return generate_synthetic_response(8, 8, 195.0, 5.0, seed=3)


@pytest.fixture(scope="session")
def params8(model8):
    return case_params(model8.sigma)


@pytest.fixture(scope="session")
def model165():
    return generate_synthetic_response(165, 165, 195.0, 0.02, seed=1)


@pytest.fixture(scope="session")
def params165(model165):
    return case_params(model165.sigma)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
