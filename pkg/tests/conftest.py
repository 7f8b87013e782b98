import numpy as np
import pytest

from tslyap.fixtures import fixture
from tslyap.sdp import validate_certificate


@pytest.fixture(scope="session")
def ex2():
    return fixture("example2", a=-8.0, b=100.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def assert_sound(problem, verdict):
    """Every Feasible verdict must carry a certificate that passes the dense check."""
    if verdict.feasible:
        report = validate_certificate(problem, verdict.certificate)
        assert report.passed, report.worst
