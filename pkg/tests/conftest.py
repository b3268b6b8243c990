import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_complex(rng, n, m=None, scale=1.0):
    m = n if m is None else m
    M = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    return scale * M / np.linalg.norm(M, 2)


def random_skew(rng, n, scale=1.0):
    M = random_complex(rng, n)
    M = 0.5 * (M - M.conj().T)
    return scale * M / np.linalg.norm(M, 2)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
