import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE = []


def random_kernel(rng, n, sparsity=0.0):
    """Row-stochastic matrix with strictly positive diagonal and optional zeros."""
    a = rng.random((n, n))
    if sparsity:
        a[rng.random((n, n)) < sparsity] = 0.0
    a[np.arange(n), np.arange(n)] += 0.1
    return a / a.sum(axis=1, keepdims=True)


def random_measure(rng, n):
    w = rng.random(n) + 0.05
    return w / w.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance():
    """Record a criterion outcome; shown in the terminal summary."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
