import numpy as np
import pytest

from pairjump import kernels
from pairjump.model import SpinStarModel, build_spin_star, initial_state


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spin1():
    m = SpinStarModel(1, 0.5)
    return m, build_spin_star(m), initial_state(m)


def random_state(rng, dim, scale=1.0):
    return scale * (rng.standard_normal(dim) + 1j * rng.standard_normal(dim))


def random_operator(rng, dim):
    return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
