import numpy as np
import pytest

from petfisher import build_gaussian_system_matrix
from petfisher.kernels import available_backends, get_backend

TUMOR = np.array([1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0])


@pytest.fixture(scope="session")
def paper_p1():
    return build_gaussian_system_matrix(7, 7, 1.0)


@pytest.fixture(scope="session")
def paper_p15():
    return build_gaussian_system_matrix(7, 7, 1.5)


@pytest.fixture(params=available_backends())
def backend(request):
    return get_backend(request.param)


def random_stochastic(rng, n_pix, n_det, power=3):
    p = rng.random((n_pix, n_det)) ** power
    return p / p.sum(axis=1, keepdims=True)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
