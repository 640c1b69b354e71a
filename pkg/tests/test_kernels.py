import numpy as np
import pytest

from petfisher import kernels
from petfisher.kernels import available_backends, get_backend

from conftest import random_stochastic


def _problem(seed, n_pix=6, n_det=9):
    rng = np.random.default_rng(seed)
    p = random_stochastic(rng, n_pix, n_det)
    lam = rng.uniform(0.5, 10, n_pix)
    counts = rng.poisson(lam @ p * 20).astype(float)
    return p, counts, lam


def test_backend_selected_at_import():
    assert kernels.BACKEND in available_backends()
    with pytest.raises(ValueError):
        get_backend("fortran")


@pytest.mark.parametrize("seed", range(5))
def test_backends_agree(seed):
    p, counts, lam = _problem(seed)
    results = [get_backend(name).em_iterate(p, counts, lam, 100, 0.0) for name in available_backends()]
    for other in results[1:]:
        np.testing.assert_allclose(other[0], results[0][0], rtol=1e-12)
        assert other[1] == results[0][1]
    grams = [get_backend(name).fisher_gram(p, counts) for name in available_backends()]
    for g in grams[1:]:
        np.testing.assert_allclose(g, grams[0], rtol=1e-12)


def test_batch_equals_single(backend):
    p, _, _ = _problem(0)
    rng = np.random.default_rng(3)
    counts = rng.poisson(20, size=(4, p.shape[1])).astype(float)
    lam0 = np.full((4, p.shape[0]), 5.0)
    lam, its, conv, res, bad = backend.em_iterate_batch(p, counts, lam0, 50, 0.0)
    for r in range(4):
        single = backend.em_iterate(p, counts[r], lam0[r], 50, 0.0)
        np.testing.assert_array_equal(lam[r], single[0])
        assert its[r] == single[1] and res[r] == single[3] and bad[r] == -1


def test_degenerate_detector_reported(backend):
    p = np.array([[1.0, 0.0], [1.0, 0.0]])
    lam, its, conv, res, bad = backend.em_iterate(p, np.array([4.0, 2.0]), np.ones(2), 10, 0.0)
    assert bad == 1 and its == 0
    np.testing.assert_array_equal(lam, np.ones(2))


def test_zero_counts_on_zero_mass_are_skipped(backend):
    p = np.array([[1.0, 0.0], [1.0, 0.0]])
    lam, its, conv, res, bad = backend.em_iterate(p, np.array([4.0, 0.0]), np.ones(2), 10, 0.0)
    assert bad == -1
    assert lam.sum() == pytest.approx(4.0)


def test_tolerance_stops_before_update(backend):
    p = np.eye(2)
    counts = np.array([3.0, 5.0])
    lam, its, conv, res, bad = backend.em_iterate(p, counts, counts.copy(), 10, 1e-12)
    assert conv and its == 0 and res == 0.0


def test_gram_is_symmetric(backend):
    p, counts, _ = _problem(1)
    G = backend.fisher_gram(p, counts)
    np.testing.assert_array_equal(G, G.T)
