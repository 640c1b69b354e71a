import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from petfisher import SystemMatrix, build_gaussian_system_matrix, forward_project, validate_system_matrix
from petfisher.errors import InvalidArgumentError

from conftest import TUMOR, random_stochastic


def test_single_cell_matrix_takes_all_mass():
    assert build_gaussian_system_matrix(1, 1, 1.0).p.tolist() == [[1.0]]


@pytest.mark.parametrize("sigma", [1.0, 1.5])
def test_paper_matrices_are_row_stochastic_and_diagonally_dominant(sigma):
    p = build_gaussian_system_matrix(7, 7, sigma).p
    assert np.max(np.abs(p.sum(axis=1) - 1)) < 1e-12
    assert np.all((p >= 0) & (p <= 1))
    assert np.all(np.argmax(p, axis=1) == np.arange(7))


def test_interior_entry_matches_erf():
    # Phi(2/3) - Phi(-2/3) = erf((2/3)/sqrt(2)), evaluated with math.erf
    p = build_gaussian_system_matrix(7, 7, 1.5).p
    assert p[3, 3] == pytest.approx(0.4950149249061542, rel=1e-15, abs=1e-15)
    assert p[3, 3] == pytest.approx(math.erf((2 / 3) / math.sqrt(2)), abs=1e-15)


def test_edge_cells_absorb_tails():
    p = build_gaussian_system_matrix(7, 7, 1.0).p
    Phi = lambda x: 0.5 * (1 + math.erf(x / math.sqrt(2)))  # noqa: E731
    assert p[0, 0] == pytest.approx(Phi(0.5), abs=1e-15)
    assert p[6, 6] == pytest.approx(1 - Phi(-0.5 * math.sqrt(7)), abs=1e-15)


def test_rectangular_matrix():
    p = build_gaussian_system_matrix(3, 5, 0.8).p
    assert p.shape == (3, 5)
    assert np.allclose(p.sum(axis=1), 1, atol=1e-12)


def test_larger_b_sharpens_the_diagonal():
    sigma = 1.2
    p = build_gaussian_system_matrix(9, 9, sigma).p
    Phi = lambda x: 0.5 * (1 + math.erf(x / math.sqrt(2)))  # noqa: E731
    for b in range(2, 9):
        unsharpened = Phi(0.5 / sigma) - Phi(-0.5 / sigma)
        assert p[b - 1, b - 1] > unsharpened


@pytest.mark.parametrize("args", [(7, 7, 0.0), (7, 7, -1.0), (0, 7, 1.0), (7, 0, 1.0), (2.5, 3, 1.0)])
def test_invalid_build_arguments(args):
    with pytest.raises(InvalidArgumentError):
        build_gaussian_system_matrix(*args)


def test_identity_projection():
    assert forward_project(np.eye(3), [1.0, 2.0, 3.0]).tolist() == [1.0, 2.0, 3.0]


def test_projection_matches_double_loop(paper_p1):
    p = paper_p1.p
    expected = np.zeros(7)
    for d in range(7):
        for b in range(7):
            expected[d] += p[b, d] * TUMOR[b]
    np.testing.assert_allclose(forward_project(paper_p1, TUMOR), expected, rtol=1e-14)


def test_projection_dimension_mismatch(paper_p1):
    with pytest.raises(InvalidArgumentError):
        forward_project(paper_p1, [1.0, 2.0])
    with pytest.raises(InvalidArgumentError):
        forward_project(paper_p1, -TUMOR)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    a=st.floats(0, 10),
    b=st.floats(0, 10),
)
def test_projection_linearity_and_mass(seed, a, b):
    rng = np.random.default_rng(seed)
    n_pix, n_det = rng.integers(1, 8, size=2)
    P = SystemMatrix(random_stochastic(rng, n_pix, n_det))
    l1, l2 = rng.uniform(0, 5, n_pix), rng.uniform(0, 5, n_pix)
    lhs = forward_project(P, a * l1 + b * l2)
    rhs = a * forward_project(P, l1) + b * forward_project(P, l2)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
    assert forward_project(P, l1).sum() == pytest.approx(l1.sum(), rel=1e-10)


def test_validation_passes_for_stochastic_rows(paper_p1):
    assert validate_system_matrix(paper_p1).ok


def test_validation_reports_short_row():
    p = np.eye(3)
    p[1] = [0.0, 0.9, 0.0]
    report = validate_system_matrix(p)
    assert not report.ok
    assert report.worst_row() == 2
    assert report.row_sum_deviation[1] == pytest.approx(-0.1)


def test_validation_reports_negative_entry():
    p = np.array([[1.01, -0.01], [0.5, 0.5]])
    report = validate_system_matrix(p)
    assert not report.ok
    assert report.negative_entries == [(1, 2)]
    assert report.entries_above_one == [(1, 1)]


def test_validation_reports_zero_row():
    report = validate_system_matrix([[0.0, 0.0], [0.5, 0.5]])
    assert report.zero_rows == [1]


def test_system_matrix_rejects_invalid_and_is_immutable():
    with pytest.raises(InvalidArgumentError):
        SystemMatrix([[0.5, 0.4]])
    P = SystemMatrix([[0.5, 0.5]])
    with pytest.raises(ValueError):
        P.p[0, 0] = 1.0
