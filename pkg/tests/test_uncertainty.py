import numpy as np
import pytest

from petfisher import build_report, correlation_matrix, fisher_information, invert_fisher, minor_inversion_se, noise_to_signal
from petfisher.errors import InvalidArgumentError, SingularFisherError
from petfisher.uncertainty import minor_window

from conftest import TUMOR


def _expected_information(P, T):
    # information at the truth with counts equal to their expectation
    g = T * TUMOR @ P.p
    return (P.p / g) @ P.p.T


@pytest.fixture(scope="module", params=[(1.0, 100.0), (1.5, 1000.0)], ids=["sigma1", "sigma1.5"])
def paper_info(request):
    from petfisher import build_gaussian_system_matrix
    sigma, T = request.param
    return _expected_information(build_gaussian_system_matrix(7, 7, sigma), T)


def test_scalar_inverse():
    est = invert_fisher([[1 / 9]])
    assert est.C[0, 0] == pytest.approx(9.0, rel=1e-14)
    assert est.se[0] == pytest.approx(3.0, rel=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_round_trip(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(6, 6))
    I = A @ A.T + 0.1 * np.eye(6)
    C = invert_fisher(I).C
    assert np.max(np.abs(C @ I - np.eye(6))) < 1e-8
    np.testing.assert_array_equal(C, C.T)


def test_singular_raises_with_condition():
    I = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularFisherError) as err:
        invert_fisher(I)
    assert err.value.condition > 1e12
    assert "condition estimate" in str(err.value)


def test_duplicate_pixels_give_singular_information():
    F = fisher_information([[0.7, 0.3], [0.7, 0.3]], [4.0, 6.0], [7, 3])
    with pytest.raises(SingularFisherError):
        invert_fisher(F)


def test_one_point_closed_form(paper_info):
    est = minor_inversion_se(paper_info, 1)
    np.testing.assert_array_equal(est.se, 1 / np.sqrt(np.diag(paper_info)))


def test_full_window_equals_full_inverse(paper_info):
    full = invert_fisher(paper_info).se
    np.testing.assert_allclose(minor_inversion_se(paper_info, 7).se, full, rtol=1e-10)


def test_minor_ordering(paper_info):
    se1 = minor_inversion_se(paper_info, 1).se
    se3 = minor_inversion_se(paper_info, 3).se
    se5 = minor_inversion_se(paper_info, 5).se
    full = invert_fisher(paper_info).se
    assert np.all(se1 <= se3) and np.all(se3 <= full) and np.all(se5 <= full * (1 + 1e-12))


def test_windows_clamp_at_edges():
    assert minor_window(0, 3, 7) == (0, 3)
    assert minor_window(6, 3, 7) == (4, 7)
    assert minor_window(3, 3, 7) == (2, 5)
    assert minor_window(1, 5, 7) == (0, 5)


def test_edge_minor_uses_clamped_window(paper_info):
    sub = np.linalg.inv(paper_info[:3, :3])
    assert minor_inversion_se(paper_info, 3).se[0] == pytest.approx(np.sqrt(sub[0, 0]), rel=1e-12)


@pytest.mark.parametrize("k", [0, 2, 9])
def test_bad_minor_size(paper_info, k):
    with pytest.raises(InvalidArgumentError):
        minor_inversion_se(paper_info, k)


def test_singular_minor_is_marked_per_pixel():
    I = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 2.0]])
    est = minor_inversion_se(I, 1)
    assert not est.failed
    I[2, 2] = 0.0
    est = minor_inversion_se(I, 1)
    assert est.failed == (3,) and np.isnan(est.se[2]) and np.isfinite(est.se[0])


def test_correlation_basics():
    np.testing.assert_array_equal(correlation_matrix(np.diag([4.0, 9.0])), np.eye(2))
    R = correlation_matrix(np.array([[4.0, -2.0], [-2.0, 4.0]]))
    assert R[0, 1] == pytest.approx(-0.5)
    with pytest.raises(InvalidArgumentError, match="pixel 2"):
        correlation_matrix(np.diag([1.0, 0.0]))


def test_alternating_signs_and_decay(paper_info):
    R = correlation_matrix(invert_fisher(paper_info).C)
    n = len(R)
    for b in range(n):
        for j in range(n):
            assert np.sign(R[b, j]) == (-1) ** abs(b - j)
        right = np.abs(R[b, b:])
        left = np.abs(R[b, : b + 1][::-1])
        assert np.all(np.diff(right) < 0) and np.all(np.diff(left) < 0)


def test_noise_to_signal():
    out = noise_to_signal([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 1.0)
    np.testing.assert_array_equal(out.nts, [1.0, 1.0, 1.0])
    out = noise_to_signal([0.4, 1.0], [2.0, 0.0], 100.0)
    assert out.nts[0] == pytest.approx(2.0)
    assert np.isnan(out.nts[1]) and not out.defined[1]
    with pytest.raises(InvalidArgumentError):
        noise_to_signal([1.0], [1.0], 0.0)


def test_report_scales_to_per_unit():
    # scalar Poisson at exposure T: estimate k counts, per-unit SE sqrt(k)/T
    k, T = 400.0, 100.0
    F = fisher_information([[1.0]], [k], [k])
    r = build_report(F, [k], T=T, minors=(1,))
    assert r.lambda_hat[0] == pytest.approx(k / T)
    assert r.se_full[0] == pytest.approx(np.sqrt(k) / T)
    assert r.se_minor[1][0] == pytest.approx(np.sqrt(k) / T)
    assert r.nts[0] == pytest.approx(np.sqrt(T) * (np.sqrt(k) / T) / (k / T))
    d = r.to_dict()
    assert d["T"] == T and d["se_minor"]["1"] == [pytest.approx(0.2)]
