import numpy as np
import pytest

from petfisher import SystemMatrix
from petfisher.errors import InvalidArgumentError
from petfisher.simulation import (
    Scenario,
    compare_theoretical_empirical,
    composite_matrix,
    format_table,
    paper_scenario,
    run_monte_carlo,
    run_rng,
    sample_counts,
    summarize,
    theoretical_report,
)
from petfisher.uncertainty import build_report


def test_zero_mean_gives_zero_counts():
    counts = sample_counts([[1.0, 0.0], [1.0, 0.0]], [3.0, 1.0], 10.0, np.random.default_rng(0))
    assert counts[1] == 0


def test_poisson_mean_and_variance(paper_p1):
    T = 100.0
    mean = T * np.array([1, 2, 3, 4, 3, 2, 1.0]) @ paper_p1.p
    draws = np.array([sample_counts(paper_p1, [1, 2, 3, 4, 3, 2, 1.0], T, run_rng(7, i)) for i in range(10000)])
    se = np.sqrt(mean / 10000)
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 4 * se)
    # variance of the sample variance of a Poisson is about (mu + 2 mu^2) / n
    var_se = np.sqrt((mean + 2 * mean**2) / 10000)
    assert np.all(np.abs(draws.var(axis=0, ddof=1) - mean) < 4 * var_se)


def test_run_streams_depend_only_on_index():
    a = run_rng(5, 3).poisson(10, 4)
    b = run_rng(5, 3).poisson(10, 4)
    c = run_rng(5, 4).poisson(10, 4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.fixture(scope="module")
def small_mc():
    sc = paper_scenario(1.0, runs_seed=3)
    return sc, run_monte_carlo(sc, 700, threads=2)


def test_monte_carlo_is_deterministic(small_mc):
    sc, mc = small_mc
    again = run_monte_carlo(sc, 700, threads=5)
    np.testing.assert_array_equal(mc.lam_counts, again.lam_counts)
    np.testing.assert_array_equal(mc.empirical_cov, again.empirical_cov)
    assert mc.excluded == ()


def test_prefix_of_runs_is_stable(small_mc):
    sc, mc = small_mc
    fewer = run_monte_carlo(sc, 300)
    np.testing.assert_array_equal(fewer.lam_counts, mc.lam_counts[:300])


def test_summary_is_order_invariant(small_mc):
    _, mc = small_mc
    perm = np.random.default_rng(0).permutation(mc.n_runs)
    shuffled = summarize(mc.counts[perm], mc.lam_counts[perm], mc.iterations[perm], (), mc.T)
    np.testing.assert_allclose(shuffled.empirical_cov, mc.empirical_cov, rtol=1e-12)


def test_identical_runs_have_zero_covariance():
    lam = np.array([[3.0, 4.0], [3.0, 4.0]])
    res = summarize(np.zeros((2, 2)), lam, np.array([1, 1]), (), 1.0)
    np.testing.assert_array_equal(res.empirical_cov, np.zeros((2, 2)))


def test_scalar_poisson_empirical_se():
    # per-unit MLE is n/T with n ~ Poisson(kT): sd = sqrt(k / T)
    k, T, runs = 50.0, 4.0, 20000
    sc = Scenario(SystemMatrix([[1.0]]), [k], T, iterations=1, seed=1)
    mc = run_monte_carlo(sc, runs)
    exact = np.sqrt(k * T) / T
    assert abs(mc.empirical_se[0] / exact - 1) <= 4 / np.sqrt(2 * runs)


def test_sigma1_agreement(small_mc):
    sc, mc = small_mc
    report = theoretical_report(sc, mc)
    comp = compare_theoretical_empirical(mc, report)
    # 700 runs: loose bounds, the full-size check lives in the acceptance suite
    assert comp.max_corr_gap < 0.1
    assert comp.max_se_rel_gap < 0.2
    assert comp.composite[1, 0] == pytest.approx(mc.empirical_corr[1, 0])
    assert comp.composite[0, 1] == pytest.approx(report.correlation[0, 1])


def test_identical_inputs_give_zero_gaps(small_mc):
    sc, mc = small_mc
    report = theoretical_report(sc, mc)
    report.se_full = mc.empirical_se.copy()
    report.correlation = mc.empirical_corr.copy()
    comp = compare_theoretical_empirical(mc, report)
    assert comp.max_corr_gap == 0 and comp.max_se_rel_gap == 0 and not comp.warnings


def test_scale_mismatch_warns(small_mc):
    sc, mc = small_mc
    report = theoretical_report(sc, mc)
    report.se_full = mc.empirical_se / sc.T
    with pytest.warns(RuntimeWarning, match="close to T"):
        comp = compare_theoretical_empirical(mc, report)
    assert comp.warnings


def test_gaps_shrink_with_more_runs(paper_p1):
    sc = paper_scenario(1.0, runs_seed=9)
    g = sc.expected_counts
    I = (paper_p1.p / g) @ paper_p1.p.T
    report = build_report(I, sc.true_lambda * sc.T, T=sc.T)
    small = compare_theoretical_empirical(run_monte_carlo(sc, 1000), report)
    large = compare_theoretical_empirical(run_monte_carlo(sc, 10000), report)
    assert large.mean_corr_gap < small.mean_corr_gap
    assert large.mean_se_rel_gap < small.mean_se_rel_gap


def test_uniform_init_mode(paper_p1):
    sc = paper_scenario(1.0, runs_seed=2, init_mode="uniform")
    mc = run_monte_carlo(sc, 50)
    assert mc.mle_samples.shape == (50, 7)
    assert np.all(mc.iterations == 200)


def test_degenerate_runs_are_excluded(monkeypatch):
    # detector 2 carries no model mass; inject counts there for some runs
    import petfisher.simulation as sim

    def fake_counts(P, truth, T, rng):
        return np.array([5.0, 1.0 if rng.random() < 0.3 else 0.0])

    monkeypatch.setattr(sim, "sample_counts", fake_counts)
    sc = Scenario(SystemMatrix([[1.0, 0.0], [1.0, 0.0]]), [1.0, 1.0], 5.0, iterations=10)
    mc = run_monte_carlo(sc, 40)
    assert 0 < len(mc.excluded) < 40
    assert np.all(mc.counts[list(mc.excluded), 1] == 1)
    assert mc.mle_samples.shape == (40 - len(mc.excluded), 2)
    assert np.all(np.isfinite(mc.empirical_cov))


def test_scenario_validation(paper_p1):
    with pytest.raises(InvalidArgumentError):
        Scenario(paper_p1, np.ones(7), 0.0)
    with pytest.raises(InvalidArgumentError):
        Scenario(paper_p1, np.ones(7), 1.0, init_mode="random")
    with pytest.raises(InvalidArgumentError):
        run_monte_carlo(Scenario(paper_p1, np.ones(7), 1.0), 1)


def test_composite_and_table():
    emp = np.array([[1.0, -0.76], [-0.76, 1.0]])
    theo = np.array([[1.0, -0.75], [-0.75, 1.0]])
    comp = composite_matrix(emp, theo)
    assert comp.tolist() == [[1.0, -0.75], [-0.76, 1.0]]
    assert format_table([[1.0, -0.004]]) == "  1.00   0.00"
