"""Poisson data generation and the repeated simulate-and-reconstruct protocol.

Each Monte-Carlo run draws its counts from its own generator, seeded from
``(seed, run index)``, so results do not depend on thread count or run order.
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from petfisher import kernels
from petfisher.core import SystemMatrix, as_charge, as_system_matrix, build_gaussian_system_matrix
from petfisher.em import DEFAULT_ITERATIONS
from petfisher.errors import InvalidArgumentError
from petfisher.fisher import FisherMatrix, fisher_information
from petfisher.uncertainty import UncertaintyReport, build_report, correlation_matrix

PAPER_TUMOR = (1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0)
PAPER_EXPOSURE = {1.0: 100.0, 1.5: 1000.0}
DEFAULT_SEED = 42
CHUNK_SIZE = 256  # fixed so results are identical for any thread count
INIT_MODES = ("uniform", "true_tumor")


@dataclass(frozen=True)
class Scenario:
    P: SystemMatrix
    true_lambda: np.ndarray  # per unit exposure
    T: float
    iterations: int = DEFAULT_ITERATIONS
    stop_tolerance: float = 0.0
    seed: int = DEFAULT_SEED
    init_mode: str = "true_tumor"

    def __post_init__(self):
        P = as_system_matrix(self.P)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "true_lambda", as_charge(self.true_lambda, P.n_pixels))
        if not self.T > 0:
            raise InvalidArgumentError(f"exposure T must be positive, got {self.T}")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise InvalidArgumentError(f"iterations must be a positive integer, got {self.iterations}")
        if self.init_mode not in INIT_MODES:
            raise InvalidArgumentError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")
        if self.init_mode == "true_tumor" and np.any(self.true_lambda <= 0):
            raise InvalidArgumentError("true_tumor initialization needs a strictly positive tumor")

    @property
    def expected_counts(self) -> np.ndarray:
        return self.T * (self.true_lambda @ self.P.p)


def paper_scenario(sigma, T=None, runs_seed=DEFAULT_SEED, iterations=DEFAULT_ITERATIONS,
                   init_mode="true_tumor") -> Scenario:
    """Seven-pixel Gaussian scenario; ``T`` defaults to 100 for sigma=1 and 1000 for sigma=1.5."""
    if T is None:
        try:
            T = PAPER_EXPOSURE[float(sigma)]
        except KeyError:
            raise InvalidArgumentError(f"no default exposure for sigma={sigma}; pass T") from None
    P = build_gaussian_system_matrix(7, 7, sigma)
    return Scenario(P, np.array(PAPER_TUMOR), float(T), iterations=iterations,
                    seed=runs_seed, init_mode=init_mode)


def run_rng(seed, run_index) -> np.random.Generator:
    """Generator for one run, independent of every other run index."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(run_index),)))


def sample_counts(P, true_lambda, T, rng) -> np.ndarray:
    """Independent Poisson counts with means ``T * g``."""
    P = as_system_matrix(P)
    g = as_charge(true_lambda, P.n_pixels) @ P.p
    return rng.poisson(T * g).astype(np.float64)


@dataclass
class MonteCarloResult:
    n_runs: int
    T: float
    counts: np.ndarray  # (n_runs, n_detectors), every run
    lam_counts: np.ndarray  # (n_runs, n_pixels), counts scale; NaN rows for excluded runs
    iterations: np.ndarray
    excluded: tuple
    empirical_cov: np.ndarray
    empirical_corr: np.ndarray
    empirical_se: np.ndarray

    @property
    def included(self) -> np.ndarray:
        mask = np.ones(self.n_runs, dtype=bool)
        mask[list(self.excluded)] = False
        return mask

    @property
    def mle_samples(self) -> np.ndarray:
        """Per-unit-exposure estimates of the included runs."""
        return self.lam_counts[self.included] / self.T


def _initial(sc, counts):
    if sc.init_mode == "true_tumor":
        return np.tile(sc.true_lambda * sc.T, (counts.shape[0], 1))
    totals = counts.sum(axis=1, keepdims=True)
    # all-zero count vectors get a unit start; EM then maps them to zero
    totals[totals <= 0] = 1.0
    return np.repeat(totals / sc.P.n_pixels, sc.P.n_pixels, axis=1)


def _run_chunk(sc, start, stop):
    counts = np.array([sample_counts(sc.P, sc.true_lambda, sc.T, run_rng(sc.seed, i))
                       for i in range(start, stop)])
    lam, its, _, _, bad = kernels.em_iterate_batch(
        sc.P.p, counts, _initial(sc, counts), int(sc.iterations), float(sc.stop_tolerance)
    )
    return counts, lam, its, bad


def run_monte_carlo(sc: Scenario, n_runs, threads=None) -> MonteCarloResult:
    """Simulate ``n_runs`` data sets, reconstruct each, and summarize the spread.

    Runs whose counts hit a detector with zero model mass are excluded and
    listed in ``excluded``. Sample covariance uses the ``n - 1`` denominator.
    """
    if int(n_runs) != n_runs or n_runs < 2:
        raise InvalidArgumentError(f"n_runs must be an integer >= 2, got {n_runs}")
    n_runs = int(n_runs)
    threads = threads or os.cpu_count() or 1
    bounds = [(s, min(s + CHUNK_SIZE, n_runs)) for s in range(0, n_runs, CHUNK_SIZE)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda ab: _run_chunk(sc, *ab), bounds))
    counts = np.concatenate([c for c, _, _, _ in parts])
    lam = np.concatenate([l for _, l, _, _ in parts])
    its = np.concatenate([i for _, _, i, _ in parts])
    bad = np.concatenate([b for _, _, _, b in parts])
    excluded = tuple(int(i) for i in np.flatnonzero(bad >= 0))
    lam[list(excluded)] = np.nan
    if len(excluded) > n_runs - 2:
        raise InvalidArgumentError(f"{len(excluded)} of {n_runs} runs were degenerate")
    return summarize(counts, lam, its, excluded, sc.T)


def summarize(counts, lam_counts, iterations, excluded, T) -> MonteCarloResult:
    keep = np.ones(len(lam_counts), dtype=bool)
    keep[list(excluded)] = False
    samples = lam_counts[keep] / T
    cov = np.atleast_2d(np.cov(samples, rowvar=False, ddof=1))
    se = np.sqrt(np.diag(cov))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov / np.outer(se, se)
    np.fill_diagonal(corr, 1.0)
    return MonteCarloResult(
        n_runs=len(lam_counts), T=float(T), counts=counts, lam_counts=lam_counts,
        iterations=np.asarray(iterations), excluded=tuple(excluded),
        empirical_cov=cov, empirical_corr=corr, empirical_se=se,
    )


def designated_run(mc: MonteCarloResult, run=0) -> int:
    """First included run at or after ``run``."""
    for i in range(run, mc.n_runs):
        if i not in mc.excluded:
            return i
    raise InvalidArgumentError("no included run available")


def theoretical_fisher(sc: Scenario, mc: MonteCarloResult, run=0, average=False) -> FisherMatrix:
    """Observed information from one run's counts and estimate.

    ``average=True`` averages the matrices over every included run instead;
    useful for stability studies, not for reproducing single-run numbers.
    """
    if not average:
        i = designated_run(mc, run)
        return fisher_information(sc.P, mc.lam_counts[i], mc.counts[i])
    idx = np.flatnonzero(mc.included)
    mats = [fisher_information(sc.P, mc.lam_counts[i], mc.counts[i]).I for i in idx]
    i = idx[0]
    return FisherMatrix(I=np.mean(mats, axis=0), evaluated_at=mc.lam_counts[i], counts_ref=mc.counts[i])


def theoretical_report(sc: Scenario, mc: MonteCarloResult, run=0, minors=(1, 3),
                       average=False, signal="true") -> UncertaintyReport:
    """Uncertainty report for the designated run.

    ``signal="true"`` divides noise-to-signal by the true tumor charge,
    ``"estimate"`` by the run's own estimate.
    """
    fisher = theoretical_fisher(sc, mc, run, average)
    i = designated_run(mc, run)
    sig = sc.true_lambda if signal == "true" else None
    return build_report(fisher, mc.lam_counts[i], T=sc.T, minors=minors,
                        iterations=int(mc.iterations[i]), signal=sig)


@dataclass
class ComparisonReport:
    se_abs_gap: np.ndarray
    se_rel_gap: np.ndarray
    corr_gap: np.ndarray
    composite: np.ndarray
    warnings: list

    @property
    def max_se_rel_gap(self) -> float:
        return float(np.max(self.se_rel_gap))

    @property
    def mean_se_rel_gap(self) -> float:
        return float(np.mean(self.se_rel_gap))

    @property
    def max_corr_gap(self) -> float:
        return float(np.max(self.corr_gap))

    @property
    def mean_corr_gap(self) -> float:
        n = self.corr_gap.shape[0]
        off = ~np.eye(n, dtype=bool)
        return float(np.mean(self.corr_gap[off])) if n > 1 else 0.0

    def to_dict(self) -> dict:
        return {
            "se_abs_gap": self.se_abs_gap.tolist(),
            "se_rel_gap": self.se_rel_gap.tolist(),
            "max_se_rel_gap": self.max_se_rel_gap,
            "mean_se_rel_gap": self.mean_se_rel_gap,
            "max_corr_gap": self.max_corr_gap,
            "mean_corr_gap": self.mean_corr_gap,
            "composite": self.composite.tolist(),
            "warnings": list(self.warnings),
        }


def composite_matrix(empirical_corr, theoretical_corr) -> np.ndarray:
    """Empirical correlations below the diagonal, theoretical above, ones on it."""
    out = np.tril(empirical_corr, -1) + np.triu(theoretical_corr, 1)
    np.fill_diagonal(out, 1.0)
    return out


def compare_theoretical_empirical(mc: MonteCarloResult, report: UncertaintyReport) -> ComparisonReport:
    """Entrywise gaps between Monte-Carlo and information-based uncertainty.

    Both sides must be per unit exposure. A near-constant SE ratio close to
    ``T`` or ``sqrt(T)`` (or their inverses) triggers a calibration warning.
    """
    emp_se, theo_se = mc.empirical_se, report.se_full
    if emp_se.shape != theo_se.shape:
        raise InvalidArgumentError("empirical and theoretical sizes differ")
    abs_gap = np.abs(emp_se - theo_se)
    rel_gap = abs_gap / theo_se
    corr_gap = np.abs(mc.empirical_corr - report.correlation)
    notes = []
    T = report.T
    if T != 1:
        ratio = emp_se / theo_se
        for name, f in (("T", T), ("sqrt(T)", np.sqrt(T)), ("1/T", 1 / T), ("1/sqrt(T)", 1 / np.sqrt(T))):
            if np.all(np.abs(ratio / f - 1) < 0.25):
                msg = f"empirical/theoretical SE ratio is close to {name}; check scale conventions"
                notes.append(msg)
                warnings.warn(msg, RuntimeWarning, stacklevel=2)
                break
    return ComparisonReport(
        se_abs_gap=abs_gap, se_rel_gap=rel_gap, corr_gap=corr_gap,
        composite=composite_matrix(mc.empirical_corr, report.correlation), warnings=notes,
    )


def format_table(matrix, digits=2) -> str:
    """Whitespace-aligned table of a matrix rounded to ``digits`` decimals."""
    rows = []
    for row in np.asarray(matrix):
        cells = []
        for x in row:
            s = f"{x:.{digits}f}"
            if s.startswith("-") and float(s) == 0:
                s = s[1:]
            cells.append(s.rjust(digits + 4))
        rows.append(" ".join(cells))
    return "\n".join(rows)
