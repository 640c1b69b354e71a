"""The seven-pixel Gaussian experiment: simulate, reconstruct, compare."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from petfisher.simulation import (
    DEFAULT_SEED,
    ComparisonReport,
    MonteCarloResult,
    Scenario,
    compare_theoretical_empirical,
    paper_scenario,
    run_monte_carlo,
    theoretical_report,
)
from petfisher.uncertainty import UncertaintyReport, noise_to_signal


@dataclass
class PaperRun:
    sigma: float
    scenario: Scenario
    mc: MonteCarloResult
    report: UncertaintyReport
    comparison: ComparisonReport
    timings: dict = field(default_factory=dict)

    @property
    def nts_minor(self) -> dict:
        return {k: noise_to_signal(se, self.scenario.true_lambda, self.scenario.T).nts
                for k, se in self.report.se_minor.items()}

    def three_point_gap(self) -> np.ndarray:
        """Relative underestimate ``1 - se_3pt / se_full`` per pixel."""
        return 1.0 - self.report.se_minor[3] / self.report.se_full


def run_paper_experiment(sigma, runs=10000, seed=DEFAULT_SEED, iterations=200,
                         init_mode="true_tumor", threads=None, average_fisher=False) -> PaperRun:
    t0 = time.perf_counter()
    sc = paper_scenario(sigma, runs_seed=seed, iterations=iterations, init_mode=init_mode)
    mc = run_monte_carlo(sc, runs, threads=threads)
    t1 = time.perf_counter()
    report = theoretical_report(sc, mc, minors=(1, 3), average=average_fisher)
    comparison = compare_theoretical_empirical(mc, report)
    t2 = time.perf_counter()
    return PaperRun(float(sigma), sc, mc, report, comparison,
                    timings={"monte_carlo_s": t1 - t0, "uncertainty_s": t2 - t1})
