"""Shepp-Vardi EM reconstruction for Poisson emission data.

All reconstructions run at the counts scale: charges are expected counts
over the full exposure, the same units as the observed counts. Divide by the
exposure ``T`` to report per-unit charges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from petfisher import kernels
from petfisher.core import as_charge, as_counts, as_system_matrix
from petfisher.errors import DegenerateSupportError, InvalidArgumentError

DEFAULT_ITERATIONS = 200


@dataclass(frozen=True)
class EmConfig:
    """Settings for :func:`run_em`.

    ``init=None`` starts from a uniform vector carrying the total observed
    counts. ``stop_tolerance`` bounds the max-norm of the MLE-condition
    residual; the default of zero runs the full iteration budget.
    """

    max_iterations: int = DEFAULT_ITERATIONS
    init: np.ndarray | None = None
    stop_tolerance: float = 0.0
    record_trajectory: bool = False

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise InvalidArgumentError(
                f"max_iterations must be a positive integer, got {self.max_iterations}"
            )
        if not self.stop_tolerance >= 0:
            raise InvalidArgumentError(
                f"stop_tolerance must be nonnegative, got {self.stop_tolerance}"
            )
        if self.init is not None:
            init = as_charge(self.init)
            if np.any(init <= 0):
                raise InvalidArgumentError("EM initialization must be strictly positive")
            object.__setattr__(self, "init", init)


@dataclass
class EmState:
    iteration: int
    lam: np.ndarray
    g: np.ndarray
    log_likelihood: float
    residual: float
    converged: bool
    trajectory: np.ndarray | None = None
    log_likelihood_trace: np.ndarray | None = field(default=None, repr=False)


def _check_support(g, counts):
    bad = np.flatnonzero((counts > 0) & (g <= 0))
    if bad.size:
        raise DegenerateSupportError(int(bad[0]) + 1)


def _score_terms(p, lam, counts):
    # sum_d n_d p[b, d] / g_d, skipping detectors with no counts. Works for
    # any float dtype so the finite-difference oracle can use extended
    # precision.
    g = lam @ p
    _check_support(g, counts)
    w = np.zeros_like(g)
    positive = counts > 0
    np.divide(counts, g, out=w, where=positive)
    return p @ w


def uniform_init(counts, n_pixels) -> np.ndarray:
    """Flat start carrying the total observed counts."""
    total = float(np.sum(counts))
    if total <= 0:
        raise InvalidArgumentError("no counts observed; the uniform start would be zero")
    return np.full(n_pixels, total / n_pixels)


def em_step(P, lam, counts) -> np.ndarray:
    """One multiplicative EM update ``lam_b * sum_d n_d p[b, d] / g_d``.

    Zero charges stay zero. Raises :class:`DegenerateSupportError` when a
    detector with positive counts has zero expected mass.
    """
    P = as_system_matrix(P)
    lam = as_charge(lam, P.n_pixels)
    counts = as_counts(counts, P.n_detectors)
    out, _, _, _, bad = kernels.em_iterate(P.p, counts, lam, 1, -1.0)
    if bad >= 0:
        raise DegenerateSupportError(bad + 1)
    return out


def incomplete_log_likelihood(P, lam, counts, on_degenerate="raise") -> float:
    """Poisson log-likelihood ``sum_d n_d log g_d - g_d`` without the ``log n_d!`` constant.

    Uses ``0 log 0 = 0``. Where ``n_d > 0`` but ``g_d = 0`` the likelihood is
    ``-inf``; this raises unless ``on_degenerate="inf"``.
    """
    P = as_system_matrix(P)
    lam = as_charge(lam, P.n_pixels)
    counts = as_counts(counts, P.n_detectors)
    g = lam @ P.p
    positive = counts > 0
    if np.any(positive & (g <= 0)):
        if on_degenerate == "inf":
            return -math.inf
        _check_support(g, counts)
    terms = np.where(positive, counts * np.log(np.where(positive, g, 1.0)), 0.0) - g
    return math.fsum(terms)


def score(P, lam, counts) -> np.ndarray:
    """Gradient of :func:`incomplete_log_likelihood`, ``-1 + sum_d n_d p[b, d] / g_d``."""
    P = as_system_matrix(P)
    lam = as_charge(lam, P.n_pixels)
    counts = as_counts(counts, P.n_detectors)
    return _score_terms(P.p, lam, counts) - 1.0


def run_em(P, counts, cfg: EmConfig | None = None) -> EmState:
    """Iterate :func:`em_step` until the iteration cap or the residual tolerance.

    The residual is ``max_b |sum_d n_d p[b, d] / g_d - 1|``, checked before
    each update.
    """
    P = as_system_matrix(P)
    counts = as_counts(counts, P.n_detectors)
    cfg = cfg or EmConfig()
    lam = cfg.init if cfg.init is not None else uniform_init(counts, P.n_pixels)
    lam = as_charge(lam, P.n_pixels)

    if not cfg.record_trajectory:
        lam, it, converged, residual, bad = kernels.em_iterate(
            P.p, counts, lam, int(cfg.max_iterations), float(cfg.stop_tolerance)
        )
        if bad >= 0:
            raise DegenerateSupportError(bad + 1)
        trajectory = trace = None
    else:
        iterates = [lam]
        trace = [incomplete_log_likelihood(P, lam, counts)]
        it, converged = 0, False
        while True:
            nxt, steps, converged, residual, bad = kernels.em_iterate(
                P.p, counts, lam, 1 if it < cfg.max_iterations else 0,
                float(cfg.stop_tolerance),
            )
            if bad >= 0:
                raise DegenerateSupportError(bad + 1)
            if steps == 0:
                break
            lam = nxt
            it += 1
            iterates.append(lam)
            trace.append(incomplete_log_likelihood(P, lam, counts))
        trajectory = np.array(iterates)
        trace = np.array(trace)

    return EmState(
        iteration=int(it),
        lam=lam,
        g=lam @ P.p,
        log_likelihood=incomplete_log_likelihood(P, lam, counts),
        residual=float(residual),
        converged=bool(converged),
        trajectory=trajectory,
        log_likelihood_trace=trace,
    )
