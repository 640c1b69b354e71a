"""Observed Fisher information of the Poisson emission model.

The closed form is ``I = P' D P`` with ``D = diag(n_d / g_d**2)``, where
``P`` is the detector-by-pixel matrix. :func:`fisher_fd_oracle` recovers the
same matrix by central differences of the EM score and serves as an
independent check on it.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from petfisher import kernels
from petfisher.core import as_charge, as_counts, as_system_matrix
from petfisher.em import _check_support, _score_terms
from petfisher.errors import InvalidArgumentError, StepTooLargeError

DEFAULT_EPSILON_FACTOR = 1e-4


@dataclass(frozen=True)
class FisherMatrix:
    """Observed information (minus the log-likelihood Hessian) at ``evaluated_at``."""

    I: np.ndarray
    evaluated_at: np.ndarray
    counts_ref: np.ndarray

    @property
    def n_pixels(self) -> int:
        return self.I.shape[0]

    def evaluation_hash(self) -> str:
        """SHA-256 of the float64 bytes of the evaluation point."""
        return hashlib.sha256(np.ascontiguousarray(self.evaluated_at, dtype="<f8").tobytes()).hexdigest()


def diagonal_weights(P, lam, counts) -> np.ndarray:
    """Per-detector weights ``n_d / g_d**2``; zero wherever ``n_d = 0``."""
    P = as_system_matrix(P)
    lam = as_charge(lam, P.n_pixels)
    counts = as_counts(counts, P.n_detectors)
    g = lam @ P.p
    _check_support(g, counts)
    w = np.zeros_like(g)
    positive = counts > 0
    np.divide(counts, g * g, out=w, where=positive)
    return w


def fisher_information(P, lam, counts) -> FisherMatrix:
    """Closed-form observed information ``I[b1, b2] = sum_d n_d p[b1, d] p[b2, d] / g_d**2``.

    Evaluate at the EM estimate to get the observed Fisher information of
    the MLE; at other points it is minus the Hessian there.
    """
    P = as_system_matrix(P)
    lam = as_charge(lam, P.n_pixels)
    counts = as_counts(counts, P.n_detectors)
    w = diagonal_weights(P, lam, counts)
    I = kernels.fisher_gram(P.p, w)
    return FisherMatrix(I=I, evaluated_at=lam.copy(), counts_ref=counts.copy())


def default_epsilon(lam) -> float:
    lam = np.asarray(lam, dtype=np.float64)
    positive = lam[lam > 0]
    if positive.size == 0:
        raise InvalidArgumentError("cannot pick a step from an all-zero charge vector")
    return DEFAULT_EPSILON_FACTOR * float(positive.min())


def fisher_fd_oracle(
    P, lam, counts, epsilon=None, use_richardson=True, extended_precision=False
) -> FisherMatrix:
    """Minus the Hessian by central differences of the score, one pixel at a time.

    Row ``b`` is ``-(S(lam + eps e_b) - S(lam - eps e_b)) / (2 eps)``. With
    ``use_richardson`` the ``eps`` and ``2 eps`` stencils are combined with
    weights 4/3 and -1/3. The result is symmetrized.

    Parameters
    ----------
    epsilon : float or array_like, optional
        Step, scalar or per pixel. Defaults to 1e-4 times the smallest
        positive charge.
    extended_precision : bool
        Evaluate scores in ``np.longdouble``. Off-diagonal entries many orders
        below the diagonal are otherwise dominated by float64 cancellation.
    """
    P = as_system_matrix(P)
    lam = as_charge(lam, P.n_pixels)
    counts = as_counts(counts, P.n_detectors)
    n = P.n_pixels
    eps = np.broadcast_to(
        np.asarray(default_epsilon(lam) if epsilon is None else epsilon, dtype=np.float64), (n,)
    )
    if np.any(eps <= 0):
        raise InvalidArgumentError("finite-difference steps must be positive")

    dtype = np.longdouble if extended_precision else np.float64
    p = P.p.astype(dtype)
    c = counts.astype(dtype)
    base = lam.astype(dtype)
    positive = counts > 0

    def shifted_score(b, h):
        pt = base.copy()
        pt[b] += h
        g = pt @ p
        if np.any(positive & (g <= 0)):
            raise StepTooLargeError(b + 1, float(abs(h)))
        return _score_terms(p, pt, c)

    def central(b, h):
        return (shifted_score(b, h) - shifted_score(b, -h)) / (2 * h)

    M = np.empty((n, n), dtype=dtype)
    for b in range(n):
        h = dtype(eps[b])
        row = central(b, h)
        if use_richardson:
            row = (4 * row - central(b, 2 * h)) / 3
        M[b] = -row
    M = (M + M.T) / 2
    return FisherMatrix(I=M.astype(np.float64), evaluated_at=lam.copy(), counts_ref=counts.copy())


def mle_condition_residual(P, lam, counts) -> np.ndarray:
    """``sum_d n_d p[b, d] / g_d - 1`` per pixel; zero at an interior MLE."""
    P = as_system_matrix(P)
    lam = as_charge(lam, P.n_pixels)
    counts = as_counts(counts, P.n_detectors)
    return _score_terms(P.p, lam, counts) - 1.0


def information_variation(P, trajectory, counts, last=50) -> float:
    """Largest relative change of any information entry over the last iterates.

    Entries are scaled by ``sqrt(I_ii I_jj)`` of the final iterate so tiny
    off-diagonal entries do not dominate.
    """
    trajectory = np.atleast_2d(trajectory)[-last:]
    mats = np.array([fisher_information(P, lam, counts).I for lam in trajectory])
    ref = mats[-1]
    scale = np.sqrt(np.outer(np.diag(ref), np.diag(ref)))
    scale[scale == 0] = 1.0
    return float(np.max((mats.max(axis=0) - mats.min(axis=0)) / scale))
