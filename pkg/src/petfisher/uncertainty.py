"""Covariance, standard errors and correlations from observed information.

Inputs live at the counts scale. :func:`build_report` converts to per-unit
exposure for reporting: charges and standard errors divided by ``T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from petfisher.errors import InvalidArgumentError, SingularFisherError
from petfisher.fisher import FisherMatrix

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class CovarianceEstimate:
    C: np.ndarray
    se: np.ndarray
    method: str = "full"
    condition: float = float("nan")


@dataclass(frozen=True)
class MinorSeEstimate:
    """Per-pixel standard errors from inverting k-by-k principal minors.

    ``se`` is NaN for pixels whose minor could not be inverted; those pixels
    are listed (1-based) in ``failed``.
    """

    k: int
    se: np.ndarray
    failed: tuple = ()


@dataclass(frozen=True)
class NoiseToSignal:
    nts: np.ndarray  # NaN where the signal is zero
    T: float

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.nts)


def _as_matrix(I):
    I = I.I if isinstance(I, FisherMatrix) else I
    I = np.asarray(I, dtype=np.float64)
    if I.ndim != 2 or I.shape[0] != I.shape[1]:
        raise InvalidArgumentError(f"information matrix must be square, got shape {I.shape}")
    return I


def condition_estimate(I) -> float:
    """2-norm condition number; ``inf`` for an exactly singular matrix."""
    I = _as_matrix(I)
    s = np.linalg.svd(I, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


def _spd_inverse(I):
    cond = condition_estimate(I)
    if not cond < MAX_CONDITION:
        raise SingularFisherError(cond)
    try:
        factor = linalg.cho_factor(I, lower=True)
    except linalg.LinAlgError:
        raise SingularFisherError(cond) from None
    C = linalg.cho_solve(factor, np.eye(I.shape[0]))
    return 0.5 * (C + C.T), cond


def invert_fisher(I) -> CovarianceEstimate:
    """Cramer-Rao covariance ``I^{-1}`` via Cholesky.

    Raises :class:`SingularFisherError` (carrying the condition estimate) if
    the matrix is not numerically positive definite. There is no
    pseudo-inverse fallback.
    """
    C, cond = _spd_inverse(_as_matrix(I))
    return CovarianceEstimate(C=C, se=np.sqrt(np.diag(C)), method="full", condition=cond)


def minor_window(b, k, n):
    """0-based slice of the k-by-k window centred on pixel ``b``, clamped to the matrix."""
    k = min(k, n)
    start = min(max(b - k // 2, 0), n - k)
    return start, start + k


def minor_inversion_se(I, k) -> MinorSeEstimate:
    """Standard errors as if every pixel outside a k-window were known.

    For each pixel the k-by-k principal minor centred on it (shifted inward
    at the edges) is inverted and the pixel's diagonal entry is kept.
    """
    I = _as_matrix(I)
    n = I.shape[0]
    if int(k) != k or k < 1 or k > n or k % 2 == 0:
        raise InvalidArgumentError(f"minor size must be odd and in [1, {n}], got {k}")
    k = int(k)
    se = np.full(n, np.nan)
    failed = []
    if k == 1:
        diag = np.diag(I)
        ok = diag > 0
        se[ok] = 1.0 / np.sqrt(diag[ok])
        failed = [int(b) + 1 for b in np.flatnonzero(~ok)]
        return MinorSeEstimate(k=1, se=se, failed=tuple(failed))
    for b in range(n):
        lo, hi = minor_window(b, k, n)
        try:
            C, _ = _spd_inverse(I[lo:hi, lo:hi])
        except SingularFisherError:
            failed.append(b + 1)
            continue
        se[b] = np.sqrt(C[b - lo, b - lo])
    return MinorSeEstimate(k=k, se=se, failed=tuple(failed))


def correlation_matrix(C) -> np.ndarray:
    C = C.C if isinstance(C, CovarianceEstimate) else np.asarray(C, dtype=np.float64)
    d = np.diag(C)
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        raise InvalidArgumentError(f"non-positive variance at pixel {bad[0] + 1}")
    s = np.sqrt(d)
    R = C / np.outer(s, s)
    np.fill_diagonal(R, 1.0)
    return R


def noise_to_signal(se, signal, T) -> NoiseToSignal:
    """Per-observation noise-to-signal ``sqrt(T) * se / signal``.

    ``se`` and ``signal`` must share a scale (both counts or both per unit).
    Pixels with zero signal are reported as NaN.
    """
    if not T > 0:
        raise InvalidArgumentError(f"exposure T must be positive, got {T}")
    se = np.asarray(se, dtype=np.float64)
    signal = np.asarray(signal, dtype=np.float64)
    nts = np.full(se.shape, np.nan)
    ok = signal > 0
    nts[ok] = np.sqrt(T) * se[ok] / signal[ok]
    return NoiseToSignal(nts=nts, T=float(T))


@dataclass
class UncertaintyReport:
    """Per-unit-exposure summary of the information-based uncertainty.

    ``lambda_hat``, ``se_full`` and ``se_minor`` are divided by ``T``;
    ``covariance`` is divided by ``T**2``.
    """

    lambda_hat: np.ndarray
    se_full: np.ndarray
    se_minor: dict
    correlation: np.ndarray
    covariance: np.ndarray
    nts: np.ndarray
    T: float
    iterations: int | None
    condition_estimate: float
    signal: str = "lambda_hat"
    minor_failures: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def vec(a):
            return [None if not np.isfinite(x) else float(x) for x in np.asarray(a)]

        return {
            "lambda_hat": vec(self.lambda_hat),
            "se_full": vec(self.se_full),
            "se_minor": {str(k): vec(v) for k, v in sorted(self.se_minor.items())},
            "minor_failures": {str(k): list(v) for k, v in sorted(self.minor_failures.items())},
            "correlation": [vec(row) for row in self.correlation],
            "nts": vec(self.nts),
            "nts_signal": self.signal,
            "T": self.T,
            "iterations": self.iterations,
            "condition_estimate": self.condition_estimate,
        }


def build_report(fisher, lambda_hat, T=1.0, minors=(1, 3), iterations=None, signal=None) -> UncertaintyReport:
    """Assemble an :class:`UncertaintyReport` from counts-scale inputs.

    Parameters
    ----------
    fisher : FisherMatrix or ndarray
        Observed information at the counts scale.
    lambda_hat : array_like
        EM estimate at the counts scale.
    signal : array_like, optional
        Per-unit charge used as the noise-to-signal denominator. Defaults to
        ``lambda_hat / T``; simulation studies pass the true charge.
    """
    if not T > 0:
        raise InvalidArgumentError(f"exposure T must be positive, got {T}")
    I = _as_matrix(fisher)
    cov = invert_fisher(I)
    n = I.shape[0]
    se_minor, failures = {}, {}
    for k in minors:
        est = minor_inversion_se(I, k)
        se_minor[int(k)] = est.se / T
        if est.failed:
            failures[int(k)] = list(est.failed)
    lam_unit = np.asarray(lambda_hat, dtype=np.float64) / T
    se_unit = cov.se / T
    if signal is None:
        nts = noise_to_signal(se_unit, lam_unit, T)
        label = "lambda_hat"
    else:
        nts = noise_to_signal(se_unit, signal, T)
        label = "supplied"
    if lam_unit.size != n:
        raise InvalidArgumentError("lambda_hat and Fisher matrix sizes differ")
    return UncertaintyReport(
        lambda_hat=lam_unit,
        se_full=se_unit,
        se_minor=se_minor,
        correlation=correlation_matrix(cov.C),
        covariance=cov.C / T**2,
        nts=nts.nts,
        T=float(T),
        iterations=iterations,
        condition_estimate=cov.condition,
        signal=label,
        minor_failures=failures,
    )
