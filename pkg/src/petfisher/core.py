"""System matrices, charge/count vectors and forward projection.

Pixels are indexed by ``b`` and detector pairs by ``d``. ``p[b, d]`` is the
probability that an emission at pixel ``b`` is registered by pair ``d``; rows
are stochastic. Labels in files and reports are 1-based, array storage is
0-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from petfisher.errors import InvalidArgumentError

ROW_SUM_TOL = 1e-12


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemMatrix:
    """Dense row-stochastic detection-probability matrix.

    Parameters
    ----------
    p : array_like, shape (n_pixels, n_detectors)
        Detection probabilities; validated on construction.
    """

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64, copy=True)
        if p.ndim != 2:
            raise InvalidArgumentError(f"system matrix must be 2-d, got shape {p.shape}")
        report = validate_system_matrix(p)
        if not report.ok:
            raise InvalidArgumentError("invalid system matrix: " + "; ".join(report.messages))
        object.__setattr__(self, "p", _readonly(p))

    @property
    def n_pixels(self) -> int:
        return self.p.shape[0]

    @property
    def n_detectors(self) -> int:
        return self.p.shape[1]

    @property
    def transpose(self) -> np.ndarray:
        """Detector-by-pixel view (rows are detector pairs)."""
        return self.p.T


@dataclass
class ValidationReport:
    ok: bool
    row_sum_deviation: np.ndarray
    negative_entries: list = field(default_factory=list)
    entries_above_one: list = field(default_factory=list)
    zero_rows: list = field(default_factory=list)
    messages: list = field(default_factory=list)

    def worst_row(self):
        """1-based pixel label with the largest row-sum deviation."""
        return int(np.argmax(np.abs(self.row_sum_deviation))) + 1


def validate_system_matrix(p, tol=ROW_SUM_TOL) -> ValidationReport:
    """Check the system-matrix invariants without raising.

    Violations are listed with 1-based (pixel, detector) labels.
    """
    if isinstance(p, SystemMatrix):
        p = p.p
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or 0 in p.shape:
        return ValidationReport(False, np.zeros(0), messages=[f"bad shape {p.shape}"])
    messages = []
    if not np.all(np.isfinite(p)):
        messages.append("non-finite entries")
    dev = p.sum(axis=1) - 1.0
    for b in np.flatnonzero(np.abs(dev) > tol):
        messages.append(f"pixel {b + 1} row sum deviates by {dev[b]:+.3g}")
    neg = [(int(b) + 1, int(d) + 1) for b, d in np.argwhere(p < 0)]
    if neg:
        messages.append(f"negative entries at {neg}")
    above = [(int(b) + 1, int(d) + 1) for b, d in np.argwhere(p > 1)]
    if above:
        messages.append(f"entries above one at {above}")
    zero = [int(b) + 1 for b in np.flatnonzero(~np.any(p != 0, axis=1))]
    if zero:
        messages.append(f"all-zero pixel rows {zero}")
    return ValidationReport(
        ok=not messages,
        row_sum_deviation=dev,
        negative_entries=neg,
        entries_above_one=above,
        zero_rows=zero,
        messages=messages,
    )


def _normal_mass(lo, hi):
    # Phi(hi) - Phi(lo), evaluated on the side of zero that avoids
    # cancellation between two values close to 1.
    if lo > 0:
        return float(ndtr(-lo) - ndtr(-hi))
    return float(ndtr(hi) - ndtr(lo))


def build_gaussian_system_matrix(n_pixels, n_detectors, sigma) -> SystemMatrix:
    """Discretized normal detection model with per-pixel width ``sigma/sqrt(b)``.

    Entry ``(b, d)`` (1-based) is ``Phi((d-b+1/2)/s_b) - Phi((d-b-1/2)/s_b)``
    with ``s_b = sigma/sqrt(b)``. The tails are absorbed into the first and
    last detector cells so every row sums to one.
    """
    if int(n_pixels) != n_pixels or n_pixels < 1:
        raise InvalidArgumentError(f"n_pixels must be a positive integer, got {n_pixels}")
    if int(n_detectors) != n_detectors or n_detectors < 1:
        raise InvalidArgumentError(f"n_detectors must be a positive integer, got {n_detectors}")
    if not np.isfinite(sigma) or sigma <= 0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    n_pixels, n_detectors = int(n_pixels), int(n_detectors)
    p = np.empty((n_pixels, n_detectors))
    for b in range(1, n_pixels + 1):
        scale = sigma / np.sqrt(b)
        for d in range(1, n_detectors + 1):
            lo = -np.inf if d == 1 else (d - b - 0.5) / scale
            hi = np.inf if d == n_detectors else (d - b + 0.5) / scale
            p[b - 1, d - 1] = _normal_mass(lo, hi)
    return SystemMatrix(p)


def as_system_matrix(P) -> SystemMatrix:
    return P if isinstance(P, SystemMatrix) else SystemMatrix(P)


def as_charge(lam, n_pixels=None) -> np.ndarray:
    """Validate a nonnegative finite charge vector and return it as float64."""
    lam = np.asarray(lam, dtype=np.float64)
    if lam.ndim != 1:
        raise InvalidArgumentError(f"charge vector must be 1-d, got shape {lam.shape}")
    if n_pixels is not None and lam.size != n_pixels:
        raise InvalidArgumentError(f"charge vector has {lam.size} entries, expected {n_pixels}")
    if not np.all(np.isfinite(lam)) or np.any(lam < 0):
        raise InvalidArgumentError("charges must be finite and nonnegative")
    return lam


def as_counts(counts, n_detectors=None) -> np.ndarray:
    """Validate nonnegative integer-valued counts; returned as float64."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1:
        raise InvalidArgumentError(f"counts must be 1-d, got shape {counts.shape}")
    if n_detectors is not None and counts.size != n_detectors:
        raise InvalidArgumentError(f"counts have {counts.size} entries, expected {n_detectors}")
    if not np.all(np.isfinite(counts)) or np.any(counts < 0) or np.any(counts != np.round(counts)):
        raise InvalidArgumentError("counts must be nonnegative integers")
    return counts


def forward_project(P, lam) -> np.ndarray:
    """Expected counts per detector pair, ``g[d] = sum_b p[b, d] * lam[b]``."""
    P = as_system_matrix(P)
    lam = as_charge(lam, P.n_pixels)
    return lam @ P.p
