"""Pure NumPy versions of the compiled kernels in ``_ckernels.pyx``.

Same signatures and return conventions; used when the extension is not
built or when ``PETFISHER_BACKEND=python``.
"""
import numpy as np


def _ratio(p, counts, lam):
    g = lam @ p
    positive = counts > 0
    bad = np.flatnonzero(positive & (g <= 0))
    if bad.size:
        return int(bad[0]), None, 0.0
    w = np.zeros_like(g)
    np.divide(counts, g, out=w, where=positive)
    ratio = p @ w
    return -1, ratio, float(np.max(np.abs(ratio - 1.0)))


def em_iterate(p, counts, lam, n_iter, tol):
    """Run up to ``n_iter`` EM updates on a copy of ``lam``.

    Returns ``(lam, iterations, converged, residual, bad_detector)``.
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    counts = np.ascontiguousarray(counts, dtype=np.float64)
    lam = np.array(lam, dtype=np.float64, copy=True)
    t = 0
    converged = False
    residual = 0.0
    while True:
        bad, ratio, res = _ratio(p, counts, lam)
        if bad >= 0:
            break
        residual = res
        if res <= tol:
            converged = True
            break
        if t >= n_iter:
            break
        lam = lam * ratio
        t += 1
    return lam, t, converged, residual, bad


def em_iterate_batch(p, counts, lam, n_iter, tol):
    """Row-wise :func:`em_iterate` over 2-d ``counts`` and ``lam``."""
    counts = np.atleast_2d(counts)
    lam = np.array(np.atleast_2d(lam), dtype=np.float64, copy=True)
    n_rows = counts.shape[0]
    iterations = np.zeros(n_rows, dtype=np.int64)
    converged = np.zeros(n_rows, dtype=bool)
    residual = np.zeros(n_rows)
    bad = np.full(n_rows, -1, dtype=np.int64)
    for r in range(n_rows):
        lam[r], iterations[r], converged[r], residual[r], bad[r] = em_iterate(
            p, counts[r], lam[r], n_iter, tol
        )
    return lam, iterations, converged, residual, bad


def fisher_gram(p, weights):
    """Weighted Gram matrix ``I[i, j] = sum_d p[i, d] p[j, d] weights[d]``."""
    p = np.asarray(p, dtype=np.float64)
    out = (p * np.asarray(weights, dtype=np.float64)) @ p.T
    return 0.5 * (out + out.T)
