"""Outlier masks: z-score, IQR fences, and Mahalanobis distance."""

from __future__ import annotations

import numpy as np

from ..errors import InsufficientDataError, StatsError
from . import special

__all__ = [
    "zscore_outliers",
    "iqr_outliers",
    "iqr_fences",
    "mahalanobis_outliers",
    "outlier_mask",
]


def _chi2_ppf(p: float, dof: float) -> float:
    # Bisection on the CDF; plenty fast for the few quantiles needed here.
    lo, hi = 0.0, max(dof, 1.0)
    while special.chi2_cdf(hi, dof) < p:
        hi *= 2.0
        if hi > 1e12:
            raise StatsError(f"chi-square quantile overflow for p={p}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if special.chi2_cdf(mid, dof) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def zscore_outliers(x, threshold: float = 3.0) -> np.ndarray:
    """True where |x - mean| / std exceeds ``threshold`` (missing -> False)."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    finite = np.isfinite(arr)
    if finite.sum() < 2:
        raise InsufficientDataError("z-score outliers need >= 2 finite values")
    vals = arr[finite]
    std = vals.std(ddof=1)
    mask = np.zeros(len(arr), dtype=bool)
    if std == 0.0:
        return mask
    mask[finite] = np.abs(vals - vals.mean()) / std > threshold
    return mask


def iqr_fences(x, multiplier: float = 1.5):
    """Tukey fences ``(q1 - m*IQR, q3 + m*IQR)`` over finite values."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    vals = arr[np.isfinite(arr)]
    if len(vals) < 2:
        raise InsufficientDataError("IQR fences need >= 2 finite values")
    q1, q3 = np.quantile(vals, [0.25, 0.75])
    iqr = q3 - q1
    return float(q1 - multiplier * iqr), float(q3 + multiplier * iqr)


def iqr_outliers(x, multiplier: float = 1.5) -> np.ndarray:
    """True outside the Tukey fences (missing -> False)."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    lo, hi = iqr_fences(arr, multiplier)
    finite = np.isfinite(arr)
    mask = np.zeros(len(arr), dtype=bool)
    mask[finite] = (arr[finite] < lo) | (arr[finite] > hi)
    return mask


def mahalanobis_outliers(points, quantile: float = 0.975) -> np.ndarray:
    """True where squared Mahalanobis distance exceeds the chi-square
    quantile at ``quantile`` with d degrees of freedom.

    The covariance gets a ridge of ``1e-6 * trace / d`` on the diagonal so
    near-singular clouds stay invertible.  Rows containing missing values
    are never flagged.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise StatsError(f"mahalanobis expects a 2-D matrix, got ndim={x.ndim}")
    n, d = x.shape
    complete = np.isfinite(x).all(axis=1)
    xs = x[complete]
    if len(xs) < d + 2:
        raise InsufficientDataError(
            f"mahalanobis needs >= d + 2 complete rows, got {len(xs)} for d={d}"
        )
    mu = xs.mean(axis=0)
    centered = xs - mu
    cov = centered.T @ centered / (len(xs) - 1)
    trace = float(np.trace(cov))
    mask = np.zeros(n, dtype=bool)
    if trace <= 0.0:
        return mask
    cov = cov + np.eye(d) * (1e-6 * trace / d)
    sol = np.linalg.solve(cov, centered.T)
    d2 = (centered * sol.T).sum(axis=1)
    cutoff = _chi2_ppf(quantile, float(d))
    mask[complete] = d2 > cutoff
    return mask


def outlier_mask(values, method: str = "zscore", threshold: float = None) -> np.ndarray:
    """Dispatch to one of the outlier detectors.

    ``threshold`` defaults per method: 3.0 for z-score, 1.5 for the IQR
    fence multiplier, 0.975 for the Mahalanobis chi-square quantile.
    """
    if method == "zscore":
        return zscore_outliers(values, 3.0 if threshold is None else threshold)
    if method == "iqr":
        return iqr_outliers(values, 1.5 if threshold is None else threshold)
    if method == "mahalanobis":
        return mahalanobis_outliers(values, 0.975 if threshold is None else threshold)
    raise StatsError(f"unknown outlier method: {method!r}")
