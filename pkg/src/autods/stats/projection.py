"""Principal component analysis on top of a cyclic Jacobi eigensolver."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InsufficientDataError, StatsError
from .types import Projection

__all__ = ["jacobi_eigh", "pca"]


def jacobi_eigh(matrix, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors in columns,
    unsorted.  Convergence: the off-diagonal Frobenius norm falls below
    ``tol`` times the full Frobenius norm.
    """
    a = np.asarray(matrix, dtype=np.float64).copy()
    d = a.shape[0]
    if a.shape != (d, d):
        raise StatsError(f"jacobi needs a square matrix, got {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(a).max())):
        raise StatsError("jacobi needs a symmetric matrix")
    v = np.eye(d)
    norm = math.sqrt(float((a * a).sum()))
    if norm == 0.0:
        return np.zeros(d), v
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, float((a * a).sum() - (np.diag(a) ** 2).sum())))
        if off <= tol * norm:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:  # theta**2 would overflow; t ~ 1/(2*theta)
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (
                        abs(theta) + math.sqrt(theta * theta + 1.0)
                    )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                a[p, q] = a[q, p] = 0.0
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    return np.diag(a).copy(), v


def pca(points, variance_target: float = 0.95, max_components: int = None) -> Projection:
    """PCA keeping the smallest component count whose cumulative explained
    variance reaches ``variance_target``.

    Components are rows, orthonormal, and sign-stabilized so the largest
    absolute coordinate of each component is positive.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise StatsError(f"pca expects a 2-D matrix, got ndim={x.ndim}")
    if not np.isfinite(x).all():
        raise StatsError("pca input contains missing or non-finite values")
    n, d = x.shape
    if n < 2:
        raise InsufficientDataError(f"pca needs >= 2 rows, got {n}")
    if not (0.0 < variance_target <= 1.0):
        raise StatsError(f"variance_target must be in (0, 1], got {variance_target}")

    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    vals, vecs = jacobi_eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]

    total = float(vals.sum())
    if total <= 0.0:
        raise StatsError("pca input has zero total variance")
    ratios = vals / total
    cum = np.cumsum(ratios)
    k = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
    k = min(k, d)
    if max_components is not None:
        k = min(k, max_components)
    k = max(k, 1)

    components = vecs[:, :k].T.copy()
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0.0:
            row *= -1.0
    scores = centered @ components.T
    return Projection(components=components,
                      explained_variance_ratio=ratios[:k].copy(),
                      scores=scores)
