"""K-means clustering, adjusted Rand index, and bootstrap stability."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .._seeding import rng_for
from ..errors import InsufficientDataError, StatsError
from .types import ClusterModel

__all__ = [
    "kmeans",
    "assign_to_centroids",
    "adjusted_rand_index",
    "cluster_stability",
    "cluster_feature_importance",
    "StabilityResult",
]


def _check_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise StatsError(f"clustering expects a 2-D matrix, got ndim={x.ndim}")
    if not np.isfinite(x).all():
        raise StatsError("clustering input contains missing or non-finite values")
    return x


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - centroids[None, :, :]
    return (diff * diff).sum(axis=2)


def _plus_plus_init(x: np.ndarray, k: int, rng) -> np.ndarray:
    n = len(x)
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centroids[j:] = x[rng.integers(n, size=k - j)]
            break
        centroids[j] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((x - centroids[j]) ** 2).sum(axis=1))
    return centroids


def assign_to_centroids(points, centroids) -> np.ndarray:
    """Nearest-centroid labels; ties go to the lowest centroid index."""
    x = _check_points(points)
    return _sq_dists(x, np.asarray(centroids, dtype=np.float64)).argmin(axis=1)


def kmeans(points, k: int, seed: int = 0, max_iter: int = 300,
           tol: float = 1e-6) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding.

    Iterates until the largest centroid displacement drops below ``tol``
    or ``max_iter`` rounds elapse.  An emptied cluster is re-seeded at the
    point currently farthest from its assigned centroid.
    """
    x = _check_points(points)
    n = len(x)
    if k < 1:
        raise StatsError(f"k must be >= 1, got {k}")
    if n < k:
        raise InsufficientDataError(f"kmeans needs >= k points, got {n} for k={k}")
    rng = rng_for(seed, "kmeans")
    centroids = _plus_plus_init(x, k, rng)

    assignments = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = _sq_dists(x, centroids)
        assignments = d2.argmin(axis=1)
        new_centroids = centroids.copy()
        for j in range(k):
            members = assignments == j
            if members.any():
                new_centroids[j] = x[members].mean(axis=0)
            else:
                worst = int(d2[np.arange(n), assignments].argmax())
                new_centroids[j] = x[worst]
                assignments[worst] = j
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break
    d2 = _sq_dists(x, centroids)
    assignments = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), assignments].sum())
    return ClusterModel(k=k, centroids=centroids, assignments=assignments,
                        inertia=inertia)


def adjusted_rand_index(labels_a, labels_b) -> float:
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if len(a) != len(b):
        raise StatsError(f"label vectors differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n == 0:
        raise InsufficientDataError("adjusted rand index of empty labelings")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    contingency = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(contingency, (ai, bi), 1)

    def comb2(v):
        return (v * (v - 1) / 2.0)

    sum_ij = comb2(contingency.astype(np.float64)).sum()
    sum_a = comb2(contingency.sum(axis=1).astype(np.float64)).sum()
    sum_b = comb2(contingency.sum(axis=0).astype(np.float64)).sum()
    total = comb2(float(n))
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0  # both partitions trivial and identical in structure
    return float((sum_ij - expected) / (max_index - expected))


class StabilityResult(NamedTuple):
    mean_ari: float
    stable: bool
    aris: tuple


def cluster_stability(points, k: int, seed: int = 0, n_boot: int = 10,
                      threshold: float = 0.8) -> StabilityResult:
    """Bootstrap check of clustering stability.

    Re-runs k-means on ``n_boot`` bootstrap resamples, labels every
    original point by the resampled centroids, and compares to the
    full-data assignment via adjusted Rand index.  Stable when the mean
    ARI reaches ``threshold``.
    """
    x = _check_points(points)
    full = kmeans(x, k, seed=seed)
    rng = rng_for(seed, "cluster-stability")
    aris = []
    for b in range(n_boot):
        idx = rng.integers(0, len(x), len(x))
        boot = kmeans(x[idx], k, seed=seed + b + 1)
        labels = assign_to_centroids(x, boot.centroids)
        aris.append(adjusted_rand_index(full.assignments, labels))
    mean_ari = float(np.mean(aris))
    return StabilityResult(mean_ari, mean_ari >= threshold, tuple(aris))


def cluster_feature_importance(points, model: ClusterModel) -> np.ndarray:
    """Per-feature share of variance explained by the cluster centroids
    (a correlation-ratio style score in [0, 1])."""
    x = _check_points(points)
    overall = x.mean(axis=0)
    total = ((x - overall) ** 2).sum(axis=0)
    counts = np.bincount(model.assignments, minlength=model.k).astype(np.float64)
    between = (counts[:, None] * (model.centroids - overall) ** 2).sum(axis=0)
    out = np.zeros(x.shape[1])
    ok = total > 0.0
    out[ok] = np.clip(between[ok] / total[ok], 0.0, 1.0)
    return out
