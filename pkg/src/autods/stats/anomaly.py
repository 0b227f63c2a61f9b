"""Isolation forest anomaly scoring."""

from __future__ import annotations

import math

import numpy as np

from .._seeding import rng_for
from ..errors import InsufficientDataError, StatsError

__all__ = ["isolation_forest"]

_EULER_GAMMA = 0.5772156649015329


def _avg_path(n: float) -> float:
    # Expected unsuccessful-search depth in a BST of n points.
    if n <= 1.0:
        return 0.0
    if n == 2.0:
        return 1.0
    return 2.0 * (math.log(n - 1.0) + _EULER_GAMMA) - 2.0 * (n - 1.0) / n


def _grow(x: np.ndarray, idx: np.ndarray, depth: int, limit: int, rng):
    if depth >= limit or len(idx) <= 1:
        return ("leaf", len(idx))
    sub = x[idx]
    lo = sub.min(axis=0)
    hi = sub.max(axis=0)
    usable = np.flatnonzero(hi > lo)
    if len(usable) == 0:
        return ("leaf", len(idx))
    feature = int(usable[rng.integers(len(usable))])
    split = float(rng.uniform(lo[feature], hi[feature]))
    left = idx[sub[:, feature] < split]
    right = idx[sub[:, feature] >= split]
    if len(left) == 0 or len(right) == 0:
        return ("leaf", len(idx))
    return ("split", feature, split,
            _grow(x, left, depth + 1, limit, rng),
            _grow(x, right, depth + 1, limit, rng))


def _add_paths(node, x: np.ndarray, idx: np.ndarray, depth: int, out: np.ndarray):
    if node[0] == "leaf":
        out[idx] += depth + _avg_path(float(node[1]))
        return
    _, feature, split, left, right = node
    go_left = x[idx, feature] < split
    _add_paths(left, x, idx[go_left], depth + 1, out)
    _add_paths(right, x, idx[~go_left], depth + 1, out)


def isolation_forest(points, n_trees: int = 100, subsample: int = 256,
                     seed: int = 0) -> np.ndarray:
    """Anomaly scores in (0, 1); larger means easier to isolate.

    Each tree grows on a random subsample (default 256, capped at n) with
    depth limited to ceil(log2(subsample)).  The score for a point is
    ``2 ** (-mean_path / c(subsample))`` with the usual average-path
    normalizer c.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise StatsError(f"isolation forest expects a matrix, got ndim={x.ndim}")
    if not np.isfinite(x).all():
        raise StatsError("isolation forest input contains non-finite values")
    n = len(x)
    if n < 2:
        raise InsufficientDataError(f"isolation forest needs >= 2 points, got {n}")
    psi = min(subsample, n)
    limit = max(1, math.ceil(math.log2(psi)))
    rng = rng_for(seed, "isolation-forest")
    path_sum = np.zeros(n)
    all_idx = np.arange(n)
    for _ in range(n_trees):
        sample = rng.choice(n, size=psi, replace=False)
        tree = _grow(x, sample, 0, limit, rng)
        _add_paths(tree, x, all_idx, 0, path_sum)
    mean_path = path_sum / n_trees
    return np.power(2.0, -mean_path / _avg_path(float(psi)))
