"""K-nearest-neighbor models on internally standardized features."""

from __future__ import annotations

import numpy as np

from ..errors import InsufficientDataError, StatsError
from .linear import _as_matrix

__all__ = ["KNNClassifier", "KNNRegressor"]


class _KNNBase:
    def __init__(self, k: int = 5):
        if k < 1:
            raise StatsError(f"k must be >= 1, got {k}")
        self.k = k
        self._x = None
        self._mean = None
        self._scale = None

    def _fit_common(self, X):
        x = _as_matrix(X)
        if len(x) < self.k:
            raise InsufficientDataError(f"knn needs >= k rows, got {len(x)} for k={self.k}")
        self._mean = x.mean(axis=0)
        scale = x.std(axis=0, ddof=0)
        scale[scale == 0.0] = 1.0
        self._scale = scale
        self._x = (x - self._mean) / self._scale
        return x

    def _neighbor_idx(self, X) -> np.ndarray:
        q = (_as_matrix(X) - self._mean) / self._scale
        d2 = ((q * q).sum(axis=1)[:, None] + (self._x * self._x).sum(axis=1)[None, :]
              - 2.0 * (q @ self._x.T))
        # stable sort so equal distances resolve to the lowest train index
        return np.argsort(d2, axis=1, kind="mergesort")[:, : self.k]

    def complexity(self) -> int:
        return len(self._x)


class KNNRegressor(_KNNBase):
    def fit(self, X, y):
        x = self._fit_common(X)
        yv = np.asarray(y, dtype=np.float64).ravel()
        if len(x) != len(yv):
            raise StatsError(f"X and y differ in length: {len(x)} vs {len(yv)}")
        self._y = yv
        return self

    def predict(self, X):
        return self._y[self._neighbor_idx(X)].mean(axis=1)


class KNNClassifier(_KNNBase):
    def fit(self, X, y):
        x = self._fit_common(X)
        yv = np.asarray(y).ravel()
        if len(x) != len(yv):
            raise StatsError(f"X and y differ in length: {len(x)} vs {len(yv)}")
        self.classes_, self._yi = np.unique(yv, return_inverse=True)
        return self

    def predict_proba(self, X):
        idx = self._neighbor_idx(X)
        votes = self._yi[idx]
        proba = np.zeros((len(idx), len(self.classes_)))
        for j in range(len(self.classes_)):
            proba[:, j] = (votes == j).mean(axis=1)
        return proba

    def predict(self, X):
        # argmax keeps the first maximum, so vote ties go to the lowest class
        return self.classes_[self.predict_proba(X).argmax(axis=1)]
