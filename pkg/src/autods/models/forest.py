"""Bagged CART ensembles."""

from __future__ import annotations

import numpy as np

from .._seeding import derive_seed, rng_for
from ..errors import StatsError
from .linear import _as_matrix
from .tree import DecisionTreeClassifier, DecisionTreeRegressor

__all__ = ["RandomForestRegressor", "RandomForestClassifier"]


class _ForestBase:
    tree_cls = None
    default_max_features = None

    def __init__(self, n_trees: int = 100, max_depth=None, min_leaf: int = 1,
                 max_features=None, seed: int = 0):
        if n_trees < 1:
            raise StatsError(f"n_trees must be >= 1, got {n_trees}")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features or self.default_max_features
        self.seed = seed
        self.trees_ = []

    def _fit_bagged(self, x: np.ndarray, yv: np.ndarray):
        n = len(x)
        self.trees_ = []
        for t in range(self.n_trees):
            boot = rng_for(self.seed, "forest-boot", t).integers(0, n, size=n)
            tree = self.tree_cls(max_depth=self.max_depth, min_leaf=self.min_leaf,
                                 max_features=self.max_features,
                                 seed=derive_seed(self.seed, "forest-tree", t))
            tree.fit(np.ascontiguousarray(x[boot]), yv[boot])
            self.trees_.append(tree)
        return self

    def complexity(self) -> int:
        return sum(t.complexity() for t in self.trees_)


class RandomForestRegressor(_ForestBase):
    tree_cls = DecisionTreeRegressor
    default_max_features = "third"

    def fit(self, X, y):
        x = _as_matrix(X)
        yv = np.asarray(y, dtype=np.float64).ravel()
        if len(x) != len(yv):
            raise StatsError(f"X and y differ in length: {len(x)} vs {len(yv)}")
        return self._fit_bagged(x, yv)

    def predict(self, X):
        x = _as_matrix(X)
        acc = np.zeros(len(x))
        for tree in self.trees_:
            acc += tree.predict(x)
        return acc / self.n_trees


class RandomForestClassifier(_ForestBase):
    tree_cls = DecisionTreeClassifier
    default_max_features = "sqrt"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.classes_ = None

    def fit(self, X, y):
        x = _as_matrix(X)
        yv = np.asarray(y).ravel()
        if len(x) != len(yv):
            raise StatsError(f"X and y differ in length: {len(x)} vs {len(yv)}")
        self.classes_ = np.unique(yv)
        return self._fit_bagged(x, yv)

    def predict_proba(self, X):
        """Mean of per-tree class fractions, re-aligned when a bootstrap
        draw missed a class entirely."""
        x = _as_matrix(X)
        acc = np.zeros((len(x), len(self.classes_)))
        pos = {c: j for j, c in enumerate(self.classes_)}
        for tree in self.trees_:
            proba = tree.predict_proba(x)
            cols = [pos[c] for c in tree.classes_]
            acc[:, cols] += proba
        return acc / self.n_trees

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]
