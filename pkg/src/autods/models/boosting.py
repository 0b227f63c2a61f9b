"""Gradient boosting with shallow CART learners.

Regression boosts squared error on residuals; binary classification
boosts log-loss with a Newton step per leaf.  Multi-class targets are
out of scope — use the forest for those.
"""

from __future__ import annotations

import math

import numpy as np

from .._seeding import derive_seed
from ..errors import StatsError
from .linear import _as_matrix
from .tree import DecisionTreeRegressor

__all__ = ["GradientBoostingRegressor", "GradientBoostingClassifier"]


class _BoostBase:
    def __init__(self, n_rounds: int = 100, learning_rate: float = 0.1,
                 max_depth: int = 3, min_leaf: int = 1, seed: int = 0):
        if n_rounds < 1:
            raise StatsError(f"n_rounds must be >= 1, got {n_rounds}")
        if not (0.0 < learning_rate <= 1.0):
            raise StatsError(f"learning_rate must be in (0, 1], got {learning_rate}")
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.seed = seed
        self.init_ = 0.0
        self.stages_ = []  # list of (tree, leaf_value_array)

    def _new_tree(self, round_idx: int) -> DecisionTreeRegressor:
        return DecisionTreeRegressor(
            max_depth=self.max_depth, min_leaf=self.min_leaf,
            seed=derive_seed(self.seed, "boost-round", round_idx))

    def _raw_scores(self, x: np.ndarray) -> np.ndarray:
        raw = np.full(len(x), self.init_)
        for tree, leaf_values in self.stages_:
            raw += self.learning_rate * leaf_values[tree.apply(x)]
        return raw

    def complexity(self) -> int:
        return sum(tree.complexity() for tree, _ in self.stages_)


class GradientBoostingRegressor(_BoostBase):
    def fit(self, X, y):
        x = _as_matrix(X)
        yv = np.asarray(y, dtype=np.float64).ravel()
        if len(x) != len(yv):
            raise StatsError(f"X and y differ in length: {len(x)} vs {len(yv)}")
        self.init_ = float(yv.mean())
        raw = np.full(len(x), self.init_)
        self.stages_ = []
        for r in range(self.n_rounds):
            residual = yv - raw
            tree = self._new_tree(r).fit(x, residual)
            leaf_of = tree.apply(x)
            leaf_values = np.zeros(tree.n_leaves_)
            for leaf in range(tree.n_leaves_):
                members = leaf_of == leaf
                if members.any():
                    leaf_values[leaf] = residual[members].mean()
            self.stages_.append((tree, leaf_values))
            raw += self.learning_rate * leaf_values[leaf_of]
        return self

    def predict(self, X):
        return self._raw_scores(_as_matrix(X))


class GradientBoostingClassifier(_BoostBase):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.classes_ = None

    def fit(self, X, y):
        x = _as_matrix(X)
        yv = np.asarray(y).ravel()
        if len(x) != len(yv):
            raise StatsError(f"X and y differ in length: {len(x)} vs {len(yv)}")
        self.classes_ = np.unique(yv)
        if len(self.classes_) != 2:
            raise StatsError(
                f"gradient boosting handles binary targets only, got "
                f"{len(self.classes_)} classes"
            )
        target = (yv == self.classes_[1]).astype(np.float64)
        pos_rate = min(max(float(target.mean()), 1e-12), 1.0 - 1e-12)
        self.init_ = math.log(pos_rate / (1.0 - pos_rate))
        raw = np.full(len(x), self.init_)
        self.stages_ = []
        for r in range(self.n_rounds):
            prob = 1.0 / (1.0 + np.exp(-np.clip(raw, -30.0, 30.0)))
            residual = target - prob
            tree = self._new_tree(r).fit(x, residual)
            leaf_of = tree.apply(x)
            leaf_values = np.zeros(tree.n_leaves_)
            for leaf in range(tree.n_leaves_):
                members = leaf_of == leaf
                if members.any():
                    hess = float((prob[members] * (1.0 - prob[members])).sum())
                    leaf_values[leaf] = float(residual[members].sum()) / max(hess, 1e-12)
            self.stages_.append((tree, leaf_values))
            raw += self.learning_rate * leaf_values[leaf_of]
        return self

    def predict_proba(self, X):
        raw = self._raw_scores(_as_matrix(X))
        p1 = 1.0 / (1.0 + np.exp(-np.clip(raw, -30.0, 30.0)))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]
