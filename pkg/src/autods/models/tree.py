"""CART decision trees driven by the split-scan kernel.

The driver presorts each feature once per fit, filters the presorted
order by node membership, and hands the ordered slice to
``scan_feature`` (compiled or numpy — bit-identical either way).  A
K-output variance criterion on one-hot labels makes classification and
regression share the same scan.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .._kernels import scan_feature
from .._seeding import rng_for
from ..errors import InsufficientDataError, StatsError
from .linear import _as_matrix

__all__ = ["DecisionTreeRegressor", "DecisionTreeClassifier"]


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "value", "n", "leaf_id")

    def __init__(self, value, n):
        self.feature = -1
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.value = value
        self.n = n
        self.leaf_id = -1

    @property
    def is_leaf(self):
        return self.left is None


def _resolve_max_features(max_features, d: int) -> Optional[int]:
    if max_features is None:
        return None
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    if max_features == "third":
        return max(1, math.ceil(d / 3.0))
    mf = int(max_features)
    if not (1 <= mf <= d):
        raise StatsError(f"max_features {max_features!r} out of range for d={d}")
    return mf


class _TreeBase:
    def __init__(self, max_depth=None, min_leaf: int = 1, max_features=None,
                 seed: int = 0):
        self.max_depth = max_depth
        self.min_leaf = int(min_leaf)
        self.max_features = max_features
        self.seed = seed
        self.root_ = None
        self.n_nodes_ = 0
        self.n_leaves_ = 0
        self.n_features_ = 0
        self.importance_gain_ = None  # per-feature total impurity decrease

    # -- fitting ----------------------------------------------------------

    def _fit_matrix(self, x: np.ndarray, y2: np.ndarray, rng=None):
        n, d = x.shape
        if n < 1:
            raise InsufficientDataError("cannot fit a tree on zero rows")
        self.n_features_ = d
        if rng is None:
            rng = rng_for(self.seed, "tree")
        mf = _resolve_max_features(self.max_features, d)
        orders = [np.argsort(x[:, f], kind="mergesort") for f in range(d)]
        max_depth = self.max_depth if self.max_depth is not None else 10 ** 9

        self.n_nodes_ = 0
        self.n_leaves_ = 0
        self.importance_gain_ = np.zeros(d)

        def try_split(mask: np.ndarray, depth: int, m: int):
            if depth >= max_depth or m < max(2, 2 * self.min_leaf):
                return None
            if mf is None or mf >= d:
                feats = range(d)
            else:
                feats = np.sort(rng.choice(d, size=mf, replace=False))
            sums = y2[mask].sum(axis=0)
            parent_score = float((sums * sums).sum()) / m
            best = (-math.inf, math.nan, -1, -1)  # score, thr, boundary, feature
            for f in feats:
                sel = orders[f][mask[orders[f]]]
                score, thr, boundary = scan_feature(x[sel, f], y2[sel], self.min_leaf)
                if boundary >= 0 and score > best[0]:
                    best = (score, thr, boundary, int(f))
            if best[3] < 0 or best[0] <= parent_score:
                return None
            return best[3], best[1], best[0] - parent_score

        # Explicit stack; left child pushed last so it is grown first,
        # keeping leaf numbering depth-first left-to-right.
        self.root_ = _Node(None, n)
        stack = [(self.root_, np.ones(n, dtype=bool), 0)]
        while stack:
            node, mask, depth = stack.pop()
            m = int(mask.sum())
            node.value = y2[mask].mean(axis=0)
            node.n = m
            self.n_nodes_ += 1
            split = try_split(mask, depth, m)
            if split is None:
                node.leaf_id = self.n_leaves_
                self.n_leaves_ += 1
                continue
            node.feature, node.threshold, gain = split
            self.importance_gain_[node.feature] += gain
            go_left = mask & (x[:, node.feature] <= node.threshold)
            node.left = _Node(None, 0)
            node.right = _Node(None, 0)
            stack.append((node.right, mask & ~go_left, depth + 1))
            stack.append((node.left, go_left, depth + 1))
        return self

    # -- inference --------------------------------------------------------

    def _leaf_for_rows(self, x: np.ndarray):
        n = len(x)
        out_value = np.empty((n, len(self.root_.value)))
        out_leaf = np.empty(n, dtype=np.int64)
        stack = [(self.root_, np.arange(n))]
        while stack:
            node, idx = stack.pop()
            if node.is_leaf:
                out_value[idx] = node.value
                out_leaf[idx] = node.leaf_id
                continue
            if len(idx) == 0:
                continue
            go_left = x[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return out_value, out_leaf

    def apply(self, X) -> np.ndarray:
        """Leaf index for every row (leaves numbered in creation order)."""
        x = _as_matrix(X)
        return self._leaf_for_rows(x)[1]

    def complexity(self) -> int:
        return self.n_nodes_

    def iter_leaves(self):
        stack = [self.root_]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                yield node
            else:
                stack.append(node.right)
                stack.append(node.left)


class DecisionTreeRegressor(_TreeBase):
    def fit(self, X, y):
        x = _as_matrix(X)
        yv = np.asarray(y, dtype=np.float64).ravel()
        if len(x) != len(yv):
            raise StatsError(f"X and y differ in length: {len(x)} vs {len(yv)}")
        return self._fit_matrix(x, yv[:, None])

    def predict(self, X):
        x = _as_matrix(X)
        return self._leaf_for_rows(x)[0][:, 0]


class DecisionTreeClassifier(_TreeBase):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.classes_ = None

    def fit(self, X, y):
        x = _as_matrix(X)
        yv = np.asarray(y).ravel()
        if len(x) != len(yv):
            raise StatsError(f"X and y differ in length: {len(x)} vs {len(yv)}")
        self.classes_, inverse = np.unique(yv, return_inverse=True)
        onehot = np.zeros((len(yv), len(self.classes_)))
        onehot[np.arange(len(yv)), inverse] = 1.0
        return self._fit_matrix(x, onehot)

    def predict_proba(self, X):
        x = _as_matrix(X)
        return self._leaf_for_rows(x)[0]

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]
