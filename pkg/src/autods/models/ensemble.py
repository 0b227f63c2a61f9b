"""Voting and stacking ensembles over fitted base models."""

from __future__ import annotations

import numpy as np

from .._seeding import derive_seed
from ..errors import ConfigError, StatsError
from .cv import kfold_indices, stratified_kfold_indices
from .linear import LinearRegression, LogisticRegression, _as_matrix

__all__ = ["VotingEnsemble", "StackingEnsemble"]


def _check_members(factories):
    if len(factories) < 2:
        raise ConfigError(f"an ensemble needs >= 2 members, got {len(factories)}")


class VotingEnsemble:
    """Soft-voting: average class probabilities / mean regressions.

    ``factories`` build unfitted members; ``task`` is ``"classification"``
    or ``"regression"``.  Optional ``weights`` rescale each member's vote.
    """

    def __init__(self, factories, task: str, weights=None):
        _check_members(factories)
        if task not in ("classification", "regression"):
            raise ConfigError(f"unknown task {task!r}")
        if weights is not None:
            if len(weights) != len(factories):
                raise ConfigError("weights and factories differ in length")
            if min(weights) < 0 or sum(weights) <= 0:
                raise ConfigError("weights must be non-negative and not all zero")
        self.factories = list(factories)
        self.task = task
        self.weights = list(weights) if weights is not None else [1.0] * len(factories)
        self.members_ = []
        self.classes_ = None

    def fit(self, X, y):
        x = _as_matrix(X)
        yv = np.asarray(y).ravel()
        self.members_ = [f().fit(x, yv) for f in self.factories]
        if self.task == "classification":
            self.classes_ = np.unique(yv)
        return self

    def predict_proba(self, X):
        if self.task != "classification":
            raise StatsError("predict_proba on a regression ensemble")
        x = _as_matrix(X)
        total = np.zeros((len(x), len(self.classes_)))
        pos = {c: j for j, c in enumerate(self.classes_)}
        for w, member in zip(self.weights, self.members_):
            proba = member.predict_proba(x)
            cols = [pos[c] for c in member.classes_]
            total[:, cols] += w * proba
        return total / sum(self.weights)

    def predict(self, X):
        if self.task == "classification":
            return self.classes_[self.predict_proba(X).argmax(axis=1)]
        x = _as_matrix(X)
        acc = np.zeros(len(x))
        for w, member in zip(self.weights, self.members_):
            acc += w * member.predict(x)
        return acc / sum(self.weights)

    def complexity(self) -> int:
        return sum(m.complexity() for m in self.members_)


class StackingEnsemble:
    """Two-level stack: out-of-fold base predictions feed a meta learner.

    Meta features are positive-class probabilities (classification) or raw
    predictions (regression); the meta model is logistic or linear
    regression.  Bases are refit on the full data after the meta model is
    learned, so nothing at prediction time has seen its own training rows
    twice.
    """

    def __init__(self, factories, task: str, k: int = 5, seed: int = 0):
        _check_members(factories)
        if task not in ("classification", "regression"):
            raise ConfigError(f"unknown task {task!r}")
        self.factories = list(factories)
        self.task = task
        self.k = k
        self.seed = seed
        self.members_ = []
        self.meta_ = None
        self.classes_ = None

    def _meta_features(self, x, members):
        cols = []
        for member in members:
            if self.task == "classification":
                proba = member.predict_proba(x)
                pos = {c: j for j, c in enumerate(self.classes_)}
                aligned = np.zeros((len(x), len(self.classes_)))
                aligned[:, [pos[c] for c in member.classes_]] = proba
                cols.append(aligned[:, 1:])  # drop one column: rows sum to 1
            else:
                cols.append(member.predict(x)[:, None])
        return np.hstack(cols)

    def fit(self, X, y):
        x = _as_matrix(X)
        yv = np.asarray(y).ravel()
        fold_seed = derive_seed(self.seed, "stack-folds")
        if self.task == "classification":
            self.classes_ = np.unique(yv)
            folds = stratified_kfold_indices(yv, self.k, fold_seed)
        else:
            folds = kfold_indices(len(yv), self.k, fold_seed)

        meta_x = None
        for train, test in folds:
            members = [f().fit(x[train], yv[train]) for f in self.factories]
            feats = self._meta_features(x[test], members)
            if meta_x is None:
                meta_x = np.zeros((len(x), feats.shape[1]))
            meta_x[test] = feats
        if self.task == "classification":
            self.meta_ = LogisticRegression().fit(meta_x, yv)
        else:
            self.meta_ = LinearRegression().fit(meta_x, yv)
        self.members_ = [f().fit(x, yv) for f in self.factories]
        return self

    def predict_proba(self, X):
        if self.task != "classification":
            raise StatsError("predict_proba on a regression ensemble")
        x = _as_matrix(X)
        return self.meta_.predict_proba(self._meta_features(x, self.members_))

    def predict(self, X):
        x = _as_matrix(X)
        return self.meta_.predict(self._meta_features(x, self.members_))

    def complexity(self) -> int:
        return sum(m.complexity() for m in self.members_) + self.meta_.complexity()
