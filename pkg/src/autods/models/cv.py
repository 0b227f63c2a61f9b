"""Cross-validation folds and hyperparameter search."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .._seeding import derive_seed, rng_for
from ..errors import ConfigError, InsufficientDataError, StatsError
from . import metrics as M

__all__ = [
    "kfold_indices",
    "stratified_kfold_indices",
    "cross_validate",
    "ModelSpec",
    "ModelReport",
    "grid_candidates",
    "random_candidates",
    "search_models",
]


def kfold_indices(n: int, k: int, seed: int = 0):
    """Shuffled k-fold split; returns ``[(train_idx, test_idx), ...]``."""
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    if n < k:
        raise InsufficientDataError(f"need >= k rows for {k}-fold CV, got {n}")
    perm = rng_for(seed, "kfold").permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i in range(k):
        test = np.sort(folds[i])
        train = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
        out.append((train, test))
    return out


def stratified_kfold_indices(y, k: int, seed: int = 0):
    """K-fold with per-class round-robin dealing so label proportions stay
    close to the full-data rates in every fold."""
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    yv = np.asarray(y).ravel()
    rng = rng_for(seed, "stratified-kfold")
    fold_of = np.empty(len(yv), dtype=np.int64)
    cursor = 0
    for label in np.unique(yv):
        idx = np.flatnonzero(yv == label)
        idx = idx[rng.permutation(len(idx))]
        for j, row in enumerate(idx):
            fold_of[row] = (cursor + j) % k
        cursor += len(idx)
    out = []
    for i in range(k):
        test = np.flatnonzero(fold_of == i)
        if len(test) == 0:
            raise InsufficientDataError(
                f"stratified {k}-fold left fold {i} empty (n={len(yv)})"
            )
        train = np.flatnonzero(fold_of != i)
        out.append((train, test))
    return out


_METRICS: dict = {
    "accuracy": (M.accuracy, True),
    "precision": (M.precision, True),
    "recall": (M.recall, True),
    "f1": (M.f1_score, True),
    "rmse": (M.rmse, False),
    "r_squared": (M.r_squared, True),
}


def metric_fn(name: str):
    """Returns ``(callable, higher_is_better)`` for a metric name."""
    if name not in _METRICS:
        raise ConfigError(f"unknown metric {name!r}; choose from {sorted(_METRICS)}")
    return _METRICS[name]


def cross_validate(factory: Callable[[], object], X, y, metric: str,
                   k: int = 5, seed: int = 0, stratify: bool = True):
    """Mean/fold scores of a model built fresh per fold via ``factory``."""
    x = np.asarray(X, dtype=np.float64)
    yv = np.asarray(y)
    fn, _ = metric_fn(metric)
    if stratify:
        folds = stratified_kfold_indices(yv, k, seed)
    else:
        folds = kfold_indices(len(yv), k, seed)
    scores = []
    for train, test in folds:
        model = factory()
        model.fit(x[train], yv[train])
        scores.append(float(fn(yv[test], model.predict(x[test]))))
    return scores


# ---------------------------------------------------------------------------
# model search


@dataclass(frozen=True)
class ModelSpec:
    """A model family name plus concrete hyperparameters."""

    name: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}


@dataclass(frozen=True)
class ModelReport:
    spec: ModelSpec
    metric: str
    fold_scores: tuple
    mean_score: float
    std_score: float
    complexity: int

    def to_json(self) -> dict:
        return {
            "model": self.spec.to_json(),
            "metric": self.metric,
            "fold_scores": list(self.fold_scores),
            "mean_score": self.mean_score,
            "std_score": self.std_score,
            "complexity": self.complexity,
        }


def grid_candidates(name: str, grid: dict) -> list:
    """Cartesian product of a param grid, keys iterated in sorted order."""
    keys = sorted(grid)
    out = []
    for combo in itertools.product(*(grid[key] for key in keys)):
        out.append(ModelSpec(name, dict(zip(keys, combo))))
    return out


def random_candidates(name: str, grid: dict, budget: int, seed: int = 0) -> list:
    """Random subset (without replacement) of the grid, capped at budget."""
    full = grid_candidates(name, grid)
    if len(full) <= budget:
        return full
    rng = rng_for(seed, "random-search", name)
    picks = np.sort(rng.choice(len(full), size=budget, replace=False))
    return [full[i] for i in picks]


def search_models(specs: Sequence[ModelSpec], build: Callable[[ModelSpec, int], object],
                  X, y, metric: str, k: int = 5, seed: int = 0,
                  stratify: bool = True, budget: int = 32) -> list:
    """Cross-validate up to ``budget`` candidate specs and rank them.

    Ranking: better mean metric first; exact ties prefer the smaller
    fitted model, then the lexicographically earlier (name, params) repr.
    Returns ``ModelReport`` objects, best first.
    """
    if len(specs) > budget:
        raise ConfigError(
            f"{len(specs)} candidates exceed the search budget {budget}"
        )
    fn, higher = metric_fn(metric)
    x = np.asarray(X, dtype=np.float64)
    yv = np.asarray(y)
    fold_seed = derive_seed(seed, "search-folds")  # same folds for every spec
    if stratify:
        folds = stratified_kfold_indices(yv, k, fold_seed)
    else:
        folds = kfold_indices(len(yv), k, fold_seed)
    reports = []
    for spec in specs:
        scores = []
        model = None
        for train, test in folds:
            model = build(spec, seed)
            model.fit(x[train], yv[train])
            scores.append(float(fn(yv[test], model.predict(x[test]))))
        reports.append(ModelReport(
            spec=spec, metric=metric, fold_scores=tuple(scores),
            mean_score=float(np.mean(scores)), std_score=float(np.std(scores)),
            complexity=int(model.complexity()),
        ))
    sign = -1.0 if higher else 1.0
    reports.sort(key=lambda r: (sign * r.mean_score, r.complexity, r.spec.name,
                                repr(sorted(r.spec.params.items()))))
    return reports
