"""Model zoo: linear family, KNN, CART, forests, boosting, ensembles.

``build_model`` is the single entry point the pipeline uses; it maps a
(name, task, params, seed) quadruple onto a concrete estimator.
"""

from __future__ import annotations

from ..errors import ConfigError
from .boosting import GradientBoostingClassifier, GradientBoostingRegressor
from .cv import (
    ModelReport,
    ModelSpec,
    cross_validate,
    grid_candidates,
    kfold_indices,
    metric_fn,
    random_candidates,
    search_models,
    stratified_kfold_indices,
)
from .ensemble import StackingEnsemble, VotingEnsemble
from .forest import RandomForestClassifier, RandomForestRegressor
from .knn import KNNClassifier, KNNRegressor
from .linear import (
    LassoRegression,
    LinearRegression,
    LogisticRegression,
    RidgeRegression,
)
from .metrics import (
    accuracy,
    classification_metrics,
    f1_score,
    precision,
    r_squared,
    recall,
    regression_metrics,
    rmse,
)
from .serialize import feature_importances, model_from_json, model_to_json
from .tree import DecisionTreeClassifier, DecisionTreeRegressor

_SEEDED = {"decision_tree", "random_forest", "gradient_boosting"}

_REGISTRY = {
    ("linear_regression", "regression"): LinearRegression,
    ("ridge", "regression"): RidgeRegression,
    ("lasso", "regression"): LassoRegression,
    ("logistic_regression", "classification"): LogisticRegression,
    ("knn", "classification"): KNNClassifier,
    ("knn", "regression"): KNNRegressor,
    ("decision_tree", "classification"): DecisionTreeClassifier,
    ("decision_tree", "regression"): DecisionTreeRegressor,
    ("random_forest", "classification"): RandomForestClassifier,
    ("random_forest", "regression"): RandomForestRegressor,
    ("gradient_boosting", "classification"): GradientBoostingClassifier,
    ("gradient_boosting", "regression"): GradientBoostingRegressor,
}


def model_names(task: str) -> list:
    return sorted(name for name, t in _REGISTRY if t == task)


def build_model(name: str, task: str, params: dict = None, seed: int = 0):
    """Instantiate an unfitted model from the registry."""
    key = (name, task)
    if key not in _REGISTRY:
        raise ConfigError(
            f"no model {name!r} for task {task!r}; known: {model_names(task)}"
        )
    kwargs = dict(params or {})
    if name in _SEEDED:
        kwargs.setdefault("seed", seed)
    return _REGISTRY[key](**kwargs)


__all__ = [
    "DecisionTreeClassifier",
    "DecisionTreeRegressor",
    "GradientBoostingClassifier",
    "GradientBoostingRegressor",
    "KNNClassifier",
    "KNNRegressor",
    "LassoRegression",
    "LinearRegression",
    "LogisticRegression",
    "ModelReport",
    "ModelSpec",
    "RandomForestClassifier",
    "RandomForestRegressor",
    "RidgeRegression",
    "StackingEnsemble",
    "VotingEnsemble",
    "accuracy",
    "build_model",
    "classification_metrics",
    "cross_validate",
    "f1_score",
    "grid_candidates",
    "kfold_indices",
    "metric_fn",
    "model_names",
    "precision",
    "r_squared",
    "random_candidates",
    "recall",
    "regression_metrics",
    "rmse",
    "search_models",
    "stratified_kfold_indices",
]
