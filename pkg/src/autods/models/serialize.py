"""Trained-model JSON serialization and feature importances.

``model_to_json`` captures algorithm, hyperparameters, and every learned
parameter (coefficients, tree structures, stage values) so a fit can be
replayed and audited without the training data; ``model_from_json``
rebuilds a predict-capable object.  ``feature_importances`` reports total
impurity decrease for tree models and |standardized coefficient| for the
linear family.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import ConfigError
from .boosting import GradientBoostingClassifier, GradientBoostingRegressor
from .ensemble import StackingEnsemble, VotingEnsemble
from .forest import RandomForestClassifier, RandomForestRegressor
from .knn import KNNClassifier, KNNRegressor
from .linear import (
    LassoRegression,
    LinearRegression,
    LogisticRegression,
    RidgeRegression,
)
from .tree import DecisionTreeClassifier, DecisionTreeRegressor, _Node

_ALGO = {
    LinearRegression: ("linear_regression", "regression"),
    RidgeRegression: ("ridge", "regression"),
    LassoRegression: ("lasso", "regression"),
    LogisticRegression: ("logistic_regression", "classification"),
    KNNClassifier: ("knn", "classification"),
    KNNRegressor: ("knn", "regression"),
    DecisionTreeClassifier: ("decision_tree", "classification"),
    DecisionTreeRegressor: ("decision_tree", "regression"),
    RandomForestClassifier: ("random_forest", "classification"),
    RandomForestRegressor: ("random_forest", "regression"),
    GradientBoostingClassifier: ("gradient_boosting", "classification"),
    GradientBoostingRegressor: ("gradient_boosting", "regression"),
    VotingEnsemble: ("voting", None),
    StackingEnsemble: ("stacking", None),
}
_BY_NAME = {(algo, task): cls for cls, (algo, task) in _ALGO.items()
            if task is not None}


def _classes_json(classes) -> Optional[dict]:
    if classes is None:
        return None
    kind = classes.dtype.kind
    if kind == "b":
        return {"dtype": "bool", "values": [bool(c) for c in classes]}
    if kind in "iu":
        return {"dtype": "int", "values": [int(c) for c in classes]}
    if kind == "f":
        return {"dtype": "float", "values": [float(c) for c in classes]}
    return {"dtype": "str", "values": [str(c) for c in classes]}


def _classes_back(obj) -> Optional[np.ndarray]:
    if obj is None:
        return None
    dtype = {"bool": bool, "int": np.int64, "float": float,
             "str": "U"}[obj["dtype"]]
    return np.array(obj["values"], dtype=dtype)


def _tree_json(tree) -> dict:
    nodes = []
    stack = [tree.root_]
    index = {}
    order = []
    while stack:  # preorder collection
        node = stack.pop()
        index[id(node)] = len(order)
        order.append(node)
        if not node.is_leaf:
            stack.append(node.right)
            stack.append(node.left)
    for node in order:
        nodes.append({
            "f": int(node.feature), "t": float(node.threshold),
            "l": index[id(node.left)] if node.left is not None else -1,
            "r": index[id(node.right)] if node.right is not None else -1,
            "v": [float(v) for v in np.atleast_1d(node.value)],
            "n": int(node.n), "leaf_id": int(node.leaf_id),
        })
    return {
        "nodes": nodes,
        "n_nodes": tree.n_nodes_, "n_leaves": tree.n_leaves_,
        "n_features": tree.n_features_,
        "importance_gain": [float(g) for g in tree.importance_gain_],
    }


def _tree_back(cls, params: dict, learned: dict):
    tree = cls(**params)
    raw = learned["nodes"]
    nodes = []
    for spec in raw:
        node = _Node(np.array(spec["v"], dtype=float), spec["n"])
        node.feature = spec["f"]
        node.threshold = spec["t"]
        node.leaf_id = spec["leaf_id"]
        nodes.append(node)
    for node, spec in zip(nodes, raw):
        if spec["l"] >= 0:
            node.left = nodes[spec["l"]]
            node.right = nodes[spec["r"]]
    tree.root_ = nodes[0] if nodes else None
    tree.n_nodes_ = learned["n_nodes"]
    tree.n_leaves_ = learned["n_leaves"]
    tree.n_features_ = learned["n_features"]
    tree.importance_gain_ = np.array(learned["importance_gain"], dtype=float)
    return tree


def _tree_params(tree) -> dict:
    return {"max_depth": tree.max_depth, "min_leaf": tree.min_leaf,
            "max_features": tree.max_features, "seed": tree.seed}


def model_to_json(model) -> dict:
    """``{"algorithm", "task", "params", "learned"}`` for any built model."""
    cls = type(model)
    if cls not in _ALGO:
        raise ConfigError(f"cannot serialize model type {cls.__name__}")
    algo, task = _ALGO[cls]

    if cls in (LinearRegression, RidgeRegression, LassoRegression):
        params = {}
        if cls is RidgeRegression:
            params = {"alpha": model.alpha}
        elif cls is LassoRegression:
            params = {"alpha": model.alpha, "max_iter": model.max_iter,
                      "tol": model.tol}
        learned = {"coef": [float(c) for c in model.coef_],
                   "intercept": float(model.intercept_)}
    elif cls is LogisticRegression:
        params = {"max_iter": model.max_iter, "tol": model.tol}
        learned = {"coef": [[float(c) for c in row] for row in model.coef_],
                   "classes": _classes_json(model.classes_)}
    elif cls in (KNNClassifier, KNNRegressor):
        params = {"k": model.k}
        learned = {"x": [[float(v) for v in row] for row in model._x],
                   "mean": [float(v) for v in model._mean],
                   "scale": [float(v) for v in model._scale]}
        if cls is KNNClassifier:
            learned["classes"] = _classes_json(model.classes_)
            learned["y_codes"] = [int(i) for i in model._yi]
        else:
            learned["y"] = [float(v) for v in model._y]
    elif cls in (DecisionTreeClassifier, DecisionTreeRegressor):
        params = _tree_params(model)
        learned = {"tree": _tree_json(model)}
        if cls is DecisionTreeClassifier:
            learned["classes"] = _classes_json(model.classes_)
    elif cls in (RandomForestClassifier, RandomForestRegressor):
        params = {"n_trees": model.n_trees, "max_depth": model.max_depth,
                  "min_leaf": model.min_leaf,
                  "max_features": model.max_features, "seed": model.seed}
        learned = {"trees": [{"params": _tree_params(t),
                              "tree": _tree_json(t),
                              "classes": _classes_json(getattr(t, "classes_",
                                                               None))}
                             for t in model.trees_]}
        if cls is RandomForestClassifier:
            learned["classes"] = _classes_json(model.classes_)
    elif cls in (GradientBoostingClassifier, GradientBoostingRegressor):
        params = {"n_rounds": model.n_rounds,
                  "learning_rate": model.learning_rate,
                  "max_depth": model.max_depth, "min_leaf": model.min_leaf,
                  "seed": model.seed}
        learned = {"init": float(model.init_),
                   "stages": [{"params": _tree_params(tree),
                               "tree": _tree_json(tree),
                               "leaf_values": [float(v) for v in leaf_values]}
                              for tree, leaf_values in model.stages_]}
        if cls is GradientBoostingClassifier:
            learned["classes"] = _classes_json(model.classes_)
    elif cls is VotingEnsemble:
        task = model.task
        params = {"weights": list(model.weights)}
        learned = {"members": [model_to_json(m) for m in model.members_],
                   "classes": _classes_json(model.classes_)}
    else:  # StackingEnsemble
        task = model.task
        params = {"k": model.k, "seed": model.seed}
        learned = {"members": [model_to_json(m) for m in model.members_],
                   "meta": model_to_json(model.meta_),
                   "classes": _classes_json(model.classes_)}
    return {"algorithm": algo, "task": task, "params": params,
            "learned": learned}


def model_from_json(obj: dict):
    """Rebuild a predict-capable model from :func:`model_to_json` output."""
    algo, task = obj["algorithm"], obj["task"]
    params, learned = dict(obj["params"]), obj["learned"]
    if algo == "voting":
        model = VotingEnsemble.__new__(VotingEnsemble)
        model.factories = None
        model.task = task
        model.weights = list(params["weights"])
        model.members_ = [model_from_json(m) for m in learned["members"]]
        model.classes_ = _classes_back(learned["classes"])
        return model
    if algo == "stacking":
        model = StackingEnsemble.__new__(StackingEnsemble)
        model.factories = None
        model.task = task
        model.k = params["k"]
        model.seed = params["seed"]
        model.members_ = [model_from_json(m) for m in learned["members"]]
        model.meta_ = model_from_json(learned["meta"])
        model.classes_ = _classes_back(learned["classes"])
        return model
    cls = _BY_NAME.get((algo, task))
    if cls is None:
        raise ConfigError(f"unknown serialized model {algo!r}/{task!r}")
    if cls in (LinearRegression, RidgeRegression, LassoRegression):
        model = cls(**params)
        model.coef_ = np.array(learned["coef"], dtype=float)
        model.intercept_ = learned["intercept"]
        return model
    if cls is LogisticRegression:
        model = cls(**params)
        model.coef_ = np.array(learned["coef"], dtype=float)
        model.classes_ = _classes_back(learned["classes"])
        return model
    if cls in (KNNClassifier, KNNRegressor):
        model = cls(k=params["k"])
        model._x = np.array(learned["x"], dtype=float)
        model._mean = np.array(learned["mean"], dtype=float)
        model._scale = np.array(learned["scale"], dtype=float)
        if cls is KNNClassifier:
            model.classes_ = _classes_back(learned["classes"])
            model._yi = np.array(learned["y_codes"], dtype=np.int64)
        else:
            model._y = np.array(learned["y"], dtype=float)
        return model
    if cls in (DecisionTreeClassifier, DecisionTreeRegressor):
        model = _tree_back(cls, params, learned["tree"])
        if cls is DecisionTreeClassifier:
            model.classes_ = _classes_back(learned["classes"])
        return model
    if cls in (RandomForestClassifier, RandomForestRegressor):
        model = cls(n_trees=params["n_trees"], max_depth=params["max_depth"],
                    min_leaf=params["min_leaf"],
                    max_features=params["max_features"], seed=params["seed"])
        tree_cls = model.tree_cls
        model.trees_ = []
        for entry in learned["trees"]:
            tree = _tree_back(tree_cls, entry["params"], entry["tree"])
            if entry.get("classes") is not None:
                tree.classes_ = _classes_back(entry["classes"])
            model.trees_.append(tree)
        if cls is RandomForestClassifier:
            model.classes_ = _classes_back(learned["classes"])
        return model
    # gradient boosting
    model = cls(**params)
    model.init_ = learned["init"]
    model.stages_ = []
    for entry in learned["stages"]:
        tree = _tree_back(DecisionTreeRegressor, entry["params"],
                          entry["tree"])
        model.stages_.append(
            (tree, np.array(entry["leaf_values"], dtype=float)))
    if cls is GradientBoostingClassifier:
        model.classes_ = _classes_back(learned["classes"])
    return model


# ---------------------------------------------------------------------------
# Importances


def feature_importances(model, X=None,
                        normalize: bool = True) -> Optional[np.ndarray]:
    """Per-feature importance, or ``None`` for models without one.

    Tree models report total impurity decrease accumulated over every
    split; linear models report |coefficient| x feature standard deviation
    (pass the training matrix as ``X``).  KNN and ensembles have no
    intrinsic importance.
    """
    cls = type(model)
    gains = None
    if cls in (DecisionTreeClassifier, DecisionTreeRegressor):
        gains = np.asarray(model.importance_gain_, dtype=float).copy()
    elif cls in (RandomForestClassifier, RandomForestRegressor):
        gains = np.sum([t.importance_gain_ for t in model.trees_], axis=0)
    elif cls in (GradientBoostingClassifier, GradientBoostingRegressor):
        gains = np.sum([tree.importance_gain_ for tree, _ in model.stages_],
                       axis=0)
    elif cls in (LinearRegression, RidgeRegression, LassoRegression,
                 LogisticRegression):
        if X is None:
            raise ConfigError(
                "linear importances need the training matrix X")
        std = np.asarray(X, dtype=float).std(axis=0, ddof=0)
        if cls is LogisticRegression:
            slopes = np.abs(model.coef_[:, 1:]).mean(axis=0)
        else:
            slopes = np.abs(model.coef_)
        gains = slopes * std
    if gains is None:
        return None
    if normalize:
        total = float(gains.sum())
        if total > 0.0:
            gains = gains / total
    return gains
