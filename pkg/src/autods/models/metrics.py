"""Evaluation metrics for classification and regression."""

from __future__ import annotations

import math

import numpy as np

from ..errors import StatsError

__all__ = ["accuracy", "precision", "recall", "f1_score", "rmse", "r_squared",
           "classification_metrics", "regression_metrics"]


def _pair(y_true, y_pred):
    t = np.asarray(y_true).ravel()
    p = np.asarray(y_pred).ravel()
    if len(t) != len(p):
        raise StatsError(f"metric inputs differ in length: {len(t)} vs {len(p)}")
    if len(t) == 0:
        raise StatsError("metric of empty arrays")
    return t, p


def accuracy(y_true, y_pred) -> float:
    t, p = _pair(y_true, y_pred)
    return float((t == p).mean())


def _prf_one(t, p, positive):
    tp = float(((p == positive) & (t == positive)).sum())
    fp = float(((p == positive) & (t != positive)).sum())
    fn = float(((p != positive) & (t == positive)).sum())
    prec = tp / (tp + fp) if tp + fp > 0 else 0.0
    rec = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
    return prec, rec, f1


def _prf(y_true, y_pred, positive, which):
    t, p = _pair(y_true, y_pred)
    labels = np.unique(np.concatenate([t, p]))
    if len(labels) <= 2:
        return _prf_one(t, p, positive)[which]
    # macro average over observed labels
    return float(np.mean([_prf_one(t, p, lab)[which] for lab in labels]))


def precision(y_true, y_pred, positive=1) -> float:
    """Binary precision for ``positive``; macro-averaged beyond two labels.
    Zero when the class is never predicted."""
    return _prf(y_true, y_pred, positive, 0)


def recall(y_true, y_pred, positive=1) -> float:
    return _prf(y_true, y_pred, positive, 1)


def f1_score(y_true, y_pred, positive=1) -> float:
    return _prf(y_true, y_pred, positive, 2)


def rmse(y_true, y_pred) -> float:
    t, p = _pair(y_true, y_pred)
    return math.sqrt(float(((t.astype(np.float64) - p) ** 2).mean()))


def r_squared(y_true, y_pred) -> float:
    """Coefficient of determination; 0.0 for a constant target."""
    t, p = _pair(y_true, y_pred)
    t = t.astype(np.float64)
    ss_tot = float(((t - t.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 0.0
    ss_res = float(((t - p) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def classification_metrics(y_true, y_pred, positive=1) -> dict:
    return {
        "accuracy": accuracy(y_true, y_pred),
        "precision": precision(y_true, y_pred, positive),
        "recall": recall(y_true, y_pred, positive),
        "f1": f1_score(y_true, y_pred, positive),
    }


def regression_metrics(y_true, y_pred) -> dict:
    return {"rmse": rmse(y_true, y_pred), "r_squared": r_squared(y_true, y_pred)}
