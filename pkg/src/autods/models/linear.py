"""Linear models: OLS, ridge, lasso, and logistic regression.

All solve through dense normal equations / IRLS — datasets here are
thousands of rows, not millions.  Singular systems fall back to a small
ridge instead of failing.
"""

from __future__ import annotations

import numpy as np

from ..errors import InsufficientDataError, StatsError

__all__ = ["LinearRegression", "RidgeRegression", "LassoRegression",
           "LogisticRegression"]

_SINGULAR_RIDGE = 1e-8


def _soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def _as_matrix(X) -> np.ndarray:
    x = np.asarray(X, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise StatsError(f"model input must be 2-D, got ndim={x.ndim}")
    if not np.isfinite(x).all():
        raise StatsError("model input contains missing or non-finite values")
    return x


def _check_xy(X, y):
    x = _as_matrix(X)
    yv = np.asarray(y, dtype=np.float64).ravel()
    if len(x) != len(yv):
        raise StatsError(f"X and y differ in length: {len(x)} vs {len(yv)}")
    if len(x) < 2:
        raise InsufficientDataError(f"need >= 2 training rows, got {len(x)}")
    if not np.isfinite(yv).all():
        raise StatsError("target contains missing or non-finite values")
    return x, yv


def _solve_sym(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a symmetric system; retry with a ridge when singular."""
    try:
        w = np.linalg.solve(a, b)
        if np.isfinite(w).all():
            return w
    except np.linalg.LinAlgError:
        pass
    bump = _SINGULAR_RIDGE * max(1.0, float(np.trace(a)) / len(a))
    return np.linalg.solve(a + np.eye(len(a)) * bump, b)


class LinearRegression:
    """Ordinary least squares with intercept."""

    def __init__(self):
        self.coef_ = None
        self.intercept_ = 0.0

    def fit(self, X, y):
        x, yv = _check_xy(X, y)
        xm = x.mean(axis=0)
        ym = float(yv.mean())
        xc = x - xm
        self.coef_ = _solve_sym(xc.T @ xc, xc.T @ (yv - ym))
        self.intercept_ = ym - float(xm @ self.coef_)
        return self

    def predict(self, X):
        return _as_matrix(X) @ self.coef_ + self.intercept_

    def complexity(self) -> int:
        return len(self.coef_) + 1


class RidgeRegression(LinearRegression):
    """L2-penalized least squares; the intercept is not penalized."""

    def __init__(self, alpha: float = 1.0):
        super().__init__()
        if alpha < 0:
            raise StatsError(f"alpha must be >= 0, got {alpha}")
        self.alpha = alpha

    def fit(self, X, y):
        x, yv = _check_xy(X, y)
        xm = x.mean(axis=0)
        ym = float(yv.mean())
        xc = x - xm
        d = x.shape[1]
        self.coef_ = _solve_sym(xc.T @ xc + self.alpha * np.eye(d), xc.T @ (yv - ym))
        self.intercept_ = ym - float(xm @ self.coef_)
        return self


class LassoRegression(LinearRegression):
    """L1-penalized least squares fit by cyclic coordinate descent.

    Objective: ``(1 / 2n) * ||y - Xw - b||^2 + alpha * ||w||_1`` with an
    unpenalized intercept.  Stops when the largest coefficient update in a
    sweep falls below ``tol``.
    """

    def __init__(self, alpha: float = 1.0, max_iter: int = 1000, tol: float = 1e-7):
        super().__init__()
        if alpha < 0:
            raise StatsError(f"alpha must be >= 0, got {alpha}")
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        x, yv = _check_xy(X, y)
        n, d = x.shape
        xm = x.mean(axis=0)
        ym = float(yv.mean())
        xc = x - xm
        yc = yv - ym
        col_sq = (xc * xc).sum(axis=0) / n
        w = np.zeros(d)
        resid = yc.copy()
        for _ in range(self.max_iter):
            max_delta = 0.0
            for j in range(d):
                if col_sq[j] == 0.0:
                    continue
                rho = float(xc[:, j] @ resid) / n + col_sq[j] * w[j]
                new = _soft_threshold(rho, self.alpha) / col_sq[j]
                delta = new - w[j]
                if delta != 0.0:
                    resid -= delta * xc[:, j]
                    w[j] = new
                    max_delta = max(max_delta, abs(delta))
            if max_delta < self.tol:
                break
        self.coef_ = w
        self.intercept_ = ym - float(xm @ w)
        return self

    def complexity(self) -> int:
        return int((self.coef_ != 0.0).sum()) + 1


class LogisticRegression:
    """Binary (or one-vs-rest multiclass) logistic regression via IRLS."""

    def __init__(self, max_iter: int = 100, tol: float = 1e-8):
        self.max_iter = max_iter
        self.tol = tol
        self.classes_ = None
        self.coef_ = None  # (n_models, d + 1), column 0 is the intercept

    def _fit_binary(self, x1: np.ndarray, target: np.ndarray) -> np.ndarray:
        d1 = x1.shape[1]
        w = np.zeros(d1)
        for _ in range(self.max_iter):
            eta = np.clip(x1 @ w, -30.0, 30.0)
            p = 1.0 / (1.0 + np.exp(-eta))
            weight = np.maximum(p * (1.0 - p), 1e-10)
            grad = x1.T @ (target - p)
            hess = (x1 * weight[:, None]).T @ x1 + 1e-10 * np.eye(d1)
            delta = _solve_sym(hess, grad)
            w = w + delta
            if float(np.abs(delta).max()) < self.tol:
                break
        return w

    def fit(self, X, y):
        x = _as_matrix(X)
        yv = np.asarray(y).ravel()
        if len(x) != len(yv):
            raise StatsError(f"X and y differ in length: {len(x)} vs {len(yv)}")
        self.classes_ = np.unique(yv)
        if len(self.classes_) < 2:
            raise StatsError("logistic regression needs >= 2 classes in training data")
        x1 = np.hstack([np.ones((len(x), 1)), x])
        if len(self.classes_) == 2:
            target = (yv == self.classes_[1]).astype(np.float64)
            self.coef_ = self._fit_binary(x1, target)[None, :]
        else:
            rows = [self._fit_binary(x1, (yv == c).astype(np.float64))
                    for c in self.classes_]
            self.coef_ = np.vstack(rows)
        return self

    def predict_proba(self, X):
        x = _as_matrix(X)
        x1 = np.hstack([np.ones((len(x), 1)), x])
        if len(self.classes_) == 2:
            eta = np.clip(x1 @ self.coef_[0], -30.0, 30.0)
            p1 = 1.0 / (1.0 + np.exp(-eta))
            return np.column_stack([1.0 - p1, p1])
        eta = np.clip(x1 @ self.coef_.T, -30.0, 30.0)
        raw = 1.0 / (1.0 + np.exp(-eta))
        return raw / raw.sum(axis=1, keepdims=True)

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def complexity(self) -> int:
        return int(self.coef_.size)
