"""Rule-based cleaning: imputation, outlier handling, ledger recording.

Strategy selection is driven by missingness rates: light gaps get simple
statistics, moderate gaps get chained ridge imputation, heavy gaps get a
forest imputer that can pick up nonlinear structure.  Categorical columns
keep their missingness visible through an explicit ``__missing__`` level
once it is frequent enough to carry signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._seeding import derive_seed
from .errors import ConfigError, DataError, InsufficientDataError
from .ledger import Clock, LedgerEntry, MetadataLedger
from .models.forest import RandomForestRegressor
from .models.linear import RidgeRegression
from .stats.outliers import iqr_fences, iqr_outliers, zscore_outliers
from .table import (
    Column,
    DataTable,
    boolean_column,
    categorical_column,
    numeric_column,
    quantile,
)

__all__ = [
    "CleaningConfig",
    "CleaningPlan",
    "plan_cleaning",
    "impute_simple",
    "impute_mice",
    "impute_forest",
    "handle_outliers",
    "run_cleaning",
]

MISSING_CATEGORY = "__missing__"

_NUMERIC_STRATEGIES = ("mean", "median", "mice", "forest")
_CATEGORICAL_STRATEGIES = ("mode", "missing_category")
_OUTLIER_METHODS = ("zscore", "iqr")
_OUTLIER_ACTIONS = ("flag", "winsorize", "drop_row")


@dataclass(frozen=True)
class CleaningConfig:
    """Knobs for the cleaning stage (the `cleaning` config section)."""

    target: Optional[str] = None
    outlier_method: str = "zscore"
    outlier_action: str = "flag"
    zscore_threshold: float = 3.0
    iqr_multiplier: float = 1.5
    numeric_simple_below: float = 0.05
    numeric_forest_above: float = 0.30
    categorical_missing_above: float = 0.01
    mice_iterations: int = 10
    strategy_overrides: dict = field(default_factory=dict)
    drop_columns: tuple = ()

    def __post_init__(self):
        if not all(isinstance(c, str) for c in self.drop_columns):
            raise ConfigError("drop_columns must name columns")
        object.__setattr__(self, "drop_columns", tuple(self.drop_columns))
        if self.target is not None and self.target in self.drop_columns:
            raise ConfigError(f"cannot drop the target column {self.target!r}")
        if self.outlier_method not in _OUTLIER_METHODS:
            raise ConfigError(f"unknown outlier method {self.outlier_method!r}")
        if self.outlier_action not in _OUTLIER_ACTIONS:
            raise ConfigError(f"unknown outlier action {self.outlier_action!r}")
        for name, value in (("zscore_threshold", self.zscore_threshold),
                            ("iqr_multiplier", self.iqr_multiplier),
                            ("mice_iterations", self.mice_iterations)):
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if not (0 <= self.numeric_simple_below <= self.numeric_forest_above <= 1):
            raise ConfigError("numeric missingness thresholds must satisfy "
                              "0 <= simple_below <= forest_above <= 1")
        allowed = set(_NUMERIC_STRATEGIES) | set(_CATEGORICAL_STRATEGIES)
        for col, strat in self.strategy_overrides.items():
            if strat not in allowed:
                raise ConfigError(f"unknown strategy override {strat!r} for {col!r}")

    @classmethod
    def from_json(cls, obj: dict) -> "CleaningConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown cleaning config fields: {sorted(unknown)}")
        return cls(**obj)


@dataclass(frozen=True)
class CleaningPlan:
    """Resolved per-column strategies plus outlier policy."""

    numeric_strategy: dict
    categorical_strategy: dict
    outlier_method: str
    outlier_action: str
    thresholds: dict

    def __post_init__(self):
        for col, s in self.numeric_strategy.items():
            if s not in _NUMERIC_STRATEGIES:
                raise ConfigError(f"invalid numeric strategy {s!r} for {col!r}")
        for col, s in self.categorical_strategy.items():
            if s not in _CATEGORICAL_STRATEGIES:
                raise ConfigError(f"invalid categorical strategy {s!r} for {col!r}")
        if self.outlier_method not in _OUTLIER_METHODS:
            raise ConfigError(f"unknown outlier method {self.outlier_method!r}")
        if self.outlier_action not in _OUTLIER_ACTIONS:
            raise ConfigError(f"unknown outlier action {self.outlier_action!r}")
        for name, value in self.thresholds.items():
            if value <= 0:
                raise ConfigError(f"threshold {name} must be positive, got {value}")

    def to_json(self) -> dict:
        return {
            "numeric_strategy": dict(self.numeric_strategy),
            "categorical_strategy": dict(self.categorical_strategy),
            "outlier_method": self.outlier_method,
            "outlier_action": self.outlier_action,
            "thresholds": dict(self.thresholds),
        }


def plan_cleaning(table: DataTable, config: CleaningConfig) -> CleaningPlan:
    """Pick a strategy per column from its missingness rate.

    Numeric: below ``numeric_simple_below`` → median; up to
    ``numeric_forest_above`` → mice; beyond → forest.  Categorical and
    boolean: above ``categorical_missing_above`` → explicit missing
    category (booleans fall back to mode — they have no levels to extend);
    otherwise mode.
    """
    if table.n_rows == 0:
        raise DataError("cannot plan cleaning for an empty table")
    n = table.n_rows
    numeric = {}
    discrete = {}
    for col in table.columns:
        if col.name == config.target:
            continue
        override = config.strategy_overrides.get(col.name)
        frac = col.n_missing / n
        if col.kind == "numeric":
            if override is not None:
                if override not in _NUMERIC_STRATEGIES:
                    raise ConfigError(
                        f"override {override!r} not usable for numeric {col.name!r}")
                numeric[col.name] = override
            elif frac < config.numeric_simple_below:
                numeric[col.name] = "median"
            elif frac <= config.numeric_forest_above:
                numeric[col.name] = "mice"
            else:
                numeric[col.name] = "forest"
        elif col.kind in ("categorical", "boolean"):
            if override is not None:
                if override not in _CATEGORICAL_STRATEGIES:
                    raise ConfigError(
                        f"override {override!r} not usable for {col.kind} {col.name!r}")
                discrete[col.name] = override
            elif frac > config.categorical_missing_above and col.kind == "categorical":
                discrete[col.name] = "missing_category"
            else:
                discrete[col.name] = "mode"
        # datetime columns are summarized but not imputed (out of scope)
    return CleaningPlan(
        numeric_strategy=numeric,
        categorical_strategy=discrete,
        outlier_method=config.outlier_method,
        outlier_action=config.outlier_action,
        thresholds={"zscore": config.zscore_threshold,
                    "iqr": config.iqr_multiplier,
                    "numeric_simple_below": max(config.numeric_simple_below, 1e-12),
                    "numeric_forest_above": config.numeric_forest_above,
                    "categorical_missing_above": config.categorical_missing_above},
    )


# ---------------------------------------------------------------------------
# imputation


def _fill_numeric(col: Column, value: float) -> Column:
    vals = col.values.copy()
    vals[col.missing] = value
    return numeric_column(col.name, vals)


def impute_simple(table: DataTable, strategies: dict) -> DataTable:
    """Mean/median fills for numeric, mode/missing-category for the rest."""
    new_cols = []
    for name, strategy in strategies.items():
        col = table.column(name)
        if not col.missing.any():
            continue
        if strategy in ("mean", "median"):
            observed = col.non_missing()
            if len(observed) == 0:
                raise DataError(f"column {name!r} has no observed values to impute from")
            fill = (float(observed.mean()) if strategy == "mean"
                    else quantile(np.sort(observed), 0.5))
            new_cols.append(_fill_numeric(col, fill))
        elif strategy == "mode":
            observed = col.non_missing()
            if len(observed) == 0:
                raise DataError(f"column {name!r} has no observed values to impute from")
            if col.kind == "boolean":
                trues = int(observed.sum())
                fill = trues > len(observed) - trues  # tie -> False
                vals = col.values.copy()
                vals[col.missing] = fill
                new_cols.append(boolean_column(name, vals))
            else:
                levels, counts = np.unique(observed, return_counts=True)
                fill = str(levels[counts.argmax()])  # count tie -> lexicographic
                vals = col.values.copy()
                vals[col.missing] = fill
                new_cols.append(categorical_column(name, vals))
        elif strategy == "missing_category":
            vals = col.values.copy()
            vals[col.missing] = MISSING_CATEGORY
            new_cols.append(categorical_column(name, vals))
        else:
            raise ConfigError(f"impute_simple cannot apply strategy {strategy!r}")
    out = table
    for col in new_cols:
        out = out.replace_column(col)
    return out


def _numeric_frame(table: DataTable, names: Sequence[str]):
    mat = np.column_stack([table.column(n).values for n in names])
    miss = np.column_stack([table.column(n).missing for n in names])
    return mat, miss


def _median_start(mat: np.ndarray, miss: np.ndarray) -> np.ndarray:
    filled = mat.copy()
    for j in range(mat.shape[1]):
        observed = mat[~miss[:, j], j]
        if len(observed) == 0:
            raise DataError("cannot impute a column with zero observed values")
        filled[miss[:, j], j] = quantile(np.sort(observed), 0.5)
    return filled


def _chained_impute(table: DataTable, targets: Sequence[str], iterations: int,
                    fit_predict, exclude: Sequence[str] = ()) -> DataTable:
    """Shared chained-imputation loop.

    Fills start at column medians; each pass revisits the target columns in
    ascending-missingness order and re-predicts their missing cells from
    every other numeric column's current values.  ``exclude`` names columns
    barred from the predictor pool (the supervised target, chiefly).
    Columns that are >90% missing (or have <2 observed values) keep the
    median start — the caller records that fallback in the ledger.
    """
    numeric_names = [n for n in table.names_of_kind("numeric")
                     if n not in exclude]
    if len(numeric_names) < 2:
        raise InsufficientDataError(
            f"chained imputation needs >= 2 numeric columns, got {len(numeric_names)}")
    targets = [t for t in targets if table.column(t).missing.any()]
    if not targets:
        return table
    for t in targets:
        if table.kind(t) != "numeric":
            raise DataError(f"chained imputation target {t!r} is not numeric")

    mat, miss = _numeric_frame(table, numeric_names)
    col_of = {n: j for j, n in enumerate(numeric_names)}
    filled = _median_start(mat, miss)
    workable = [t for t in targets
                if miss[:, col_of[t]].mean() <= 0.90
                and (~miss[:, col_of[t]]).sum() >= 2]
    order = sorted(workable, key=lambda t: (miss[:, col_of[t]].sum(), t))
    for _ in range(iterations):
        for name in order:
            j = col_of[name]
            rows_obs = ~miss[:, j]
            predictors = [jj for jj in range(mat.shape[1]) if jj != j]
            filled[miss[:, j], j] = fit_predict(
                name,
                filled[rows_obs][:, predictors], mat[rows_obs, j],
                filled[miss[:, j]][:, predictors],
            )
    out = table
    for name in targets:
        j = col_of[name]
        out = out.replace_column(numeric_column(name, filled[:, j]))
    return out


def impute_mice(table: DataTable, targets: Sequence[str], iterations: int = 10,
                seed: int = 0, exclude: Sequence[str] = ()) -> DataTable:
    """Chained ridge imputation (multiple-imputation style, deterministic).

    Each of the ``iterations`` passes re-fits a ridge regression (λ=1e-3)
    of every target on all other numeric columns using currently filled
    values.  ``seed`` is accepted for interface symmetry with
    :func:`impute_forest`; the ridge chain itself is deterministic.
    """
    del seed

    def fit_predict(name, x_obs, y_obs, x_mis):
        del name
        return RidgeRegression(alpha=1e-3).fit(x_obs, y_obs).predict(x_mis)

    return _chained_impute(table, targets, iterations, fit_predict, exclude)


def impute_forest(table: DataTable, targets: Sequence[str], seed: int = 0,
                  exclude: Sequence[str] = ()) -> DataTable:
    """Single chained pass of random-forest regressors (50 trees, depth 8)."""

    def fit_predict(name, x_obs, y_obs, x_mis):
        model = RandomForestRegressor(
            n_trees=50, max_depth=8,
            seed=derive_seed(seed, "forest-impute", name)).fit(x_obs, y_obs)
        return model.predict(x_mis)

    return _chained_impute(table, targets, 1, fit_predict, exclude)


# ---------------------------------------------------------------------------
# outliers


def _outlier_bounds(values: np.ndarray, method: str, thresholds: dict):
    if method == "zscore":
        mean = float(values.mean())
        std = float(values.std(ddof=1))
        half = thresholds["zscore"] * std
        return mean - half, mean + half
    return iqr_fences(values, thresholds["iqr"])


def handle_outliers(table: DataTable, plan: CleaningPlan) -> DataTable:
    """Apply the plan's outlier action to every planned numeric column.

    ``flag`` adds a ``<col>__outlier`` boolean column (only when something
    was flagged, so clean data passes through untouched); ``winsorize``
    clips to the method's bounds; ``drop_row`` removes rows flagged in any
    planned column.
    """
    names = [n for n in plan.numeric_strategy if n in table]
    masks = {}
    for name in names:
        col = table.column(name)
        vals = col.values[~col.missing]
        if len(vals) < 2 or np.all(vals == vals[0]):
            continue
        if plan.outlier_method == "zscore":
            mask = zscore_outliers(np.where(col.missing, np.nan, col.values),
                                   plan.thresholds["zscore"])
        else:
            mask = iqr_outliers(np.where(col.missing, np.nan, col.values),
                                plan.thresholds["iqr"])
        if mask.any():
            masks[name] = mask

    if not masks:
        return table
    if plan.outlier_action == "flag":
        return table.with_columns(
            boolean_column(f"{name}__outlier", masks[name]) for name in masks)
    if plan.outlier_action == "winsorize":
        out = table
        for name, mask in masks.items():
            col = out.column(name)
            observed = col.values[~col.missing]
            lo, hi = _outlier_bounds(observed, plan.outlier_method, plan.thresholds)
            vals = np.clip(col.values, lo, hi)
            if col.missing.any():
                vals = np.where(col.missing, col.values, vals)
                out = out.replace_column(
                    numeric_column(name, vals, missing=col.missing.copy()))
            else:
                out = out.replace_column(numeric_column(name, vals))
        return out
    # drop_row
    any_mask = np.zeros(table.n_rows, dtype=bool)
    for mask in masks.values():
        any_mask |= mask
    return table.take_rows(np.flatnonzero(~any_mask))


# ---------------------------------------------------------------------------
# stage driver


def _target_tuple(config: CleaningConfig) -> tuple:
    return () if config.target is None else (config.target,)


def run_cleaning(table: DataTable, config: CleaningConfig, seed: int = 0,
                 ledger: Optional[MetadataLedger] = None,
                 clock: Optional[Clock] = None):
    """Plan and execute cleaning; returns ``(table, plan, ledger)``.

    Ledger entries record, in execution order: imputation per strategy
    (with per-column imputed-cell counts), then outlier handling (with
    per-column flagged counts).
    """
    ledger = ledger if ledger is not None else MetadataLedger()
    clock = clock if clock is not None else Clock()

    def record(action, columns, params, results):
        nonlocal ledger
        ledger = ledger.append(LedgerEntry(
            stage="clean", ts=clock.now(), action=action, columns=list(columns),
            params=params, results=results, provenance=("cleaning-agent",)))

    if config.drop_columns:
        absent = sorted(set(config.drop_columns) - set(table.names))
        if absent:
            raise ConfigError(f"drop_columns not in table: {absent}")
        table = table.drop_columns(config.drop_columns)
        record("drop_columns", sorted(config.drop_columns), {},
               {"columns_remaining": len(table.names)})

    plan = plan_cleaning(table, config)
    missing_before = {c.name: int(c.n_missing) for c in table.columns}

    by_strategy = {}
    for name, strat in {**plan.numeric_strategy, **plan.categorical_strategy}.items():
        if missing_before.get(name, 0) > 0:
            by_strategy.setdefault(strat, []).append(name)

    out = table
    for strat in ("mean", "median", "mode", "missing_category"):
        cols = sorted(by_strategy.get(strat, []))
        if not cols:
            continue
        out = impute_simple(out, {c: strat for c in cols})
        record(f"impute_{strat}", cols, {},
               {c: missing_before[c] for c in cols})

    mice_cols = sorted(by_strategy.get("mice", []))
    if mice_cols:
        hopeless = [c for c in mice_cols
                    if table.column(c).n_missing / table.n_rows > 0.90]
        out = impute_mice(out, mice_cols, iterations=config.mice_iterations,
                          seed=seed, exclude=_target_tuple(config))
        params = {"iterations": config.mice_iterations, "ridge_lambda": 1e-3}
        if hopeless:
            params["median_fallback"] = ",".join(hopeless)
        record("impute_mice", mice_cols, params,
               {c: missing_before[c] for c in mice_cols})

    forest_cols = sorted(by_strategy.get("forest", []))
    if forest_cols:
        hopeless = [c for c in forest_cols
                    if table.column(c).n_missing / table.n_rows > 0.90]
        out = impute_forest(out, forest_cols, seed=seed,
                            exclude=_target_tuple(config))
        params = {"n_trees": 50, "max_depth": 8}
        if hopeless:
            params["median_fallback"] = ",".join(hopeless)
        record("impute_forest", forest_cols, params,
               {c: missing_before[c] for c in forest_cols})

    before_outliers = out
    out = handle_outliers(out, plan)
    if plan.outlier_action == "flag":
        flagged = [c for c in out.names if c.endswith("__outlier")
                   and c not in before_outliers]
        counts = {c: int(out.column(c).values.sum()) for c in flagged}
    elif plan.outlier_action == "winsorize":
        counts = {}
        for name in plan.numeric_strategy:
            if name in out:
                changed = int((out.column(name).values
                               != before_outliers.column(name).values).sum())
                if changed:
                    counts[name] = changed
    else:
        counts = {"rows_dropped": before_outliers.n_rows - out.n_rows}
    record(f"outliers_{plan.outlier_action}",
           sorted(plan.numeric_strategy),
           {"method": plan.outlier_method,
            "threshold": plan.thresholds[plan.outlier_method]},
           counts)
    return out, plan, ledger
