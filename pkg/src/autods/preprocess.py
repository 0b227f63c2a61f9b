"""Hypothesis-aware preprocessing.

Transforms are declared as :class:`TransformSpec` values, fitted on training
rows only, and appended as new columns — originals are never dropped and
``hyp_*`` evidence columns are never touched.  A fitted spec carries every
statistic needed to replay the transform on unseen rows, so train and test
always move through identical arithmetic.

Naming follows one rule per kind: ``standardized_X``, ``normalized_X``,
``robust_scaled_X``, ``log_X``, ``sqrt_X``, ``power_trans_X``,
``bucketed_X``, ``encoded_X`` — with an explicit ``name`` param available
for aliases like ``is_HighBalance``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DataError, DomainError
from .ledger import Clock, LedgerEntry
from .table import (
    Column,
    DataTable,
    boolean_column,
    categorical_column,
    numeric_column,
    quantile,
)

_NUMERIC_KINDS = ("standard_scale", "minmax_scale", "robust_scale",
                  "log", "sqrt", "power", "bin")
_CATEGORICAL_KINDS = ("one_hot", "label_encode", "target_encode")
KINDS = _NUMERIC_KINDS + _CATEGORICAL_KINDS

_NAME_RULES = {
    "standard_scale": "standardized_{}",
    "minmax_scale": "normalized_{}",
    "robust_scale": "robust_scaled_{}",
    "log": "log_{}",
    "sqrt": "sqrt_{}",
    "power": "power_trans_{}",
    "bin": "bucketed_{}",
    "one_hot": "encoded_{}",
    "label_encode": "label_encode_{}",
    "target_encode": "target_encode_{}",
}

OTHER = "__other__"
_TE_FOLDS = 5
_TE_SMOOTHING = 20.0
_MAX_NAMED_ROWS = 10


@dataclass(frozen=True)
class TransformSpec:
    """One declared transform; ``fitted`` is populated by :func:`fit`."""

    kind: str
    source: str
    params: dict = field(default_factory=dict)
    fitted: Optional[dict] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown transform kind {self.kind!r}")
        if self.kind == "bin":
            edges = self.params.get("edges")
            if not edges or len(edges) < 2:
                raise ConfigError("bin requires at least two edges")
            edges = [float(e) for e in edges]
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise ConfigError("bin edges must be strictly increasing")
            labels = self.params.get("labels")
            if labels is not None and len(labels) != len(edges) - 1:
                raise ConfigError("bin needs exactly len(edges)-1 labels")
        if self.kind == "target_encode" and not self.params.get("target"):
            raise ConfigError("target_encode requires a target column")

    @property
    def output(self) -> str:
        return self.params.get("name") or _NAME_RULES[self.kind].format(
            self.source)

    def output_names(self) -> list:
        """All derived column names; needs a fit for multi-level one-hot."""
        if self.kind == "one_hot":
            if self.fitted is None:
                raise ConfigError("one_hot output names require a fitted spec")
            cats = self.fitted["categories"]
            if len(cats) <= 2:
                return [self.output]
            return [f"{self.output}__{c}" for c in cats]
        return [self.output]

    def to_json(self) -> dict:
        return {"kind": self.kind, "source": self.source,
                "params": self.params, "fitted": self.fitted}


def spec_from_json(obj: dict) -> TransformSpec:
    try:
        return TransformSpec(kind=obj["kind"], source=obj["source"],
                             params=dict(obj.get("params") or {}),
                             fitted=obj.get("fitted"))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed transform spec: {exc}") from exc


def indicator_spec(column: str, threshold: float, name: str) -> TransformSpec:
    """``is_<...>`` style 0/1 flag for ``column > threshold`` as a bin."""
    return TransformSpec("bin", column, {
        "edges": [-math.inf, float(threshold), math.inf],
        "labels": [0, 1], "name": name})


# ---------------------------------------------------------------------------
# Fitting


def _source_column(table: DataTable, spec: TransformSpec) -> Column:
    if spec.source not in table:
        raise DataError(f"no such column: {spec.source!r}")
    col = table.column(spec.source)
    if spec.kind in _NUMERIC_KINDS and col.kind != "numeric":
        raise DataError(f"{spec.kind} requires a numeric source, "
                        f"{spec.source!r} is {col.kind}")
    if spec.kind in _CATEGORICAL_KINDS and col.kind != "categorical":
        raise DataError(f"{spec.kind} requires a categorical source, "
                        f"{spec.source!r} is {col.kind}")
    return col


def _observed(col: Column) -> np.ndarray:
    return col.values[~col.missing]


def _domain_check(col: Column, bad: np.ndarray, what: str) -> None:
    rows = np.flatnonzero(~col.missing & bad)
    if rows.size:
        shown = ", ".join(str(int(r)) for r in rows[:_MAX_NAMED_ROWS])
        more = "" if rows.size <= _MAX_NAMED_ROWS else f" (+{rows.size - _MAX_NAMED_ROWS} more)"
        raise DomainError(f"{what} undefined for column {col.name!r} "
                          f"at rows [{shown}]{more}")


def _boxcox_ll(x: np.ndarray, lam: float) -> float:
    y = np.log(x) if abs(lam) < 1e-8 else np.expm1(lam * np.log(x)) / lam
    var = float(np.var(y))
    if var <= 0.0:
        return -math.inf
    return -0.5 * x.size * math.log(var) + (lam - 1.0) * float(
        np.sum(np.log(x)))


def _yj_apply(x: np.ndarray, lam: float) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    if abs(lam) < 1e-8:
        out[pos] = np.log1p(x[pos])
    else:
        out[pos] = np.expm1(lam * np.log1p(x[pos])) / lam
    if abs(lam - 2.0) < 1e-8:
        out[~pos] = -np.log1p(-x[~pos])
    else:
        out[~pos] = -np.expm1((2.0 - lam) * np.log1p(-x[~pos])) / (2.0 - lam)
    return out


def _yj_ll(x: np.ndarray, lam: float) -> float:
    y = _yj_apply(x, lam)
    var = float(np.var(y))
    if var <= 0.0:
        return -math.inf
    return -0.5 * x.size * math.log(var) + (lam - 1.0) * float(
        np.sum(np.sign(x) * np.log1p(np.abs(x))))


def _golden_max(fn, lo: float, hi: float, iters: int = 200) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
        if b - a < 1e-10:
            break
    return (a + b) / 2.0


def _te_smoothed(cats: np.ndarray, target: np.ndarray) -> Tuple[dict, float]:
    """Category -> smoothed mean over the given rows; plus the global mean."""
    g = float(np.mean(target)) if target.size else 0.0
    out = {}
    for cat in sorted(set(cats.tolist())):
        mask = cats == cat
        n = int(np.count_nonzero(mask))
        mean = float(np.mean(target[mask]))
        out[cat] = (n * mean + _TE_SMOOTHING * g) / (n + _TE_SMOOTHING)
    return out, g


def _fit_target_encode(table: DataTable, col: Column, spec: TransformSpec) -> dict:
    target_name = spec.params["target"]
    if target_name not in table:
        raise ConfigError(f"target_encode target {target_name!r} not in table")
    tcol = table.column(target_name)
    if tcol.kind == "boolean":
        tvals = tcol.values.astype(float)
    elif tcol.kind == "numeric":
        tvals = tcol.values
    else:
        raise ConfigError("target_encode needs a numeric or boolean target")
    usable = ~col.missing & ~tcol.missing
    rows = np.flatnonzero(usable)
    cats = col.values[rows]
    target = tvals[rows]
    folds = rows % _TE_FOLDS
    fold_maps, fold_globals = [], []
    for k in range(_TE_FOLDS):
        keep = folds != k
        fmap, g = _te_smoothed(cats[keep], target[keep])
        fold_maps.append(fmap)
        fold_globals.append(g)
    full_map, g_full = _te_smoothed(cats, target)
    return {"folds": _TE_FOLDS, "n_rows_fit": table.n_rows,
            "fold_maps": fold_maps, "fold_globals": fold_globals,
            "full_map": full_map, "global": g_full}


def fit(table: DataTable, spec: TransformSpec) -> TransformSpec:
    """Compute the spec's statistics on non-missing training rows."""
    col = _source_column(table, spec)
    obs = _observed(col)
    kind = spec.kind
    if kind == "standard_scale":
        if obs.size < 2:
            raise DataError(f"standard_scale on {col.name!r} needs >=2 values")
        std = float(np.std(obs, ddof=1))
        fitted = {"mean": float(np.mean(obs)), "std": std if std > 0 else 1.0}
    elif kind == "minmax_scale":
        if obs.size == 0:
            raise DataError(f"minmax_scale on {col.name!r} has no values")
        lo, hi = float(np.min(obs)), float(np.max(obs))
        fitted = {"min": lo, "span": (hi - lo) if hi > lo else 1.0}
    elif kind == "robust_scale":
        if obs.size == 0:
            raise DataError(f"robust_scale on {col.name!r} has no values")
        s = np.sort(obs)
        med = quantile(s, 0.5)
        iqr = quantile(s, 0.75) - quantile(s, 0.25)
        fitted = {"median": float(med), "iqr": float(iqr) if iqr > 0 else 1.0}
    elif kind == "log":
        _domain_check(col, col.values <= 0.0, "log")
        fitted = {}
    elif kind == "sqrt":
        _domain_check(col, col.values < 0.0, "sqrt")
        fitted = {}
    elif kind == "power":
        if obs.size < 3:
            raise DataError(f"power transform on {col.name!r} needs >=3 values")
        if np.all(obs > 0.0):
            lam = _golden_max(lambda l: _boxcox_ll(obs, l), -5.0, 5.0)
            fitted = {"method": "box_cox", "lam": float(lam)}
        else:
            lam = _golden_max(lambda l: _yj_ll(obs, l), -5.0, 5.0)
            fitted = {"method": "yeo_johnson", "lam": float(lam)}
    elif kind == "bin":
        edges = [float(e) for e in spec.params["edges"]]
        labels = spec.params.get("labels")
        if labels is None:
            labels = [f"({a:g},{b:g}]" for a, b in zip(edges, edges[1:])]
        fitted = {"edges": edges, "labels": list(labels)}
    elif kind == "one_hot":
        fitted = {"categories": sorted(set(obs.tolist()))}
        if len(fitted["categories"]) < 2:
            raise DataError(f"one_hot on {col.name!r} needs >=2 levels")
    elif kind == "label_encode":
        cats = sorted(set(obs.tolist()))
        fitted = {"mapping": {c: i for i, c in enumerate(cats)},
                  "other_code": len(cats)}
    elif kind == "target_encode":
        fitted = _fit_target_encode(table, col, spec)
    else:  # pragma: no cover - KINDS guard above
        raise ConfigError(f"unknown transform kind {kind!r}")
    return TransformSpec(spec.kind, spec.source, spec.params, fitted)


# ---------------------------------------------------------------------------
# Applying


def _bin_columns(col: Column, spec: TransformSpec) -> list:
    edges = spec.fitted["edges"]
    labels = spec.fitted["labels"]
    vals = col.values
    idx = np.searchsorted(np.asarray(edges), vals, side="left") - 1
    in_range = (vals > edges[0]) & (vals <= edges[-1])
    missing = col.missing | ~in_range
    idx = np.clip(idx, 0, len(labels) - 1)
    name = spec.output
    if all(isinstance(l, bool) for l in labels):
        out = np.array([bool(labels[i]) for i in idx])
        return [boolean_column(name, out, missing)]
    if all(isinstance(l, (int, float)) and not isinstance(l, bool)
           for l in labels):
        out = np.array([float(labels[i]) for i in idx])
        return [numeric_column(name, out, missing)]
    out = [str(labels[i]) for i in idx]
    return [categorical_column(name, out, missing)]


def _one_hot_columns(col: Column, spec: TransformSpec) -> list:
    cats = spec.fitted["categories"]
    missing = col.missing.copy()
    if len(cats) == 2:
        # single indicator of the second sorted level, like 1-if-Male
        flag = (col.values == cats[1]).astype(float)
        return [numeric_column(spec.output, flag, missing)]
    out = []
    for cat in cats:
        flag = (col.values == cat).astype(float)
        out.append(numeric_column(f"{spec.output}__{cat}", flag, missing))
    return out


def _target_encode_values(col: Column, spec: TransformSpec) -> np.ndarray:
    st = spec.fitted
    n = len(col)
    out = np.zeros(n, dtype=float)
    replay = n == st["n_rows_fit"]
    for r in range(n):
        if col.missing[r]:
            continue
        cat = col.values[r]
        if replay:
            k = r % st["folds"]
            out[r] = st["fold_maps"][k].get(cat, st["fold_globals"][k])
        else:
            out[r] = st["full_map"].get(cat, st["global"])
    return out


def derived_columns(table: DataTable, spec: TransformSpec) -> list:
    """The new columns a fitted spec produces on ``table``."""
    if spec.fitted is None:
        raise ConfigError(f"spec {spec.kind} on {spec.source!r} is not fitted")
    col = _source_column(table, spec)
    kind = spec.kind
    st = spec.fitted
    if kind == "standard_scale":
        vals = (col.values - st["mean"]) / st["std"]
        return [numeric_column(spec.output, vals, col.missing)]
    if kind == "minmax_scale":
        vals = (col.values - st["min"]) / st["span"]
        return [numeric_column(spec.output, vals, col.missing)]
    if kind == "robust_scale":
        vals = (col.values - st["median"]) / st["iqr"]
        return [numeric_column(spec.output, vals, col.missing)]
    if kind == "log":
        _domain_check(col, col.values <= 0.0, "log")
        safe = np.where(col.missing, 1.0, col.values)
        return [numeric_column(spec.output, np.log(safe), col.missing)]
    if kind == "sqrt":
        _domain_check(col, col.values < 0.0, "sqrt")
        return [numeric_column(spec.output, np.sqrt(np.abs(col.values)),
                               col.missing)]
    if kind == "power":
        if st["method"] == "box_cox":
            _domain_check(col, col.values <= 0.0, "box-cox")
            safe = np.where(col.missing, 1.0, col.values)
            lam = st["lam"]
            if abs(lam) < 1e-8:
                vals = np.log(safe)
            else:
                vals = np.expm1(lam * np.log(safe)) / lam
        else:
            vals = _yj_apply(col.values, st["lam"])
        return [numeric_column(spec.output, vals, col.missing)]
    if kind == "bin":
        return _bin_columns(col, spec)
    if kind == "one_hot":
        return _one_hot_columns(col, spec)
    if kind == "label_encode":
        mapping, other = st["mapping"], st["other_code"]
        vals = np.array([float(mapping.get(v, other)) for v in col.values])
        return [numeric_column(spec.output, vals, col.missing)]
    if kind == "target_encode":
        return [numeric_column(spec.output, _target_encode_values(col, spec),
                               col.missing)]
    raise ConfigError(f"unknown transform kind {kind!r}")  # pragma: no cover


def apply_fitted(table: DataTable, spec: TransformSpec) -> DataTable:
    """Append the derived column(s) using stored statistics only."""
    return table.with_columns(derived_columns(table, spec))


def fit_transform(table: DataTable, spec: TransformSpec):
    """Fit on ``table`` then append; returns ``(new_table, fitted_spec)``."""
    fitted = fit(table, spec)
    return apply_fitted(table, fitted), fitted


# ---------------------------------------------------------------------------
# Planning


_SCALE_WHEN_ACCEPTED = ("correlation", "regression", "mean_comparison")
_ONE_HOT_MAX_LEVELS = 10
_BIN_MIN_DISTINCT = 12


def _implicated_numerics(table: DataTable, verdicts) -> set:
    """Numeric columns named by accepted scale-relevant verdicts."""
    out = set()
    for v in verdicts:
        doc = getattr(v, "doc", None)
        if doc is None or not v.accepted or v.error:
            continue
        if doc.test.kind not in _SCALE_WHEN_ACCEPTED:
            continue
        for name in doc.test.columns():
            if name in table and table.kind(name) == "numeric":
                out.add(name)
    return out


def _quartile_edges(col: Column) -> Optional[list]:
    obs = np.sort(_observed(col))
    if obs.size < 4:
        return None
    lo, hi = float(obs[0]), float(obs[-1])
    span = hi - lo
    if span <= 0:
        return None
    cuts = [quantile(obs, 0.25), quantile(obs, 0.5), quantile(obs, 0.75)]
    edges = [lo - max(1e-9 * span, 1e-12)]
    for c in [*cuts, hi]:
        if c > edges[-1]:
            edges.append(float(c))
    return edges if len(edges) >= 3 else None


def hypothesis_aware_plan(table: DataTable, verdicts, target: str) -> list:
    """Transform plan informed by accepted hypotheses.

    Numerics implicated in accepted correlation / regression /
    mean-comparison verdicts are scaled, never binned; with no accepted
    evidence the fallback scales every numeric.  ``hyp_*`` columns and the
    target pass through untouched.
    """
    implicated = _implicated_numerics(table, verdicts)
    has_evidence = any(getattr(v, "accepted", False) for v in verdicts)
    specs = []
    for name in table.names:
        if name == target or name.startswith("hyp_"):
            continue
        kind = table.kind(name)
        if kind == "numeric":
            col = table.column(name)
            distinct = len(set(_observed(col).tolist()))
            if (has_evidence and name not in implicated
                    and distinct >= _BIN_MIN_DISTINCT):
                edges = _quartile_edges(col)
                if edges is not None:
                    specs.append(TransformSpec("bin", name, {"edges": edges}))
                    continue
            if distinct >= 2:
                specs.append(TransformSpec("standard_scale", name))
        elif kind == "categorical":
            col = table.column(name)
            distinct = len(set(_observed(col).tolist()))
            if distinct < 2:
                continue
            if distinct <= _ONE_HOT_MAX_LEVELS:
                specs.append(TransformSpec("one_hot", name))
            elif target in table and table.kind(target) in ("numeric",
                                                            "boolean"):
                specs.append(TransformSpec("target_encode", name,
                                           {"target": target}))
            else:
                specs.append(TransformSpec("label_encode", name))
    return specs


def run_plan(table: DataTable, specs: Sequence[TransformSpec],
             clock: Optional[Clock] = None):
    """Fit and apply each spec in order; returns table, fitted specs, and
    ledger entries (one per spec, fitted state serialized for replay)."""
    clock = clock or Clock(logical=True)
    fitted_specs, entries = [], []
    out = table
    for spec in specs:
        out, fitted = fit_transform(out, spec)
        fitted_specs.append(fitted)
        entries.append(LedgerEntry(
            stage="preprocess", ts=clock.now(), action=fitted.kind,
            columns=(fitted.source, *fitted.output_names()),
            params={"spec": json.dumps(fitted.to_json(), sort_keys=True)},
            results={"n_outputs": len(fitted.output_names())},
            provenance=("preprocess-agent", fitted.output)))
    return out, fitted_specs, entries


def apply_plan(table: DataTable, fitted_specs: Sequence[TransformSpec]) -> DataTable:
    out = table
    for spec in fitted_specs:
        out = apply_fitted(out, spec)
    return out


def correlation_drift(before: DataTable, after: DataTable) -> float:
    """Diagnostic: largest |Δ Pearson r| over numeric pairs both tables
    share — a quality check for the ledger, never a gate."""
    shared = [n for n in before.names_of_kind("numeric")
              if n in after and after.kind(n) == "numeric"]
    worst = 0.0
    for i, a in enumerate(shared):
        for b in shared[i + 1:]:
            r0 = _pair_r(before, a, b)
            r1 = _pair_r(after, a, b)
            if r0 is not None and r1 is not None:
                worst = max(worst, abs(r1 - r0))
    return worst


def _pair_r(table: DataTable, a: str, b: str) -> Optional[float]:
    ca, cb = table.column(a), table.column(b)
    keep = ~ca.missing & ~cb.missing
    x, y = ca.values[keep], cb.values[keep]
    if x.size < 3 or np.std(x) == 0 or np.std(y) == 0:
        return None
    return float(np.corrcoef(x, y)[0, 1])
