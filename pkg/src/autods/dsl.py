"""Declarative hypothesis language: documents, parsing, compilation, evaluation.

A hypothesis is a JSON document making one testable claim about a table::

    {"id": "h1",
     "statement": "Customers with fewer than two products churn more often",
     "test": {"kind": "proportion_comparison",
              "group_by": {"op": "<", "column": "NumOfProducts", "value": 2},
              "outcome": "Exited"},
     "alpha": 0.05,
     "indicator": {"op": "<", "column": "NumOfProducts", "value": 2}}

Documents are data, never code.  Anything that does not parse into
:class:`HypothesisDoc` is rejected with the complete list of violations
(the repair signal a proposer needs), and compilation resolves the test
kind to a statistical-kernel call after type-checking every column binding
against a concrete table.  Conditions are comparison trees over raw
columns — no arithmetic, no calls — so evaluating one is always pure and
linear in the row count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError, DslError, StatsError
from .stats import (
    TestResult,
    chi_square_independence,
    cluster_feature_importance,
    cluster_stability,
    cusum_change_point,
    isolation_forest,
    kmeans,
    ks_test,
    levene_test,
    log_rank,
    mann_whitney_u,
    one_way_anova,
    outlier_mask,
    pca,
    pearson_test,
    regression_slope_test,
    shapiro_wilk,
    t_test,
)
from .table import (
    DataTable,
    _parse_datetime,
    boolean_column,
    categorical_column,
    numeric_column,
)

COMPARATORS = ("<", "<=", ">", ">=", "==", "!=")
_COMPARATOR_ALIASES = {"≤": "<=", "≥": ">=", "=": "==", "≠": "!="}
_BOOL_OPS = ("and", "or", "not")
_MAX_DEPTH = 32

# Comparators legal per column kind: equality-only for unordered kinds.
_KIND_OPS = {
    "numeric": COMPARATORS,
    "datetime": COMPARATORS,
    "boolean": ("==", "!="),
    "categorical": ("==", "!="),
}


# ---------------------------------------------------------------------------
# Condition expressions


@dataclass(frozen=True)
class Condition:
    """Boolean row expression: a comparison leaf or an and/or/not node.

    Leaves hold ``op``/``column``/``value``; interior nodes hold ``op``
    and ``args``.  Values may be numbers, strings, or booleans; datetime
    columns compare against ISO-8601 string literals.
    """

    op: str
    column: Optional[str] = None
    value: object = None
    args: Tuple["Condition", ...] = ()

    def __post_init__(self):
        if self.op in COMPARATORS:
            if not isinstance(self.column, str) or not self.column:
                raise DslError(["comparison needs a column name"])
            if not isinstance(self.value, (bool, int, float, str)):
                raise DslError([f"unsupported literal {self.value!r}"])
            if self.args:
                raise DslError(["comparison takes no sub-expressions"])
        elif self.op in ("and", "or"):
            if len(self.args) < 2:
                raise DslError([f"'{self.op}' needs at least two sub-expressions"])
        elif self.op == "not":
            if len(self.args) != 1:
                raise DslError(["'not' takes exactly one sub-expression"])
        else:
            raise DslError([f"unknown operator {self.op!r}"])
        if self.op in _BOOL_OPS:
            if self.column is not None or self.value is not None:
                raise DslError([f"'{self.op}' takes no column/value"])
            if not all(isinstance(a, Condition) for a in self.args):
                raise DslError([f"'{self.op}' sub-expressions must be conditions"])

    # Constructors used programmatically (the proposer, tests).
    @classmethod
    def cmp(cls, op: str, column: str, value) -> "Condition":
        return cls(_COMPARATOR_ALIASES.get(op, op), column=column, value=value)

    @classmethod
    def all_of(cls, *args: "Condition") -> "Condition":
        return cls("and", args=tuple(args))

    @classmethod
    def any_of(cls, *args: "Condition") -> "Condition":
        return cls("or", args=tuple(args))

    @classmethod
    def negate(cls, arg: "Condition") -> "Condition":
        return cls("not", args=(arg,))

    def to_json(self) -> dict:
        if self.op in COMPARATORS:
            return {"op": self.op, "column": self.column, "value": self.value}
        if self.op == "not":
            return {"op": "not", "arg": self.args[0].to_json()}
        return {"op": self.op, "args": [a.to_json() for a in self.args]}

    def columns(self) -> Tuple[str, ...]:
        """Referenced column names, in first-appearance order."""
        if self.op in COMPARATORS:
            return (self.column,)
        seen: list = []
        for a in self.args:
            for c in a.columns():
                if c not in seen:
                    seen.append(c)
        return tuple(seen)


def condition_to_text(expr: Condition) -> str:
    """Compact human-readable rendering, e.g. ``NumOfProducts < 2``."""
    if expr.op in COMPARATORS:
        v = expr.value
        if isinstance(v, bool):
            lit = "true" if v else "false"
        elif isinstance(v, str):
            lit = f"'{v}'"
        else:
            lit = repr(v)
        return f"{expr.column} {expr.op} {lit}"
    if expr.op == "not":
        return f"not ({condition_to_text(expr.args[0])})"
    inner = f" {expr.op} ".join(condition_to_text(a) for a in expr.args)
    return f"({inner})"


def _parse_condition(obj, path: str, violations: list, depth: int = 0) -> Optional[Condition]:
    """JSON object -> Condition, appending every problem to ``violations``."""
    if depth > _MAX_DEPTH:
        violations.append(f"{path}: expression nested deeper than {_MAX_DEPTH}")
        return None
    if not isinstance(obj, dict):
        violations.append(f"{path}: malformed expression (expected an object)")
        return None
    op = obj.get("op")
    if not isinstance(op, str):
        violations.append(f"{path}: malformed expression (missing 'op')")
        return None
    op = _COMPARATOR_ALIASES.get(op, op)
    if op in COMPARATORS:
        bad = [k for k in obj if k not in ("op", "column", "value")]
        if bad:
            violations.append(f"{path}: unexpected keys {sorted(bad)}")
        column = obj.get("column")
        if not isinstance(column, str) or not column:
            violations.append(f"{path}: comparison needs a 'column' name")
            return None
        if "value" not in obj:
            violations.append(f"{path}: comparison needs a 'value' literal")
            return None
        value = obj["value"]
        if not isinstance(value, (bool, int, float, str)):
            violations.append(f"{path}: literal must be a number, string, or boolean")
            return None
        return Condition(op, column=column, value=value)
    if op in ("and", "or"):
        args = obj.get("args")
        if not isinstance(args, list) or len(args) < 2:
            violations.append(f"{path}: '{op}' needs an 'args' list of two or more")
            return None
        parsed = [
            _parse_condition(a, f"{path}.args[{i}]", violations, depth + 1)
            for i, a in enumerate(args)
        ]
        if any(p is None for p in parsed):
            return None
        return Condition(op, args=tuple(parsed))
    if op == "not":
        if "arg" not in obj:
            violations.append(f"{path}: 'not' needs an 'arg' expression")
            return None
        inner = _parse_condition(obj["arg"], f"{path}.arg", violations, depth + 1)
        return None if inner is None else Condition("not", args=(inner,))
    violations.append(f"{path}: unknown operator {op!r}")
    return None


def check_condition(expr: Condition, table, path: str = "condition") -> list:
    """Type-check an expression against a table; returns violations."""
    out: list = []
    if expr.op in COMPARATORS:
        name = expr.column
        if name not in table:
            out.append(f"{path}: column '{name}' does not exist")
            return out
        kind = table.kind(name)
        if expr.op not in _KIND_OPS[kind]:
            out.append(
                f"{path}: type mismatch: operator '{expr.op}' not defined for "
                f"{kind} column '{name}'"
            )
        v = expr.value
        if kind == "numeric":
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                out.append(f"{path}: type mismatch: numeric column '{name}' "
                           f"compared against {type(v).__name__} literal")
        elif kind == "boolean":
            if not isinstance(v, bool):
                out.append(f"{path}: type mismatch: boolean column '{name}' "
                           f"compared against {type(v).__name__} literal")
        elif kind == "categorical":
            if not isinstance(v, str):
                out.append(f"{path}: type mismatch: categorical column '{name}' "
                           f"compared against {type(v).__name__} literal")
        else:  # datetime
            if not isinstance(v, str) or _parse_datetime(v) is None:
                out.append(f"{path}: type mismatch: datetime column '{name}' "
                           f"needs an ISO-8601 string literal")
        return out
    for i, a in enumerate(expr.args):
        sub = f"{path}.arg" if expr.op == "not" else f"{path}.args[{i}]"
        out.extend(check_condition(a, table, sub))
    return out


def eval_condition(expr: Condition, table: DataTable):
    """Evaluate per row -> ``(values, missing)`` boolean arrays.

    Missing semantics are strict: a row whose operands include any missing
    cell is excluded (its ``missing`` entry is true, its value forced
    false), never silently treated as a failed comparison.
    """
    if expr.op in COMPARATORS:
        col = table.column(expr.column)
        v = expr.value
        if col.kind == "datetime":
            lit = _parse_datetime(v)
            if lit is None:
                raise DslError([f"literal {v!r} is not an ISO-8601 datetime"])
        elif col.kind == "numeric":
            lit = float(v)
        else:
            lit = v
        ops = {
            "<": np.less, "<=": np.less_equal, ">": np.greater,
            ">=": np.greater_equal, "==": np.equal, "!=": np.not_equal,
        }
        vals = ops[expr.op](col.values, lit)
        missing = col.missing.copy()
    elif expr.op == "not":
        vals, missing = eval_condition(expr.args[0], table)
        vals = ~vals
    else:
        parts = [eval_condition(a, table) for a in expr.args]
        missing = np.zeros(table.n_rows, dtype=bool)
        for _, m in parts:
            missing |= m
        stack = np.array([v for v, _ in parts])
        vals = stack.all(axis=0) if expr.op == "and" else stack.any(axis=0)
    vals = np.asarray(vals, dtype=bool).copy()
    vals[missing] = False
    return vals, missing


# ---------------------------------------------------------------------------
# Test-plan catalog

GROUP, NUMERIC, OUTCOME, EVENT, ORDER, COLUMNS = (
    "group", "numeric", "outcome", "event", "order", "columns",
)


def _choice(*allowed):
    def check(v):
        if v not in allowed:
            return f"must be one of {sorted(allowed)}"
    return check


def _int_at_least(lo):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int) or v < lo:
            return f"must be an integer >= {lo}"
    return check


def _real_in(lo, hi, open_ends=True):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return "must be a number"
        inside = lo < v < hi if open_ends else lo <= v <= hi
        if not inside:
            return f"must be in ({lo}, {hi})"
    return check


def _positive_real(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
        return "must be a positive number"


@dataclass(frozen=True)
class _KindSpec:
    bindings: tuple            # (name, role, required)
    params: dict               # name -> (default, checker)
    descriptive: bool = False


CATALOG = {
    "mean_comparison": _KindSpec(
        bindings=(("group_by", GROUP, True), ("value", NUMERIC, True)),
        params={"variant": ("welch", _choice("welch", "pooled"))},
    ),
    "proportion_comparison": _KindSpec(
        bindings=(("group_by", GROUP, True), ("outcome", OUTCOME, True)),
        params={},
    ),
    "independence": _KindSpec(
        bindings=(("x", OUTCOME, True), ("y", OUTCOME, True)),
        params={},
    ),
    "correlation": _KindSpec(
        bindings=(("x", NUMERIC, True), ("y", NUMERIC, True)),
        params={},
    ),
    "regression": _KindSpec(
        bindings=(("x", NUMERIC, True), ("y", NUMERIC, True)),
        params={},
    ),
    "trend": _KindSpec(
        bindings=(("value", NUMERIC, True), ("x", ORDER, False)),
        params={},
    ),
    "anova": _KindSpec(
        bindings=(("group_by", GROUP, True), ("value", NUMERIC, True)),
        params={},
    ),
    "variance_comparison": _KindSpec(
        bindings=(("group_by", GROUP, True), ("value", NUMERIC, True)),
        params={"center": ("median", _choice("mean", "median"))},
    ),
    "normality": _KindSpec(
        bindings=(("value", NUMERIC, True),),
        params={},
    ),
    "distribution_comparison": _KindSpec(
        bindings=(("group_by", GROUP, True), ("value", NUMERIC, True)),
        params={},
    ),
    "median_comparison": _KindSpec(
        bindings=(("group_by", GROUP, True), ("value", NUMERIC, True)),
        params={},
    ),
    "survival": _KindSpec(
        bindings=(("duration", NUMERIC, True), ("event", EVENT, True),
                  ("group_by", GROUP, True)),
        params={},
    ),
    "change_point": _KindSpec(
        bindings=(("value", NUMERIC, True),),
        params={},
    ),
    "clustering": _KindSpec(
        bindings=(("columns", COLUMNS, True),),
        params={"k": (3, _int_at_least(2))},
        descriptive=True,
    ),
    "latent_groups": _KindSpec(
        bindings=(("columns", COLUMNS, True),),
        params={},
        descriptive=True,
    ),
    "outlier_scan": _KindSpec(
        bindings=(("columns", COLUMNS, True),),
        params={"variant": ("zscore", _choice("zscore", "iqr", "mahalanobis")),
                "threshold": (None, _positive_real)},
        descriptive=True,
    ),
    "anomaly_scan": _KindSpec(
        bindings=(("columns", COLUMNS, True),),
        params={"threshold": (0.6, _real_in(0.0, 1.0))},
        descriptive=True,
    ),
}

# Kinds whose p-value is a real tail probability; descriptive kinds encode
# their pass/fail criterion as a degenerate 0/1 pseudo-p instead and are
# excluded from multiple-testing adjustment.
INFERENTIAL_KINDS = tuple(k for k, s in CATALOG.items() if not s.descriptive)
DESCRIPTIVE_KINDS = tuple(k for k, s in CATALOG.items() if s.descriptive)

# Kinds that compare exactly two groups.
_TWO_GROUP_KINDS = ("mean_comparison", "median_comparison", "distribution_comparison")


def _plan_violations(kind, bindings, params) -> list:
    out: list = []
    if kind not in CATALOG:
        out.append(f"test: unknown test kind {kind!r}")
        return out
    spec = CATALOG[kind]
    known = {name: role for name, role, _ in spec.bindings}
    for name, role, required in spec.bindings:
        if required and name not in bindings:
            out.append(f"test: missing binding '{name}' for kind '{kind}'")
    for name in bindings:
        if name not in known:
            out.append(f"test: unknown field '{name}' for kind '{kind}'")
            continue
        v = bindings[name]
        role = known[name]
        if role == GROUP:
            if not isinstance(v, (str, Condition)) or v == "":
                out.append(f"test.{name}: must be a column name or a condition")
        elif role == COLUMNS:
            ok = (isinstance(v, tuple) and len(v) > 0
                  and all(isinstance(c, str) and c for c in v))
            if not ok:
                out.append(f"test.{name}: must be a non-empty list of column names")
            elif len(set(v)) != len(v):
                out.append(f"test.{name}: duplicate column names")
        else:
            if not isinstance(v, str) or not v:
                out.append(f"test.{name}: must be a column name")
    for name, v in params.items():
        if name not in spec.params:
            out.append(f"test: unknown field '{name}' for kind '{kind}'")
            continue
        err = spec.params[name][1](v)
        if err:
            out.append(f"test.{name}: {err}")
    return out


@dataclass(frozen=True)
class TestPlan:
    """One catalog kind plus its column bindings and parameters."""

    kind: str
    bindings: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        normalized = {
            k: tuple(v) if isinstance(v, list) else v
            for k, v in self.bindings.items()
        }
        object.__setattr__(self, "bindings", normalized)
        object.__setattr__(self, "params", dict(self.params))
        problems = _plan_violations(self.kind, self.bindings, self.params)
        if problems:
            raise DslError(problems)

    @property
    def descriptive(self) -> bool:
        return CATALOG[self.kind].descriptive

    def resolved_params(self) -> dict:
        """Params with catalog defaults filled in."""
        spec = CATALOG[self.kind]
        out = {name: default for name, (default, _) in spec.params.items()}
        out.update(self.params)
        return out

    def columns(self) -> Tuple[str, ...]:
        """Every column name the plan touches, in binding order."""
        seen: list = []
        for name, _, _ in CATALOG[self.kind].bindings:
            v = self.bindings.get(name)
            if v is None:
                continue
            refs = v.columns() if isinstance(v, Condition) else (
                v if isinstance(v, tuple) else (v,))
            for c in refs:
                if c not in seen:
                    seen.append(c)
        return tuple(seen)

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        for name, _, _ in CATALOG[self.kind].bindings:
            if name in self.bindings:
                v = self.bindings[name]
                if isinstance(v, Condition):
                    out[name] = v.to_json()
                elif isinstance(v, tuple):
                    out[name] = list(v)
                else:
                    out[name] = v
        for name in CATALOG[self.kind].params:
            if name in self.params:
                out[name] = self.params[name]
        return out


@dataclass(frozen=True)
class HypothesisDoc:
    """One validated hypothesis: claim, test plan, threshold, indicator."""

    id: str
    statement: str
    test: TestPlan
    alpha: float = 0.05
    indicator: Optional[Condition] = None

    def __post_init__(self):
        problems = []
        if not isinstance(self.id, str) or not self.id:
            problems.append("id: must be a non-empty string")
        if not isinstance(self.statement, str) or not self.statement:
            problems.append("statement: must be a non-empty string")
        if isinstance(self.alpha, bool) or not isinstance(self.alpha, (int, float)):
            problems.append("alpha: must be a number")
        elif not 0.0 < self.alpha < 1.0:
            problems.append(f"alpha: must be in (0, 1), got {self.alpha}")
        else:
            object.__setattr__(self, "alpha", float(self.alpha))
        if not isinstance(self.test, TestPlan):
            problems.append("test: must be a test plan")
        if self.indicator is not None and not isinstance(self.indicator, Condition):
            problems.append("indicator: must be a condition expression")
        if problems:
            raise DslError(problems)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "statement": self.statement,
            "test": self.test.to_json(),
            "alpha": self.alpha,
            "indicator": None if self.indicator is None else self.indicator.to_json(),
        }


def serialize_hypothesis(doc: HypothesisDoc) -> str:
    return json.dumps(doc.to_json(), ensure_ascii=False)


# ---------------------------------------------------------------------------
# Parsing

_DOC_FIELDS = ("id", "statement", "test", "alpha", "indicator")


def hypothesis_from_obj(obj, schema: Optional[DataTable] = None) -> HypothesisDoc:
    """Decoded-JSON object -> validated doc; raises :class:`DslError`
    carrying every violation found, not just the first."""
    violations: list = []
    if not isinstance(obj, dict):
        raise DslError(["document must be a JSON object"])
    for key in obj:
        if key not in _DOC_FIELDS:
            violations.append(f"unknown field '{key}'")

    doc_id = obj.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        violations.append("id: must be a non-empty string")
    statement = obj.get("statement")
    if not isinstance(statement, str) or not statement:
        violations.append("statement: must be a non-empty string")
    alpha = obj.get("alpha", 0.05)
    if isinstance(alpha, bool) or not isinstance(alpha, (int, float)):
        violations.append("alpha: must be a number")
    elif not 0.0 < alpha < 1.0:
        violations.append(f"alpha: must be in (0, 1), got {alpha}")

    plan = None
    test_obj = obj.get("test")
    if not isinstance(test_obj, dict):
        violations.append("test: must be an object")
    else:
        kind = test_obj.get("kind")
        if not isinstance(kind, str) or kind not in CATALOG:
            violations.append(f"test: unknown test kind {kind!r}")
        else:
            spec = CATALOG[kind]
            roles = {name: role for name, role, _ in spec.bindings}
            bindings: dict = {}
            params: dict = {}
            for key, raw in test_obj.items():
                if key == "kind":
                    continue
                if key in roles:
                    if roles[key] == GROUP and isinstance(raw, dict):
                        cond = _parse_condition(raw, f"test.{key}", violations)
                        if cond is not None:
                            bindings[key] = cond
                    elif roles[key] == COLUMNS and isinstance(raw, list):
                        bindings[key] = tuple(raw)
                    else:
                        bindings[key] = raw
                elif key in spec.params:
                    params[key] = raw
                else:
                    violations.append(f"test: unknown field '{key}' for kind '{kind}'")
            violations.extend(_plan_violations(kind, bindings, params))
            if not violations:
                plan = TestPlan(kind, bindings, params)

    indicator = None
    if obj.get("indicator") is not None:
        indicator = _parse_condition(obj["indicator"], "indicator", violations)

    if violations:
        raise DslError(violations)
    doc = HypothesisDoc(doc_id, statement, plan, float(alpha), indicator)
    if schema is not None:
        problems = check_against_schema(doc, schema)
        if problems:
            raise DslError(problems)
    return doc


def parse_hypothesis(json_text: str, schema: Optional[DataTable] = None) -> HypothesisDoc:
    """JSON text -> validated doc.

    When ``schema`` (a table) is supplied, column existence and kind
    compatibility are checked here as well; otherwise those checks wait
    for :func:`compile_hypothesis`.
    """
    try:
        obj = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise DslError([f"invalid JSON: {exc}"]) from None
    return hypothesis_from_obj(obj, schema)


def check_batch(docs: Sequence[HypothesisDoc]) -> None:
    """Enforce the batch invariant: document ids must be unique."""
    seen: dict = {}
    dupes = []
    for d in docs:
        if d.id in seen:
            dupes.append(f"duplicate hypothesis id '{d.id}'")
        seen[d.id] = True
    if dupes:
        raise DslError(dupes)


# ---------------------------------------------------------------------------
# Schema checks (shared by parse-with-schema and compile)

_ROLE_KINDS = {
    NUMERIC: ("numeric",),
    OUTCOME: ("categorical", "boolean"),
    EVENT: ("boolean", "numeric"),
    ORDER: ("numeric", "datetime"),
}


def _check_column(table, name, allowed, label) -> list:
    if name not in table:
        return [f"{label}: column '{name}' does not exist"]
    kind = table.kind(name)
    if kind not in allowed:
        return [f"{label}: type mismatch: column '{name}' is {kind}, "
                f"expected {' or '.join(allowed)}"]
    return []


def check_against_schema(doc: HypothesisDoc, table: DataTable) -> list:
    """All column-level violations of ``doc`` against ``table``."""
    out: list = []
    spec = CATALOG[doc.test.kind]
    for name, role, _ in spec.bindings:
        if name not in doc.test.bindings:
            continue
        v = doc.test.bindings[name]
        label = f"test.{name}"
        if role == GROUP:
            if isinstance(v, Condition):
                out.extend(check_condition(v, table, label))
            else:
                out.extend(_check_column(table, v, ("categorical", "boolean"), label))
        elif role == COLUMNS:
            for c in v:
                out.extend(_check_column(table, c, ("numeric",), label))
        else:
            out.extend(_check_column(table, v, _ROLE_KINDS[role], label))
    if doc.indicator is not None:
        out.extend(check_condition(doc.indicator, table, "indicator"))
    return out


# ---------------------------------------------------------------------------
# Compilation

_GROUP_FALSE_LABEL = "otherwise"


def _observed_levels(col):
    vals = col.values[~col.missing]
    if col.kind == "boolean":
        levels = []
        if not vals.all():
            levels.append(False)
        if vals.any():
            levels.append(True)
        return levels
    return sorted(set(vals.tolist()))


def _level_label(level) -> str:
    if isinstance(level, (bool, np.bool_)):
        return "true" if level else "false"
    return str(level)


def _group_rows(binding, table) -> list:
    """Ordered ``(label, row_indices)`` pairs; rows with a missing group
    value are excluded.  A condition yields its true-rows first."""
    if isinstance(binding, Condition):
        vals, missing = eval_condition(binding, table)
        keep = ~missing
        return [
            (condition_to_text(binding), np.nonzero(vals & keep)[0]),
            (_GROUP_FALSE_LABEL, np.nonzero(~vals & keep)[0]),
        ]
    col = table.column(binding)
    keep = ~col.missing
    out = []
    for level in _observed_levels(col):
        rows = np.nonzero(keep & (col.values == level))[0]
        out.append((_level_label(level), rows))
    return out


def _sample(table, name, rows=None) -> np.ndarray:
    """Non-missing numeric values of a column, optionally within ``rows``."""
    col = table.column(name)
    if rows is None:
        return col.values[~col.missing]
    sub = col.values[rows]
    return sub[~col.missing[rows]]


def _matrix(table, names) -> tuple:
    """Complete-case matrix over ``names`` -> (X, row_indices)."""
    missing = np.zeros(table.n_rows, dtype=bool)
    for name in names:
        missing |= table.column(name).missing
    rows = np.nonzero(~missing)[0]
    x = np.column_stack([table.column(n).values[rows] for n in names])
    return x, rows


def _with_details(res: TestResult, **extra) -> TestResult:
    return replace(res, details={**res.details, **extra})


def _criterion_result(statistic: float, passed: bool, n_used: int, details: dict) -> TestResult:
    # Descriptive kinds encode their binary criterion as p in {0, 1} so the
    # uniform acceptance rule (p < alpha) applies unchanged.
    return TestResult(statistic, 0.0 if passed else 1.0, n_used=n_used,
                      details=details)


def _score_column(name, kind, table, rows, values):
    missing = np.ones(table.n_rows, dtype=bool)
    missing[rows] = False
    if kind == "numeric":
        full = np.zeros(table.n_rows, dtype=np.float64)
        full[rows] = values
        return numeric_column(name, full, missing=missing)
    if kind == "boolean":
        full = np.zeros(table.n_rows, dtype=bool)
        full[rows] = values
        return boolean_column(name, full, missing=missing)
    full = np.array([""] * table.n_rows, dtype=object)
    full[rows] = values
    return categorical_column(name, full, missing=missing)


@dataclass(frozen=True)
class Execution:
    """Result of running a compiled test: the statistics plus any score
    columns a descriptive kind produced (already ``hyp_``-prefixed)."""

    result: TestResult
    score_columns: tuple = ()


@dataclass(frozen=True)
class ExecutableTest:
    """A compiled plan: the doc plus a closure over the resolved kernel call."""

    doc: HypothesisDoc
    columns: Tuple[str, ...]
    runner: Callable = field(repr=False, compare=False)

    @property
    def kind(self) -> str:
        return self.doc.test.kind

    @property
    def descriptive(self) -> bool:
        return self.doc.test.descriptive

    def run(self, table: DataTable, seed: int = 0) -> Execution:
        return self.runner(table, seed)


def _expect_two_groups(groups, kind):
    if len(groups) != 2:
        raise StatsError(
            f"{kind} needs exactly 2 groups, found {len(groups)}")
    return groups


def _run_two_sample(doc, bindings, params, fn):
    value = bindings["value"]

    def run(table, seed):
        groups = _expect_two_groups(_group_rows(bindings["group_by"], table),
                                    doc.test.kind)
        a = _sample(table, value, groups[0][1])
        b = _sample(table, value, groups[1][1])
        res = fn(a, b, params)
        return Execution(_with_details(
            res, groups=[g[0] for g in groups], value=value,
            group_n=[int(a.size), int(b.size)],
            group_means=[float(np.mean(s)) if s.size else None
                         for s in (a, b)],
            group_sd=[float(np.std(s, ddof=1)) if s.size > 1 else None
                      for s in (a, b)],
            group_medians=[float(np.median(s)) if s.size else None
                           for s in (a, b)]))
    return run


def _run_proportion(doc, bindings, params):
    outcome = bindings["outcome"]

    def run(table, seed):
        groups = _group_rows(bindings["group_by"], table)
        col = table.column(outcome)
        levels = _observed_levels(col)
        counts = np.zeros((len(groups), len(levels)))
        for i, (_, rows) in enumerate(groups):
            vals = col.values[rows]
            keep = ~col.missing[rows]
            for j, level in enumerate(levels):
                counts[i, j] = np.count_nonzero(vals[keep] == level)
        res = chi_square_independence(counts)
        return Execution(_with_details(
            res, groups=[g[0] for g in groups], outcome=outcome,
            outcome_levels=[_level_label(l) for l in levels]))
    return run


def _run_independence(doc, bindings, params):
    def run(table, seed):
        cx, cy = table.column(bindings["x"]), table.column(bindings["y"])
        keep = ~(cx.missing | cy.missing)
        xl, yl = _observed_levels(cx), _observed_levels(cy)
        counts = np.zeros((len(xl), len(yl)))
        xv, yv = cx.values[keep], cy.values[keep]
        for i, a in enumerate(xl):
            hit = xv == a
            for j, b in enumerate(yl):
                counts[i, j] = np.count_nonzero(hit & (yv == b))
        res = chi_square_independence(counts)
        return Execution(_with_details(
            res, x=bindings["x"], y=bindings["y"],
            x_levels=[_level_label(l) for l in xl],
            y_levels=[_level_label(l) for l in yl]))
    return run


def _run_paired(doc, bindings, params, fn):
    def run(table, seed):
        cx, cy = table.column(bindings["x"]), table.column(bindings["y"])
        keep = ~(cx.missing | cy.missing)
        res = fn(cx.values[keep], cy.values[keep])
        return Execution(_with_details(res, x=bindings["x"], y=bindings["y"]))
    return run


def _run_trend(doc, bindings, params):
    value = bindings["value"]
    order = bindings.get("x")

    def run(table, seed):
        col = table.column(value)
        if order is None:
            keep = ~col.missing
            x = np.nonzero(keep)[0].astype(np.float64)
        else:
            oc = table.column(order)
            keep = ~(col.missing | oc.missing)
            x = oc.values[keep].astype(np.float64)
        res = regression_slope_test(x, col.values[keep])
        return Execution(_with_details(
            res, value=value, x="row_index" if order is None else order))
    return run


def _run_grouped(doc, bindings, params, fn):
    value = bindings["value"]

    def run(table, seed):
        groups = _group_rows(bindings["group_by"], table)
        samples = [_sample(table, value, rows) for _, rows in groups]
        res = fn(samples, params)
        return Execution(_with_details(
            res, groups=[g[0] for g in groups], value=value,
            group_n=[int(s.size) for s in samples],
            group_means=[float(np.mean(s)) if s.size else None
                         for s in samples]))
    return run


def _run_normality(doc, bindings, params):
    value = bindings["value"]

    def run(table, seed):
        res = shapiro_wilk(_sample(table, value))
        return Execution(_with_details(res, value=value))
    return run


def _run_survival(doc, bindings, params):
    dur_name, ev_name = bindings["duration"], bindings["event"]

    def run(table, seed):
        groups = _group_rows(bindings["group_by"], table)
        dc, ec = table.column(dur_name), table.column(ev_name)
        arms = []
        for _, rows in groups:
            keep = ~(dc.missing[rows] | ec.missing[rows])
            d = dc.values[rows][keep]
            e = ec.values[rows][keep]
            if ec.kind == "numeric":
                bad = set(np.unique(e)) - {0.0, 1.0}
                if bad:
                    raise StatsError(
                        f"event column '{ev_name}' must be boolean or 0/1, "
                        f"found {sorted(bad)}")
            arms.append((d, e.astype(bool)))
        res = log_rank(arms)
        return Execution(_with_details(
            res, groups=[g[0] for g in groups], duration=dur_name,
            event=ev_name))
    return run


def _run_change_point(doc, bindings, params):
    value = bindings["value"]

    def run(table, seed):
        col = table.column(value)
        keep = ~col.missing
        vals = col.values[keep]
        cp = cusum_change_point(vals, seed=seed)
        positions = np.nonzero(keep)[0]
        res = TestResult(cp.statistic, cp.p_value, n_used=len(vals),
                         details={"value": value,
                                  "change_index": int(cp.index),
                                  "change_row": int(positions[cp.index])})
        return Execution(res)
    return run


def _run_clustering(doc, bindings, params):
    cols = bindings["columns"]
    k = params["k"]

    def run(table, seed):
        x, rows = _matrix(table, cols)
        model = kmeans(x, k, seed=seed)
        stab = cluster_stability(x, k, seed=seed)
        importance = cluster_feature_importance(x, model)
        sizes = np.bincount(model.assignments, minlength=k)
        res = _criterion_result(
            stab.mean_ari, stab.stable, len(rows),
            {"k": k, "inertia": model.inertia, "mean_ari": stab.mean_ari,
             "cluster_sizes": sizes.tolist(),
             "feature_importance": {c: float(v) for c, v in zip(cols, importance)},
             "criterion": "bootstrap mean ARI >= 0.8"})
        labels = [str(int(a)) for a in model.assignments]
        col = _score_column(f"hyp_{doc.id}__cluster_id", "categorical",
                            table, rows, labels)
        return Execution(res, (col,))
    return run


def _run_latent_groups(doc, bindings, params):
    cols = bindings["columns"]

    def run(table, seed):
        x, rows = _matrix(table, cols)
        proj = pca(x)
        kept = len(proj.explained_variance_ratio)
        dim = x.shape[1]
        passed = kept <= dim // 2
        res = _criterion_result(
            float(proj.explained_variance_ratio[0]), passed, len(rows),
            {"n_components": kept, "dim": dim,
             "explained_variance_ratio": [float(r) for r in
                                          proj.explained_variance_ratio],
             "criterion": "components for 95% variance <= dim/2"})
        col = _score_column(f"hyp_{doc.id}__pc1", "numeric",
                            table, rows, proj.scores[:, 0])
        return Execution(res, (col,))
    return run


def _run_outlier_scan(doc, bindings, params):
    cols = bindings["columns"]
    variant = params["variant"]
    threshold = params["threshold"]

    def run(table, seed):
        if variant == "mahalanobis":
            data, rows = _matrix(table, cols)
        else:
            col = table.column(cols[0])
            rows = np.nonzero(~col.missing)[0]
            data = col.values[rows]
        kwargs = {} if threshold is None else {"threshold": threshold}
        mask = outlier_mask(data, method=variant, **kwargs)
        res = _criterion_result(
            float(mask.sum()), bool(mask.any()), len(rows),
            {"variant": variant, "columns": list(cols),
             "n_flagged": int(mask.sum()),
             "criterion": "at least one row flagged"})
        col_out = _score_column(f"hyp_{doc.id}__outlier", "boolean",
                                table, rows, mask)
        return Execution(res, (col_out,))
    return run


def _run_anomaly_scan(doc, bindings, params):
    cols = bindings["columns"]
    threshold = params["threshold"]

    def run(table, seed):
        x, rows = _matrix(table, cols)
        scores = isolation_forest(x, seed=seed)
        flagged = scores >= threshold
        res = _criterion_result(
            float(scores.max()), bool(flagged.any()), len(rows),
            {"threshold": threshold, "columns": list(cols),
             "n_flagged": int(flagged.sum()),
             "criterion": f"any score >= {threshold}"})
        col = _score_column(f"hyp_{doc.id}__anomaly_score", "numeric",
                            table, rows, scores)
        return Execution(res, (col,))
    return run


_RUNNERS = {
    "mean_comparison": lambda d, b, p: _run_two_sample(
        d, b, p, lambda a, bb, pp: t_test(a, bb, variant=pp["variant"])),
    "proportion_comparison": _run_proportion,
    "independence": _run_independence,
    "correlation": lambda d, b, p: _run_paired(d, b, p, pearson_test),
    "regression": lambda d, b, p: _run_paired(d, b, p, regression_slope_test),
    "trend": _run_trend,
    "anova": lambda d, b, p: _run_grouped(
        d, b, p, lambda samples, pp: one_way_anova(samples)),
    "variance_comparison": lambda d, b, p: _run_grouped(
        d, b, p, lambda samples, pp: levene_test(samples, center=pp["center"])),
    "normality": _run_normality,
    "distribution_comparison": lambda d, b, p: _run_two_sample(
        d, b, p, lambda a, bb, pp: ks_test(a, bb)),
    "median_comparison": lambda d, b, p: _run_two_sample(
        d, b, p, lambda a, bb, pp: mann_whitney_u(a, bb)),
    "survival": _run_survival,
    "change_point": _run_change_point,
    "clustering": _run_clustering,
    "latent_groups": _run_latent_groups,
    "outlier_scan": _run_outlier_scan,
    "anomaly_scan": _run_anomaly_scan,
}


def _group_count(binding, table) -> int:
    if isinstance(binding, Condition):
        return 2
    return len(_observed_levels(table.column(binding)))


def compile_hypothesis(doc: HypothesisDoc, table: DataTable) -> ExecutableTest:
    """Type-check ``doc`` against ``table`` and bind its kernel call.

    Raises :class:`DslError` carrying every incompatibility; never returns
    a partially bound plan.
    """
    violations = check_against_schema(doc, table)
    kind = doc.test.kind
    bindings = doc.test.bindings
    if not violations:
        if "group_by" in bindings:
            n_groups = _group_count(bindings["group_by"], table)
            if kind in _TWO_GROUP_KINDS and n_groups != 2:
                violations.append(
                    f"test.group_by: {kind} needs exactly 2 observed groups, "
                    f"found {n_groups}")
            elif n_groups < 2:
                violations.append(
                    f"test.group_by: needs at least 2 observed groups, "
                    f"found {n_groups}")
        if kind == "proportion_comparison":
            if len(_observed_levels(table.column(bindings["outcome"]))) < 2:
                violations.append(
                    "test.outcome: needs at least 2 observed levels")
        if kind == "independence":
            for name in ("x", "y"):
                if len(_observed_levels(table.column(bindings[name]))) < 2:
                    violations.append(
                        f"test.{name}: needs at least 2 observed levels")
        if kind == "outlier_scan":
            cols = bindings["columns"]
            variant = doc.test.resolved_params()["variant"]
            if variant == "mahalanobis" and len(cols) < 2:
                violations.append(
                    "test.columns: mahalanobis needs at least 2 columns")
            if variant != "mahalanobis" and len(cols) != 1:
                violations.append(
                    f"test.columns: {variant} scans exactly 1 column")
        if kind == "latent_groups" and len(bindings["columns"]) < 2:
            violations.append("test.columns: latent_groups needs >= 2 columns")
    if violations:
        raise DslError(violations)
    runner = _RUNNERS[kind](doc, bindings, doc.test.resolved_params())
    return ExecutableTest(doc=doc, columns=doc.test.columns(), runner=runner)


def indicator_column(doc: HypothesisDoc, table: DataTable):
    """Materialize the doc's indicator as a boolean ``hyp_<id>`` column."""
    if doc.indicator is None:
        raise DslError([f"hypothesis '{doc.id}' has no indicator expression"])
    vals, missing = eval_condition(doc.indicator, table)
    return boolean_column(f"hyp_{doc.id}", vals, missing=missing)
