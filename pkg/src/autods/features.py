"""Hypothesis-grounded feature construction.

A small arithmetic formula language (column refs, constants, ``+ - * / ^``,
``log log1p sqrt abs tan sin cos rank_pct``) plus group aggregations,
temporal windows, and PCA scores.  Candidate specs are derived from accepted
hypothesis verdicts — every feature carries the hypothesis ids that motivated
it — then relevance-pruned against the target before materialization.

Arithmetic is guarded: division by zero, log of a non-positive value, sqrt
of a negative, and tan near a pole all produce a *missing* cell, never an
error or an infinity.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DataError
from .ledger import Clock, LedgerEntry
from .stats.projection import pca
from .table import Column, DataTable, numeric_column

_TAN_GUARD = 1e-12
_FUNCS = ("log", "log1p", "sqrt", "abs", "tan", "sin", "cos", "rank_pct")
_BINOPS = ("+", "-", "*", "/", "^")
DEFAULT_BUDGET = 200
_PRUNE_R = 0.98


# ---------------------------------------------------------------------------
# Formula AST


@dataclass(frozen=True)
class FormulaExpr:
    """One AST node: ``ref``/``const`` leaves, ``call`` and binary ops."""

    op: str  # "ref" | "const" | "+" | "-" | "*" | "/" | "^" | "neg" | <func>
    name: Optional[str] = None
    value: Optional[float] = None
    args: Tuple["FormulaExpr", ...] = ()

    @classmethod
    def ref(cls, name: str) -> "FormulaExpr":
        return cls("ref", name=name)

    @classmethod
    def const(cls, value: float) -> "FormulaExpr":
        return cls("const", value=float(value))

    @classmethod
    def binary(cls, op: str, left: "FormulaExpr",
               right: "FormulaExpr") -> "FormulaExpr":
        if op not in _BINOPS:
            raise ConfigError(f"unknown operator {op!r}")
        return cls(op, args=(left, right))

    @classmethod
    def call(cls, fn: str, arg: "FormulaExpr") -> "FormulaExpr":
        if fn not in _FUNCS:
            raise ConfigError(f"unknown function {fn!r}")
        return cls(fn, args=(arg,))

    @classmethod
    def neg(cls, arg: "FormulaExpr") -> "FormulaExpr":
        return cls("neg", args=(arg,))

    def columns(self) -> list:
        if self.op == "ref":
            return [self.name]
        out = []
        for a in self.args:
            for c in a.columns():
                if c not in out:
                    out.append(c)
        return out

    def to_text(self) -> str:
        return _unparse(self, 0)


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_IDENT_OK = set("abcdefghijklmnopqrstuvwxyz"
                "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


def _ident(name: str) -> str:
    if (name and name[0] not in "0123456789"
            and all(ch in _IDENT_OK for ch in name)
            and name not in _FUNCS):
        return name
    return f"`{name}`"


def _unparse(e: FormulaExpr, parent_prec: int) -> str:
    if e.op == "ref":
        return _ident(e.name)
    if e.op == "const":
        text = f"{e.value:g}"
        if e.value < 0 and parent_prec > _PRECEDENCE["neg"]:
            return f"({text})"
        return text
    if e.op == "neg":
        inner = _unparse(e.args[0], _PRECEDENCE["neg"])
        text = f"-{inner}"
        return f"({text})" if parent_prec > _PRECEDENCE["neg"] else text
    if e.op in _BINOPS:
        prec = _PRECEDENCE[e.op]
        left = _unparse(e.args[0], prec)
        # - and / are left-associative; ^ is right-associative
        right = _unparse(e.args[1],
                         prec if e.op == "^" else prec + 1)
        if e.op == "^":
            left = _unparse(e.args[0], prec + 1)
        text = f"{left} {e.op} {right}"
        return f"({text})" if prec < parent_prec else text
    return f"{e.op}({_unparse(e.args[0], 0)})"


class _Tokens:
    def __init__(self, text: str):
        self.toks = self._lex(text)
        self.i = 0

    @staticmethod
    def _lex(text: str) -> list:
        toks, i, n = [], 0, len(text)
        while i < n:
            ch = text[i]
            if ch.isspace():
                i += 1
            elif ch in "+-*/^()":
                toks.append(("op", ch))
                i += 1
            elif ch == "`":
                j = text.find("`", i + 1)
                if j == -1:
                    raise ConfigError("unterminated backtick identifier")
                toks.append(("ref", text[i + 1:j]))
                i = j + 1
            elif ch.isdigit() or (ch == "." and i + 1 < n
                                  and text[i + 1].isdigit()):
                j = i
                while j < n and (text[j].isdigit() or text[j] in ".eE"
                                 or (text[j] in "+-" and text[j - 1] in "eE")):
                    j += 1
                toks.append(("num", float(text[i:j])))
                i = j
            elif ch.isalpha() or ch == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                toks.append(("name", text[i:j]))
                i = j
            else:
                raise ConfigError(f"unexpected character {ch!r} in formula")
        return toks

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def pop(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, kind, value=None):
        k, v = self.pop()
        if k != kind or (value is not None and v != value):
            raise ConfigError(f"malformed formula near token {v!r}")
        return v


def parse_formula(text: str) -> FormulaExpr:
    toks = _Tokens(text)
    expr = _parse_sum(toks)
    if toks.peek() != (None, None):
        raise ConfigError(f"trailing input in formula: {toks.peek()[1]!r}")
    return expr


def _parse_sum(t: _Tokens) -> FormulaExpr:
    left = _parse_term(t)
    while t.peek() == ("op", "+") or t.peek() == ("op", "-"):
        op = t.pop()[1]
        left = FormulaExpr.binary(op, left, _parse_term(t))
    return left


def _parse_term(t: _Tokens) -> FormulaExpr:
    left = _parse_unary(t)
    while t.peek() == ("op", "*") or t.peek() == ("op", "/"):
        op = t.pop()[1]
        left = FormulaExpr.binary(op, left, _parse_unary(t))
    return left


def _parse_unary(t: _Tokens) -> FormulaExpr:
    if t.peek() == ("op", "-"):
        t.pop()
        return FormulaExpr.neg(_parse_unary(t))
    return _parse_power(t)


def _parse_power(t: _Tokens) -> FormulaExpr:
    base = _parse_atom(t)
    if t.peek() == ("op", "^"):
        t.pop()
        return FormulaExpr.binary("^", base, _parse_unary(t))
    return base


def _parse_atom(t: _Tokens) -> FormulaExpr:
    kind, value = t.pop()
    if kind == "num":
        return FormulaExpr.const(value)
    if kind == "ref":
        return FormulaExpr.ref(value)
    if kind == "op" and value == "(":
        inner = _parse_sum(t)
        t.expect("op", ")")
        return inner
    if kind == "name":
        if value in _FUNCS:
            t.expect("op", "(")
            arg = _parse_sum(t)
            t.expect("op", ")")
            return FormulaExpr.call(value, arg)
        return FormulaExpr.ref(value)
    raise ConfigError(f"malformed formula near token {value!r}")


# ---------------------------------------------------------------------------
# Guarded evaluation


def _rank_pct(values: np.ndarray, missing: np.ndarray) -> np.ndarray:
    """Average-tie percentile ranks in (0, 1] over non-missing entries."""
    out = np.zeros_like(values)
    idx = np.flatnonzero(~missing)
    if idx.size == 0:
        return out
    vals = values[idx]
    order = np.argsort(vals, kind="mergesort")
    ranks = np.empty(idx.size, dtype=float)
    i = 0
    while i < idx.size:
        j = i
        while j + 1 < idx.size and vals[order[j + 1]] == vals[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    out[idx] = ranks / idx.size
    return out


def eval_formula(expr: FormulaExpr, table: DataTable):
    """Evaluate to ``(values, missing)``; guards turn undefined cells into
    missing flags instead of errors or infinities."""
    n = table.n_rows
    if expr.op == "const":
        return np.full(n, expr.value), np.zeros(n, dtype=bool)
    if expr.op == "ref":
        if expr.name not in table:
            raise DataError(f"no such column: {expr.name!r}")
        col = table.column(expr.name)
        if col.kind == "numeric":
            return col.values.copy(), col.missing.copy()
        if col.kind == "boolean":
            return col.values.astype(float), col.missing.copy()
        raise DataError(f"formula column {expr.name!r} must be numeric or "
                        f"boolean, is {col.kind}")
    if expr.op == "neg":
        vals, miss = eval_formula(expr.args[0], table)
        return -vals, miss
    if expr.op in _BINOPS:
        lv, lm = eval_formula(expr.args[0], table)
        rv, rm = eval_formula(expr.args[1], table)
        miss = lm | rm
        with np.errstate(all="ignore"):
            if expr.op == "+":
                vals = lv + rv
            elif expr.op == "-":
                vals = lv - rv
            elif expr.op == "*":
                vals = lv * rv
            elif expr.op == "/":
                bad = rv == 0.0
                vals = np.where(bad, 0.0, lv) / np.where(bad, 1.0, rv)
                miss = miss | bad
            else:  # ^
                # undefined: 0^negative, negative base with fractional power
                bad = ((lv == 0.0) & (rv < 0.0)) | (
                    (lv < 0.0) & (rv != np.floor(rv)))
                vals = np.power(np.where(bad, 1.0, lv),
                                np.where(bad, 1.0, rv))
                miss = miss | bad
        bad = ~np.isfinite(vals)
        vals = np.where(bad, 0.0, vals)
        return vals, miss | bad
    # function call
    vals, miss = eval_formula(expr.args[0], table)
    with np.errstate(all="ignore"):
        if expr.op == "log":
            bad = vals <= 0.0
            out = np.log(np.where(bad, 1.0, vals))
        elif expr.op == "log1p":
            bad = vals <= -1.0
            out = np.log1p(np.where(bad, 0.0, vals))
        elif expr.op == "sqrt":
            bad = vals < 0.0
            out = np.sqrt(np.where(bad, 0.0, vals))
        elif expr.op == "abs":
            bad = np.zeros_like(miss)
            out = np.abs(vals)
        elif expr.op == "tan":
            bad = np.abs(np.cos(vals)) < _TAN_GUARD
            out = np.tan(np.where(bad, 0.0, vals))
        elif expr.op == "sin":
            bad = np.zeros_like(miss)
            out = np.sin(vals)
        elif expr.op == "cos":
            bad = np.zeros_like(miss)
            out = np.cos(vals)
        elif expr.op == "rank_pct":
            return _rank_pct(vals, miss), miss.copy()
        else:  # pragma: no cover - constructor guards
            raise ConfigError(f"unknown function {expr.op!r}")
    nonfinite = ~np.isfinite(out)
    out = np.where(nonfinite, 0.0, out)
    return out, miss | bad | nonfinite


# ---------------------------------------------------------------------------
# Feature specs


@dataclass(frozen=True)
class FeatureSpec:
    """Named generator plus the hypothesis ids that motivated it."""

    name: str
    generator: dict
    provenance: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise ConfigError("feature name must be non-empty")
        gtype = self.generator.get("type")
        if gtype not in ("formula", "interaction", "aggregate", "lag",
                         "rolling", "pca_scores"):
            raise ConfigError(f"unknown feature generator {gtype!r}")

    def inputs(self) -> list:
        g = self.generator
        t = g["type"]
        if t == "formula":
            return parse_formula(g["expr"]).columns()
        if t == "interaction":
            return list(g["cols"])
        if t == "aggregate":
            return [g["group_col"], g["value_col"]]
        if t in ("lag", "rolling"):
            return [g["col"], g["order_by"]]
        return list(g["cols"])  # pca_scores

    def to_json(self) -> dict:
        return {"name": self.name, "generator": self.generator,
                "provenance": list(self.provenance)}


def spec_from_json(obj: dict) -> FeatureSpec:
    try:
        return FeatureSpec(name=obj["name"], generator=dict(obj["generator"]),
                           provenance=tuple(obj.get("provenance") or ()))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed feature spec: {exc}") from exc


def formula_feature(name: str, text: str, provenance=()) -> FeatureSpec:
    parse_formula(text)  # validate eagerly
    return FeatureSpec(name, {"type": "formula", "expr": text},
                       tuple(provenance))


# ---------------------------------------------------------------------------
# Materialization


def _order_for(table: DataTable, order_by: str) -> np.ndarray:
    col = table.column(order_by)
    if col.kind != "datetime":
        raise DataError(f"order column {order_by!r} must be datetime")
    keys = np.where(col.missing, np.inf, col.values.astype(float))
    return np.argsort(keys, kind="mergesort")


def _lag_values(table: DataTable, g: dict):
    col = table.column(g["col"])
    if col.kind != "numeric":
        raise DataError(f"lag source {g['col']!r} must be numeric")
    k = int(g.get("k", 1))
    if k < 1:
        raise ConfigError("lag k must be >= 1")
    order = _order_for(table, g["order_by"])
    n = len(col)
    vals = np.zeros(n)
    miss = np.ones(n, dtype=bool)
    seq_v = col.values[order]
    seq_m = col.missing[order]
    for pos in range(k, n):
        if not seq_m[pos - k]:
            row = order[pos]
            vals[row] = seq_v[pos - k]
            miss[row] = False
    return vals, miss


def _rolling_values(table: DataTable, g: dict):
    col = table.column(g["col"])
    if col.kind != "numeric":
        raise DataError(f"rolling source {g['col']!r} must be numeric")
    w = int(g.get("window", 5))
    if w < 1:
        raise ConfigError("rolling window must be >= 1")
    stat = g.get("stat", "mean")
    if stat != "mean":
        raise ConfigError(f"unsupported rolling stat {stat!r}")
    order = _order_for(table, g["order_by"])
    n = len(col)
    vals = np.zeros(n)
    miss = np.ones(n, dtype=bool)
    seq_v = col.values[order]
    seq_m = col.missing[order]
    for pos in range(w - 1, n):
        window_m = seq_m[pos - w + 1:pos + 1]
        if not window_m.any():
            row = order[pos]
            vals[row] = float(np.mean(seq_v[pos - w + 1:pos + 1]))
            miss[row] = False
    return vals, miss


def _aggregate_values(table: DataTable, g: dict):
    group = table.column(g["group_col"])
    value = table.column(g["value_col"])
    if group.kind not in ("categorical", "boolean"):
        raise DataError(f"aggregate group {g['group_col']!r} must be "
                        "categorical or boolean")
    if value.kind != "numeric":
        raise DataError(f"aggregate value {g['value_col']!r} must be numeric")
    stat = g.get("stat", "mean")
    if stat not in ("mean", "std"):
        raise ConfigError(f"unsupported aggregate stat {stat!r}")
    n = len(group)
    vals = np.zeros(n)
    miss = np.ones(n, dtype=bool)
    usable = ~group.missing & ~value.missing
    stats = {}
    for level in sorted(set(group.values[usable].tolist())):
        sel = usable & (group.values == level)
        x = value.values[sel]
        if stat == "mean":
            stats[level] = float(np.mean(x))
        elif x.size >= 2:
            stats[level] = float(np.std(x, ddof=1))
    for r in range(n):
        if group.missing[r]:
            continue
        got = stats.get(group.values[r])
        if got is not None:
            vals[r] = got
            miss[r] = False
    return vals, miss


def _pca_values(table: DataTable, g: dict):
    cols = [table.column(c) for c in g["cols"]]
    for c in cols:
        if c.kind != "numeric":
            raise DataError(f"pca column {c.name!r} must be numeric")
    n = table.n_rows
    usable = np.ones(n, dtype=bool)
    for c in cols:
        usable &= ~c.missing
    vals = np.zeros(n)
    miss = ~usable
    rows = np.flatnonzero(usable)
    if rows.size >= 2:
        mat = np.column_stack([c.values[rows] for c in cols])
        std = mat.std(axis=0, ddof=1)
        std[std == 0.0] = 1.0
        mat = (mat - mat.mean(axis=0)) / std
        proj = pca(mat, variance_target=float(g.get("variance_target", 0.95)),
                   max_components=1)
        vals[rows] = proj.scores[:, 0]
    return vals, miss


def materialize(table: DataTable, specs: Sequence[FeatureSpec],
                clock: Optional[Clock] = None):
    """Append one column per spec; returns ``(table, ledger entries)``.

    Name collisions (against the table or within the batch) fail before any
    column is written; undefined cells arrive as missing flags and their
    count lands in the ledger entry.
    """
    clock = clock or Clock(logical=True)
    seen = set()
    for spec in specs:
        if spec.name in table or spec.name in seen:
            raise DataError(f"feature name collision: {spec.name!r}")
        seen.add(spec.name)
    out = table
    entries = []
    for spec in specs:
        g = spec.generator
        if g["type"] == "formula":
            vals, miss = eval_formula(parse_formula(g["expr"]), out)
        elif g["type"] == "interaction":
            expr = FormulaExpr.ref(g["cols"][0])
            for c in g["cols"][1:]:
                expr = FormulaExpr.binary("*", expr, FormulaExpr.ref(c))
            vals, miss = eval_formula(expr, out)
        elif g["type"] == "aggregate":
            vals, miss = _aggregate_values(out, g)
        elif g["type"] == "lag":
            vals, miss = _lag_values(out, g)
        elif g["type"] == "rolling":
            vals, miss = _rolling_values(out, g)
        else:
            vals, miss = _pca_values(out, g)
        out = out.with_columns([numeric_column(spec.name, vals, miss)])
        entries.append(LedgerEntry(
            stage="features", ts=clock.now(), action=g["type"],
            columns=(*spec.inputs(), spec.name),
            params={"spec": json.dumps(spec.to_json(), sort_keys=True)},
            results={"missing_cells": int(np.count_nonzero(miss))},
            provenance=("feature-agent", spec.name)))
    return out, entries


# ---------------------------------------------------------------------------
# Candidate generation


_KIND_ORDER = {"interaction": 0, "ratio": 1, "difference": 2,
               "rankpct_ratio": 3, "aggregate_mean": 4, "aggregate_std": 5,
               "log1p": 6, "sqrt": 7, "lag": 8, "rolling": 9, "pca": 10}


def _skewness(col: Column) -> Optional[float]:
    x = col.values[~col.missing]
    if x.size < 3:
        return None
    centered = x - x.mean()
    m2 = float(np.mean(centered ** 2))
    if m2 <= 0.0:
        return None
    return float(np.mean(centered ** 3)) / m2 ** 1.5


def _safe(name: str) -> str:
    return "".join(ch if ch in _IDENT_OK else "_" for ch in name)


def _correlated_block(table: DataTable, names: list) -> list:
    """Greedy clique of numerics with pairwise |r| > 0.6; [] if < 6 strong."""
    cols = {n: table.column(n) for n in names}
    usable = {}
    for n, c in cols.items():
        x = c.values[~c.missing]
        if x.size >= 3 and np.std(x) > 0:
            usable[n] = c
    names = [n for n in names if n in usable]
    if len(names) < 6:
        return []
    r = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            ca, cb = usable[a], usable[b]
            keep = ~ca.missing & ~cb.missing
            x, y = ca.values[keep], cb.values[keep]
            if x.size < 3 or np.std(x) == 0 or np.std(y) == 0:
                continue
            r[(a, b)] = r[(b, a)] = abs(float(np.corrcoef(x, y)[0, 1]))
    best_pair = max(r, key=lambda k: (r[k], k), default=None)
    if best_pair is None or r[best_pair] <= 0.6:
        return []
    block = sorted(best_pair[:2])
    for cand in names:
        if cand in block:
            continue
        if all(r.get((cand, m), 0.0) > 0.6 for m in block):
            block.append(cand)
    return sorted(block) if len(block) >= 6 else []


def _verdict_priority(v) -> float:
    p = getattr(v, "adjusted_p", None)
    return float(p) if p is not None and math.isfinite(p) else math.inf


def generate_candidates(table: DataTable, verdicts, budget: int = DEFAULT_BUDGET,
                        target: Optional[str] = None) -> list:
    """Candidate features from accepted verdicts plus default routines,
    capped at ``budget`` by verdict p ascending then kind order."""
    if budget < 1:
        raise ConfigError("feature budget must be >= 1")
    candidates = []  # (priority_p, kind_order, name, spec)

    def add(p, kind, spec):
        candidates.append((p, _KIND_ORDER[kind], spec.name, spec))

    numeric = [n for n in table.names_of_kind("numeric")
               if not n.startswith("hyp_") and n != target]

    # A numeric column is "validated" once any accepted verdict touches
    # it.  Pair features combine validated variables, never the target —
    # column references to the target would leak it into the matrix.
    validated: dict = {}
    for v in sorted(verdicts, key=lambda v: (_verdict_priority(v),
                                             getattr(v, "doc_id", ""))):
        doc = getattr(v, "doc", None)
        if doc is None or not v.accepted or v.error:
            continue
        p = _verdict_priority(v)
        kind = doc.test.kind
        for name in doc.test.columns():
            if name == target or name not in table:
                continue
            if table.kind(name) != "numeric":
                continue
            if name not in validated:
                validated[name] = (p, doc.id)
        if kind in ("mean_comparison", "anova", "median_comparison",
                    "distribution_comparison", "variance_comparison"):
            group = doc.test.bindings.get("group_by")
            value = doc.test.bindings.get("value")
            if not (isinstance(group, str) and isinstance(value, str)):
                continue
            if group == target or value == target:
                continue
            if group not in table or table.kind(group) not in (
                    "categorical", "boolean"):
                continue
            sg, sv = _safe(group), _safe(value)
            add(p, "aggregate_mean", FeatureSpec(
                f"{sv}_mean_by_{sg}",
                {"type": "aggregate", "group_col": group, "value_col": value,
                 "stat": "mean"}, (doc.id,)))
            add(p, "aggregate_std", FeatureSpec(
                f"{sv}_std_by_{sg}",
                {"type": "aggregate", "group_col": group, "value_col": value,
                 "stat": "std"}, (doc.id,)))

    ordered = sorted(validated, key=lambda n: (validated[n][0], n))
    for a, b in itertools.combinations(ordered, 2):
        (pa, ida), (pb, idb) = validated[a], validated[b]
        p = max(pa, pb)
        prov = (ida,) if ida == idb else (ida, idb)
        sa, sb = _safe(a), _safe(b)
        add(p, "interaction", FeatureSpec(
            f"{sa}_times_{sb}",
            {"type": "interaction", "cols": [a, b]}, prov))
        add(p, "ratio", formula_feature(
            f"{sa}_over_{sb}", f"{_ident(a)} / {_ident(b)}", prov))
        add(p, "difference", formula_feature(
            f"{sa}_minus_{sb}", f"{_ident(a)} - {_ident(b)}", prov))
        add(p, "rankpct_ratio", formula_feature(
            f"{sa}_over_rankpct_{sb}",
            f"{_ident(a)} / rank_pct({_ident(b)})", prov))

    for name in numeric:
        skew = _skewness(table.column(name))
        if skew is None or abs(skew) <= 1.0:
            continue
        col = table.column(name)
        obs = col.values[~col.missing]
        s = _safe(name)
        if obs.size and float(np.min(obs)) > -1.0:
            add(math.inf, "log1p", formula_feature(
                f"log1p_{s}", f"log1p({_ident(name)})"))
        if obs.size and float(np.min(obs)) >= 0.0:
            add(math.inf, "sqrt", formula_feature(
                f"sqrt_{s}", f"sqrt({_ident(name)})"))

    datetimes = table.names_of_kind("datetime")
    if datetimes:
        order_by = datetimes[0]
        for name in numeric:
            s = _safe(name)
            add(math.inf, "lag", FeatureSpec(
                f"{s}_lag1", {"type": "lag", "col": name, "k": 1,
                              "order_by": order_by}))
            add(math.inf, "rolling", FeatureSpec(
                f"{s}_rollmean5",
                {"type": "rolling", "col": name, "window": 5, "stat": "mean",
                 "order_by": order_by}))

    block = _correlated_block(table, numeric)
    if block:
        add(math.inf, "pca", FeatureSpec(
            "pca_component_1",
            {"type": "pca_scores", "cols": block, "variance_target": 0.95}))

    candidates.sort(key=lambda c: c[:3])
    out, seen = [], set()
    for _, _, name, spec in candidates:
        if name in seen or name in table:
            continue
        seen.add(name)
        out.append(spec)
        if len(out) == budget:
            break
    return out


# ---------------------------------------------------------------------------
# Relevance pruning


def _target_vector(table: DataTable, target: str):
    col = table.column(target)
    if col.kind == "numeric":
        return col.values, col.missing
    if col.kind == "boolean":
        return col.values.astype(float), col.missing
    raise DataError(f"prune target {target!r} must be numeric or boolean")


def _abs_r(x, xm, y, ym) -> float:
    keep = ~xm & ~ym
    xv, yv = x[keep], y[keep]
    if xv.size < 3 or np.std(xv) == 0 or np.std(yv) == 0:
        return 0.0
    return abs(float(np.corrcoef(xv, yv)[0, 1]))


def prune(table: DataTable, specs: Sequence[FeatureSpec], target: str,
          max_keep: int) -> list:
    """Rank specs by |r| against the target, drop near-duplicates
    (pairwise |r| > 0.98 keeps the higher-ranked), return top ``max_keep``."""
    if target not in table:
        raise DataError(f"no such column: {target!r}")
    if max_keep < 0:
        raise ConfigError("max_keep must be >= 0")
    if not specs:
        return []
    work, _ = materialize(table, specs)
    ty, tm = _target_vector(table, target)
    scored = []
    for i, spec in enumerate(specs):
        col = work.column(spec.name)
        scored.append((-_abs_r(col.values, col.missing, ty, tm), i, spec))
    scored.sort(key=lambda s: s[:2])
    kept = []
    for _, i, spec in scored:
        col = work.column(spec.name)
        dup = any(_abs_r(col.values, col.missing,
                         work.column(k.name).values,
                         work.column(k.name).missing) > _PRUNE_R
                  for k in kept)
        if dup:
            continue
        kept.append(spec)
        if len(kept) == max_keep:
            break
    return kept


def features_json(specs: Sequence[FeatureSpec],
                  materialized: DataTable) -> list:
    """Feature catalog for ``features.json``: generator, provenance, and
    the missing-cell count observed after materialization."""
    out = []
    for spec in specs:
        entry = spec.to_json()
        entry["missing_cells"] = int(
            np.count_nonzero(materialized.column(spec.name).missing))
        out.append(entry)
    return out
