"""Columnar dataset model: typed columns, CSV ingestion, summaries.

A :class:`DataTable` is an immutable ordered collection of typed columns
(numeric, categorical, boolean, datetime), each carrying a per-cell missing
mask.  Numeric cells are always finite; non-finite inputs become missing.
Datetime cells store epoch seconds (UTC convention for naive stamps) plus
the original text, since downstream stages only need ordering and
differencing.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError

KINDS = ("numeric", "categorical", "boolean", "datetime")

# Tokens treated as missing on ingest (extendable per load_csv call).
DEFAULT_MISSING = ("", "NA")

_BOOL_TOKENS = {"true": True, "false": False, "1": True, "0": False}
_ISO_RE = re.compile(r"^\d{4}-\d{2}-\d{2}([T ].+)?$")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Column:
    """One typed column with a per-cell missing mask.

    ``values`` dtype by kind: numeric float64, boolean bool, categorical
    object (str), datetime int64 (epoch seconds).  ``text`` keeps the
    original strings for datetime columns only.
    """

    name: str
    kind: str
    values: np.ndarray
    missing: np.ndarray
    text: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown column kind {self.kind!r}")
        if not self.name:
            raise DataError("column name must be non-empty")
        if len(self.values) != len(self.missing):
            raise DataError(f"column {self.name!r}: values/missing length mismatch")
        _freeze(self.values)
        _freeze(self.missing)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())

    def non_missing(self) -> np.ndarray:
        """Values at non-missing positions."""
        return self.values[~self.missing]

    def take(self, indices: np.ndarray) -> "Column":
        text = tuple(self.text[i] for i in indices) if self.text is not None else None
        return Column(
            self.name,
            self.kind,
            self.values[indices].copy(),
            self.missing[indices].copy(),
            text,
        )

    def renamed(self, name: str) -> "Column":
        return replace(self, name=name)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Column):
            return NotImplemented
        if self.name != other.name or self.kind != other.kind:
            return False
        if len(self) != len(other):
            return False
        if not np.array_equal(self.missing, other.missing):
            return False
        keep = ~self.missing
        return bool(np.array_equal(self.values[keep], other.values[keep]))


def _normalized(kind: str, values: np.ndarray, missing: np.ndarray) -> np.ndarray:
    """Overwrite masked cells with the kind's neutral value so that equal
    tables serialize identically regardless of what was behind the mask."""
    out = values.copy()
    if missing.any():
        fill = {"numeric": 0.0, "boolean": False, "categorical": "", "datetime": 0}[kind]
        out[missing] = fill
    return out


def numeric_column(name: str, values, missing=None) -> Column:
    vals = np.asarray(values, dtype=np.float64).copy()
    if missing is None:
        missing = ~np.isfinite(vals)
    else:
        missing = np.asarray(missing, dtype=bool).copy()
        missing |= ~np.isfinite(vals)
    if missing.any():
        vals[missing] = 0.0
    if not np.isfinite(vals).all():
        raise DataError(f"column {name!r}: non-finite numeric cell outside mask")
    return Column(name, "numeric", vals, missing)


def boolean_column(name: str, values, missing=None) -> Column:
    vals = np.asarray(values, dtype=bool)
    missing = (
        np.zeros(len(vals), dtype=bool)
        if missing is None
        else np.asarray(missing, dtype=bool)
    )
    return Column(name, "boolean", _normalized("boolean", vals, missing), missing.copy())


def categorical_column(name: str, values: Sequence[str], missing=None) -> Column:
    vals = np.array([str(v) for v in values], dtype=object)
    missing = (
        np.zeros(len(vals), dtype=bool)
        if missing is None
        else np.asarray(missing, dtype=bool)
    )
    return Column(
        name, "categorical", _normalized("categorical", vals, missing), missing.copy()
    )


def datetime_column(name: str, epochs, texts: Sequence[str], missing=None) -> Column:
    vals = np.asarray(epochs, dtype=np.int64)
    missing = (
        np.zeros(len(vals), dtype=bool)
        if missing is None
        else np.asarray(missing, dtype=bool)
    )
    return Column(
        name,
        "datetime",
        _normalized("datetime", vals, missing),
        missing.copy(),
        tuple("" if m else str(t) for t, m in zip(texts, missing)),
    )


class DataTable:
    """Immutable ordered collection of equal-length columns."""

    __slots__ = ("_columns", "_index", "n_rows")

    def __init__(self, columns: Iterable[Column]):
        cols = tuple(columns)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"duplicate column names: {dupes}")
        lengths = {len(c) for c in cols}
        if len(lengths) > 1:
            raise DataError(f"columns have differing lengths: {sorted(lengths)}")
        object.__setattr__(self, "_columns", cols)
        object.__setattr__(self, "_index", {c.name: i for i, c in enumerate(cols)})
        object.__setattr__(self, "n_rows", lengths.pop() if lengths else 0)

    @property
    def columns(self) -> tuple:
        return self._columns

    @property
    def names(self) -> list:
        return [c.name for c in self._columns]

    @property
    def n_cols(self) -> int:
        return len(self._columns)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __eq__(self, other) -> bool:
        if not isinstance(other, DataTable):
            return NotImplemented
        return self.n_rows == other.n_rows and self._columns == other._columns

    def column(self, name: str) -> Column:
        try:
            return self._columns[self._index[name]]
        except KeyError:
            raise DataError(f"no such column: {name!r}") from None

    def kind(self, name: str) -> str:
        return self.column(name).kind

    def names_of_kind(self, *kinds: str) -> list:
        return [c.name for c in self._columns if c.kind in kinds]

    def with_columns(self, new: Iterable[Column]) -> "DataTable":
        new = list(new)
        for c in new:
            if c.name in self._index:
                raise DataError(f"column {c.name!r} already exists")
        return DataTable(self._columns + tuple(new))

    def replace_column(self, col: Column) -> "DataTable":
        if col.name not in self._index:
            raise DataError(f"no such column: {col.name!r}")
        cols = list(self._columns)
        cols[self._index[col.name]] = col
        return DataTable(cols)

    def drop_columns(self, names: Sequence[str]) -> "DataTable":
        drop = set(names)
        return DataTable(c for c in self._columns if c.name not in drop)

    def take_rows(self, indices: np.ndarray) -> "DataTable":
        indices = np.asarray(indices)
        if indices.dtype == bool:
            indices = np.flatnonzero(indices)
        return DataTable(c.take(indices) for c in self._columns)


# ---------------------------------------------------------------------------
# CSV ingestion


def _parse_datetime(token: str) -> Optional[int]:
    if not _ISO_RE.match(token):
        return None
    text = token[:-1] + "+00:00" if token.endswith("Z") else token
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _parse_number(token: str) -> Optional[float]:
    try:
        val = float(token)
    except ValueError:
        return None
    # Non-finite literals ("nan", "inf") count as numbers for kind
    # inference but land as missing cells, keeping stored values finite.
    return val


def _infer_kind(tokens: list) -> str:
    if not tokens:
        return "categorical"
    lowered = {t.lower() for t in tokens}
    if lowered <= set(_BOOL_TOKENS):
        return "boolean"
    if all(_parse_number(t) is not None for t in tokens):
        return "numeric"
    if all(_parse_datetime(t) is not None for t in tokens):
        return "datetime"
    return "categorical"


def _build_column(name: str, cells: list, kind: str, missing: np.ndarray) -> Column:
    n = len(cells)
    if kind == "numeric":
        vals = np.zeros(n)
        miss = missing.copy()
        for i, tok in enumerate(cells):
            if miss[i]:
                continue
            v = _parse_number(tok)
            if v is None:
                raise DataError(
                    f"column {name!r}: cell {tok!r} is not numeric (row {i + 2})"
                )
            if math.isfinite(v):
                vals[i] = v
            else:
                miss[i] = True
        return numeric_column(name, vals, miss)
    if kind == "boolean":
        vals = np.zeros(n, dtype=bool)
        for i, tok in enumerate(cells):
            if missing[i]:
                continue
            try:
                vals[i] = _BOOL_TOKENS[tok.lower()]
            except KeyError:
                raise DataError(
                    f"column {name!r}: cell {tok!r} is not boolean (row {i + 2})"
                ) from None
        return boolean_column(name, vals, missing)
    if kind == "datetime":
        epochs = np.zeros(n, dtype=np.int64)
        for i, tok in enumerate(cells):
            if missing[i]:
                continue
            ts = _parse_datetime(tok)
            if ts is None:
                raise DataError(
                    f"column {name!r}: cell {tok!r} is not an ISO-8601 datetime "
                    f"(row {i + 2})"
                )
            epochs[i] = ts
        return datetime_column(name, epochs, cells, missing)
    return categorical_column(name, cells, missing)


def load_csv(
    path,
    schema_hints: Optional[dict] = None,
    extra_missing: Sequence[str] = (),
) -> DataTable:
    """Load an RFC-4180 CSV with a header row into a typed DataTable.

    Kind inference per column, on non-missing cells: all tokens in
    {true,false,0,1} -> boolean; all parseable as numbers -> numeric; all
    ISO-8601 -> datetime; otherwise categorical.  Empty string and "NA"
    (plus ``extra_missing``) are missing cells, never categories.
    ``schema_hints`` maps column name to a kind and overrides inference.
    """
    hints = dict(schema_hints or {})
    for name, kind in hints.items():
        if kind not in KINDS:
            raise DataError(f"schema hint for {name!r}: unknown kind {kind!r}")
    sentinels = set(DEFAULT_MISSING) | set(extra_missing)

    with open(path, "r", encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file: header row required") from None
        if any(not h for h in header):
            raise DataError("empty column name in header")
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise DataError(f"duplicate headers: {dupes}")
        n_cols = len(header)
        raw: list = [[] for _ in header]
        for row in reader:
            if not row and n_cols == 1:
                row = [""]
            if len(row) != n_cols:
                raise DataError(f"ragged row at line {reader.line_num}")
            for cell_list, cell in zip(raw, row):
                cell_list.append(cell)

    unknown = sorted(set(hints) - set(header))
    if unknown:
        raise DataError(f"schema hints for unknown columns: {unknown}")

    columns = []
    for name, cells in zip(header, raw):
        missing = np.array([c in sentinels for c in cells], dtype=bool)
        present = [c for c, m in zip(cells, missing) if not m]
        kind = hints.get(name) or _infer_kind(present)
        columns.append(_build_column(name, cells, kind, missing))
    return DataTable(columns)


def _format_number(v: float) -> str:
    return repr(float(v))


def write_csv(table: DataTable, path) -> None:
    """Inverse of load_csv: missing cells as "", booleans as true/false,
    datetimes as their original text."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.names)
        cols = table.columns
        for i in range(table.n_rows):
            row = []
            for c in cols:
                if c.missing[i]:
                    row.append("")
                elif c.kind == "numeric":
                    row.append(_format_number(c.values[i]))
                elif c.kind == "boolean":
                    row.append("true" if c.values[i] else "false")
                elif c.kind == "datetime":
                    row.append(c.text[i])
                else:
                    row.append(c.values[i])
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Summaries


@dataclass(frozen=True)
class ColumnSummary:
    """Per-column descriptive statistics used by the proposer and ledger."""

    name: str
    kind: str
    n_rows: int
    missing_count: int
    mean: Optional[float] = None
    std: Optional[float] = None
    min: Optional[float] = None
    q1: Optional[float] = None
    median: Optional[float] = None
    q3: Optional[float] = None
    max: Optional[float] = None
    distinct_count: Optional[int] = None
    mode: Optional[str] = None
    mode_frequency: Optional[int] = None
    integral: bool = False

    def to_json(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "n_rows": self.n_rows,
               "missing_count": self.missing_count}
        for key in ("mean", "std", "min", "q1", "median", "q3", "max",
                    "distinct_count", "mode", "mode_frequency"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.integral:
            out["integral"] = True
        return out


def quantile(sorted_vals: np.ndarray, p: float) -> float:
    """Linear interpolation between closest ranks (type-7)."""
    n = len(sorted_vals)
    if n == 0:
        raise ValueError("quantile of empty array")
    if n == 1:
        return float(sorted_vals[0])
    h = (n - 1) * p
    lo = int(math.floor(h))
    hi = min(lo + 1, n - 1)
    frac = h - lo
    return float(sorted_vals[lo] * (1.0 - frac) + sorted_vals[hi] * frac)


def _summarize_numeric(col: Column, n_rows: int) -> ColumnSummary:
    vals = np.sort(col.non_missing())
    base = dict(name=col.name, kind=col.kind, n_rows=n_rows,
                missing_count=col.n_missing)
    if len(vals) == 0:
        return ColumnSummary(**base)
    mean = float(vals.mean())
    std = float(vals.std(ddof=1)) if len(vals) >= 2 else None
    return ColumnSummary(
        **base,
        mean=mean,
        std=std,
        min=float(vals[0]),
        q1=quantile(vals, 0.25),
        median=quantile(vals, 0.5),
        q3=quantile(vals, 0.75),
        max=float(vals[-1]),
        distinct_count=int(len(np.unique(vals))),
        integral=bool(np.all(vals == np.floor(vals))),
    )


def _summarize_discrete(col: Column, n_rows: int) -> ColumnSummary:
    raw = col.non_missing()
    base = dict(name=col.name, kind=col.kind, n_rows=n_rows,
                missing_count=col.n_missing)
    if len(raw) == 0:
        return ColumnSummary(**base)
    labels = ["true" if v else "false" for v in raw] if col.kind == "boolean" else list(raw)
    counts: dict = {}
    for v in labels:
        counts[v] = counts.get(v, 0) + 1
    # deterministic mode: highest count, ties broken lexicographically
    mode = min(counts, key=lambda k: (-counts[k], k))
    return ColumnSummary(
        **base,
        distinct_count=len(counts),
        mode=mode,
        mode_frequency=counts[mode],
    )


def summarize(table: DataTable) -> list:
    """One ColumnSummary per column; quantiles via type-7 interpolation."""
    out = []
    for col in table.columns:
        if col.kind == "numeric":
            out.append(_summarize_numeric(col, table.n_rows))
        elif col.kind == "datetime":
            num = numeric_column(col.name, col.values.astype(float), col.missing.copy())
            s = _summarize_numeric(num, table.n_rows)
            out.append(replace(s, kind="datetime"))
        else:
            out.append(_summarize_discrete(col, table.n_rows))
    return out


@dataclass(frozen=True)
class TableSchema:
    """Column kinds plus categorical level counts; what DSL compilation
    needs without touching row data."""

    kinds: dict
    levels: dict = field(default_factory=dict)

    @classmethod
    def from_table(cls, table: DataTable) -> "TableSchema":
        kinds = {c.name: c.kind for c in table.columns}
        levels = {}
        for c in table.columns:
            if c.kind == "categorical":
                levels[c.name] = len(set(c.non_missing()))
            elif c.kind == "boolean":
                vals = c.non_missing()
                levels[c.name] = len(np.unique(vals)) if len(vals) else 0
        return cls(kinds, levels)

    @classmethod
    def from_summaries(cls, summaries) -> "TableSchema":
        kinds = {s.name: s.kind for s in summaries}
        levels = {
            s.name: s.distinct_count
            for s in summaries
            if s.kind in ("categorical", "boolean") and s.distinct_count is not None
        }
        return cls(kinds, levels)

    def __contains__(self, name: str) -> bool:
        return name in self.kinds

    def kind(self, name: str) -> str:
        try:
            return self.kinds[name]
        except KeyError:
            raise DataError(f"no such column: {name!r}") from None
