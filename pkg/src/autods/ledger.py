"""Append-only metadata ledger threading every pipeline stage.

Each stage appends entries describing what it did (action, columns touched,
parameters, results) without ever mutating prior entries.  The JSON shape is
a stable external interface::

    {"entries": [{"stage": ..., "ts": ..., "action": ..., "columns": [...],
                  "params": {...}, "results": {...}, "provenance": [...]}]}

Unknown fields are rejected on load.  Timestamps are ISO-8601 strings; the
pipeline's default clock is logical (derived from entry count, not wall
time) so that identical runs serialize byte-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Optional

from .errors import DataError

_ENTRY_FIELDS = ("stage", "ts", "action", "columns", "params", "results", "provenance")
_SCALARS = (str, int, float, bool)


def _check_mapping(name: str, mapping: dict) -> dict:
    out = {}
    for key, val in mapping.items():
        if not isinstance(key, str):
            raise DataError(f"ledger {name} key {key!r} is not a string")
        if not isinstance(val, _SCALARS):
            raise DataError(
                f"ledger {name}[{key!r}] must be a scalar or string, got {type(val).__name__}"
            )
        out[key] = val
    return out


@dataclass(frozen=True)
class LedgerEntry:
    stage: str
    ts: str
    action: str
    columns: tuple = ()
    params: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    provenance: tuple = ()

    def __post_init__(self):
        if not self.stage:
            raise DataError("ledger entry stage_name must be non-empty")
        object.__setattr__(self, "columns", tuple(str(c) for c in self.columns))
        object.__setattr__(self, "provenance", tuple(str(p) for p in self.provenance))
        object.__setattr__(self, "params", _check_mapping("params", self.params))
        object.__setattr__(self, "results", _check_mapping("results", self.results))

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "ts": self.ts,
            "action": self.action,
            "columns": list(self.columns),
            "params": dict(self.params),
            "results": dict(self.results),
            "provenance": list(self.provenance),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LedgerEntry":
        if not isinstance(obj, dict):
            raise DataError("ledger entry must be an object")
        unknown = sorted(set(obj) - set(_ENTRY_FIELDS))
        if unknown:
            raise DataError(f"unknown ledger entry fields: {unknown}")
        missing = sorted(set(_ENTRY_FIELDS) - set(obj))
        if missing:
            raise DataError(f"ledger entry missing fields: {missing}")
        return cls(
            stage=obj["stage"],
            ts=obj["ts"],
            action=obj["action"],
            columns=tuple(obj["columns"]),
            params=dict(obj["params"]),
            results=dict(obj["results"]),
            provenance=tuple(obj["provenance"]),
        )


class MetadataLedger:
    """Immutable sequence of LedgerEntry values; append returns a new ledger."""

    __slots__ = ("entries",)

    def __init__(self, entries=()):
        object.__setattr__(self, "entries", tuple(entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MetadataLedger):
            return NotImplemented
        return self.entries == other.entries

    def append(self, entry: LedgerEntry) -> "MetadataLedger":
        return MetadataLedger(self.entries + (entry,))

    def extend(self, entries) -> "MetadataLedger":
        return MetadataLedger(self.entries + tuple(entries))

    def for_stage(self, stage: str) -> list:
        return [e for e in self.entries if e.stage == stage]

    def to_json(self) -> dict:
        return {"entries": [e.to_json() for e in self.entries]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, obj: dict) -> "MetadataLedger":
        if not isinstance(obj, dict):
            raise DataError("ledger document must be an object")
        unknown = sorted(set(obj) - {"entries"})
        if unknown:
            raise DataError(f"unknown ledger fields: {unknown}")
        if "entries" not in obj:
            raise DataError("ledger document missing 'entries'")
        return cls(LedgerEntry.from_json(e) for e in obj["entries"])

    @classmethod
    def loads(cls, text: str) -> "MetadataLedger":
        return cls.from_json(json.loads(text))


def ledger_append(ledger: MetadataLedger, entry: LedgerEntry) -> MetadataLedger:
    """Functional append; prior entries are shared, never copied or mutated."""
    return ledger.append(entry)


class Clock:
    """Timestamp source for ledger entries.

    Logical mode (the default) starts at a fixed instant and advances one
    second per tick, so repeated runs with the same inputs produce
    byte-identical ledgers.  Wall mode reports real UTC time.
    """

    def __init__(self, logical: bool = True, start: Optional[str] = None):
        self.logical = logical
        self._tick = 0
        self._start = datetime.fromisoformat(start) if start else datetime(
            2000, 1, 1, tzinfo=timezone.utc
        )

    def now(self) -> str:
        if self.logical:
            stamp = self._start + timedelta(seconds=self._tick)
            self._tick += 1
            return stamp.isoformat().replace("+00:00", "Z")
        return datetime.now(timezone.utc).isoformat(timespec="seconds").replace(
            "+00:00", "Z"
        )
