"""Hypothesis execution: batch testing, FDR control, indicator columns.

Runs compiled hypothesis documents against a table, applies the acceptance
rule (adjusted p below the document's alpha), and materializes the row-level
evidence: a boolean ``hyp_<id>`` column per accepted document with an
indicator expression, or the score columns a descriptive scan produced.
Every document is isolated — one failing test becomes an error verdict,
never an aborted batch — and every outcome lands in the metadata ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ._seeding import derive_seed
from .dsl import (
    CATALOG,
    HypothesisDoc,
    check_batch,
    compile_hypothesis,
    indicator_column,
)
from .errors import ConfigError, DataError, DslError, StatsError
from .ledger import Clock, LedgerEntry
from .stats import TestResult
from .table import DataTable

_FDR_MODES = ("none", "benjamini_hochberg")


def bh_adjust(p_values: Sequence[float]) -> list:
    """Benjamini-Hochberg step-up adjusted p-values.

    Monotone in the input order statistics and clipped to 1; the adjusted
    value for the i-th smallest p is ``min_{j>=i} (m * p_(j) / j)``.
    """
    ps = [float(p) for p in p_values]
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise StatsError(f"p-value outside [0, 1]: {p}")
    m = len(ps)
    if m == 0:
        return []
    order = np.argsort(ps, kind="mergesort")
    adjusted = [0.0] * m
    running = 1.0
    for rank in range(m, 0, -1):
        idx = int(order[rank - 1])
        running = min(running, m * ps[idx] / rank)
        adjusted[idx] = running
    return adjusted


@dataclass(frozen=True)
class HypothesisVerdict:
    """Outcome of one document: test result, acceptance, evidence column."""

    doc_id: str
    result: TestResult
    accepted: bool
    adjusted_p: float
    indicator_column: Optional[str] = None
    doc: Optional[HypothesisDoc] = None

    @property
    def error(self) -> Optional[str]:
        return self.result.details.get("error")


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def verdicts_json(docs: Sequence[HypothesisDoc],
                  verdicts: Sequence[HypothesisVerdict]) -> list:
    """Verdicts paired with their documents, shaped for ``hypotheses.json``."""
    by_id = {d.id: d for d in docs}
    out = []
    for v in verdicts:
        doc = by_id[v.doc_id]
        out.append(_json_safe({
            "id": v.doc_id,
            "statement": doc.statement,
            "kind": doc.test.kind,
            "alpha": doc.alpha,
            "accepted": v.accepted,
            "adjusted_p": v.adjusted_p,
            "indicator_column": v.indicator_column,
            "result": v.result.to_json(),
        }))
    return out


def _error_result(message: str) -> TestResult:
    return TestResult(float("nan"), 1.0, n_used=0, details={"error": message})


def _reserved_names(table: DataTable, doc_id: str) -> list:
    prefix = f"hyp_{doc_id}"
    return [n for n in table.names
            if n == prefix or n.startswith(prefix + "__")]


def run_batch(table: DataTable, docs: Sequence[HypothesisDoc],
              fdr: str = "none", seed: int = 0,
              clock: Optional[Clock] = None
              ) -> Tuple[DataTable, list, list]:
    """Execute every document; returns (table+evidence, verdicts, entries).

    Per-document failures (compile errors, degenerate data) become error
    verdicts with ``accepted=False``; the batch never aborts on one bad
    document.  Raw p-values of inferential kinds that executed cleanly form
    the BH family when ``fdr="benjamini_hochberg"``; descriptive kinds carry
    their 0/1 criterion pseudo-p through unadjusted.  Evidence columns are
    appended in document order, so identical inputs produce identical
    tables.
    """
    if fdr not in _FDR_MODES:
        raise ConfigError(f"fdr must be one of {_FDR_MODES}, got {fdr!r}")
    check_batch(docs)
    clock = clock if clock is not None else Clock()

    executions = {}
    errors = {}
    for doc in docs:
        try:
            taken = _reserved_names(table, doc.id)
            if taken:
                raise DslError(
                    [f"column '{taken[0]}' already exists; "
                     f"hypothesis id '{doc.id}' clashes with the table"])
            compiled = compile_hypothesis(doc, table)
            executions[doc.id] = compiled.run(
                table, seed=derive_seed(seed, "hypothesis", doc.id))
        except (DslError, StatsError, DataError) as exc:
            errors[doc.id] = str(exc)

    # BH family: real p-values only (inferential kinds, clean runs).
    family = [d.id for d in docs
              if d.id not in errors and not CATALOG[d.test.kind].descriptive]
    raw = {i: executions[i].result.p_value for i in family}
    if fdr == "benjamini_hochberg":
        adjusted_list = bh_adjust([raw[i] for i in family])
        adjusted = dict(zip(family, adjusted_list))
    else:
        adjusted = dict(raw)

    verdicts = []
    entries = []
    out = table
    for doc in docs:
        kind = doc.test.kind
        params = {"id": doc.id, "kind": kind, "statement": doc.statement,
                  "alpha": doc.alpha, "fdr": fdr}
        if doc.id in errors:
            verdict = HypothesisVerdict(doc.id, _error_result(errors[doc.id]),
                                        accepted=False, adjusted_p=1.0,
                                        doc=doc)
            results = {"accepted": False, "adjusted_p": 1.0,
                       "error": errors[doc.id]}
        else:
            execution = executions[doc.id]
            res = execution.result
            adj = float(adjusted.get(doc.id, res.p_value))
            accepted = adj < doc.alpha
            indicator_name = None
            if accepted:
                if CATALOG[kind].descriptive:
                    out = out.with_columns(execution.score_columns)
                elif doc.indicator is not None:
                    col = indicator_column(doc, table)
                    out = out.with_columns([col])
                    indicator_name = col.name
            verdict = HypothesisVerdict(doc.id, res, accepted, adj,
                                        indicator_name, doc=doc)
            results = {"statistic": float(res.statistic),
                       "p_value": float(res.p_value),
                       "adjusted_p": adj, "accepted": accepted}
            if indicator_name:
                results["indicator_column"] = indicator_name
            if accepted and CATALOG[kind].descriptive:
                results["score_columns"] = ",".join(
                    c.name for c in execution.score_columns)
        verdicts.append(verdict)
        entries.append(LedgerEntry(
            stage="hypothesis", ts=clock.now(), action="test",
            columns=doc.test.columns(), params=params, results=results,
            provenance=("hypothesis-engine", doc.id)))

    n_accepted = sum(1 for v in verdicts if v.accepted)
    entries.append(LedgerEntry(
        stage="hypothesis", ts=clock.now(), action="batch_summary",
        params={"fdr": fdr, "n_docs": len(docs)},
        results={"n_accepted": n_accepted,
                 "n_errors": len(errors),
                 "n_columns_added": out.n_cols - table.n_cols},
        provenance=("hypothesis-engine",)))
    return out, verdicts, entries
