"""Hypothesis proposers.

Two sources of :class:`~autods.dsl.HypothesisDoc` batches: a deterministic
template enumerator over column summaries (the default, zero network), and
an optional LLM endpoint speaking the common chat-completions wire shape.
Either way the proposer sees **summaries only, never rows**, and anything an
LLM returns must parse into the DSL or is rejected with the full violation
list — one repair round, then we move on.  Token spend and dollar cost are
tracked per exchange against an explicit budget that is never overdrawn.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

from .dsl import (
    CATALOG,
    Condition,
    HypothesisDoc,
    TestPlan,
    check_against_schema,
    hypothesis_from_obj,
)
from .errors import BudgetExceededError, ConfigError, DslError, TransportError
from .table import ColumnSummary, TableSchema

_LOW_CARDINALITY = 10
_MIN_OBSERVED = 20
DEFAULT_LIMIT = 24


# ---------------------------------------------------------------------------
# Template enumeration


def _fmt(value: float) -> str:
    return f"{value:g}"


def _thresholds(s: ColumnSummary):
    """Candidate split points at q1/median/q3, integer-rounded for integral
    columns, deduplicated, and guaranteed to leave both sides non-empty."""
    out = []
    for q in (s.q1, s.median, s.q3):
        if q is None:
            continue
        thr = float(round(q)) if s.integral else float(q)
        if s.min is not None and s.max is not None and s.min < thr <= s.max:
            if thr not in out:
                out.append(thr)
    return out


def _numeric_usable(s: ColumnSummary) -> bool:
    observed = s.n_rows - s.missing_count
    return s.std is not None and s.std > 0.0 and observed >= _MIN_OBSERVED


def _group_usable(s: ColumnSummary) -> bool:
    if s.distinct_count is None or s.distinct_count < 2:
        return False
    return s.kind == "boolean" or s.distinct_count <= _LOW_CARDINALITY


def enumerate_templates(summaries: Sequence[ColumnSummary], target: str,
                        limit: int = DEFAULT_LIMIT,
                        id_prefix: str = "h") -> list:
    """Systematic candidates against ``target``, capped at ``limit``.

    Enumeration order is column order, then kind (group comparison first,
    then threshold splits at q1/median/q3), so identical schemas always
    yield identical batches.  Each doc is valid by construction: kinds are
    chosen from the observed level counts and splits are kept inside the
    observed range.
    """
    by_name = {s.name: s for s in summaries}
    if target not in by_name:
        raise ConfigError(f"target column {target!r} not in schema")
    tgt = by_name[target]
    classification = tgt.kind == "boolean" or (
        tgt.kind == "categorical"
        and (tgt.distinct_count or 0) <= _LOW_CARDINALITY)
    if tgt.kind in ("categorical", "boolean") and not _group_usable(tgt):
        return []
    if tgt.kind == "numeric" and not _numeric_usable(tgt):
        return []
    if tgt.kind == "datetime":
        raise ConfigError("datetime target is not supported")

    docs: list = []
    n = 0

    def add(statement, plan, indicator=None):
        nonlocal n
        if len(docs) >= limit:
            return
        n += 1
        docs.append(HypothesisDoc(
            id=f"{id_prefix}{n}", statement=statement, test=plan,
            indicator=indicator))

    for s in summaries:
        if s.name == target or len(docs) >= limit:
            continue
        if s.kind == "datetime":
            continue
        if s.kind in ("boolean", "categorical"):
            if not _group_usable(s):
                continue
            indicator = (Condition.cmp("==", s.name, True)
                         if s.kind == "boolean" else None)
            if classification:
                add(f"The rate of {target} differs across {s.name} groups.",
                    TestPlan("proportion_comparison",
                             {"group_by": s.name, "outcome": target}),
                    indicator)
            elif s.distinct_count == 2:
                add(f"The mean of {target} differs between {s.name} groups.",
                    TestPlan("mean_comparison",
                             {"group_by": s.name, "value": target}),
                    indicator)
            else:
                add(f"The mean of {target} differs across {s.name} groups.",
                    TestPlan("anova", {"group_by": s.name, "value": target}))
            continue
        # numeric column
        if not _numeric_usable(s):
            continue
        if classification:
            if tgt.distinct_count == 2:
                add(f"The mean of {s.name} differs between {target} groups.",
                    TestPlan("mean_comparison",
                             {"group_by": target, "value": s.name}))
            else:
                add(f"The mean of {s.name} differs across {target} groups.",
                    TestPlan("anova", {"group_by": target, "value": s.name}))
        else:
            add(f"{s.name} and {target} are linearly associated.",
                TestPlan("correlation", {"x": s.name, "y": target}))
        for thr in _thresholds(s):
            cond = Condition.cmp("<", s.name, thr)
            if classification:
                add(f"Rows with {s.name} < {_fmt(thr)} have a different "
                    f"{target} rate.",
                    TestPlan("proportion_comparison",
                             {"group_by": cond, "outcome": target}),
                    cond)
            else:
                add(f"Rows with {s.name} < {_fmt(thr)} have a different "
                    f"mean {target}.",
                    TestPlan("mean_comparison",
                             {"group_by": cond, "value": target}),
                    cond)
    return docs


# ---------------------------------------------------------------------------
# LLM boundary


@dataclass(frozen=True)
class ProposalBudget:
    """Hard ceilings for one run; a call is never initiated at or beyond
    any ceiling, so spend can overshoot by at most one response."""

    max_hypotheses: int = DEFAULT_LIMIT
    max_llm_calls: int = 4
    max_tokens: int = 100_000
    prices: dict = field(default_factory=dict)  # model -> (in $/1k, out $/1k)

    def __post_init__(self):
        for name in ("max_hypotheses", "max_llm_calls", "max_tokens"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ConfigError(f"budget {name} must be a nonnegative integer")
        for model, pair in self.prices.items():
            if len(tuple(pair)) != 2 or any(p < 0 for p in pair):
                raise ConfigError(f"budget prices[{model!r}] must be "
                                  "(input, output) nonnegative $/1k rates")

    def price_for(self, model: str) -> tuple:
        if model not in self.prices:
            raise ConfigError(f"no prices configured for model {model!r}")
        rate_in, rate_out = self.prices[model]
        return float(rate_in), float(rate_out)


@dataclass(frozen=True)
class LlmExchange:
    """One request/response round, with exact cost arithmetic."""

    model_name: str
    prompt: str
    response_text: str
    input_tokens: int
    output_tokens: int
    cost: float
    parse_outcome: object  # "ok" or {"rejected": [reasons]}

    def to_json(self) -> dict:
        return {
            "model_name": self.model_name,
            "prompt": self.prompt,
            "response_text": self.response_text,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "cost": self.cost,
            "parse_outcome": self.parse_outcome,
        }


def exchange_cost(input_tokens: int, output_tokens: int,
                  rate_in: float, rate_out: float) -> float:
    return input_tokens * rate_in / 1000.0 + output_tokens * rate_out / 1000.0


def total_cost(exchanges: Sequence[LlmExchange]) -> float:
    return sum(e.cost for e in exchanges)


def total_tokens(exchanges: Sequence[LlmExchange]) -> int:
    return sum(e.input_tokens + e.output_tokens for e in exchanges)


def write_exchanges(path, exchanges: Sequence[LlmExchange]) -> None:
    """Audit log: one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in exchanges:
            fh.write(json.dumps(e.to_json(), ensure_ascii=False) + "\n")


def _requests_transport(url: str, payload: dict, headers: dict,
                        timeout: float) -> dict:
    import requests

    try:
        resp = requests.post(url, json=payload, headers=headers,
                             timeout=timeout)
    except requests.RequestException as exc:
        raise TransportError(f"endpoint unreachable: {exc}") from exc
    if resp.status_code != 200:
        raise TransportError(
            f"endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
    try:
        return resp.json()
    except ValueError as exc:
        raise TransportError(f"endpoint returned non-JSON body: {exc}") from exc


@dataclass(frozen=True)
class LlmEndpoint:
    """Where to send chat-completions requests.

    ``transport(url, payload, headers, timeout) -> decoded JSON`` is
    injectable so tests and offline stubs never open sockets.
    """

    url: str
    model: str
    api_key: Optional[str] = None
    timeout: float = 60.0
    transport: Callable = None

    def chat(self, messages: list, max_tokens: int) -> dict:
        payload = {"model": self.model, "messages": messages,
                   "temperature": 0, "max_tokens": max_tokens}
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        transport = self.transport or _requests_transport
        return transport(self.url, payload, headers, self.timeout)


def _response_parts(response: dict) -> tuple:
    """(content, input_tokens, output_tokens) or TransportError."""
    try:
        content = response["choices"][0]["message"]["content"]
        usage = response.get("usage", {})
        tin = int(usage.get("prompt_tokens", 0))
        tout = int(usage.get("completion_tokens", 0))
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise TransportError(f"malformed completion payload: {exc}") from exc
    if not isinstance(content, str):
        raise TransportError("completion content is not text")
    return content, tin, tout


def _catalog_help() -> str:
    lines = []
    for kind, spec in CATALOG.items():
        parts = []
        for name, role, required in spec.bindings:
            suffix = "" if required else "?"
            parts.append(f"{name}{suffix}=<{role}>")
        for pname, (default, _) in spec.params.items():
            parts.append(f"{pname}?={default!r}")
        lines.append(f"- {kind}: {', '.join(parts)}")
    return "\n".join(lines)


_SYSTEM_PROMPT = (
    "You propose statistical hypotheses about a tabular dataset as JSON "
    "documents for automated validation. Respond with a JSON array only — "
    "no prose, no code fences."
)

_DOC_SHAPE = (
    'Each document: {"id": str, "statement": str, "test": {"kind": str, '
    "...bindings...}, \"alpha\": 0.05, \"indicator\": <condition or null>}. "
    'Conditions: {"op": "<|<=|>|>=|==|!=", "column": str, "value": literal} '
    'or {"op": "and|or", "args": [...]} or {"op": "not", "arg": {...}}. '
    "A <group> binding is a column name or a condition object."
)


def build_prompt(summaries: Sequence[ColumnSummary], target: str,
                 limit: int) -> list:
    schema_json = json.dumps([s.to_json() for s in summaries],
                             ensure_ascii=False)
    user = (
        f"Dataset columns (summaries, no raw rows):\n{schema_json}\n\n"
        f"Target column: {target}\n\n"
        f"Available test kinds and their fields:\n{_catalog_help()}\n\n"
        f"{_DOC_SHAPE}\n\n"
        f"Propose up to {limit} testable hypotheses about drivers of "
        f"{target}. Use unique ids. Never bind a column that is not in the "
        "schema. Reply with a JSON array of documents only."
    )
    return [{"role": "system", "content": _SYSTEM_PROMPT},
            {"role": "user", "content": user}]


def build_repair_prompt(reasons: Sequence[str]) -> list:
    listing = "\n".join(f"{i + 1}. {r}" for i, r in enumerate(reasons))
    user = (
        "Some of the documents you proposed failed validation:\n"
        f"{listing}\n\n"
        "Re-emit corrected versions of ONLY the failed documents as a JSON "
        "array. Keep the same ids. Reply with the JSON array only."
    )
    return [{"role": "system", "content": _SYSTEM_PROMPT},
            {"role": "user", "content": user}]


def _extract_docs(text: str):
    """Response text -> list of decoded JSON objects, or raise ValueError."""
    body = text.strip()
    if body.startswith("```"):
        body = body.strip("`")
        if body.startswith("json"):
            body = body[4:]
        body = body.strip()
    try:
        decoded = json.loads(body)
    except json.JSONDecodeError:
        start, end = body.find("["), body.rfind("]")
        if start == -1 or end <= start:
            raise ValueError("response is not JSON")
        decoded = json.loads(body[start:end + 1])
    if isinstance(decoded, dict):
        decoded = [decoded]
    if not isinstance(decoded, list):
        raise ValueError("response is not a JSON array of documents")
    return decoded


def _summary_level_checks(doc: HypothesisDoc, by_name: dict) -> list:
    """Group-cardinality checks that summaries can answer without rows."""
    out = []
    binding = doc.test.bindings.get("group_by")
    if isinstance(binding, str):
        s = by_name.get(binding)
        if s is not None and s.distinct_count is not None:
            kind = doc.test.kind
            if kind in ("mean_comparison", "median_comparison",
                        "distribution_comparison") and s.distinct_count != 2:
                out.append(f"test.group_by: {kind} needs exactly 2 observed "
                           f"groups, found {s.distinct_count}")
            elif s.distinct_count < 2:
                out.append("test.group_by: needs at least 2 observed groups")
    return out


def parse_proposals(objs: Sequence, summaries: Sequence[ColumnSummary],
                    seen_ids: set) -> Tuple[list, list]:
    """Validate decoded doc objects -> (docs, rejection reasons)."""
    schema = TableSchema.from_summaries(summaries)
    by_name = {s.name: s for s in summaries}
    docs, reasons = [], []
    for i, obj in enumerate(objs):
        label = f"doc[{i}]"
        try:
            doc = hypothesis_from_obj(obj, schema=schema)
        except DslError as exc:
            reasons.extend(f"{label}: {v}" for v in exc.violations)
            continue
        extra = _summary_level_checks(doc, by_name)
        if extra:
            reasons.extend(f"{label}: {v}" for v in extra)
            continue
        if doc.id in seen_ids:
            reasons.append(f"{label}: duplicate hypothesis id '{doc.id}'")
            continue
        seen_ids.add(doc.id)
        docs.append(doc)
    return docs, reasons


def llm_propose(summaries: Sequence[ColumnSummary], target: str,
                budget: ProposalBudget, endpoint: LlmEndpoint,
                limit: Optional[int] = None) -> Tuple[list, list]:
    """Ask the endpoint for hypothesis documents; returns (docs, exchanges).

    The response must parse through the DSL; one repair round passes the
    collected violations back.  Calls stop (partial results, not an
    exception) the moment a budget ceiling is reached; transport failures
    raise :class:`TransportError` so the caller can fall back to templates.
    """
    if target not in {s.name for s in summaries}:
        raise ConfigError(f"target column {target!r} not in schema")
    limit = min(limit or budget.max_hypotheses, budget.max_hypotheses)
    rate_in, rate_out = budget.price_for(endpoint.model)

    exchanges: list = []
    docs: list = []
    seen_ids: set = set()

    def remaining_tokens() -> int:
        return budget.max_tokens - total_tokens(exchanges)

    def can_call() -> bool:
        return len(exchanges) < budget.max_llm_calls and remaining_tokens() > 0

    def one_round(messages) -> Optional[list]:
        """Send, log, parse; returns rejection reasons (None = no call)."""
        if not can_call():
            return None
        response = endpoint.chat(messages,
                                 max_tokens=min(4096, remaining_tokens()))
        content, tin, tout = _response_parts(response)
        cost = exchange_cost(tin, tout, rate_in, rate_out)
        try:
            objs = _extract_docs(content)
            parsed, reasons = parse_proposals(objs, summaries, seen_ids)
        except ValueError as exc:
            parsed, reasons = [], [str(exc)]
        docs.extend(parsed[:max(0, limit - len(docs))])
        outcome = "ok" if not reasons else {"rejected": reasons}
        exchanges.append(LlmExchange(
            model_name=endpoint.model, prompt=json.dumps(messages),
            response_text=content, input_tokens=tin, output_tokens=tout,
            cost=cost, parse_outcome=outcome))
        return reasons

    reasons = one_round(build_prompt(summaries, target, limit))
    if reasons:
        one_round(build_repair_prompt(reasons))
    return docs, exchanges


def budget_exhausted(budget: ProposalBudget,
                     exchanges: Sequence[LlmExchange]) -> bool:
    """True when no further call could be initiated under ``budget``."""
    return (len(exchanges) >= budget.max_llm_calls
            or total_tokens(exchanges) >= budget.max_tokens)


def ensure_within_budget(budget: ProposalBudget,
                         exchanges: Sequence[LlmExchange]) -> None:
    if budget_exhausted(budget, exchanges):
        raise BudgetExceededError(
            f"llm budget exhausted after {len(exchanges)} calls / "
            f"{total_tokens(exchanges)} tokens")
