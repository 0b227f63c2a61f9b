"""Call-to-action reporting: verdicts and model results in plain language.

The JSON report is the source of truth; the Markdown is a pure rendering of
it, so regenerating Markdown from the parsed JSON is byte-identical.  Every
number that appears in prose or tables is first stored in the JSON and then
printed with the exact token ``json.dumps`` would use — that is what makes
the report-integrity check ("every numeric token in report.md appears in
report.json") enforceable rather than aspirational.

Recommendations are template-driven, keyed by test kind and effect
direction, and each one cites the accepted hypothesis that produced it;
nothing is ever recommended without a verdict behind it.
"""

from __future__ import annotations

import json
import re
from typing import Optional, Sequence

import numpy as np

from .stats.special import normal_ppf

_Z95 = normal_ppf(0.975)
_TWO_GROUP_RATE_KINDS = ("proportion_comparison",)
_TWO_GROUP_MEAN_KINDS = ("mean_comparison",)
_TWO_GROUP_MEDIAN_KINDS = ("median_comparison",)


def _round(x: Optional[float], digits: int = 4) -> Optional[float]:
    if x is None:
        return None
    return float(round(float(x), digits))


def _sig(x: Optional[float], figures: int = 3) -> Optional[float]:
    """Round to significant figures; keeps tiny p-values distinguishable."""
    if x is None:
        return None
    x = float(x)
    if x == 0.0 or not np.isfinite(x):
        return x if np.isfinite(x) else None
    return float(f"{x:.{figures}g}")


def _jnum(x) -> str:
    """Render a number exactly as it appears inside the JSON report."""
    return json.dumps(x)


def _pct(fraction: float) -> float:
    """Signed percent, one decimal, as stored and displayed."""
    return float(round(100.0 * fraction, 1))


# ---------------------------------------------------------------------------
# Effect sizes


def effect_size(verdict, table=None) -> dict:
    """Structured effect for a verdict.

    Two-group rate/mean verdicts yield group values, absolute and relative
    difference, and a Wald 95% CI; anything else yields a descriptive
    summary built from the test result.
    """
    details = verdict.result.details
    kind = verdict.doc.test.kind if verdict.doc is not None else details.get(
        "kind", "")
    groups = details.get("groups")
    if (kind in _TWO_GROUP_RATE_KINDS and groups and len(groups) == 2
            and details.get("rates") is not None
            and details.get("row_totals") is not None):
        p1, p2 = (float(r) for r in details["rates"][:2])
        n1, n2 = (int(t) for t in details["row_totals"][:2])
        diff = p1 - p2
        se = (p1 * (1 - p1) / n1 + p2 * (1 - p2) / n2) ** 0.5 \
            if n1 > 0 and n2 > 0 else float("nan")
        rel = diff / p2 if p2 != 0 else None
        return {
            "kind": "rates",
            "groups": list(groups[:2]),
            "values": [_round(p1), _round(p2)],
            "n": [n1, n2],
            "difference": _round(diff),
            "relative_change_pct": None if rel is None else _pct(rel),
            "ci_level": 95,
            "ci95": [_round(diff - _Z95 * se), _round(diff + _Z95 * se)],
        }
    if (kind in _TWO_GROUP_MEAN_KINDS and groups and len(groups) == 2
            and details.get("group_means") is not None):
        m1, m2 = details["group_means"][:2]
        n1, n2 = details.get("group_n", [0, 0])[:2]
        sd = details.get("group_sd", [None, None])[:2]
        diff = m1 - m2
        ci = None
        if sd[0] is not None and sd[1] is not None and n1 > 1 and n2 > 1:
            se = (sd[0] ** 2 / n1 + sd[1] ** 2 / n2) ** 0.5
            ci = [_round(diff - _Z95 * se), _round(diff + _Z95 * se)]
        rel = diff / m2 if m2 not in (0, None) else None
        return {
            "kind": "means",
            "groups": list(groups[:2]),
            "values": [_round(m1), _round(m2)],
            "n": [int(n1), int(n2)],
            "difference": _round(diff),
            "relative_change_pct": None if rel is None else _pct(rel),
            "ci_level": 95,
            "ci95": ci,
        }
    if (kind in _TWO_GROUP_MEDIAN_KINDS and groups and len(groups) == 2
            and details.get("group_medians") is not None):
        m1, m2 = details["group_medians"][:2]
        diff = m1 - m2
        rel = diff / m2 if m2 not in (0, None) else None
        return {
            "kind": "medians",
            "groups": list(groups[:2]),
            "values": [_round(m1), _round(m2)],
            "n": [int(v) for v in details.get("group_n", [0, 0])[:2]],
            "difference": _round(diff),
            "relative_change_pct": None if rel is None else _pct(rel),
            "ci_level": None,
            "ci95": None,
        }
    summary = {
        "kind": "descriptive",
        "statistic": _round(verdict.result.statistic),
        "p_value": _sig(verdict.result.p_value),
    }
    if verdict.result.effect is not None:
        summary["effect"] = _round(verdict.result.effect)
    return summary


# ---------------------------------------------------------------------------
# Sentences


def _direction(diff: float) -> str:
    return "higher" if diff > 0 else ("lower" if diff < 0 else "equal")


def _segment_phrase(group_by, label: str) -> str:
    """'rows where Active = true', 'rows where Tenure < 3', 'the rest'."""
    if label == "otherwise":
        return "the remaining rows"
    if isinstance(group_by, str):
        return f"rows where {group_by} = {label}"
    return f"rows where {label}"


def _finding_sentence(doc, effect: dict) -> str:
    kind = doc.test.kind
    group_by = doc.test.bindings.get("group_by")
    if effect["kind"] == "rates":
        g1, g2 = (_segment_phrase(group_by, g) for g in effect["groups"])
        v1, v2 = effect["values"]
        outcome = doc.test.bindings.get("outcome", "the outcome")
        rel = effect.get("relative_change_pct")
        if rel is not None and rel != 0:
            word = "more" if rel > 0 else "less"
            return (f"{g1[0].upper()}{g1[1:]} are {_jnum(abs(rel))}% {word} "
                    f"likely to show {outcome} than {g2} "
                    f"(rates {_jnum(v1)} vs {_jnum(v2)}).")
        return (f"{g1[0].upper()}{g1[1:]} and {g2} show {outcome} rates "
                f"of {_jnum(v1)} and {_jnum(v2)}.")
    if effect["kind"] in ("means", "medians"):
        stat = "average" if effect["kind"] == "means" else "median"
        g1, g2 = (_segment_phrase(group_by, g) for g in effect["groups"])
        v1, v2 = effect["values"]
        value = doc.test.bindings.get("value", "the value")
        d = effect["difference"]
        return (f"The {stat} {value} is {_direction(d)} in {g1} than in "
                f"{g2} ({_jnum(v1)} vs {_jnum(v2)}, difference "
                f"{_jnum(d)}).")
    if kind in ("correlation", "regression", "trend"):
        x = doc.test.bindings.get("x", "row order")
        y = doc.test.bindings.get("y", doc.test.bindings.get("value", ""))
        eff = effect.get("effect")
        if kind == "correlation" and eff is not None:
            word = "rise together" if eff > 0 else "move in opposite directions"
            return (f"{x} and {y} {word} "
                    f"(correlation {_jnum(eff)}).")
        if eff is not None:
            return (f"{y} changes by {_jnum(eff)} per unit of {x} "
                    f"(fitted slope).")
    stat = effect.get("statistic")
    return (f"{doc.statement} (test statistic "
            f"{_jnum(stat) if stat is not None else 'n/a'}, p = "
            f"{_jnum(effect.get('p_value'))}).")


def _action_and_kpi(doc, effect: dict) -> tuple:
    kind = doc.test.kind
    b = doc.test.bindings
    if effect["kind"] == "rates":
        outcome = b.get("outcome", "the outcome")
        g1, g2 = (_segment_phrase(b.get("group_by"), g)
                  for g in effect["groups"])
        rel = effect.get("relative_change_pct") or 0.0
        risky = g1 if rel > 0 else g2
        safer = g2 if rel > 0 else g1
        action = (f"Target the higher-risk segment ({risky}) with an "
                  f"intervention modeled on the lower-risk segment "
                  f"({safer}), and re-measure the {outcome} rate after "
                  f"the change.")
        kpi = f"{outcome} rate split by {_group_label(b)}"
    elif effect["kind"] in ("means", "medians"):
        value = b.get("value", "the value")
        action = (f"Investigate why {value} differs between these segments "
                  f"and set a per-segment target for it.")
        kpi = f"{value} by {_group_label(b)}"
    elif kind in ("correlation", "regression", "trend"):
        x = b.get("x", "row order")
        y = b.get("y", b.get("value", "the value"))
        action = (f"Use {x} as a leading indicator for {y}; validate the "
                  f"relationship with a controlled change before acting "
                  f"on it.")
        kpi = f"{y} tracked against {x}"
    elif kind in ("clustering", "latent_groups"):
        action = ("Profile the discovered segments and tailor policies "
                  "per segment instead of using one global rule.")
        kpi = "segment sizes and per-segment outcomes"
    elif kind in ("outlier_scan", "anomaly_scan"):
        action = ("Review the flagged rows for data-quality issues or "
                  "genuinely unusual cases before they skew decisions.")
        kpi = "count of flagged rows per refresh"
    elif kind == "survival":
        action = ("Compare retention curves between the groups and shift "
                  "resources toward the steeper-attrition group.")
        kpi = f"retention by {_group_label(b)}"
    elif kind == "change_point":
        action = ("Identify what changed around the detected shift point "
                  "and decide whether to codify or revert it.")
        kpi = f"{b.get('value', 'the series')} stability over time"
    else:
        action = ("Incorporate this validated relationship into planning "
                  "and re-test it on the next data refresh.")
        kpi = f"stability of the {kind.replace('_', ' ')} result"
    return action, kpi


def _group_label(bindings: dict) -> str:
    g = bindings.get("group_by")
    if g is None:
        return "segment"
    if isinstance(g, str):
        return g
    try:
        from .dsl import condition_to_text
        return condition_to_text(g)
    except Exception:
        return "the segment condition"


# ---------------------------------------------------------------------------
# Report assembly


def build_report(verdicts: Sequence, features: Sequence[dict],
                 model_report: Optional[dict],
                 ledger=None) -> dict:
    """The JSON report: findings, model results, recommendations, KPIs."""
    accepted = [v for v in verdicts if v.accepted and not v.error]
    accepted.sort(key=lambda v: (v.adjusted_p, v.doc_id))
    findings = []
    recommendations = []
    for v in accepted:
        eff = effect_size(v)
        sentence = (_finding_sentence(v.doc, eff) if v.doc is not None
                    else f"Hypothesis {v.doc_id} was accepted.")
        findings.append({
            "id": v.doc_id,
            "statement": v.doc.statement if v.doc is not None else "",
            "kind": v.doc.test.kind if v.doc is not None else "",
            "p_value": _sig(v.result.p_value),
            "adjusted_p": _sig(v.adjusted_p),
            "accepted": True,
            "effect": eff,
            "sentence": sentence,
            "indicator_column": v.indicator_column,
        })
        if v.doc is not None:
            action, kpi = _action_and_kpi(v.doc, eff)
            recommendations.append({
                "finding": sentence,
                "action": action,
                "kpi": kpi,
                "provenance": [v.doc_id],
                "model_evidence": _chosen_name(model_report),
            })
    rejected = [v for v in verdicts if not v.accepted]
    monitoring = []
    for rec in recommendations:
        if rec["kpi"] not in monitoring:
            monitoring.append(rec["kpi"])
    report = {
        "title": "Analysis report",
        "findings": findings,
        "n_hypotheses_tested": len(list(verdicts)),
        "n_accepted": len(accepted),
        "n_rejected": len(rejected),
        "no_findings": len(findings) == 0,
        "features": [
            {"name": f["name"], "provenance": list(f.get("provenance", [])),
             "generator": f.get("generator", {}).get("type", "formula")}
            for f in features
        ],
        "model": _model_section(model_report),
        "recommendations": recommendations,
        "monitoring": monitoring,
    }
    return report


def _chosen_name(model_report: Optional[dict]) -> Optional[str]:
    if not model_report:
        return None
    chosen = model_report.get("chosen") or {}
    return chosen.get("name")


def _model_section(model_report: Optional[dict]) -> Optional[dict]:
    if not model_report:
        return None
    out = {"task": model_report.get("task")}
    chosen = model_report.get("chosen")
    if chosen:
        out["chosen"] = {
            "name": chosen.get("name"),
            "params": chosen.get("params", {}),
            "cv_metric": chosen.get("cv_metric"),
            "cv_mean": _round(chosen.get("cv_mean")),
            "cv_std": _round(chosen.get("cv_std")),
        }
    holdout = model_report.get("holdout")
    if holdout:
        out["holdout"] = {k: _round(v) for k, v in sorted(holdout.items())}
    candidates = model_report.get("candidates") or []
    out["candidates"] = [
        {"name": c["name"], "cv_mean": _round(c["cv_mean"]),
         "cv_std": _round(c["cv_std"])}
        for c in candidates
    ]
    importances = model_report.get("feature_importances")
    if importances:
        top = sorted(importances.items(), key=lambda kv: (-kv[1], kv[0]))[:8]
        out["top_features"] = [
            {"name": name, "importance": _round(val)} for name, val in top
        ]
    return out


# ---------------------------------------------------------------------------
# Markdown rendering (a pure function of the JSON report)


def render_markdown(report: dict) -> str:
    lines = [f"# {report['title']}", ""]

    lines.append("## Key findings")
    lines.append("")
    if report["no_findings"]:
        lines.append("No statistically validated findings. The sections "
                     "below summarize the model results only.")
    else:
        for f in report["findings"]:
            lines.append(f"- **{f['id']}** — {f['sentence']} "
                         f"(adjusted p = {_jnum(f['adjusted_p'])})")
    lines.append("")
    lines.append(f"Hypotheses tested: {_jnum(report['n_hypotheses_tested'])}; "
                 f"accepted: {_jnum(report['n_accepted'])}; "
                 f"rejected: {_jnum(report['n_rejected'])}.")
    lines.append("")

    model = report.get("model")
    lines.append("## Model performance")
    lines.append("")
    if not model:
        lines.append("No model was trained in this run.")
        lines.append("")
    else:
        chosen = model.get("chosen")
        if chosen:
            lines.append(
                f"Selected model: **{chosen['name']}** "
                f"(cross-validated {chosen['cv_metric']} = "
                f"{_jnum(chosen['cv_mean'])} ± {_jnum(chosen['cv_std'])}).")
            lines.append("")
        holdout = model.get("holdout")
        if holdout:
            lines.append("| Holdout metric | Value |")
            lines.append("| --- | --- |")
            for key, value in holdout.items():
                lines.append(f"| {key} | {_jnum(value)} |")
            lines.append("")
        candidates = model.get("candidates") or []
        if candidates:
            lines.append("| Candidate | CV mean | CV std |")
            lines.append("| --- | --- | --- |")
            for c in candidates:
                lines.append(f"| {c['name']} | {_jnum(c['cv_mean'])} | "
                             f"{_jnum(c['cv_std'])} |")
            lines.append("")
        top = model.get("top_features")
        if top:
            lines.append("| Feature | Importance |")
            lines.append("| --- | --- |")
            for t in top:
                lines.append(f"| {t['name']} | {_jnum(t['importance'])} |")
            lines.append("")

    lines.append("## Recommendations")
    lines.append("")
    if not report["recommendations"]:
        lines.append("None — no accepted hypotheses to act on.")
    else:
        for rec in report["recommendations"]:
            provenance = ", ".join(rec["provenance"])
            lines.append(f"- **Finding:** {rec['finding']}")
            lines.append(f"  **Action:** {rec['action']}")
            lines.append(f"  **KPI:** {rec['kpi']} "
                         f"(evidence: {provenance})")
    lines.append("")

    lines.append("## Monitoring")
    lines.append("")
    if not report["monitoring"]:
        lines.append("Nothing to monitor yet.")
    else:
        for kpi in report["monitoring"]:
            lines.append(f"- [ ] {kpi}")
    lines.append("")
    return "\n".join(lines)


def render_report(verdicts: Sequence, features: Sequence[dict],
                  model_report: Optional[dict], ledger=None) -> tuple:
    """``(markdown, report_json)`` — the Markdown is rendered from the JSON."""
    report = build_report(verdicts, features, model_report, ledger)
    return render_markdown(report), report


# ---------------------------------------------------------------------------
# Integrity check


_NUM_TOKEN = re.compile(r"(?<![\w.])\d+(?:\.\d+)?(?:[eE][+-]?\d+)?(?!\w)")


def check_integrity(markdown: str, report: dict) -> list:
    """Violations of the reporting contract; empty list means clean.

    Checks that every numeric token in the Markdown appears in the JSON
    serialization, and that each recommendation's provenance ids resolve
    to accepted findings.
    """
    problems = []
    json_text = json.dumps(report)
    for token in set(_NUM_TOKEN.findall(markdown)):
        if token not in json_text:
            problems.append(f"number {token!r} in markdown missing from json")
    accepted_ids = {f["id"] for f in report.get("findings", [])
                    if f.get("accepted")}
    for i, rec in enumerate(report.get("recommendations", [])):
        if not rec.get("provenance"):
            problems.append(f"recommendation[{i}] cites no hypothesis")
            continue
        for pid in rec["provenance"]:
            if pid not in accepted_ids:
                problems.append(
                    f"recommendation[{i}] provenance {pid!r} does not "
                    f"resolve to an accepted finding")
    return sorted(problems)
