"""End-to-end orchestration: clean → split → hypothesis cycles → model → report.

The run owns a single output directory and a single seed.  Every stage's
randomness derives from that seed plus a stable label, and every stage
appends to one metadata ledger stamped by the logical clock, which is what
makes two runs of the same config byte-identical artifacts.

Leakage discipline: the holdout split is cut immediately after cleaning,
before any hypothesis is tested.  Hypothesis tests, preprocessing fits,
feature pruning, and model search all see training rows only.  Derived
column *values* (indicators, transforms, formula features) are computed for
holdout rows too, but from fitted parameters or target-free expressions —
perturbing every holdout target changes neither `hypotheses.json` nor
`features.json`.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ._seeding import derive_seed, rng_for
from .cleaning import CleaningConfig, run_cleaning
from .dsl import hypothesis_from_obj, indicator_column
from .engine import HypothesisVerdict, run_batch, verdicts_json
from .errors import (
    AutodsError,
    BudgetExceededError,
    ConfigError,
    DataError,
    TransportError,
)
from .features import features_json, generate_candidates, materialize, prune
from .ledger import Clock, LedgerEntry, MetadataLedger
from .models import build_model
from .models.cv import ModelSpec, search_models
from .models.ensemble import StackingEnsemble, VotingEnsemble
from .models.metrics import classification_metrics, regression_metrics
from .models.serialize import feature_importances, model_to_json
from .preprocess import hypothesis_aware_plan, run_plan, apply_plan
from .proposer import (
    LlmEndpoint,
    ProposalBudget,
    budget_exhausted,
    enumerate_templates,
    llm_propose,
    total_cost,
    total_tokens,
    write_exchanges,
)
from .report import render_report
from .stats.tests import TestResult
from .table import Column, DataTable, load_csv, quantile, summarize

TASKS = ("classification", "regression")
FDR_MODES = ("none", "benjamini_hochberg")
ENSEMBLES = ("none", "voting", "stacking")
ARTIFACTS = ("ledger.json", "hypotheses.json", "features.json", "model.json",
             "report.md", "report.json", "exchanges.jsonl")

DEFAULT_CANDIDATES = {
    "classification": (
        {"name": "logistic_regression", "params": {}},
        {"name": "decision_tree", "params": {"max_depth": 5}},
        {"name": "random_forest",
         "params": {"n_trees": 60, "max_depth": 8}},
        {"name": "gradient_boosting",
         "params": {"n_rounds": 60, "learning_rate": 0.1, "max_depth": 3}},
        {"name": "knn", "params": {"k": 15}},
    ),
    "regression": (
        {"name": "linear_regression", "params": {}},
        {"name": "ridge", "params": {"alpha": 1.0}},
        {"name": "lasso", "params": {"alpha": 0.01}},
        {"name": "decision_tree", "params": {"max_depth": 6}},
        {"name": "random_forest",
         "params": {"n_trees": 60, "max_depth": 8}},
        {"name": "gradient_boosting",
         "params": {"n_rounds": 60, "learning_rate": 0.1, "max_depth": 3}},
    ),
}
DEFAULT_METRIC = {"classification": "f1", "regression": "rmse"}


def _section(obj, name, defaults: dict, allowed=None) -> dict:
    raw = obj.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    allowed = set(defaults) if allowed is None else set(allowed)
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in config section {name!r}: {unknown}")
    out = dict(defaults)
    out.update(raw)
    return out


@dataclass(frozen=True)
class PipelineConfig:
    """One run, fully specified; see ``from_json`` for the file format."""

    input: str
    target: str
    task: str
    output_dir: str
    seed: int = 0
    max_cycles: int = 2
    fdr: str = "benjamini_hochberg"
    holdout_fraction: float = 0.2
    proposer: dict = field(default_factory=lambda: {"source": "templates"})
    budget: dict = field(default_factory=dict)
    stages: dict = field(default_factory=lambda: {
        "hypothesis": True, "feature_engineering": True})
    cleaning: dict = field(default_factory=dict)
    preprocess: dict = field(default_factory=lambda: {"enabled": True})
    features: dict = field(default_factory=lambda: {
        "budget": 200, "max_keep": 16})
    model: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.fdr not in FDR_MODES:
            raise ConfigError(f"fdr must be one of {FDR_MODES}, got {self.fdr!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        if not isinstance(self.max_cycles, int) or self.max_cycles < 1:
            raise ConfigError("max_cycles must be a positive integer")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction must be in (0, 1)")
        if self.proposer.get("source") not in ("templates", "llm"):
            raise ConfigError(
                "proposer.source must be 'templates' or 'llm'")
        if self.proposer["source"] == "llm":
            for key in ("url", "model"):
                if not self.proposer.get(key):
                    raise ConfigError(f"llm proposer requires proposer.{key}")
        for key in ("hypothesis", "feature_engineering"):
            if not isinstance(self.stages.get(key), bool):
                raise ConfigError(f"stages.{key} must be true or false")
        if not isinstance(self.preprocess.get("enabled"), bool):
            raise ConfigError("preprocess.enabled must be true or false")
        if self.model.get("ensemble", "none") not in ENSEMBLES:
            raise ConfigError(
                f"model.ensemble must be one of {ENSEMBLES}")

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        required = ("input", "target", "task", "output_dir")
        missing = [k for k in required if k not in obj]
        if missing:
            raise ConfigError(f"config missing required keys: {missing}")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        proposer = _section(obj, "proposer",
                            {"source": "templates"},
                            allowed=("source", "url", "model", "timeout",
                                     "limit"))
        stages = _section(obj, "stages",
                          {"hypothesis": True, "feature_engineering": True})
        preprocess = _section(obj, "preprocess", {"enabled": True})
        features = _section(obj, "features", {"budget": 200, "max_keep": 16})
        model = _section(obj, "model", {},
                         allowed=("metric", "cv_folds", "candidates",
                                  "ensemble", "search_budget"))
        budget = _section(obj, "budget", {},
                          allowed=("max_hypotheses", "max_llm_calls",
                                   "max_tokens", "prices"))
        cleaning = obj.get("cleaning", {})
        if not isinstance(cleaning, dict):
            raise ConfigError("config section 'cleaning' must be an object")
        return cls(
            input=obj["input"], target=obj["target"], task=obj["task"],
            output_dir=obj["output_dir"], seed=obj.get("seed", 0),
            max_cycles=obj.get("max_cycles", 2),
            fdr=obj.get("fdr", "benjamini_hochberg"),
            holdout_fraction=obj.get("holdout_fraction", 0.2),
            proposer=proposer, budget=budget, stages=stages,
            cleaning=dict(cleaning), preprocess=preprocess,
            features=features, model=model,
        )

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_json(obj)

    def to_json(self) -> dict:
        return {
            "input": self.input, "target": self.target, "task": self.task,
            "output_dir": self.output_dir, "seed": self.seed,
            "max_cycles": self.max_cycles, "fdr": self.fdr,
            "holdout_fraction": self.holdout_fraction,
            "proposer": dict(self.proposer), "budget": dict(self.budget),
            "stages": dict(self.stages), "cleaning": dict(self.cleaning),
            "preprocess": dict(self.preprocess),
            "features": dict(self.features), "model": dict(self.model),
        }

    def proposal_budget(self) -> ProposalBudget:
        b = dict(self.budget)
        if "prices" in b:
            b["prices"] = {m: tuple(p) for m, p in b["prices"].items()}
        return ProposalBudget(**b)


@dataclass
class RunResult:
    config: PipelineConfig
    ledger: MetadataLedger
    docs: list
    verdicts: list
    features: list
    model_json: Optional[dict]
    report_json: dict
    report_md: str
    cost: dict
    timings: dict
    artifacts: dict
    train_rows: np.ndarray = None
    holdout_rows: np.ndarray = None


# ---------------------------------------------------------------------------
# Split


def _split_indices(n: int, fraction: float, seed: int):
    """Seeded train/holdout row indices.

    Membership depends only on (n, fraction, seed) — never on any column
    value — so perturbing holdout targets and re-running reproduces the
    exact same partition.  That label independence is what makes the
    leakage invariant testable end to end; it is why the split is a plain
    shuffle rather than a target-stratified one.
    """
    if n < 5:
        raise DataError(f"too few rows to split: {n}")
    perm = rng_for(seed, "split").permutation(n)
    k = max(1, min(n - 1, int(round(fraction * n))))
    hold_idx = np.sort(perm[:k])
    train_idx = np.sort(perm[k:])
    return train_idx.astype(np.intp), hold_idx.astype(np.intp)


# ---------------------------------------------------------------------------
# Model matrix


def _encode_target(col: Column, task: str):
    """(y vector, display labels).  Classification labels sort ascending;
    the positive class of binary metrics is code 1 (the second label)."""
    if task == "regression":
        if col.kind != "numeric":
            raise ConfigError(
                f"regression target must be numeric, got {col.kind}")
        return col.values.astype(np.float64), None
    if col.kind == "boolean":
        return col.values.astype(np.int64), ["false", "true"]
    if col.kind == "categorical":
        levels = sorted(set(col.values.tolist()))
        code = {lv: i for i, lv in enumerate(levels)}
        return np.array([code[v] for v in col.values]), levels
    raise ConfigError(
        f"classification target must be boolean or categorical, "
        f"got {col.kind}")


def _matrix_columns(table: DataTable, target: str) -> list:
    """Model-matrix column names: numeric and boolean, minus the target and
    per-row evidence scores (`hyp_<id>__...`, train-only diagnostics)."""
    out = []
    for name in table.names:
        if name == target:
            continue
        if name.startswith("hyp_") and "__" in name:
            continue
        if table.kind(name) in ("numeric", "boolean"):
            out.append(name)
    return out


def _build_matrix(table: DataTable, names: Sequence[str], train_idx):
    """Float matrix with train-fitted fills for residual missing cells.

    Numerics fill with the train median, booleans with the train mode;
    columns with no observed training value are dropped.
    """
    cols, kept = [], []
    for name in names:
        col = table.column(name)
        vals = col.values.astype(np.float64)
        missing = col.missing
        obs = vals[train_idx][~missing[train_idx]]
        if obs.size == 0:
            continue
        if missing.any():
            if col.kind == "boolean":
                fill = float(np.mean(obs) > 0.5)
            else:
                fill = quantile(np.sort(obs), 0.5)
            vals = np.where(missing, fill, vals)
        cols.append(vals)
        kept.append(name)
    if not kept:
        raise DataError("no usable feature columns for the model matrix")
    return np.column_stack(cols), kept


# ---------------------------------------------------------------------------
# The run


class _StageTimer:
    def __init__(self):
        self.timings = {}
        self.current = "load"

    def stage(self, name: str):
        self.current = name
        self.timings.setdefault(name, 0.0)
        return self

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.timings[self.current] += time.perf_counter() - self._t0
        return False


def _stage_entry(clock, stage, action, columns=(), params=None, results=None):
    return LedgerEntry(stage=stage, ts=clock.now(), action=action,
                       columns=list(columns), params=params or {},
                       results=results or {}, provenance=("pipeline-cli",))


def _stitch_column(name: str, train_col, hold_col, train_idx, hold_idx,
                   n_rows: int) -> Column:
    """Recombine per-split derived values into one full-length column."""
    if train_col.values.dtype == object:
        vals = np.empty(n_rows, dtype=object)
    else:
        vals = np.zeros(n_rows, dtype=train_col.values.dtype)
    missing = np.ones(n_rows, dtype=bool)
    vals[train_idx] = train_col.values
    vals[hold_idx] = hold_col.values
    missing[train_idx] = train_col.missing
    missing[hold_idx] = hold_col.missing
    return Column(name=name, kind=train_col.kind, values=vals,
                  missing=missing, text=None)


def run(config: PipelineConfig, llm_transport=None) -> RunResult:
    """Execute every stage and persist the artifacts; see module docstring."""
    t_run = time.perf_counter()
    clock = Clock()
    ledger = MetadataLedger()
    timer = _StageTimer()
    os.makedirs(config.output_dir, exist_ok=True)

    exchanges: list = []
    all_docs: list = []
    all_verdicts: list = []
    kept_specs: list = []
    model_json: Optional[dict] = None
    target = config.target

    def persist_partial():
        _write_json(config, "ledger.json", ledger.to_json())
        write_exchanges(_path(config, "exchanges.jsonl"), exchanges)

    try:
        # ---- load ------------------------------------------------------
        with timer.stage("load"):
            table = load_csv(config.input)
            if target not in table:
                raise DataError(f"target column {target!r} not in "
                                f"{config.input}")
            tcol = table.column(target)
            if tcol.missing.any():
                keep = np.nonzero(~tcol.missing)[0]
                dropped = table.n_rows - keep.size
                table = table.take_rows(keep)
                ledger = ledger.append(_stage_entry(
                    clock, "load", "drop_missing_target", [target],
                    results={"rows_dropped": int(dropped)}))
            ledger = ledger.append(_stage_entry(
                clock, "load", "load_csv", table.names,
                params={"path": config.input},
                results={"rows": table.n_rows, "columns": len(table.names)}))

        # ---- clean -----------------------------------------------------
        with timer.stage("clean"):
            ccfg = CleaningConfig(**{**config.cleaning, "target": target})
            table, _, ledger = run_cleaning(
                table, ccfg, seed=derive_seed(config.seed, "clean"),
                ledger=ledger, clock=clock)

        # ---- split (before any hypothesis testing) ----------------------
        with timer.stage("split"):
            train_idx, hold_idx = _split_indices(
                table.n_rows, config.holdout_fraction, config.seed)
            ledger = ledger.append(_stage_entry(
                clock, "split", "seeded_holdout", [target],
                params={"fraction": config.holdout_fraction},
                results={"train_rows": int(train_idx.size),
                         "holdout_rows": int(hold_idx.size)}))

        work = table
        baseline = set(work.names)
        budget = config.proposal_budget()
        preprocessed_sources: set = set()

        def train_view() -> DataTable:
            return work.take_rows(train_idx)

        def do_preprocess(verdicts, cycle):
            nonlocal work, ledger, preprocessed_sources
            if not config.preprocess["enabled"]:
                ledger = ledger.append(_stage_entry(
                    clock, "preprocess", "skip",
                    params={"reason": "disabled in config"}))
                return
            tv = train_view()
            specs = [s for s in hypothesis_aware_plan(tv, verdicts, target)
                     if s.source not in preprocessed_sources]
            if not specs:
                return
            tv_out, fitted, entries = run_plan(tv, specs, clock)
            ledger = ledger.extend(entries)
            hv_out = apply_plan(work.take_rows(hold_idx), fitted)
            new_names = [n for n in tv_out.names if n not in work]
            stitched = []
            for name in new_names:
                stitched.append(_stitch_column(
                    name, tv_out.column(name), hv_out.column(name),
                    train_idx, hold_idx, work.n_rows))
            work = work.with_columns(stitched)
            preprocessed_sources |= {s.source for s in fitted}

        def do_engineer(verdicts, cycle):
            nonlocal work, ledger, kept_specs
            if not config.stages["feature_engineering"]:
                if cycle == 1:
                    ledger = ledger.append(_stage_entry(
                        clock, "features", "skip",
                        params={"reason": "feature_engineering off"}))
                return
            room = config.features["max_keep"] - len(kept_specs)
            if room <= 0:
                return
            tv = train_view()
            cands = generate_candidates(
                tv, verdicts, budget=config.features["budget"],
                target=target)
            if not cands:
                return
            kept = prune(tv, cands, target=target, max_keep=room)
            if not kept:
                return
            work_new, entries = materialize(work, kept, clock)
            ledger = ledger.extend(entries)
            work = work_new
            kept_specs.extend(kept)

        # ---- hypothesis cycles ------------------------------------------
        if config.stages["hypothesis"]:
            for cycle in range(1, config.max_cycles + 1):
                with timer.stage("hypotheses"):
                    if cycle == 1:
                        scope = list(work.names)
                    else:
                        scope = [n for n in work.names
                                 if n not in baseline
                                 and not n.startswith("hyp_")
                                 and n in {s.name for s in kept_specs}]
                        if not scope:
                            ledger = ledger.append(_stage_entry(
                                clock, "hypotheses", "cycle_skip",
                                params={"cycle": cycle,
                                        "reason": "no engineered columns"}))
                            break
                        scope.append(target)
                    tv = train_view()
                    summaries = [s for s in summarize(tv) if s.name in scope]
                    prefix = "h" if cycle == 1 else f"h{cycle}_"
                    docs = _propose(config, budget, summaries, exchanges,
                                    prefix, llm_transport)
                    taken = {d.id for d in all_docs}
                    docs = [d for d in docs if d.id not in taken]
                    ledger = ledger.append(_stage_entry(
                        clock, "hypotheses", "propose",
                        params={"cycle": cycle,
                                "source": config.proposer["source"]},
                        results=_cost_results(exchanges,
                                              {"proposed": len(docs)})))
                    if (not docs and config.proposer["source"] == "llm"
                            and budget_exhausted(budget, exchanges)):
                        # Nothing proposable under the ceilings.  A run
                        # that never got its first proposals is a budget
                        # failure; a later cycle just stops refining.
                        if cycle == 1:
                            raise BudgetExceededError(
                                f"llm budget exhausted after "
                                f"{len(exchanges)} calls / "
                                f"{total_tokens(exchanges)} tokens")
                        ledger = ledger.append(_stage_entry(
                            clock, "hypotheses", "budget_exhausted",
                            params={"cycle": cycle},
                            results=_cost_results(exchanges, {})))
                        break
                    if not docs:
                        break
                    _, verdicts, entries = run_batch(
                        tv, docs, fdr=config.fdr,
                        seed=derive_seed(config.seed, "engine", cycle),
                        clock=clock)
                    ledger = ledger.extend(entries)
                    all_docs.extend(docs)
                    all_verdicts.extend(verdicts)
                    indicator_cols = []
                    for v in verdicts:
                        if (v.accepted and v.doc is not None
                                and v.doc.indicator is not None
                                and f"hyp_{v.doc_id}" not in work):
                            indicator_cols.append(
                                indicator_column(v.doc, work))
                    if indicator_cols:
                        work = work.with_columns(indicator_cols)
                cycle_accepted = [v for v in all_verdicts if v.accepted]
                with timer.stage("preprocess"):
                    do_preprocess([v for v in verdicts if v.accepted], cycle)
                with timer.stage("features"):
                    do_engineer(cycle_accepted, cycle)
        else:
            ledger = ledger.append(_stage_entry(
                clock, "hypotheses", "skip",
                params={"reason": "hypothesis stage off"}))
            with timer.stage("preprocess"):
                do_preprocess([], 1)
            with timer.stage("features"):
                do_engineer([], 1)

        # ---- model -------------------------------------------------------
        with timer.stage("model"):
            model_json, model_report = _model_stage(
                config, work, target, train_idx, hold_idx)
            ledger = ledger.append(_stage_entry(
                clock, "model", "search_and_fit",
                columns=model_json["feature_names"],
                params={"metric": model_json["metric"],
                        "ensemble": model_json["ensemble"]},
                results={"chosen": model_json["chosen"]["name"],
                         "cv_mean": model_json["chosen"]["cv_mean"],
                         "holdout": json.dumps(model_json["holdout"],
                                               sort_keys=True)}))

        # ---- report ------------------------------------------------------
        with timer.stage("report"):
            feats = features_json(kept_specs, work)
            report_md, report_json = render_report(
                all_verdicts, feats, model_report, ledger)
            ledger = ledger.append(_stage_entry(
                clock, "report", "render",
                results={"findings": report_json["n_accepted"],
                         "recommendations":
                             len(report_json["recommendations"])}))

        # ---- artifacts ---------------------------------------------------
        artifacts = _write_artifacts(
            config, ledger, all_docs, all_verdicts, feats, model_json,
            report_md, report_json, exchanges)
        timings = dict(timer.timings)
        timings["total"] = time.perf_counter() - t_run
        # Wall times live outside the deterministic artifact set.
        artifacts["timings.json"] = _write_json(
            config, "timings.json", {k: round(v, 6)
                                     for k, v in timings.items()})
        return RunResult(
            config=config, ledger=ledger, docs=all_docs,
            verdicts=all_verdicts, features=feats, model_json=model_json,
            report_json=report_json, report_md=report_md,
            cost=_cost_results(exchanges, {}), timings=timings,
            artifacts=artifacts, train_rows=train_idx,
            holdout_rows=hold_idx)
    except AutodsError as exc:
        ledger = ledger.append(_stage_entry(
            clock, timer.current, "error",
            params={"type": type(exc).__name__},
            results={"message": str(exc)}))
        persist_partial()
        raise


def _cost_results(exchanges, extra: dict) -> dict:
    out = dict(extra)
    out.update({
        "llm_calls": len(exchanges),
        "tokens": total_tokens(exchanges),
        "cost_usd": total_cost(exchanges),
    })
    return out


def _propose(config, budget, summaries, exchanges, prefix, llm_transport):
    limit = config.proposer.get("limit")
    if config.proposer["source"] == "templates":
        return enumerate_templates(
            summaries, config.target,
            limit=limit or budget.max_hypotheses, id_prefix=prefix)
    endpoint = LlmEndpoint(
        url=config.proposer["url"], model=config.proposer["model"],
        api_key=os.environ.get("LLM_API_KEY"),
        timeout=config.proposer.get("timeout", 30.0),
        transport=llm_transport)
    try:
        docs, new_exchanges = llm_propose(
            summaries, config.target, budget, endpoint, limit=limit)
    except TransportError:
        return enumerate_templates(
            summaries, config.target,
            limit=limit or budget.max_hypotheses, id_prefix=prefix)
    exchanges.extend(new_exchanges)
    return docs


def _model_stage(config, work, target, train_idx, hold_idx):
    task = config.task
    section = dict(config.model)
    metric = section.get("metric") or DEFAULT_METRIC[task]
    cv_folds = section.get("cv_folds", 5)
    ensemble_mode = section.get("ensemble", "none")
    search_budget = section.get("search_budget", 32)
    raw = section.get("candidates") or [dict(c)
                                        for c in DEFAULT_CANDIDATES[task]]
    specs = [ModelSpec(c["name"], dict(c.get("params", {}))) for c in raw]

    names = _matrix_columns(work, target)
    X, names = _build_matrix(work, names, train_idx)
    y, labels = _encode_target(work.column(target), task)
    X_train, y_train = X[train_idx], y[train_idx]
    X_hold, y_hold = X[hold_idx], y[hold_idx]

    def build(spec: ModelSpec, seed: int):
        return build_model(spec.name, task, spec.params, seed)

    reports = search_models(
        specs, build, X_train, y_train, metric, k=cv_folds,
        seed=config.seed, stratify=task == "classification",
        budget=search_budget)
    best = reports[0]

    if ensemble_mode == "none" or len(reports) < 2:
        final = build(best.spec, config.seed)
        chosen_name = best.spec.name
        members = [best.spec.to_json()]
    else:
        top = reports[:min(3, len(reports))]
        factories = [
            (lambda s=r.spec: build_model(s.name, task, s.params,
                                          config.seed))
            for r in top
        ]
        if ensemble_mode == "voting":
            final = VotingEnsemble(factories, task)
        else:
            final = StackingEnsemble(
                factories, task, k=cv_folds,
                seed=derive_seed(config.seed, "stacking"))
        chosen_name = f"{ensemble_mode}({', '.join(r.spec.name for r in top)})"
        members = [r.spec.to_json() for r in top]
    final.fit(X_train, y_train)
    pred = final.predict(X_hold)
    if task == "classification":
        holdout = classification_metrics(y_hold, pred)
    else:
        holdout = regression_metrics(y_hold, pred)
    holdout = {k: float(v) for k, v in holdout.items()}

    imp_model = final
    if ensemble_mode != "none" and len(reports) >= 2:
        imp_model = build(best.spec, config.seed).fit(X_train, y_train)
    imps = feature_importances(imp_model, X_train)
    importances = (None if imps is None
                   else {n: float(v) for n, v in zip(names, imps)})

    chosen = {
        "name": chosen_name,
        "params": dict(best.spec.params),
        "cv_metric": metric,
        "cv_mean": best.mean_score,
        "cv_std": best.std_score,
    }
    model_report = {
        "task": task,
        "chosen": chosen,
        "holdout": holdout,
        "candidates": [{"name": r.spec.name, "cv_mean": r.mean_score,
                        "cv_std": r.std_score} for r in reports],
        "feature_importances": importances,
    }
    model_json = {
        "task": task,
        "metric": metric,
        "ensemble": ensemble_mode,
        "chosen": chosen,
        "members": members,
        "search": [r.to_json() for r in reports],
        "holdout": holdout,
        "feature_names": list(names),
        "target_labels": labels,
        "importances": importances,
        "model": model_to_json(final),
        "report_view": model_report,
    }
    return model_json, model_report


# ---------------------------------------------------------------------------
# Artifacts


def _path(config, name: str) -> str:
    return os.path.join(config.output_dir, name)


def _write_json(config, name: str, obj) -> str:
    path = _path(config, name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_text(config, name: str, text: str) -> str:
    path = _path(config, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _write_artifacts(config, ledger, docs, verdicts, feats, model_json,
                     report_md, report_json, exchanges) -> dict:
    artifacts = {}
    artifacts["ledger.json"] = _write_json(config, "ledger.json",
                                           ledger.to_json())
    artifacts["hypotheses.json"] = _write_json(config, "hypotheses.json", {
        "docs": [d.to_json() for d in docs],
        "verdicts": verdicts_json(docs, verdicts),
    })
    artifacts["features.json"] = _write_json(config, "features.json", feats)
    artifacts["model.json"] = _write_json(config, "model.json", model_json)
    artifacts["report.md"] = _write_text(config, "report.md", report_md)
    artifacts["report.json"] = _write_json(config, "report.json", report_json)
    write_exchanges(_path(config, "exchanges.jsonl"), exchanges)
    artifacts["exchanges.jsonl"] = _path(config, "exchanges.jsonl")
    return artifacts


# ---------------------------------------------------------------------------
# Secondary entry points


def propose_only(config: PipelineConfig, llm_transport=None) -> dict:
    """Clean, split, and run one propose+test cycle; no model, no report."""
    short = replace(config, max_cycles=1,
                    stages={"hypothesis": True, "feature_engineering": False},
                    preprocess={"enabled": False})
    result = run(short, llm_transport=llm_transport)
    return {
        "docs": [d.to_json() for d in result.docs],
        "verdicts": verdicts_json(result.docs, result.verdicts),
        "cost": result.cost,
    }


def _verdicts_from_artifacts(hyp_obj: dict) -> tuple:
    docs = [hypothesis_from_obj(d) for d in hyp_obj.get("docs", [])]
    by_id = {d.id: d for d in docs}
    verdicts = []
    def num(x, default):
        return default if x is None else float(x)

    for v in hyp_obj.get("verdicts", []):
        res = v.get("result", {})
        result = TestResult(
            statistic=num(res.get("statistic"), float("nan")),
            p_value=num(res.get("p_value"), 1.0),
            dof=res.get("dof"),
            effect=res.get("effect"),
            n_used=int(res.get("n_used", 0)),
            details=dict(res.get("details", {})),
        )
        verdicts.append(HypothesisVerdict(
            doc_id=v["id"], result=result, accepted=bool(v["accepted"]),
            adjusted_p=num(v.get("adjusted_p"), 1.0),
            indicator_column=v.get("indicator_column"),
            doc=by_id.get(v["id"])))
    return docs, verdicts


def report_only(output_dir: str) -> tuple:
    """Re-render report.md / report.json from a run's persisted artifacts."""
    def read(name):
        path = os.path.join(output_dir, name)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{path} is not valid JSON: {exc}") from exc

    hyp = read("hypotheses.json")
    feats = read("features.json")
    model = read("model.json")
    ledger = MetadataLedger.from_json(read("ledger.json"))
    _, verdicts = _verdicts_from_artifacts(hyp)
    md, report = render_report(verdicts, feats,
                               model.get("report_view"), ledger)
    with open(os.path.join(output_dir, "report.md"), "w",
              encoding="utf-8") as fh:
        fh.write(md)
    with open(os.path.join(output_dir, "report.json"), "w",
              encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return md, report


ABLATION_TOGGLES = {
    "full": {"hypothesis": True, "feature_engineering": True},
    "no_hypothesis": {"hypothesis": False, "feature_engineering": True},
    "no_feature_engineering": {"hypothesis": True,
                               "feature_engineering": False},
    "preprocessing_only": {"hypothesis": False, "feature_engineering": False},
}


def ablate(config: PipelineConfig, configurations: Sequence[dict],
           llm_transport=None) -> list:
    """Run each toggle set on the same data/seed; returns comparison rows.

    Each configuration is ``{"name", "hypothesis", "feature_engineering"}``
    (or just ``{"name"}`` for the four standard named sets).  Rows carry
    the holdout metrics, feature count, deterministic ledger ticks, and
    measured wall time; failures mark the row instead of aborting.
    """
    if len(configurations) < 2:
        raise ConfigError("ablate needs at least 2 configurations")
    rows = []
    for spec in configurations:
        name = spec.get("name")
        if not name:
            raise ConfigError("each ablation configuration needs a name")
        toggles = ABLATION_TOGGLES.get(name, {})
        toggles = {
            "hypothesis": bool(spec.get("hypothesis",
                                        toggles.get("hypothesis", True))),
            "feature_engineering": bool(
                spec.get("feature_engineering",
                         toggles.get("feature_engineering", True))),
        }
        sub = replace(
            config, stages=toggles,
            output_dir=os.path.join(config.output_dir, name))
        row = {"configuration": name,
               "hypothesis": toggles["hypothesis"],
               "feature_engineering": toggles["feature_engineering"]}
        try:
            result = run(sub, llm_transport=llm_transport)
            row.update({k: v for k, v in
                        sorted(result.model_json["holdout"].items())})
            row["features"] = len(result.features)
            row["ticks"] = len(result.ledger)
            row["wall_time_s"] = round(result.timings["total"], 3)
            row["error"] = ""
        except AutodsError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    _write_ablation(config, rows)
    return rows


def _ablation_fields(rows) -> list:
    fields = ["configuration", "hypothesis", "feature_engineering"]
    metrics = sorted({k for r in rows for k in r
                      if k not in fields + ["features", "ticks",
                                            "wall_time_s", "error"]})
    return fields + metrics + ["features", "ticks", "wall_time_s", "error"]


def _write_ablation(config, rows) -> None:
    import csv

    fields = _ablation_fields(rows)
    path = os.path.join(config.output_dir, "ablation.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})
    md_path = os.path.join(config.output_dir, "ablation.md")
    with open(md_path, "w", encoding="utf-8") as fh:
        fh.write("| " + " | ".join(fields) + " |\n")
        fh.write("| " + " | ".join("---" for _ in fields) + " |\n")
        for row in rows:
            fh.write("| " + " | ".join(str(row.get(k, ""))
                                       for k in fields) + " |\n")
