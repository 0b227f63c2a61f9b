"""Kaplan-Meier estimation and the log-rank test."""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from ..errors import InsufficientDataError, StatsError
from . import special
from .types import SurvivalCurve, TestResult

__all__ = ["kaplan_meier", "log_rank"]


def _clean_arm(durations, events) -> Tuple[np.ndarray, np.ndarray]:
    d = np.asarray(durations, dtype=np.float64).ravel()
    e = np.asarray(events).ravel().astype(bool)
    if len(d) != len(e):
        raise StatsError(f"durations and events differ in length: {len(d)} vs {len(e)}")
    keep = np.isfinite(d)
    d, e = d[keep], e[keep]
    if len(d) == 0:
        raise InsufficientDataError("survival data is empty after missing-value removal")
    if np.any(d < 0):
        raise StatsError("negative durations in survival data")
    return d, e


def kaplan_meier(durations, events) -> SurvivalCurve:
    """Product-limit survival estimate.

    ``events`` marks observed events (True) versus right-censoring (False).
    The curve steps only at event times; with no events it is flat at 1.
    """
    d, e = _clean_arm(durations, events)
    event_times = np.unique(d[e])
    times, surv, at_risk, n_events = [], [], [], []
    s = 1.0
    for t in event_times:
        n_risk = int((d >= t).sum())
        n_ev = int(((d == t) & e).sum())
        s *= 1.0 - n_ev / n_risk
        times.append(float(t))
        surv.append(s)
        at_risk.append(n_risk)
        n_events.append(n_ev)
    return SurvivalCurve(
        times=np.array(times, dtype=np.float64),
        survival=np.array(surv, dtype=np.float64),
        at_risk=np.array(at_risk, dtype=np.int64),
        events=np.array(n_events, dtype=np.int64),
    )


def log_rank(groups: Sequence[Tuple]) -> TestResult:
    """Log-rank test across k groups of ``(durations, events)`` pairs.

    For two groups the variance-based statistic is used; for k > 2 the
    simpler sum of (O - E)^2 / E over groups (both chi-square with k - 1
    degrees of freedom).
    """
    if len(groups) < 2:
        raise InsufficientDataError(f"log-rank needs >= 2 groups, got {len(groups)}")
    arms = [_clean_arm(d, e) for d, e in groups]
    k = len(arms)
    all_times = np.unique(np.concatenate([d[e] for d, e in arms])) if any(
        e.any() for _, e in arms
    ) else np.array([])
    n_used = sum(len(d) for d, _ in arms)
    dof = float(k - 1)
    if len(all_times) == 0:
        return TestResult(0.0, 1.0, dof=dof, n_used=n_used,
                          details={"observed": [0.0] * k, "expected": [0.0] * k})

    observed = np.zeros(k)
    expected = np.zeros(k)
    var_two = 0.0  # variance of O_1 - E_1, used when k == 2
    for t in all_times:
        n_at = np.array([float((d >= t).sum()) for d, _ in arms])
        d_at = np.array([float(((d == t) & e).sum()) for d, e in arms])
        n_tot = n_at.sum()
        d_tot = d_at.sum()
        if n_tot == 0 or d_tot == 0:
            continue
        observed += d_at
        expected += n_at * d_tot / n_tot
        if k == 2 and n_tot > 1:
            frac = n_at[0] / n_tot
            var_two += d_tot * frac * (1.0 - frac) * (n_tot - d_tot) / (n_tot - 1.0)

    details = {"observed": observed.tolist(), "expected": expected.tolist()}
    if k == 2:
        if var_two <= 0.0:
            return TestResult(0.0, 1.0, dof=dof, n_used=n_used, details=details)
        stat = float((observed[0] - expected[0]) ** 2 / var_two)
    else:
        mask = expected > 0.0
        stat = float((((observed - expected) ** 2)[mask] / expected[mask]).sum())
    return TestResult(stat, special.chi2_sf(stat, dof), dof=dof, n_used=n_used,
                      details=details)
