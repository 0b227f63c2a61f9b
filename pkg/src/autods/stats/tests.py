"""Classical hypothesis tests built on the in-house special functions.

Every test returns a :class:`TestResult`.  Inputs are 1-D float arrays;
non-finite entries are dropped and the survivor count is reported via
``n_used``.  P-values come from the CDF routines in :mod:`.special`, so
the whole kernel is dependency-free beyond numpy.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence, Union

import numpy as np

from ..errors import DegenerateTableError, InsufficientDataError, StatsError
from . import special
from .types import TestResult

__all__ = [
    "t_test",
    "chi_square_independence",
    "pearson_test",
    "one_way_anova",
    "levene_test",
    "shapiro_wilk",
    "ks_test",
    "mann_whitney_u",
    "regression_slope_test",
]


def _finite(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).ravel()
    return arr[np.isfinite(arr)]


def _two_sided_t(t: float, dof: float) -> float:
    if math.isinf(t):
        return 0.0
    return min(1.0, 2.0 * special.t_sf(abs(t), dof))


# ---------------------------------------------------------------------------
# t test


def t_test(a, b, variant: str = "welch") -> TestResult:
    """Two-sample t test; ``variant`` is ``"welch"`` or ``"pooled"``."""
    if variant not in ("welch", "pooled"):
        raise StatsError(f"unknown t-test variant: {variant!r}")
    xa, xb = _finite(a), _finite(b)
    n1, n2 = len(xa), len(xb)
    if n1 < 2 or n2 < 2:
        raise InsufficientDataError(
            f"t test needs >= 2 values per sample, got {n1} and {n2}"
        )
    m1, m2 = float(xa.mean()), float(xb.mean())
    v1 = float(xa.var(ddof=1))
    v2 = float(xb.var(ddof=1))
    diff = m1 - m2
    details = {
        "mean_a": m1, "mean_b": m2, "var_a": v1, "var_b": v2,
        "n_a": n1, "n_b": n2, "variant": variant,
    }
    if v1 == 0.0 and v2 == 0.0:
        if diff == 0.0:
            return TestResult(0.0, 1.0, dof=float(n1 + n2 - 2), effect=0.0,
                              n_used=n1 + n2, details=details)
        raise StatsError("zero variance in both samples with unequal means")
    if variant == "welch":
        se2 = v1 / n1 + v2 / n2
        dof = se2 * se2 / ((v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1))
    else:
        sp2 = ((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2)
        se2 = sp2 * (1.0 / n1 + 1.0 / n2)
        dof = float(n1 + n2 - 2)
    t = diff / math.sqrt(se2)
    return TestResult(t, _two_sided_t(t, dof), dof=dof, effect=diff,
                      n_used=n1 + n2, details=details)


# ---------------------------------------------------------------------------
# chi-square independence


def chi_square_independence(table) -> TestResult:
    """Chi-square test of independence on an r x c count table.

    Yates continuity correction is applied exactly when the table is 2x2.
    """
    obs = np.asarray(table, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[0] < 2 or obs.shape[1] < 2:
        raise DegenerateTableError(f"contingency table must be at least 2x2, got {obs.shape}")
    if not np.all(np.isfinite(obs)) or np.any(obs < 0):
        raise DegenerateTableError("contingency table requires finite non-negative counts")
    row = obs.sum(axis=1)
    col = obs.sum(axis=0)
    if np.any(row == 0) or np.any(col == 0):
        raise DegenerateTableError("zero marginal row or column in contingency table")
    total = float(obs.sum())
    expected = np.outer(row, col) / total
    r, c = obs.shape
    dof = float((r - 1) * (c - 1))
    dev = np.abs(obs - expected)
    if (r, c) == (2, 2):
        dev = np.maximum(dev - 0.5, 0.0)  # Yates
    stat = float((dev * dev / expected).sum())
    p = special.chi2_sf(stat, dof)
    effect = None
    details = {"row_totals": row.tolist(), "col_totals": col.tolist()}
    if c == 2:
        rates = (obs[:, 1] / row).tolist()
        details["rates"] = rates
        if r == 2:
            effect = rates[0] - rates[1]
    return TestResult(stat, p, dof=dof, effect=effect, n_used=int(round(total)),
                      details=details)


# ---------------------------------------------------------------------------
# Pearson correlation


def pearson_test(x, y) -> TestResult:
    xa = np.asarray(x, dtype=np.float64).ravel()
    ya = np.asarray(y, dtype=np.float64).ravel()
    if len(xa) != len(ya):
        raise StatsError(f"paired samples differ in length: {len(xa)} vs {len(ya)}")
    keep = np.isfinite(xa) & np.isfinite(ya)
    xa, ya = xa[keep], ya[keep]
    n = len(xa)
    if n < 3:
        raise InsufficientDataError(f"pearson test needs >= 3 complete pairs, got {n}")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    sx = float(np.sqrt((xc * xc).sum()))
    sy = float(np.sqrt((yc * yc).sum()))
    if sx == 0.0 or sy == 0.0:
        raise StatsError("zero variance in correlated sample")
    r = float((xc * yc).sum() / (sx * sy))
    r = max(-1.0, min(1.0, r))
    dof = float(n - 2)
    if 1.0 - r * r <= 0.0:
        return TestResult(r, 0.0, dof=dof, effect=r, n_used=n)
    t = r * math.sqrt(dof / (1.0 - r * r))
    return TestResult(r, _two_sided_t(t, dof), dof=dof, effect=r, n_used=n,
                      details={"t": t})


# ---------------------------------------------------------------------------
# one-way ANOVA / Levene


def _anova_core(groups: Sequence[np.ndarray], lenient: bool):
    k = len(groups)
    ns = np.array([len(g) for g in groups], dtype=np.float64)
    total_n = float(ns.sum())
    means = np.array([g.mean() for g in groups])
    grand = float(sum(g.sum() for g in groups) / total_n)
    ssb = float((ns * (means - grand) ** 2).sum())
    ssw = float(sum(((g - m) ** 2).sum() for g, m in zip(groups, means)))
    df_b = float(k - 1)
    df_w = total_n - k
    if ssw == 0.0:
        if ssb == 0.0:
            return 0.0, 1.0, (df_b, df_w), means
        if lenient:
            return math.inf, 0.0, (df_b, df_w), means
        raise StatsError("zero within-group variance with unequal group means")
    f = (ssb / df_b) / (ssw / df_w)
    return f, special.f_sf(f, df_b, df_w), (df_b, df_w), means


def _check_groups(groups, test_name: str) -> list:
    if len(groups) < 2:
        raise InsufficientDataError(f"{test_name} needs >= 2 groups, got {len(groups)}")
    cleaned = [_finite(g) for g in groups]
    for i, g in enumerate(cleaned):
        if len(g) < 2:
            raise InsufficientDataError(
                f"{test_name} needs >= 2 values per group; group {i} has {len(g)}"
            )
    return cleaned


def one_way_anova(groups: Sequence) -> TestResult:
    cleaned = _check_groups(groups, "one-way ANOVA")
    f, p, dof, means = _anova_core(cleaned, lenient=False)
    return TestResult(f, p, dof=dof, n_used=sum(len(g) for g in cleaned),
                      details={"group_means": [float(m) for m in means],
                               "group_ns": [len(g) for g in cleaned]})


def levene_test(groups: Sequence, center: str = "median") -> TestResult:
    """Levene test for equal variances; ``center="median"`` gives the
    Brown-Forsythe variant."""
    if center not in ("mean", "median"):
        raise StatsError(f"unknown levene center: {center!r}")
    cleaned = _check_groups(groups, "levene test")
    devs = []
    for g in cleaned:
        c = float(np.median(g)) if center == "median" else float(g.mean())
        devs.append(np.abs(g - c))
    f, p, dof, _ = _anova_core(devs, lenient=True)
    return TestResult(f, p, dof=dof, n_used=sum(len(g) for g in cleaned),
                      details={"center": center})


# ---------------------------------------------------------------------------
# Shapiro-Wilk (Royston's 1995 algorithm)


_SW_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_SW_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_SW_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_SW_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_SW_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_SW_C6 = (-0.4803, -0.082676, 0.0030302)


def _poly(coeffs, x: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def shapiro_wilk(x) -> TestResult:
    xa = np.sort(_finite(x))
    n = len(xa)
    if n < 3:
        raise InsufficientDataError(f"shapiro-wilk needs >= 3 values, got {n}")
    if n > 5000:
        raise StatsError(f"shapiro-wilk supports at most 5000 values, got {n}")
    if xa[-1] == xa[0]:
        raise StatsError("zero variance in sample")

    # Expected normal order statistics (Blom approximation) and weights.
    i = np.arange(1, n + 1, dtype=np.float64)
    m = np.array([special.normal_ppf(v) for v in (i - 0.375) / (n + 0.25)])
    ssq_m = float((m * m).sum())
    rsn = 1.0 / math.sqrt(n)
    if n == 3:
        a = np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    elif n > 5:
        an = m[-1] / math.sqrt(ssq_m) + _poly(_SW_C1, rsn)
        an1 = m[-2] / math.sqrt(ssq_m) + _poly(_SW_C2, rsn)
        phi = (ssq_m - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
            1.0 - 2.0 * an ** 2 - 2.0 * an1 ** 2
        )
        a = m / math.sqrt(phi)
        a[-1], a[0] = an, -an
        a[-2], a[1] = an1, -an1
    else:
        an = m[-1] / math.sqrt(ssq_m) + _poly(_SW_C1, rsn)
        phi = (ssq_m - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * an ** 2)
        a = m / math.sqrt(phi)
        a[-1], a[0] = an, -an

    xc = xa - xa.mean()
    w = float((a * xa).sum() ** 2 / (xc * xc).sum())
    w = min(w, 1.0)

    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        p = min(1.0, max(0.0, p))
        return TestResult(w, p, n_used=n)
    one_minus = max(1.0 - w, 1e-300)
    if n <= 11:
        gamma = _poly((-2.273, 0.459), float(n))
        if gamma - math.log(one_minus) <= 0.0:
            return TestResult(w, 1e-300, n_used=n)
        wt = -math.log(gamma - math.log(one_minus))
        mu = _poly(_SW_C3, float(n))
        sigma = math.exp(_poly(_SW_C4, float(n)))
    else:
        ln_n = math.log(n)
        wt = math.log(one_minus)
        mu = _poly(_SW_C5, ln_n)
        sigma = math.exp(_poly(_SW_C6, ln_n))
    z = (wt - mu) / sigma
    return TestResult(w, special.normal_sf(z), n_used=n, details={"z": z})


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov


def _parse_dist_spec(ref):
    if isinstance(ref, tuple) and len(ref) == 2 and isinstance(ref[0], str):
        return ref[0], dict(ref[1])
    if isinstance(ref, dict) and "name" in ref:
        return str(ref["name"]), dict(ref.get("params", {}))
    return None


def ks_test(x, ref) -> TestResult:
    """Kolmogorov-Smirnov test.

    ``ref`` is either a second sample (two-sample test) or a distribution
    spec — ``("normal", {"mean": 0, "std": 1})`` or an equivalent dict —
    for the one-sample test.  The p-value uses the asymptotic Kolmogorov
    distribution with the small-sample ``sqrt(ne) + 0.12 + 0.11/sqrt(ne)``
    correction.
    """
    xa = np.sort(_finite(x))
    n1 = len(xa)
    if n1 < 2:
        raise InsufficientDataError(f"ks test needs >= 2 values, got {n1}")
    spec = _parse_dist_spec(ref)
    if spec is not None:
        name, params = spec
        cdf_vals = np.array([special.dist_cdf(name, float(v), **params) for v in xa])
        lo = cdf_vals - np.arange(0, n1) / n1
        hi = np.arange(1, n1 + 1) / n1 - cdf_vals
        d = float(max(lo.max(), hi.max(), 0.0))
        ne = float(n1)
        n_used = n1
        details = {"mode": "one_sample", "dist": name}
    else:
        ya = np.sort(_finite(ref))
        n2 = len(ya)
        if n2 < 2:
            raise InsufficientDataError(f"ks test needs >= 2 values, got {n2}")
        pooled = np.concatenate([xa, ya])
        cdf1 = np.searchsorted(xa, pooled, side="right") / n1
        cdf2 = np.searchsorted(ya, pooled, side="right") / n2
        d = float(np.abs(cdf1 - cdf2).max())
        ne = n1 * n2 / (n1 + n2)
        n_used = n1 + n2
        details = {"mode": "two_sample"}
    sqrt_ne = math.sqrt(ne)
    lam = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d
    return TestResult(d, special.kolmogorov_sf(lam), n_used=n_used, details=details)


# ---------------------------------------------------------------------------
# Mann-Whitney U


def _rankdata(vals: np.ndarray) -> np.ndarray:
    order = np.argsort(vals, kind="mergesort")
    ranks = np.empty(len(vals), dtype=np.float64)
    sv = vals[order]
    i = 0
    while i < len(sv):
        j = i
        while j < len(sv) and sv[j] == sv[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j + 1)
        i = j
    return ranks


_MW_EXACT_MAX = 8


def mann_whitney_u(a, b) -> TestResult:
    """Mann-Whitney U test (two-sided).

    Uses exhaustive enumeration of the permutation distribution when both
    samples have at most 8 observations, otherwise the normal approximation
    with tie and continuity corrections.
    """
    xa, xb = _finite(a), _finite(b)
    n1, n2 = len(xa), len(xb)
    if n1 < 2 or n2 < 2:
        raise InsufficientDataError(
            f"mann-whitney needs >= 2 values per sample, got {n1} and {n2}"
        )
    pooled = np.concatenate([xa, xb])
    ranks = _rankdata(pooled)
    r1 = float(ranks[:n1].sum())
    u1 = r1 - n1 * (n1 + 1) / 2.0
    u2 = n1 * n2 - u1
    u = min(u1, u2)
    mu = n1 * n2 / 2.0
    details = {"u1": u1, "u2": u2, "rank_biserial": 1.0 - 2.0 * u / (n1 * n2)}

    if max(n1, n2) <= _MW_EXACT_MAX:
        obs_dev = abs(u1 - mu)
        count = 0
        total = 0
        for combo in itertools.combinations(range(n1 + n2), n1):
            ru = ranks[list(combo)].sum() - n1 * (n1 + 1) / 2.0
            if abs(ru - mu) >= obs_dev - 1e-12:
                count += 1
            total += 1
        details["method"] = "exact"
        return TestResult(u, count / total, effect=details["rank_biserial"],
                          n_used=n1 + n2, details=details)

    nn = n1 + n2
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(((tie_counts ** 3) - tie_counts).sum()) / (nn * (nn - 1))
    var = n1 * n2 / 12.0 * ((nn + 1) - tie_term)
    details["method"] = "normal"
    if var <= 0.0:
        return TestResult(u, 1.0, effect=details["rank_biserial"],
                          n_used=nn, details=details)
    z = max(abs(u1 - mu) - 0.5, 0.0) / math.sqrt(var)
    p = min(1.0, 2.0 * special.normal_sf(z))
    details["z"] = z
    return TestResult(u, p, effect=details["rank_biserial"], n_used=nn,
                      details=details)


# ---------------------------------------------------------------------------
# OLS slope


def regression_slope_test(x, y) -> TestResult:
    """t test of a simple-regression slope against zero."""
    xa = np.asarray(x, dtype=np.float64).ravel()
    ya = np.asarray(y, dtype=np.float64).ravel()
    if len(xa) != len(ya):
        raise StatsError(f"paired samples differ in length: {len(xa)} vs {len(ya)}")
    keep = np.isfinite(xa) & np.isfinite(ya)
    xa, ya = xa[keep], ya[keep]
    n = len(xa)
    if n < 3:
        raise InsufficientDataError(f"slope test needs >= 3 complete pairs, got {n}")
    xm, ym = xa.mean(), ya.mean()
    sxx = float(((xa - xm) ** 2).sum())
    if sxx == 0.0:
        raise StatsError("zero variance in regressor")
    sxy = float(((xa - xm) * (ya - ym)).sum())
    slope = sxy / sxx
    intercept = float(ym - slope * xm)
    resid = ya - (intercept + slope * xa)
    sse = float((resid * resid).sum())
    syy = float(((ya - ym) ** 2).sum())
    dof = float(n - 2)
    r2 = 1.0 - sse / syy if syy > 0.0 else 0.0
    details = {"slope": slope, "intercept": intercept, "r_squared": r2}
    if sse <= 0.0:
        if slope == 0.0:
            return TestResult(0.0, 1.0, dof=dof, effect=0.0, n_used=n, details=details)
        return TestResult(math.inf if slope > 0 else -math.inf, 0.0, dof=dof,
                          effect=slope, n_used=n, details=details)
    se = math.sqrt(sse / dof / sxx)
    t = slope / se
    details["stderr"] = se
    return TestResult(t, _two_sided_t(t, dof), dof=dof, effect=slope, n_used=n,
                      details=details)
