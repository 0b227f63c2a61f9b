"""Bundled synthetic datasets with known, documented structure.

Two constructions matter downstream:

* ``planted_churn`` — a churn table whose only real signals are a 20-point
  activity gap and a 15-point short-tenure bump, next to a pure-noise
  column.  The tenure distribution is shaped so its first quartile sits at
  3, which is where the template proposer will put a threshold split.
* ``planted_interaction`` — a classification target driven by the product
  of two standard-normal features.  Each feature has a weak main effect
  (enough to be detected at this sample size, far too weak to classify
  with), so pipelines that construct the product feature beat pipelines
  that do not.

``demo_churn`` dresses the planted churn table up with the usual retail
columns (ids, geography, balances, a join date, some missing cells) for
end-to-end runs.
"""

from __future__ import annotations

import argparse
import datetime as _dt

import numpy as np

from .table import (
    DataTable,
    boolean_column,
    categorical_column,
    datetime_column,
    numeric_column,
    write_csv,
)

# Tenure level probabilities, levels 0..10.  Cumulative mass is 0.18 below
# 3 and 0.30 through 3, so the empirical first quartile is 3 at any
# realistic sample size.
_TENURE_P = (0.06, 0.06, 0.06, 0.12, 0.10, 0.10, 0.10, 0.10, 0.10, 0.10, 0.10)

ACTIVE_CHURN = 0.20
INACTIVE_CHURN = 0.40
SHORT_TENURE_BUMP = 0.15
TENURE_SPLIT = 3


def planted_churn(n: int = 2000, seed: int = 0) -> DataTable:
    """Churn table with two planted effects and one noise column.

    Churn probability is ``0.20`` for active rows and ``0.40`` for
    inactive rows, plus ``0.15`` when tenure is under 3.  ``Noise`` is
    standard normal, independent of everything.
    """
    rng = np.random.default_rng(seed)
    active = rng.random(n) < 0.5
    tenure = rng.choice(len(_TENURE_P), size=n, p=_TENURE_P).astype(np.float64)
    noise = rng.standard_normal(n)
    p = np.where(active, ACTIVE_CHURN, INACTIVE_CHURN)
    p = p + SHORT_TENURE_BUMP * (tenure < TENURE_SPLIT)
    churn = rng.random(n) < p
    return DataTable([
        boolean_column("Active", active),
        numeric_column("Tenure", tenure),
        numeric_column("Noise", noise),
        boolean_column("Churn", churn),
    ])


def planted_interaction(n: int = 1500, seed: int = 0) -> DataTable:
    """Binary target driven by ``x1*x2``; main effects weak by design."""
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    x3 = rng.standard_normal(n)  # pure distractor
    latent = 1.6 * x1 * x2 + 0.35 * x1 + 0.35 * x2 + rng.normal(0.0, 0.8, n)
    y = latent > 0.0
    return DataTable([
        numeric_column("x1", x1),
        numeric_column("x2", x2),
        numeric_column("x3", x3),
        boolean_column("y", y),
    ])


_GEOS = ("France", "Germany", "Spain")


def demo_churn(n: int = 2000, seed: int = 0) -> DataTable:
    """The planted churn table plus realistic dressing.

    Adds an id column, geography, balance/salary/age numerics (balance
    and age carry ~2% missing cells), a product count whose median is 2,
    and a join date.  Balance, age, and product count are drawn
    conditionally on churn, so association tests find them; salary,
    geography, and the join date are independent dressing.
    """
    base = planted_churn(n, seed)
    rng = np.random.default_rng((seed + 1) * 7919)
    churn = base.column("Churn").values

    balance = np.round(
        np.maximum(rng.normal(76000, 40000, n) + 14000.0 * churn, 0.0), 2)
    age = np.round(rng.normal(39, 10, n) + 4.0 * churn).clip(18, 92)
    salary = np.round(rng.uniform(1000, 200000, n), 2)
    p_stay = np.array((0.28, 0.50, 0.16, 0.06))
    p_churn = np.array((0.55, 0.33, 0.09, 0.03))
    u = rng.random(n)
    cum_stay = np.cumsum(p_stay)
    cum_churn = np.cumsum(p_churn)
    products = np.where(
        churn,
        np.searchsorted(cum_churn, u, side="right"),
        np.searchsorted(cum_stay, u, side="right"),
    ).astype(np.float64) + 1.0
    geo = rng.choice(len(_GEOS), size=n, p=(0.5, 0.25, 0.25))

    balance_missing = rng.random(n) < 0.02
    age_missing = rng.random(n) < 0.02

    start = _dt.date(2018, 1, 1)
    day_offsets = rng.integers(0, 2500, n)
    days = [start + _dt.timedelta(days=int(d)) for d in day_offsets]
    texts = [d.isoformat() for d in days]
    epochs = [int(_dt.datetime(d.year, d.month, d.day,
                               tzinfo=_dt.timezone.utc).timestamp())
              for d in days]

    cols = [
        numeric_column("CustomerId", np.arange(1, n + 1, dtype=np.float64)),
        categorical_column("Geography", [_GEOS[g] for g in geo]),
        numeric_column("Age", age, missing=age_missing),
        base.column("Tenure"),
        numeric_column("Balance", balance, missing=balance_missing),
        numeric_column("NumOfProducts", products),
        base.column("Active").renamed("IsActiveMember"),
        numeric_column("EstimatedSalary", salary),
        datetime_column("JoinDate", epochs, texts),
        base.column("Noise"),
        base.column("Churn").renamed("Exited"),
    ]
    del churn
    return DataTable(cols)


_GENERATORS = {
    "churn": planted_churn,
    "interaction": planted_interaction,
    "demo": demo_churn,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m autods.datasets",
        description="Write a bundled synthetic dataset to CSV.")
    parser.add_argument("name", choices=sorted(_GENERATORS))
    parser.add_argument("path", help="output CSV path")
    parser.add_argument("--rows", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    gen = _GENERATORS[args.name]
    table = gen(**({} if args.rows is None else {"n": args.rows}),
                seed=args.seed)
    write_csv(table, args.path)
    print(f"wrote {table.n_rows} rows x {len(table.names)} columns "
          f"to {args.path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
