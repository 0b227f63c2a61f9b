"""Pure-python (numpy) split scan, the fallback for the compiled kernel.

Both backends must produce bit-identical results.  That pins the
implementation details: prefix sums are plain sequential accumulations
(numpy's cumsum accumulates sequentially, matching the C loop), the
K-output scores accumulate column by column in the same expression order,
and ties on the score keep the first (lowest) boundary index.
"""

from __future__ import annotations

import math

import numpy as np

_NEG_INF = -math.inf
_NAN = math.nan


def scan_feature(xs, ys, min_leaf: int = 1):
    """Best binary split of one feature at a tree node.

    ``xs`` (m,) holds the node's feature values sorted ascending and
    ``ys`` (m, K) the targets in the same order (K outputs; one-hot class
    indicators make the variance criterion equivalent to gini).  Returns
    ``(score, threshold, boundary)`` where ``score`` is
    ``sum_k(S_L^2/n_L + S_R^2/n_R)`` — to be compared against the parent's
    ``sum_k S^2/n`` — and ``boundary`` is the last sorted index on the
    left.  ``(-inf, nan, -1)`` when no valid split exists.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    m = xs.shape[0]
    if m < 2 or m < 2 * min_leaf:
        return (_NEG_INF, _NAN, -1)

    left = np.cumsum(ys, axis=0)
    total = left[-1]
    nl = np.arange(1, m, dtype=np.float64)
    nr = np.float64(m) - nl

    acc = np.zeros(m - 1, dtype=np.float64)
    for k in range(ys.shape[1]):
        lk = left[:-1, k]
        rk = total[k] - lk
        acc += lk * lk / nl + rk * rk / nr

    valid = (nl >= min_leaf) & (nr >= min_leaf) & (xs[1:] > xs[:-1])
    if not valid.any():
        return (_NEG_INF, _NAN, -1)
    acc[~valid] = _NEG_INF
    best = int(np.argmax(acc))
    threshold = (xs[best] + xs[best + 1]) / 2.0
    if threshold >= xs[best + 1]:
        threshold = xs[best]
    return (float(acc[best]), float(threshold), best)
