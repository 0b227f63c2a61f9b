"""CUSUM change-point detection with a permutation significance test."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .._seeding import rng_for
from ..errors import InsufficientDataError

__all__ = ["ChangePointResult", "cusum_change_point"]


class ChangePointResult(NamedTuple):
    index: int
    significant: bool
    statistic: float
    p_value: float


def _cusum_stat(x: np.ndarray):
    s = np.cumsum(x - x.mean())[:-1]  # the full sum is zero by construction
    abs_s = np.abs(s)
    arg = int(np.argmax(abs_s))
    return float(abs_s[arg]), arg + 1


def cusum_change_point(x, seed: int = 0, n_permutations: int = 1000,
                       alpha: float = 0.05) -> ChangePointResult:
    """Locate the strongest mean shift in a sequence.

    The statistic is the maximum absolute cumulative deviation from the
    overall mean; ``index`` is the first position of the proposed new
    regime.  Significance comes from a permutation test: the sequence is
    shuffled ``n_permutations`` times and the add-one-smoothed fraction of
    shuffles matching or beating the observed statistic is the p-value.
    """
    arr = np.asarray(x, dtype=np.float64).ravel()
    arr = arr[np.isfinite(arr)]
    if len(arr) < 8:
        raise InsufficientDataError(f"cusum needs >= 8 values, got {len(arr)}")
    stat, index = _cusum_stat(arr)
    if stat == 0.0:
        return ChangePointResult(index, False, 0.0, 1.0)

    rng = rng_for(seed, "cusum")
    perms = rng.permuted(np.tile(arr, (n_permutations, 1)), axis=1)
    centered = perms - perms.mean(axis=1, keepdims=True)
    perm_stats = np.abs(np.cumsum(centered, axis=1)[:, :-1]).max(axis=1)
    p = (1.0 + float((perm_stats >= stat - 1e-12).sum())) / (1.0 + n_permutations)
    return ChangePointResult(index, p < alpha, stat, p)
