"""Deterministic seed derivation.

Every random consumer in a run derives its own stream from the single
config seed plus a stable string label, so stage order and parallelism
never change the numbers anyone draws.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(base: int, *labels) -> int:
    key = "|".join([str(int(base))] + [str(l) for l in labels])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(base: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base, *labels))
