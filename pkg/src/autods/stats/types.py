"""Result types shared by the statistical kernel."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np


@dataclass(frozen=True)
class TestResult:
    """Outcome of a single statistical test.

    ``statistic`` houses whichever statistic the test produces (chi-square,
    t, F, U, D, W, r, z).  ``dof`` is a float or an (num, den) pair for F
    tests.  ``effect`` is a test-specific effect size when one is natural
    (rate difference, correlation).  ``n_used`` counts observations that
    actually entered the test after missing-value exclusion.  ``details``
    carries per-test extras (group means, rates) for report rendering.
    """

    statistic: float
    p_value: float
    dof: Optional[Union[float, tuple]] = None
    effect: Optional[float] = None
    n_used: int = 0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p_value outside [0, 1]: {self.p_value}")

    def to_json(self) -> dict:
        dof = self.dof
        if isinstance(dof, tuple):
            dof = list(dof)
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "dof": dof,
            "effect": self.effect,
            "n_used": self.n_used,
            "details": dict(self.details),
        }


@dataclass(frozen=True)
class SurvivalCurve:
    """Product-limit estimate: step function over ascending event times."""

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray

    def probability_at(self, t: float) -> float:
        idx = np.searchsorted(self.times, t, side="right") - 1
        return 1.0 if idx < 0 else float(self.survival[idx])


@dataclass(frozen=True)
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float


@dataclass(frozen=True)
class Projection:
    """Orthonormal components (rows), their variance ratios, and scores."""

    components: np.ndarray
    explained_variance_ratio: np.ndarray
    scores: np.ndarray
