"""Per-customer hazard scaling and survival projection.

A customer's hazard curve is the baseline curve scaled by a single
coefficient alpha, estimated as the customer's one-month churn score over
the baseline hazard at their current tenure. Scaled rates above 1 are
clipped to 1. Survival paths are the running product of (1 - hazard) from
the current tenure, and expected remaining tenure is the truncated sum of
that path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateBaseline
from .survival import BaselineHazard, PoolingConfig, hazard_at


@dataclass(frozen=True)
class ProjectionConfig:
    """Truncation rule for survival sums.

    Summation stops at the first month whose survival probability drops
    below ``eps``, or after ``max_horizon`` months, whichever comes first.
    With a positive hazard floor h beyond the cutoff, the discarded tail is
    bounded by eps * (1 - h) / h.
    """

    eps: float = 1e-6
    max_horizon: int = 1200

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")
        if self.max_horizon < 1:
            raise ValueError("max_horizon must be >= 1")


@dataclass(frozen=True)
class CustomerProjection:
    """Projected future for one customer, starting at their current tenure.

    ``survival_path[j]`` is the probability of remaining a customer for at
    least ``j + 1`` further months. ``ert_months`` is the sum of the stored
    path; ``truncated_at`` is the last index included in that sum. For
    competing-risks projections ``alpha`` is the combined coefficient at the
    current tenure and the per-cause coefficients are carried alongside.
    """

    alpha: float
    hazard_path: np.ndarray
    survival_path: np.ndarray
    ert_months: float
    truncated_at: int
    alpha_v: float | None = None
    alpha_inv: float | None = None

    def __post_init__(self):
        hazard_path = np.asarray(self.hazard_path, dtype=np.float64)
        survival_path = np.asarray(self.survival_path, dtype=np.float64)
        if np.any((hazard_path < 0.0) | (hazard_path > 1.0)):
            raise ValueError("hazard path values must lie in [0, 1]")
        if np.any(survival_path[1:] > survival_path[:-1]):
            raise ValueError("survival path must be non-increasing")
        if not (self.alpha >= 0.0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be finite and >= 0")
        object.__setattr__(self, "hazard_path", hazard_path)
        object.__setattr__(self, "survival_path", survival_path)


def compute_alpha(score: float, baseline: BaselineHazard, t0: int,
                  pooling: PoolingConfig | None = None) -> float:
    """Proportionality coefficient: churn score over baseline hazard at t0.

    A zero score yields alpha 0 even if the baseline hazard at t0 is zero
    (the customer can never churn); a positive score against a zero baseline
    hazard has no finite coefficient and raises DegenerateBaseline.
    """
    if not (0.0 <= score <= 1.0):
        raise ValueError(f"churn score must lie in [0, 1], got {score!r}")
    h0 = hazard_at(baseline, t0, pooling)
    if h0 == 0.0:
        if score == 0.0:
            return 0.0
        raise DegenerateBaseline(
            f"baseline hazard at tenure {t0} is 0 even after pooling")
    return score / h0


def project_hazard(alpha: float, baseline: BaselineHazard, t0: int,
                   horizon: int, pooling: PoolingConfig | None = None) -> np.ndarray:
    """Scaled hazard path from t0: min(1, alpha * baseline hazard), per month."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if alpha < 0.0 or not math.isfinite(alpha):
        raise ValueError("alpha must be finite and >= 0")
    return np.array([min(1.0, alpha * hazard_at(baseline, t0 + j, pooling))
                     for j in range(horizon)])


def truncated_survival_sum(hazard_fn: Callable[[int], float],
                           eps: float, max_horizon: int,
                           ) -> tuple[float, np.ndarray, np.ndarray, int]:
    """Shared summation core for expected remaining tenure.

    Walks months j = 0, 1, ... pulling the hazard for each from
    ``hazard_fn``, accumulating the survival product and its running sum.
    Stops after the first month whose survival drops below ``eps`` (that
    month is still included) or at ``max_horizon`` months.

    Returns ``(ert, hazard_path, survival_path, truncated_at)``.
    """
    survival = 1.0
    ert = 0.0
    hazards: list[float] = []
    path: list[float] = []
    for j in range(max_horizon):
        h = hazard_fn(j)
        survival *= 1.0 - h
        hazards.append(h)
        path.append(survival)
        ert += survival
        if survival < eps:
            break
    return ert, np.array(hazards), np.array(path), len(path) - 1


def expected_remaining_tenure(alpha: float, baseline: BaselineHazard, t0: int,
                              config: ProjectionConfig | None = None,
                              pooling: PoolingConfig | None = None,
                              ) -> tuple[float, np.ndarray, int]:
    """Expected remaining tenure in months for a customer at tenure t0.

    Returns ``(ert_months, survival_path, truncated_at)``; the path starts
    one month ahead of t0 and is already truncated per ``config``.
    """
    if alpha < 0.0 or not math.isfinite(alpha):
        raise ValueError("alpha must be finite and >= 0")
    if config is None:
        config = ProjectionConfig()

    def scaled(j: int) -> float:
        return min(1.0, alpha * hazard_at(baseline, t0 + j, pooling))

    ert, _, path, truncated_at = truncated_survival_sum(
        scaled, config.eps, config.max_horizon)
    return ert, path, truncated_at


def project_customer(score: float, baseline: BaselineHazard, t0: int,
                     config: ProjectionConfig | None = None,
                     pooling: PoolingConfig | None = None) -> CustomerProjection:
    """Full single-risk projection: alpha, paths, and expected remaining tenure."""
    if config is None:
        config = ProjectionConfig()
    alpha = compute_alpha(score, baseline, t0, pooling)

    def scaled(j: int) -> float:
        return min(1.0, alpha * hazard_at(baseline, t0 + j, pooling))

    ert, hazards, path, truncated_at = truncated_survival_sum(
        scaled, config.eps, config.max_horizon)
    return CustomerProjection(
        alpha=alpha,
        hazard_path=hazards,
        survival_path=path,
        ert_months=ert,
        truncated_at=truncated_at,
    )


def project_competing(score_v: float, score_inv: float,
                      baseline_v: BaselineHazard, baseline_inv: BaselineHazard,
                      t0: int,
                      config: ProjectionConfig | None = None,
                      pooling: PoolingConfig | None = None) -> CustomerProjection:
    """Competing-risks projection from cause-specific scores and baselines.

    Each cause gets its own coefficient against its own sub-baseline; the
    combined monthly hazard is the clipped sum of the two scaled sub-hazards
    (scale first, sum, then clip, so that clipping one sub-hazard cannot
    hide a combined rate above 1). Both sub-baselines must come from the
    same snapshot so their sub-hazards share exposure denominators.
    """
    if config is None:
        config = ProjectionConfig()
    alpha_v = compute_alpha(score_v, baseline_v, t0, pooling)
    alpha_inv = compute_alpha(score_inv, baseline_inv, t0, pooling)

    def combined(j: int) -> float:
        t = t0 + j
        return min(1.0, alpha_v * hazard_at(baseline_v, t, pooling)
                   + alpha_inv * hazard_at(baseline_inv, t, pooling))

    ert, hazards, path, truncated_at = truncated_survival_sum(
        combined, config.eps, config.max_horizon)
    h_total = hazard_at(baseline_v, t0, pooling) + hazard_at(baseline_inv, t0, pooling)
    alpha = (score_v + score_inv) / h_total if h_total > 0.0 else 0.0
    return CustomerProjection(
        alpha=alpha,
        hazard_path=hazards,
        survival_path=path,
        ert_months=ert,
        truncated_at=truncated_at,
        alpha_v=alpha_v,
        alpha_inv=alpha_inv,
    )
