"""Covariate-based hazard model on the log-odds scale.

Instead of scaling hazards directly, this model scales hazard odds: the
log-odds of churning in a month is the log-odds of the (smoothed) baseline
hazard at that tenure plus a linear function of static covariates. The
baseline term enters the likelihood as a fixed offset, so only the
covariate coefficients are fitted, by Newton's method with step-halving.
Predictions are always strictly inside (0, 1), so unlike the direct scaling
model no clipping is ever needed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit, logit

from .errors import EmptyCalibration, FitDiverged, InvalidRecord, OffsetUndefined
from .projection import CustomerProjection, ProjectionConfig, truncated_survival_sum
from .survival import BaselineHazard, PoolingConfig, hazard_at, jeffreys_view

MODEL_SCHEMA_VERSION = 1

_MAX_HALVINGS = 30
# Fitted probabilities numerically indistinguishable from the outcomes mean
# the likelihood has no finite maximizer (separation).
_SEPARATION_ATOL = 1e-6


@dataclass(frozen=True)
class PersonPeriodRow:
    """One customer-month for fitting: tenure, churn outcome, covariates."""

    tenure: int
    outcome: int
    covariates: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(float(x) for x in self.covariates))


@dataclass(frozen=True)
class OddsModel:
    """Fitted coefficient vector plus fit diagnostics.

    ``baseline_sha`` ties the model to the exact baseline whose odds served
    as the offset; predicting against a different baseline is a caller bug
    this hash makes detectable. ``objective_path`` holds the penalized
    log-likelihood at each accepted Newton iterate (diagnostic only, not
    serialized).
    """

    beta: np.ndarray
    ridge: float
    log_likelihood: float
    iterations: int
    converged: bool
    baseline_sha: str
    objective_path: tuple[float, ...] = ()

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 1 or not np.all(np.isfinite(beta)):
            raise ValueError("beta must be a finite vector")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    def to_dict(self) -> dict:
        return {
            "version": MODEL_SCHEMA_VERSION,
            "beta": self.beta.tolist(),
            "ridge": self.ridge,
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "baseline_sha": self.baseline_sha,
        }


def _offset_table(view: BaselineHazard, pooling: PoolingConfig | None):
    cache: dict[int, float] = {}

    def offset(t: int) -> float:
        if t not in cache:
            h0 = hazard_at(view, t, pooling)
            if not 0.0 < h0 < 1.0:
                raise OffsetUndefined(t)
            cache[t] = float(logit(h0))
        return cache[t]

    return offset


def _design(rows: Sequence[PersonPeriodRow], view: BaselineHazard,
            pooling: PoolingConfig | None):
    if not rows:
        raise EmptyCalibration("no person-period rows")
    m = len(rows[0].covariates)
    if m < 1:
        raise InvalidRecord(0, "at least one covariate required")
    offset = _offset_table(view, pooling)
    X = np.empty((len(rows), m))
    y = np.empty(len(rows))
    offsets = np.empty(len(rows))
    for i, row in enumerate(rows):
        if row.outcome not in (0, 1):
            raise InvalidRecord(i, f"outcome must be 0 or 1, got {row.outcome!r}")
        if len(row.covariates) != m:
            raise InvalidRecord(i, f"expected {m} covariates, got {len(row.covariates)}")
        if row.tenure < 0:
            raise InvalidRecord(i, "tenure must be >= 0")
        X[i] = row.covariates
        y[i] = row.outcome
        offsets[i] = offset(row.tenure)
    return X, y, offsets


def log_likelihood(beta: np.ndarray, X: np.ndarray, y: np.ndarray,
                   offsets: np.ndarray, ridge: float = 0.0) -> float:
    """Bernoulli log-likelihood of the offset-logistic model, ridge-penalized.

    Computed via log-sigmoid so it stays finite for any finite linear
    predictor.
    """
    eta = offsets + X @ beta
    # log sigma(eta) = -log(1 + exp(-eta)), stable in both directions
    ll = -(np.logaddexp(0.0, -eta) * y + np.logaddexp(0.0, eta) * (1.0 - y)).sum()
    return float(ll - 0.5 * ridge * float(beta @ beta))


def score_vector(beta: np.ndarray, X: np.ndarray, y: np.ndarray,
                 offsets: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Gradient of the penalized log-likelihood with respect to beta."""
    h = expit(offsets + X @ beta)
    return X.T @ (y - h) - ridge * beta


def fit_odds_model(rows: Sequence[PersonPeriodRow], baseline: BaselineHazard,
                   ridge: float = 1e-6, tol: float = 1e-8, max_iter: int = 50,
                   pooling: PoolingConfig | None = None) -> OddsModel:
    """Fit covariate coefficients by penalized maximum likelihood.

    The baseline enters as a fixed per-row offset of its hazard log-odds,
    always taken from the Jeffreys-smoothed view of the given baseline
    (raw 0/1 rates have no log-odds). Newton steps are halved until the
    penalized objective does not decrease; the fit converges when an
    accepted step improves it by less than ``tol``.

    Raises FitDiverged on a non-finite step, on a step that 30 halvings
    cannot repair, or on perfect separation (fitted probabilities
    numerically equal to the outcomes, under which no finite maximizer
    exists).
    """
    if ridge < 0.0:
        raise ValueError("ridge must be >= 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    rows = list(rows)
    view = jeffreys_view(baseline)
    X, y, offsets = _design(rows, view, pooling)
    m = X.shape[1]

    beta = np.zeros(m)
    objective = log_likelihood(beta, X, y, offsets, ridge)
    path = [objective]
    converged = False
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        h = expit(offsets + X @ beta)
        grad = X.T @ (y - h) - ridge * beta
        if float(np.max(np.abs(grad))) == 0.0:
            # Exactly stationary (e.g. all covariates zero); nothing to move.
            converged = True
            break
        w = h * (1.0 - h)
        hess = (X * w[:, None]).T @ X + ridge * np.eye(m)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            raise FitDiverged("singular Hessian", last_beta=beta, iterations=it) from None
        if not np.all(np.isfinite(step)):
            raise FitDiverged("non-finite Newton step", last_beta=beta, iterations=it)

        candidate = beta + step
        new_objective = log_likelihood(candidate, X, y, offsets, ridge)
        halvings = 0
        while not (math.isfinite(new_objective) and new_objective >= objective):
            halvings += 1
            if halvings > _MAX_HALVINGS:
                raise FitDiverged(
                    f"no improvement after {_MAX_HALVINGS} step halvings",
                    last_beta=beta, iterations=it)
            step *= 0.5
            candidate = beta + step
            new_objective = log_likelihood(candidate, X, y, offsets, ridge)

        beta = candidate
        path.append(new_objective)
        h_new = expit(offsets + X @ beta)
        if float(np.max(np.abs(y - h_new))) < _SEPARATION_ATOL:
            raise FitDiverged("perfect separation", last_beta=beta, iterations=it)
        improvement = new_objective - objective
        objective = new_objective
        if improvement < tol:
            converged = True
            break

    return OddsModel(
        beta=beta,
        ridge=ridge,
        log_likelihood=log_likelihood(beta, X, y, offsets, ridge=0.0),
        iterations=iterations,
        converged=converged,
        baseline_sha=baseline.content_sha(),
        objective_path=tuple(path),
    )


def _predict_on_view(view: BaselineHazard, beta: np.ndarray,
                     covariates: np.ndarray, t: int,
                     pooling: PoolingConfig | None) -> float:
    h0 = hazard_at(view, t, pooling)
    if not 0.0 < h0 < 1.0:
        raise OffsetUndefined(t)
    lin = float(beta @ covariates)
    if lin == 0.0:
        # Zero linear predictor reduces to the baseline itself; return it
        # directly so the reduction is exact rather than a logit round-trip.
        return h0
    return float(expit(logit(h0) + lin))


def predict_hazard_odds(model: OddsModel, covariates: Sequence[float],
                        baseline: BaselineHazard, t: int,
                        pooling: PoolingConfig | None = None) -> float:
    """Predicted monthly churn hazard at tenure ``t``, strictly in (0, 1).

    Applies the fitted coefficients to the Jeffreys-smoothed view of the
    baseline (the same view the fit used for its offsets).
    """
    x = np.asarray(covariates, dtype=np.float64)
    if x.shape != model.beta.shape:
        raise ValueError(f"expected {model.beta.size} covariates, got {x.size}")
    return _predict_on_view(jeffreys_view(baseline), model.beta, x, t, pooling)


def project_with_odds_model(model: OddsModel, covariates: Sequence[float],
                            baseline: BaselineHazard, t0: int,
                            config: ProjectionConfig | None = None,
                            pooling: PoolingConfig | None = None,
                            ) -> CustomerProjection:
    """Project survival and expected remaining tenure under the odds model.

    Static covariates apply at every future tenure. The projection's
    ``alpha`` field carries the customer's hazard-odds multiplier
    exp(beta . x), the analog of the direct scaling coefficient.
    """
    x = np.asarray(covariates, dtype=np.float64)
    if x.shape != model.beta.shape:
        raise ValueError(f"expected {model.beta.size} covariates, got {x.size}")
    if config is None:
        config = ProjectionConfig()
    view = jeffreys_view(baseline)

    def hazard_fn(j: int) -> float:
        return _predict_on_view(view, model.beta, x, t0 + j, pooling)

    ert, hazards, path, truncated_at = truncated_survival_sum(
        hazard_fn, config.eps, config.max_horizon)
    return CustomerProjection(
        alpha=float(np.exp(float(model.beta @ x))),
        hazard_path=hazards,
        survival_path=path,
        ert_months=ert,
        truncated_at=truncated_at,
    )


def model_from_dict(doc: dict) -> OddsModel:
    if not isinstance(doc, dict):
        raise ValueError("model document must be a JSON object")
    required = {"version", "beta", "ridge", "log_likelihood", "iterations",
                "converged", "baseline_sha"}
    if set(doc) != required:
        raise ValueError(f"model document must have exactly keys {sorted(required)}")
    if doc["version"] != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model version {doc['version']!r}")
    return OddsModel(
        beta=np.asarray(doc["beta"], dtype=np.float64),
        ridge=float(doc["ridge"]),
        log_likelihood=float(doc["log_likelihood"]),
        iterations=int(doc["iterations"]),
        converged=bool(doc["converged"]),
        baseline_sha=str(doc["baseline_sha"]),
    )


def save_model(path: str | Path, model: OddsModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=1)
        fh.write("\n")


def load_model(path: str | Path) -> OddsModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
