"""Baseline hazard estimation over discrete tenure months.

The baseline hazard at tenure ``t`` is the probability that a customer who
has completed ``t`` months churns during the following month. It is
estimated nonparametrically from a one-month-ahead snapshot (churn rates by
tenure) or from full histories via the product-limit (Kaplan-Meier)
estimator. Beyond the point where the curve stabilizes, a single pooled
tail rate extrapolates it to arbitrary tenures, which makes ``hazard_at`` a
total function of tenure.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .dataio import CAUSE_INVOLUNTARY, CAUSE_VOLUNTARY, CalibrationRecord
from .errors import (
    EmptyCalibration,
    EmptyTail,
    InsufficientData,
    InvalidHazard,
    InvalidRecord,
    NotMonotone,
)

SMOOTHING_NONE = "none"
SMOOTHING_JEFFREYS = "jeffreys"

BASELINE_SCHEMA_VERSION = 1

# Keys of the versioned baseline JSON document. "min_events" is optional and
# carries the pooling threshold chosen when the file was built.
_BASELINE_KEYS = {"version", "hazards", "exposures", "events", "tail_start",
                  "tail_rate", "smoothing"}
_BASELINE_OPTIONAL_KEYS = {"min_events"}


@dataclass(frozen=True)
class PoolingConfig:
    """Sparse-bin handling for hazard lookups.

    A tenure bin with fewer than ``min_events`` churn events is pooled with
    symmetrically expanding neighbor bins until the pooled events reach the
    threshold or the observed range is exhausted.
    """

    min_events: int = 5

    def __post_init__(self):
        if self.min_events < 0:
            raise ValueError("min_events must be >= 0")


@dataclass(frozen=True)
class EventHistory:
    """A full observation: total observed tenure and whether churn was seen.

    ``churned=False`` means right-censored: the customer was still active
    after ``duration`` completed months.
    """

    duration: int
    churned: bool

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("duration must be >= 0")


@dataclass(frozen=True)
class BaselineHazard:
    """Hazard rate per tenure month plus the counts behind it.

    ``hazards[t]`` is the churn rate of customers at tenure ``t`` over the
    following month; bins with zero exposure hold NaN (absent, filled at
    lookup time by pooling). ``tail_rate`` applies to every tenure at or
    beyond ``tail_start``.
    """

    hazards: np.ndarray
    exposures: np.ndarray
    events: np.ndarray
    tail_start: int
    tail_rate: float
    smoothing: str = SMOOTHING_NONE

    def __post_init__(self):
        hazards = np.asarray(self.hazards, dtype=np.float64)
        exposures = np.asarray(self.exposures, dtype=np.int64)
        events = np.asarray(self.events, dtype=np.int64)
        if not (len(hazards) == len(exposures) == len(events)) or len(hazards) == 0:
            raise ValueError("hazards, exposures, events must be equal-length, non-empty")
        if np.any(exposures < 0) or np.any(events < 0) or np.any(events > exposures):
            raise ValueError("counts must satisfy 0 <= events[t] <= exposures[t]")
        absent = np.isnan(hazards)
        if np.any(absent & (exposures > 0)):
            raise ValueError("hazard may be absent (NaN) only where exposure is 0")
        present = hazards[~absent]
        if np.any((present < 0.0) | (present > 1.0)):
            raise ValueError("hazards must lie in [0, 1]")
        if not 0 <= self.tail_start <= len(hazards):
            raise ValueError("tail_start must lie in [0, T_max + 1]")
        if not (math.isfinite(self.tail_rate) and 0.0 <= self.tail_rate <= 1.0):
            raise ValueError("tail_rate must be a rate in [0, 1]")
        if self.smoothing not in (SMOOTHING_NONE, SMOOTHING_JEFFREYS):
            raise ValueError(f"unknown smoothing {self.smoothing!r}")
        for arr in (hazards, exposures, events):
            arr.setflags(write=False)
        object.__setattr__(self, "hazards", hazards)
        object.__setattr__(self, "exposures", exposures)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "tail_start", int(self.tail_start))
        object.__setattr__(self, "tail_rate", float(self.tail_rate))

    @property
    def t_max(self) -> int:
        """Largest tenure with an observed bin."""
        return len(self.hazards) - 1

    def to_dict(self) -> dict:
        hazards = [None if math.isnan(h) else h for h in self.hazards.tolist()]
        return {
            "version": BASELINE_SCHEMA_VERSION,
            "hazards": hazards,
            "exposures": self.exposures.tolist(),
            "events": self.events.tolist(),
            "tail_start": self.tail_start,
            "tail_rate": self.tail_rate,
            "smoothing": self.smoothing,
        }

    def content_sha(self) -> str:
        """Hash of the canonical serialized form; identifies this baseline."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class LoadedBaseline(NamedTuple):
    baseline: BaselineHazard
    min_events: int | None


def _smoothed_rate(events: float, exposure: float, smoothing: str) -> float:
    if smoothing == SMOOTHING_JEFFREYS:
        return (events + 0.5) / (exposure + 1.0)
    return events / exposure


def _hazards_from_counts(events: np.ndarray, exposures: np.ndarray,
                         smoothing: str) -> np.ndarray:
    hazards = np.full(len(events), np.nan)
    mask = exposures > 0
    if smoothing == SMOOTHING_JEFFREYS:
        hazards[mask] = (events[mask] + 0.5) / (exposures[mask] + 1.0)
    else:
        hazards[mask] = events[mask] / exposures[mask]
    return hazards


def _accumulate_counts(records: Iterable[CalibrationRecord], by_cause: bool):
    exposures: dict[int, int] = {}
    events: dict[int, int] = {}
    events_v: dict[int, int] = {}
    events_inv: dict[int, int] = {}
    n = 0
    for i, rec in enumerate(records):
        n += 1
        tenure = rec.tenure
        churned = rec.churned
        if not isinstance(tenure, (int, np.integer)) or isinstance(tenure, bool) or tenure < 0:
            raise InvalidRecord(i, f"tenure must be a non-negative integer, got {tenure!r}")
        if isinstance(churned, bool):
            churned = int(churned)
        if churned not in (0, 1):
            raise InvalidRecord(i, f"churn flag must be 0 or 1, got {rec.churned!r}")
        exposures[tenure] = exposures.get(tenure, 0) + 1
        if churned:
            events[tenure] = events.get(tenure, 0) + 1
            if by_cause:
                if rec.cause == CAUSE_VOLUNTARY:
                    events_v[tenure] = events_v.get(tenure, 0) + 1
                elif rec.cause == CAUSE_INVOLUNTARY:
                    events_inv[tenure] = events_inv.get(tenure, 0) + 1
                else:
                    raise InvalidRecord(i, f"churner needs cause V or I, got {rec.cause!r}")
    if n == 0:
        raise EmptyCalibration("no calibration records")
    t_max = max(exposures)
    size = t_max + 1

    def to_array(counts: dict[int, int]) -> np.ndarray:
        arr = np.zeros(size, dtype=np.int64)
        for t, c in counts.items():
            arr[t] = c
        return arr

    return to_array(exposures), to_array(events), to_array(events_v), to_array(events_inv)


def _default_tail(events: np.ndarray, exposures: np.ndarray) -> float:
    # Placeholder until extrapolate_tail is called: the pooled overall rate,
    # so hazard_at stays total even on a freshly estimated baseline.
    total_n = int(exposures.sum())
    return float(events.sum() / total_n) if total_n > 0 else 0.0


def estimate_hazard_by_tenure(records: Iterable[CalibrationRecord],
                              smoothing: str = SMOOTHING_NONE) -> BaselineHazard:
    """Estimate the baseline hazard curve from a one-month-ahead snapshot.

    Each record contributes one unit of exposure at its tenure and one event
    if it churned. Without smoothing the bin rate is events/exposure; with
    Jeffreys smoothing it is (events + 0.5) / (exposure + 1). Bins with zero
    exposure inside the observed range are marked absent (NaN), never
    silently zero; ``hazard_at`` fills them by pooling.

    The returned baseline has ``tail_start == t_max + 1`` and a provisional
    tail rate (the pooled overall rate); call ``detect_tail_start`` and
    ``extrapolate_tail`` to fix the tail properly.
    """
    if smoothing not in (SMOOTHING_NONE, SMOOTHING_JEFFREYS):
        raise ValueError(f"unknown smoothing {smoothing!r}")
    exposures, events, _, _ = _accumulate_counts(records, by_cause=False)
    return BaselineHazard(
        hazards=_hazards_from_counts(events, exposures, smoothing),
        exposures=exposures,
        events=events,
        tail_start=len(exposures),
        tail_rate=_default_tail(events, exposures),
        smoothing=smoothing,
    )


def estimate_cause_specific(records: Iterable[CalibrationRecord],
                            smoothing: str = SMOOTHING_NONE,
                            ) -> tuple[BaselineHazard, BaselineHazard]:
    """Estimate voluntary and involuntary sub-hazard baselines.

    Both sub-baselines share the snapshot's exposure denominators (every
    at-risk customer counts in both), which is exactly the construction that
    makes the two sub-hazards sum to the whole-base hazard.
    Returns ``(baseline_v, baseline_inv)``.
    """
    if smoothing not in (SMOOTHING_NONE, SMOOTHING_JEFFREYS):
        raise ValueError(f"unknown smoothing {smoothing!r}")
    exposures, _, events_v, events_inv = _accumulate_counts(records, by_cause=True)

    def build(events: np.ndarray) -> BaselineHazard:
        return BaselineHazard(
            hazards=_hazards_from_counts(events, exposures, smoothing),
            exposures=exposures,
            events=events,
            tail_start=len(exposures),
            tail_rate=_default_tail(events, exposures),
            smoothing=smoothing,
        )

    return build(events_v), build(events_inv)


def kaplan_meier(histories: Iterable[EventHistory]) -> np.ndarray:
    """Discrete product-limit estimate of the survival curve.

    ``S[t]`` is the estimated probability that total tenure exceeds ``t``
    completed months: the running product of (1 - d_u/n_u) where d_u counts
    churn events at duration u and n_u counts everyone still at risk
    (duration >= u; customers censored at u stay in the risk set at u and
    leave afterwards).
    """
    histories = list(histories)
    if not histories:
        raise EmptyCalibration("no event histories")
    max_d = max(h.duration for h in histories)
    total = np.zeros(max_d + 1, dtype=np.int64)
    deaths = np.zeros(max_d + 1, dtype=np.int64)
    for h in histories:
        total[h.duration] += 1
        if h.churned:
            deaths[h.duration] += 1
    # n_u = number with duration >= u
    at_risk = total[::-1].cumsum()[::-1]
    return np.cumprod(1.0 - deaths / at_risk)


def survival_to_hazard(curve: np.ndarray) -> np.ndarray:
    """Invert a survival curve into per-period hazards.

    ``h[t] = 1 - S[t]/S[t-1]`` with an implicit predecessor of 1; once the
    curve hits zero every later hazard is 1.
    """
    curve = np.asarray(curve, dtype=np.float64)
    if curve.ndim != 1:
        raise ValueError("survival curve must be one-dimensional")
    if np.any((curve < 0.0) | (curve > 1.0)) or np.any(np.isnan(curve)):
        raise ValueError("survival values must lie in [0, 1]")
    prev = np.concatenate(([1.0], curve[:-1]))
    if np.any(curve > prev):
        raise NotMonotone("survival curve increases")
    with np.errstate(divide="ignore", invalid="ignore"):
        hazards = 1.0 - curve / prev
    hazards[prev == 0.0] = 1.0
    return hazards


def hazard_to_survival(hazards: np.ndarray) -> np.ndarray:
    """Fold per-period hazards into a survival curve (running product of 1-h)."""
    hazards = np.asarray(hazards, dtype=np.float64)
    bad = np.flatnonzero(~((hazards >= 0.0) & (hazards <= 1.0)))
    if bad.size:
        i = int(bad[0])
        raise InvalidHazard(i, float(hazards[i]))
    return np.cumprod(1.0 - hazards)


def detect_tail_start(baseline: BaselineHazard, window: int = 6,
                      rel_tol: float = 0.10) -> int:
    """Find the tenure beyond which the hazard curve has stabilized.

    Returns the smallest t* such that from t* onward every pair of adjacent
    windows of length ``window`` has exposure-weighted mean hazards within
    ``rel_tol`` of each other (relative to the larger mean). If even the
    last testable pair disagrees, falls back to the 90th percentile of
    observed tenures. Deterministic; automates eyeballing the hazard plot.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    exposures = baseline.exposures
    observed = np.flatnonzero(exposures > 0)
    if observed.size < 2 * window:
        raise InsufficientData(
            f"need at least {2 * window} observed tenures, have {observed.size}")
    weighted = np.where(exposures > 0, baseline.hazards, 0.0) * exposures

    def window_mean(a: int, b: int) -> float | None:
        n = int(exposures[a:b].sum())
        return float(weighted[a:b].sum() / n) if n > 0 else None

    last = baseline.t_max - 2 * window + 1
    if last < 0:
        raise InsufficientData("observed range shorter than two windows")

    def stable(s: int) -> bool:
        m1 = window_mean(s, s + window)
        m2 = window_mean(s + window, s + 2 * window)
        if m1 is None or m2 is None:
            return False
        return abs(m1 - m2) <= rel_tol * max(m1, m2)

    if not stable(last):
        return int(np.percentile(observed, 90, method="lower"))
    start = last
    while start > 0 and stable(start - 1):
        start -= 1
    return start


def extrapolate_tail(baseline: BaselineHazard, tail_start: int) -> BaselineHazard:
    """Fix the flat tail rate from pooled counts at tenures >= ``tail_start``.

    The tail rate is the exposure-weighted mean churn rate of the region,
    i.e. total events over total exposure. Observed bins below the tail are
    left untouched.
    """
    if not 0 <= tail_start <= baseline.t_max:
        raise ValueError(f"tail_start must lie in [0, {baseline.t_max}]")
    tail_n = int(baseline.exposures[tail_start:].sum())
    if tail_n == 0:
        raise EmptyTail(f"no exposure at tenures >= {tail_start}")
    tail_e = int(baseline.events[tail_start:].sum())
    return replace(baseline, tail_start=int(tail_start), tail_rate=tail_e / tail_n)


def hazard_at(baseline: BaselineHazard, t: int,
              pooling: PoolingConfig | None = None) -> float:
    """Baseline hazard at tenure ``t``, total over all t >= 0.

    Tenures at or beyond ``tail_start`` get the tail rate. Observed bins
    with at least ``pooling.min_events`` events return their own rate;
    sparser bins are pooled with symmetrically expanding neighbors. The
    pooled rate uses the baseline's own smoothing rule.
    """
    if t < 0:
        raise ValueError("tenure must be >= 0")
    if pooling is None:
        pooling = PoolingConfig()
    if t >= baseline.tail_start:
        return baseline.tail_rate
    events = baseline.events
    exposures = baseline.exposures
    if events[t] >= pooling.min_events and exposures[t] > 0:
        return float(baseline.hazards[t])
    t_max = baseline.t_max
    lo = hi = t
    pooled_e = int(events[t])
    pooled_n = int(exposures[t])
    while (pooled_e < pooling.min_events or pooled_n == 0) and (lo > 0 or hi < t_max):
        if lo > 0:
            lo -= 1
            pooled_e += int(events[lo])
            pooled_n += int(exposures[lo])
        if hi < t_max:
            hi += 1
            pooled_e += int(events[hi])
            pooled_n += int(exposures[hi])
    if pooled_n == 0:
        # Entire dataset is empty of exposure; fall back to the tail rate so
        # the lookup stays total.
        return baseline.tail_rate
    return _smoothed_rate(pooled_e, pooled_n, baseline.smoothing)


def jeffreys_view(baseline: BaselineHazard) -> BaselineHazard:
    """Rebuild the baseline with Jeffreys-smoothed rates from its counts.

    Every observed bin gets (events + 0.5) / (exposure + 1), which is
    strictly inside (0, 1); the tail rate is re-pooled the same way when the
    tail region holds any exposure. Idempotent, since it recomputes from
    counts rather than from the stored rates.
    """
    tail_start = baseline.tail_start
    tail_n = int(baseline.exposures[tail_start:].sum())
    if tail_n > 0:
        tail_e = int(baseline.events[tail_start:].sum())
        tail_rate = (tail_e + 0.5) / (tail_n + 1.0)
    else:
        tail_rate = baseline.tail_rate
    return BaselineHazard(
        hazards=_hazards_from_counts(baseline.events, baseline.exposures,
                                     SMOOTHING_JEFFREYS),
        exposures=baseline.exposures,
        events=baseline.events,
        tail_start=tail_start,
        tail_rate=tail_rate,
        smoothing=SMOOTHING_JEFFREYS,
    )


def baseline_from_dict(doc: dict) -> LoadedBaseline:
    if not isinstance(doc, dict):
        raise ValueError("baseline document must be a JSON object")
    keys = set(doc)
    unknown = keys - _BASELINE_KEYS - _BASELINE_OPTIONAL_KEYS
    if unknown:
        raise ValueError(f"unknown baseline keys: {sorted(unknown)}")
    missing = _BASELINE_KEYS - keys
    if missing:
        raise ValueError(f"baseline document missing keys: {sorted(missing)}")
    if doc["version"] != BASELINE_SCHEMA_VERSION:
        raise ValueError(f"unsupported baseline version {doc['version']!r}")
    hazards = np.array([np.nan if h is None else float(h) for h in doc["hazards"]])
    baseline = BaselineHazard(
        hazards=hazards,
        exposures=np.asarray(doc["exposures"], dtype=np.int64),
        events=np.asarray(doc["events"], dtype=np.int64),
        tail_start=int(doc["tail_start"]),
        tail_rate=float(doc["tail_rate"]),
        smoothing=str(doc["smoothing"]),
    )
    min_events = doc.get("min_events")
    if min_events is not None:
        min_events = int(min_events)
        if min_events < 0:
            raise ValueError("min_events must be >= 0")
    return LoadedBaseline(baseline, min_events)


def save_baseline(path: str | Path, baseline: BaselineHazard,
                  min_events: int | None = None) -> None:
    doc = baseline.to_dict()
    if min_events is not None:
        doc["min_events"] = int(min_events)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_baseline(path: str | Path) -> LoadedBaseline:
    with open(path, encoding="utf-8") as fh:
        return baseline_from_dict(json.load(fh))
