from __future__ import annotations

import numpy as np
import pytest

from clvkit.survival import BaselineHazard, extrapolate_tail


def baseline_from_rates(rates, exposure=10_000, tail_start=None):
    """Build a baseline whose bin rates are exactly the given values.

    Events are rate * exposure per bin, which must come out integral so the
    unsmoothed ratio reproduces the rate bit-for-bit.
    """
    rates = np.asarray(rates, dtype=np.float64)
    exposures = np.full(rates.size, exposure, dtype=np.int64)
    events = np.rint(rates * exposure).astype(np.int64)
    assert np.all(np.abs(events - rates * exposure) < 1e-6), "rates must be exact at this exposure"
    baseline = BaselineHazard(
        hazards=events / exposures,
        exposures=exposures,
        events=events,
        tail_start=rates.size,
        tail_rate=float(events.sum() / exposures.sum()),
    )
    if tail_start is not None:
        baseline = extrapolate_tail(baseline, tail_start)
    return baseline


def fixture_curve_rates():
    """Declining hazard stabilizing at 0.03: the plot-data example curve."""
    return np.array([max(0.03, 0.08 - 0.002 * t) for t in range(36)])


@pytest.fixture
def fixture_baseline():
    """The example baseline used by the curve command tests: declining to a
    flat 0.03 region, tail extrapolated from tenure 25."""
    return baseline_from_rates(fixture_curve_rates(), exposure=10_000, tail_start=25)
