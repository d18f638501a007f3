from __future__ import annotations

import hashlib

import numpy as np
import pytest

from clvkit import dataio
from clvkit.projection import expected_remaining_tenure
from clvkit.simulate import (
    DecayingShape,
    FixedAlpha,
    FlatShape,
    LognormalAlpha,
    SimSpec,
    StepShape,
    generate_cohort,
    simspec_from_dict,
    true_ert,
    write_truth,
)
from clvkit.survival import estimate_hazard_by_tenure, extrapolate_tail

from conftest import baseline_from_rates


def geometric_ert(h):
    return (1.0 - h) / h


class TestShapes:
    def test_flat(self):
        assert FlatShape(0.1).rate(0) == 0.1
        assert FlatShape(0.1).rate(500) == 0.1

    def test_step(self):
        shape = StepShape(0.2, 0.04, 12)
        assert shape.rate(11) == 0.2
        assert shape.rate(12) == 0.04

    def test_decaying(self):
        shape = DecayingShape(0.3, 0.9)
        assert shape.rate(0) == 0.3
        assert shape.rate(2) == 0.3 * 0.81
        assert all(shape.rate(t) > shape.rate(t + 1) for t in range(20))


class TestGenerateCohort:
    def test_one_month_churn_rate_matches_planted_hazard(self):
        # Binomial standard error at n=200k is about 0.00067; 0.003 is 4+ sigma.
        spec = SimSpec(baseline_shape=FlatShape(0.1), alpha_dist=FixedAlpha(1.0),
                       n_customers=200_000, max_tenure=9, seed=1)
        cohort = generate_cohort(spec)
        rate = sum(r.churned for r in cohort.calibration) / len(cohort.calibration)
        assert rate == pytest.approx(0.1, abs=0.003)

    def test_deterministic_in_seed(self):
        spec = SimSpec(baseline_shape=FlatShape(0.08), alpha_dist=LognormalAlpha(0.0, 0.4),
                       n_customers=500, max_tenure=5, seed=77, score_noise_sigma=0.1)
        a = generate_cohort(spec)
        b = generate_cohort(spec)
        assert a.calibration == b.calibration
        assert a.scoring == b.scoring
        assert a.truth == b.truth

    def test_zero_alpha_means_no_churners(self):
        spec = SimSpec(baseline_shape=FlatShape(0.2), alpha_dist=FixedAlpha(0.0),
                       n_customers=2_000, max_tenure=3, seed=5)
        cohort = generate_cohort(spec)
        assert sum(r.churned for r in cohort.calibration) == 0
        assert all(r.churn_score == 0.0 for r in cohort.scoring)

    def test_perfect_scores_carry_true_hazard(self):
        spec = SimSpec(baseline_shape=StepShape(0.2, 0.05, 3), alpha_dist=FixedAlpha(1.5),
                       n_customers=100, max_tenure=5, seed=9)
        cohort = generate_cohort(spec)
        for rec in cohort.scoring:
            expected = min(1.0, 1.5 * (0.2 if rec.tenure < 3 else 0.05))
            assert rec.churn_score == expected

    def test_round_robin_tenures_give_even_exposure(self):
        spec = SimSpec(baseline_shape=FlatShape(0.1), alpha_dist=FixedAlpha(1.0),
                       n_customers=1_000, max_tenure=9, seed=2)
        cohort = generate_cohort(spec)
        baseline = estimate_hazard_by_tenure(cohort.calibration)
        assert np.all(baseline.exposures == 100)

    def test_hazard_clipping_counted(self):
        spec = SimSpec(baseline_shape=FlatShape(0.4), alpha_dist=FixedAlpha(3.0),
                       n_customers=50, max_tenure=2, seed=3)
        cohort = generate_cohort(spec)
        assert cohort.clipped_hazards == 50
        assert all(r.churn_score == 1.0 for r in cohort.scoring)

    def test_competing_mode_produces_causes_and_subscores(self):
        spec = SimSpec(baseline_shape=FlatShape(0.1), alpha_dist=FixedAlpha(2.0),
                       alpha_dist_inv=FixedAlpha(0.5), competing=0.6,
                       n_customers=5_000, max_tenure=4, seed=12)
        cohort = generate_cohort(spec)
        churners = [r for r in cohort.calibration if r.churned]
        assert churners and all(r.cause in ("V", "I") for r in churners)
        assert all(r.cause is None for r in cohort.calibration if not r.churned)
        for rec in cohort.scoring:
            assert rec.score_v == 2.0 * 0.6 * 0.1
            assert rec.score_inv == 0.5 * 0.4 * 0.1
        # voluntary share of churn should track its share of the hazard
        share = sum(r.cause == "V" for r in churners) / len(churners)
        assert share == pytest.approx((2.0 * 0.6) / (2.0 * 0.6 + 0.5 * 0.4), abs=0.05)


class TestTrueErt:
    def test_flat_half(self):
        assert true_ert([0.5] * 80) == pytest.approx(1.0, abs=1e-4)

    def test_flat_tenth_alpha_two(self):
        assert true_ert([0.2] * 200) == pytest.approx(geometric_ert(0.2), abs=1e-3)

    def test_exhausted_sequence_raises(self):
        with pytest.raises(IndexError):
            true_ert([0.001] * 10)

    def test_truth_matches_estimator_fed_true_inputs(self):
        spec = SimSpec(baseline_shape=FlatShape(0.1), alpha_dist=FixedAlpha(1.3),
                       n_customers=40, max_tenure=3, seed=21)
        cohort = generate_cohort(spec)
        baseline = baseline_from_rates([0.1] * 4, exposure=1000, tail_start=0)
        for rec, truth in zip(cohort.scoring, cohort.truth):
            est, _, _ = expected_remaining_tenure(1.3, baseline, rec.tenure)
            assert est == pytest.approx(truth.true_ert, abs=1e-9)

    def test_truth_clv_is_margin_times_ert_when_undiscounted(self):
        spec = SimSpec(baseline_shape=FlatShape(0.1), alpha_dist=FixedAlpha(1.0),
                       n_customers=20, max_tenure=3, seed=4, margin=12.5)
        cohort = generate_cohort(spec)
        for t in cohort.truth:
            assert t.true_clv == pytest.approx(12.5 * t.true_ert, rel=1e-9)


class TestSpecParsing:
    def test_full_document(self):
        doc = {
            "baseline_shape": {"kind": "step", "h1": 0.2, "h2": 0.05, "change_t": 6},
            "alpha_dist": {"kind": "lognormal", "mu": 0.0, "sigma": 0.3},
            "n_customers": 100, "max_tenure": 12, "seed": 5,
            "competing": 0.7, "alpha_dist_inv": {"kind": "fixed", "a": 0.5},
            "score_noise_sigma": 0.05, "margin": 20.0, "discount_monthly": 0.004,
            "eps": 1e-5, "max_horizon": 600,
        }
        spec = simspec_from_dict(doc)
        assert spec.baseline_shape == StepShape(0.2, 0.05, 6)
        assert spec.alpha_dist == LognormalAlpha(0.0, 0.3)
        assert spec.alpha_dist_inv == FixedAlpha(0.5)
        assert spec.projection.max_horizon == 600

    def test_unknown_keys_rejected(self):
        doc = {"baseline_shape": {"kind": "flat", "h": 0.1},
               "alpha_dist": {"kind": "fixed", "a": 1.0},
               "n_customers": 10, "max_tenure": 2, "seed": 1, "bogus": True}
        with pytest.raises(ValueError):
            simspec_from_dict(doc)

    def test_missing_required_key_rejected(self):
        with pytest.raises(ValueError):
            simspec_from_dict({"alpha_dist": {"kind": "fixed", "a": 1.0},
                               "n_customers": 10, "max_tenure": 2, "seed": 1})


class TestGoldenFiles:
    """Pin the seed-to-output mapping; a change here breaks replayability of
    archived cohorts and must be deliberate."""

    SPEC = SimSpec(baseline_shape=FlatShape(0.12), alpha_dist=LognormalAlpha(0.0, 0.5),
                   n_customers=50, max_tenure=9, seed=20240601, score_noise_sigma=0.2,
                   margin=15.0, discount_monthly=0.005)

    # sha256 digests of the three generated files (from the reference run)
    GOLDEN = {
        "calibration.csv": "7e170fb83a510fa5ffc46a04cb580e69511d4d2fa1f333234aa6a7a2bdbf9c50",
        "scoring.csv": "0851cc7d20419fa16c38937e06260c9277385083c546dec84ba6f9d10baafbd3",
        "truth.csv": "a2ce79c681c0966242abcb20161bec9febd4ab5e425b5d492558d33496d364d7",
    }

    def test_byte_stable_outputs(self, tmp_path):
        cohort = generate_cohort(self.SPEC)
        dataio.write_calibration(tmp_path / "calibration.csv", cohort.calibration)
        dataio.write_scoring(tmp_path / "scoring.csv", cohort.scoring)
        write_truth(tmp_path / "truth.csv", cohort.truth)
        for name, expected in self.GOLDEN.items():
            digest = hashlib.sha256((tmp_path / name).read_bytes()).hexdigest()
            assert digest == expected, f"{name} digest changed: {digest}"
