from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from clvkit import dataio
from clvkit.cli import main
from clvkit.odds import load_model
from clvkit.survival import hazard_at, jeffreys_view, load_baseline, save_baseline

from conftest import baseline_from_rates


SIM_SPEC = {
    "baseline_shape": {"kind": "flat", "h": 0.1},
    "alpha_dist": {"kind": "fixed", "a": 1.0},
    "n_customers": 2_000,
    "max_tenure": 19,
    "seed": 7,
    "margin": 10.0,
}


def write_json(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def cohort_dir(tmp_path):
    spec = write_json(tmp_path / "spec.json", SIM_SPEC)
    out = tmp_path / "cohort"
    assert main(["simulate", "--spec", str(spec), "--out-dir", str(out)]) == 0
    return out


class TestSimulateCommand:
    def test_writes_three_files(self, cohort_dir):
        for name in ("calibration.csv", "scoring.csv", "truth.csv"):
            assert (cohort_dir / name).exists()

    def test_seed_override_changes_output(self, tmp_path):
        spec = write_json(tmp_path / "spec.json", SIM_SPEC)
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert main(["simulate", "--spec", str(spec), "--out-dir", str(a)]) == 0
        assert main(["simulate", "--spec", str(spec), "--out-dir", str(b),
                     "--seed", "8"]) == 0
        assert (a / "calibration.csv").read_bytes() != (b / "calibration.csv").read_bytes()

    def test_bad_spec_is_usage_error(self, tmp_path):
        spec = write_json(tmp_path / "spec.json", {"bogus": 1})
        assert main(["simulate", "--spec", str(spec), "--out-dir", str(tmp_path / "x")]) == 2


class TestBaselineCommand:
    def test_estimates_and_extrapolates(self, cohort_dir, tmp_path):
        out = tmp_path / "baseline.json"
        code = main(["baseline", "--calibration", str(cohort_dir / "calibration.csv"),
                     "--out", str(out), "--tail-start", "12"])
        assert code == 0
        loaded = load_baseline(out)
        assert loaded.baseline.tail_start == 12
        assert loaded.baseline.t_max == 19
        assert loaded.min_events is None

    def test_min_events_persisted(self, cohort_dir, tmp_path):
        out = tmp_path / "baseline.json"
        assert main(["baseline", "--calibration", str(cohort_dir / "calibration.csv"),
                     "--out", str(out), "--tail-start", "10", "--min-events", "8"]) == 0
        assert load_baseline(out).min_events == 8

    def test_tail_flags_mutually_exclusive(self, cohort_dir, tmp_path):
        code = main(["baseline", "--calibration", str(cohort_dir / "calibration.csv"),
                     "--out", str(tmp_path / "b.json"), "--tail-start", "5", "--auto-tail"])
        assert code == 2

    def test_missing_file_is_validation_error(self, tmp_path):
        code = main(["baseline", "--calibration", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path / "b.json")])
        assert code == 1

    def test_invalid_row_reports_and_fails(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("customer_id,tenure,churned\nc1,5,2\n", encoding="utf-8")
        assert main(["baseline", "--calibration", str(bad),
                     "--out", str(tmp_path / "b.json")]) == 1

    def test_competing_writes_two_files(self, tmp_path):
        spec = dict(SIM_SPEC)
        spec.update({"competing": 0.6, "n_customers": 3_000})
        path = write_json(tmp_path / "spec.json", spec)
        out = tmp_path / "cohort"
        assert main(["simulate", "--spec", str(path), "--out-dir", str(out)]) == 0
        code = main(["baseline", "--calibration", str(out / "calibration.csv"),
                     "--out", str(tmp_path / "base.json"), "--competing",
                     "--tail-start", "10"])
        assert code == 0
        assert (tmp_path / "base_v.json").exists()
        assert (tmp_path / "base_inv.json").exists()
        bv = load_baseline(tmp_path / "base_v.json").baseline
        bi = load_baseline(tmp_path / "base_inv.json").baseline
        assert np.array_equal(bv.exposures, bi.exposures)
        assert np.array_equal(bv.events + bi.events <= bv.exposures,
                              np.ones(len(bv.events), dtype=bool))


class TestScoreCommand:
    def test_end_to_end_and_clv_identity(self, cohort_dir, tmp_path):
        baseline = tmp_path / "baseline.json"
        out = tmp_path / "projections.csv"
        assert main(["baseline", "--calibration", str(cohort_dir / "calibration.csv"),
                     "--out", str(baseline), "--tail-start", "0"]) == 0
        assert main(["score", "--baseline", str(baseline),
                     "--scoring", str(cohort_dir / "scoring.csv"),
                     "--out", str(out), "--discount-monthly", "0"]) == 0
        rows = read_csv(out)
        assert len(rows) == SIM_SPEC["n_customers"]
        for row in rows:
            assert float(row["clv"]) == pytest.approx(10.0 * float(row["ert_months"]),
                                                      abs=1e-6 * 10)

    def test_output_order_matches_input(self, cohort_dir, tmp_path):
        baseline = tmp_path / "baseline.json"
        out = tmp_path / "projections.csv"
        main(["baseline", "--calibration", str(cohort_dir / "calibration.csv"),
              "--out", str(baseline), "--tail-start", "0"])
        main(["score", "--baseline", str(baseline),
              "--scoring", str(cohort_dir / "scoring.csv"), "--out", str(out)])
        scored_ids = [r["customer_id"] for r in read_csv(out)]
        input_ids = [r.customer_id for r in dataio.read_scoring(cohort_dir / "scoring.csv")]
        assert scored_ids == input_ids

    def test_both_discount_flags_usage_error(self, cohort_dir, tmp_path):
        baseline = tmp_path / "baseline.json"
        main(["baseline", "--calibration", str(cohort_dir / "calibration.csv"),
              "--out", str(baseline), "--tail-start", "0"])
        code = main(["score", "--baseline", str(baseline),
                     "--scoring", str(cohort_dir / "scoring.csv"),
                     "--out", str(tmp_path / "p.csv"),
                     "--discount-annual", "0.1", "--discount-monthly", "0.01"])
        assert code == 2

    def test_discount_lowers_clv(self, cohort_dir, tmp_path):
        baseline = tmp_path / "baseline.json"
        main(["baseline", "--calibration", str(cohort_dir / "calibration.csv"),
              "--out", str(baseline), "--tail-start", "0"])
        flat = tmp_path / "flat.csv"
        disc = tmp_path / "disc.csv"
        main(["score", "--baseline", str(baseline),
              "--scoring", str(cohort_dir / "scoring.csv"), "--out", str(flat)])
        main(["score", "--baseline", str(baseline),
              "--scoring", str(cohort_dir / "scoring.csv"), "--out", str(disc),
              "--discount-annual", "0.12"])
        for a, b in zip(read_csv(flat), read_csv(disc)):
            assert float(b["clv"]) < float(a["clv"])
            assert a["ert_months"] == b["ert_months"]

    def test_competing_requires_inv_baseline(self, cohort_dir, tmp_path):
        code = main(["score", "--baseline", str(tmp_path / "b.json"),
                     "--scoring", str(cohort_dir / "scoring.csv"),
                     "--out", str(tmp_path / "p.csv"), "--competing"])
        assert code == 2

    def test_competing_end_to_end(self, tmp_path):
        spec = dict(SIM_SPEC)
        spec.update({"competing": 0.6, "n_customers": 3_000,
                     "alpha_dist": {"kind": "fixed", "a": 1.2},
                     "alpha_dist_inv": {"kind": "fixed", "a": 0.8}})
        path = write_json(tmp_path / "spec.json", spec)
        out = tmp_path / "cohort"
        assert main(["simulate", "--spec", str(path), "--out-dir", str(out)]) == 0
        assert main(["baseline", "--calibration", str(out / "calibration.csv"),
                     "--out", str(tmp_path / "base.json"), "--competing",
                     "--tail-start", "0"]) == 0
        code = main(["score", "--baseline", str(tmp_path / "base_v.json"),
                     "--baseline-inv", str(tmp_path / "base_inv.json"),
                     "--scoring", str(out / "scoring.csv"),
                     "--out", str(tmp_path / "proj.csv"), "--competing"])
        assert code == 0
        rows = read_csv(tmp_path / "proj.csv")
        assert len(rows) == 3_000
        assert all(float(r["ert_months"]) > 0 for r in rows)


class TestCurveCommand:
    def test_unit_alpha_identity(self, tmp_path, fixture_baseline):
        path = tmp_path / "baseline.json"
        save_baseline(path, fixture_baseline)
        out = tmp_path / "curve.csv"
        assert main(["curve", "--baseline", str(path), "--alpha", "1.0",
                     "--t0", "0", "--horizon", "40", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert len(rows) == 40
        for row in rows:
            assert row["scaled_hazard"] == row["baseline_hazard"]

    def test_survival_column_is_running_product(self, tmp_path, fixture_baseline):
        path = tmp_path / "baseline.json"
        save_baseline(path, fixture_baseline)
        out = tmp_path / "curve.csv"
        main(["curve", "--baseline", str(path), "--alpha", "1.3",
              "--t0", "18", "--horizon", "12", "--out", str(out)])
        rows = read_csv(out)
        survival = 1.0
        for row in rows:
            survival *= 1.0 - float(row["scaled_hazard"])
            assert float(row["survival"]) == survival


class TestFitOddsCommand:
    def test_fit_writes_model_json(self, tmp_path):
        rng = np.random.default_rng(15)
        baseline = baseline_from_rates([0.1] * 8, exposure=1000, tail_start=0)
        bpath = tmp_path / "baseline.json"
        save_baseline(bpath, baseline)
        records = []
        for i in range(1_500):
            x = float(rng.normal())
            t = int(rng.integers(0, 8))
            p = 1 / (1 + np.exp(-(np.log(0.1 / 0.9) + 0.8 * x)))
            records.append(dataio.CalibrationRecord(
                f"c{i}", t, int(rng.random() < p), covariates=(x,)))
        cal = tmp_path / "cal.csv"
        dataio.write_calibration(cal, records)
        out = tmp_path / "model.json"
        assert main(["fit-odds", "--calibration", str(cal), "--baseline", str(bpath),
                     "--out", str(out)]) == 0
        model = load_model(out)
        assert model.converged
        assert model.baseline_sha == baseline.content_sha()
        assert model.beta[0] == pytest.approx(0.8, abs=0.25)

    def test_missing_covariates_fail(self, cohort_dir, tmp_path):
        baseline = tmp_path / "baseline.json"
        main(["baseline", "--calibration", str(cohort_dir / "calibration.csv"),
              "--out", str(baseline), "--tail-start", "0"])
        code = main(["fit-odds", "--calibration", str(cohort_dir / "calibration.csv"),
                     "--baseline", str(baseline), "--out", str(tmp_path / "m.json")])
        assert code == 1


class TestConfigFile:
    def test_config_equals_flags(self, cohort_dir, tmp_path):
        baseline = tmp_path / "baseline.json"
        main(["baseline", "--calibration", str(cohort_dir / "calibration.csv"),
              "--out", str(baseline), "--tail-start", "0"])
        by_flags = tmp_path / "flags.csv"
        by_config = tmp_path / "config.csv"
        assert main(["score", "--baseline", str(baseline),
                     "--scoring", str(cohort_dir / "scoring.csv"),
                     "--out", str(by_flags), "--eps", "1e-5",
                     "--discount-monthly", "0.01"]) == 0
        cfg = write_json(tmp_path / "score.json", {
            "baseline": str(baseline),
            "scoring": str(cohort_dir / "scoring.csv"),
            "out": str(by_config),
            "eps": 1e-5,
            "discount_monthly": 0.01,
        })
        assert main(["score", "--config", str(cfg)]) == 0
        assert by_flags.read_bytes() == by_config.read_bytes()

    def test_flags_override_config(self, cohort_dir, tmp_path):
        baseline = tmp_path / "baseline.json"
        main(["baseline", "--calibration", str(cohort_dir / "calibration.csv"),
              "--out", str(baseline), "--tail-start", "0"])
        cfg = write_json(tmp_path / "score.json", {
            "baseline": str(baseline),
            "scoring": str(cohort_dir / "scoring.csv"),
            "out": str(tmp_path / "from_config.csv"),
        })
        override = tmp_path / "override.csv"
        assert main(["score", "--config", str(cfg), "--out", str(override)]) == 0
        assert override.exists()
        assert not (tmp_path / "from_config.csv").exists()

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"calibrationn": "x"})
        assert main(["baseline", "--config", str(cfg)]) == 2

    def test_missing_required_after_merge(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {"out": "x.json"})
        assert main(["baseline", "--config", str(cfg)]) == 2


class TestUsage:
    def test_no_command(self):
        assert main([]) == 2

    def test_unknown_flag(self):
        assert main(["baseline", "--frobnicate"]) == 2

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_module_entry_point(self):
        result = subprocess.run([sys.executable, "-m", "clvkit.cli", "--help"],
                                capture_output=True, text=True)
        assert result.returncode == 0
        assert "baseline" in result.stdout

    def test_log_level_env(self, cohort_dir, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("LOG_LEVEL", "debug")
        baseline = tmp_path / "baseline.json"
        assert main(["baseline", "--calibration", str(cohort_dir / "calibration.csv"),
                     "--out", str(baseline), "--tail-start", "0"]) == 0
