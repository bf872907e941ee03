import json

import pytest

from policyregret.cli import main
from policyregret.synthetic import healthcare_schema_dataset


def _read(path):
    return path.read_bytes()


class TestAnalyze:
    def test_end_to_end_and_determinism(self, tmp_path):
        data = healthcare_schema_dataset(1500, seed=1)
        csv_path = tmp_path / "data.csv"
        data.to_csv(str(csv_path))
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        args = [
            "analyze", "--input", str(csv_path), "--assumption", "msm",
            "--lambda", "1.2", "--bootstrap", "0", "--seed", "3",
            "--measures", "npv,accuracy",
        ]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert _read(out1 / "report.json") == _read(out2 / "report.json")
        assert _read(out1 / "report.csv") == _read(out2 / "report.csv")
        report = json.loads((out1 / "report.json").read_text())
        npv = report["report"]["intervals"]["npv"]
        d_w = npv["delta"]["upper"] - npv["delta"]["lower"]
        b_w = npv["baseline"]["upper"] - npv["baseline"]["lower"]
        assert d_w < b_w
        assert "groups" in report["report"]

    def test_missing_input_is_config_error(self, tmp_path):
        assert main(["analyze", "--out", str(tmp_path)]) == 1

    def test_nonexistent_file_is_data_error(self, tmp_path):
        assert main([
            "analyze", "--input", str(tmp_path / "no.csv"), "--out", str(tmp_path),
        ]) == 2

    def test_empty_measures_is_config_error(self, tmp_path):
        data = healthcare_schema_dataset(600, seed=2)
        csv_path = tmp_path / "d.csv"
        data.to_csv(str(csv_path))
        assert main([
            "analyze", "--input", str(csv_path), "--measures", ",",
            "--out", str(tmp_path),
        ]) == 1

    def test_config_file_with_flag_override(self, tmp_path):
        data = healthcare_schema_dataset(800, seed=3)
        csv_path = tmp_path / "d.csv"
        data.to_csv(str(csv_path))
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "input": str(csv_path), "lam": 2.0, "bootstrap": 0, "seed": 1,
        }))
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["analyze", "--config", str(cfg), "--out", str(out_a)]) == 0
        # flag overrides the config file's lambda
        assert main([
            "analyze", "--config", str(cfg), "--lambda", "1.05",
            "--out", str(out_b),
        ]) == 0
        rep_a = json.loads((out_a / "report.json").read_text())
        rep_b = json.loads((out_b / "report.json").read_text())
        assert rep_a["assumption"]["lambda"] == 2.0
        assert rep_b["assumption"]["lambda"] == 1.05
        w = lambda rep: (
            rep["report"]["intervals"]["accuracy"]["delta"]["upper"]
            - rep["report"]["intervals"]["accuracy"]["delta"]["lower"]
        )
        assert w(rep_b) < w(rep_a)

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"inputs": "typo.csv"}))
        assert main(["analyze", "--config", str(cfg), "--out", str(tmp_path)]) == 1


class TestSimulate:
    def test_simulate_then_analyze(self, tmp_path):
        sim = tmp_path / "sim"
        assert main([
            "simulate", "--n", "1200", "--lambda", "1.4", "--seed", "5",
            "--out", str(sim),
        ]) == 0
        oracle = json.loads((sim / "oracle.json").read_text())
        assert -1.0 <= oracle["oracle_regret"]["accuracy"] <= 1.0
        out = tmp_path / "an"
        assert main([
            "analyze", "--input", str(sim / "data.csv"), "--lambda", "1.4",
            "--bootstrap", "0", "--out", str(out),
        ]) == 0

    def test_byte_identical_rerun(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["simulate", "--n", "500", "--seed", "9"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert _read(a / "data.csv") == _read(b / "data.csv")
        assert _read(a / "oracle.json") == _read(b / "oracle.json")


class TestExperimentCommands:
    def test_coverage_command(self, tmp_path):
        out = tmp_path / "cov"
        assert main([
            "coverage", "--n-grid", "400", "--trials", "4", "--lambda", "1.4",
            "--seed", "2", "--out", str(out),
        ]) == 0
        rows = json.loads((out / "coverage.json").read_text())["rows"]
        assert {r["method"] for r in rows} == {"delta", "baseline"}

    def test_coverage_zero_trials(self, tmp_path):
        assert main([
            "coverage", "--trials", "0", "--out", str(tmp_path / "x"),
        ]) == 1

    def test_separation_command(self, tmp_path):
        out = tmp_path / "sep"
        assert main([
            "separation", "--n-fixtures", "40", "--seed", "3", "--out", str(out),
        ]) == 0
        summary = json.loads((out / "separation.json").read_text())
        assert summary["min_slack"] >= -1e-9

    def test_sensitivity_command_nesting(self, tmp_path):
        out = tmp_path / "sens"
        assert main([
            "sensitivity", "--grid", "1.0,1.3,1.6,2.0", "--n", "2000",
            "--seed", "4", "--out", str(out),
        ]) == 0
        rows = json.loads((out / "sensitivity.json").read_text())["rows"]
        by_measure = {}
        for r in rows:
            by_measure.setdefault(r["measure"], {})[r["method"]] = r["lambda_zero"]
        for vals in by_measure.values():
            to_num = lambda v: float("inf") if v == "beyond_grid" else float(v)
            assert to_num(vals["baseline"]) <= to_num(vals["delta"])

    def test_sweep_command_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = [
            "sweep", "--knob", "lambda_star", "--grid", "1.0,1.4",
            "--trials", "3", "--n", "500", "--lambda", "1.4", "--seed", "6",
        ]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert _read(a / "sweep.csv") == _read(b / "sweep.csv")
