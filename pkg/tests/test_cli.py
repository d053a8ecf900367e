import json

import pytest

from poissonkf.cli import main


class TestTheorySubcommand:
    def test_benchmark_values_printed(self, capsys):
        rc = main(["theory", "--A", "-1", "--G", "1", "--C", "1", "--V", "0.5", "--lambda", "5", "--M", "10", "--P0", "1"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "feasible" in out and "yes" in out
        record = json.loads(out.strip().split("\n")[-1])
        assert record["feasible"] is True
        assert record["gamma_bar"] == pytest.approx(0.63275, abs=5e-6)
        assert record["ultimate_bound"] == pytest.approx(0.07003, abs=5e-6)
        assert record["lambda_min"] == 0.0

    def test_infeasible_regime_reported(self, capsys):
        rc = main(["theory", "--A", "3", "--G", "1", "--C", "1", "--V", "0.5", "--lambda", "5", "--M", "10"])
        out = capsys.readouterr().out
        assert rc == 0
        record = json.loads(out.strip().split("\n")[-1])
        assert record["feasible"] is False
        assert record["ultimate_bound"] == "infeasible"

    def test_missing_flags_is_usage_error(self, capsys):
        rc = main(["theory", "--A", "-1"])
        assert rc == 1

    def test_report_written_to_output(self, tmp_path, capsys):
        rc = main([
            "theory", "--A", "-1", "--G", "1", "--C", "1", "--V", "0.5",
            "--lambda", "5", "--M", "10", "--output", str(tmp_path),
        ])
        assert rc == 0
        record = json.loads((tmp_path / "theory_report.json").read_text())
        assert record["feasible"] is True


class TestCompareSubcommand:
    def test_preset_writes_csv_grid_and_manifest(self, tmp_path):
        rc = main([
            "compare", "--preset", "paper-3.4", "--realizations", "2",
            "--dt", "0.05", "--output", str(tmp_path), "--seed", "1",
        ])
        assert rc == 0
        for lam in (5, 10):
            for M in (10, 20):
                assert (tmp_path / f"compare_lam{lam}_M{M}.csv").exists()
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["seed"] == 1
        assert len(manifest["files"]) == 4

    def test_byte_identical_reruns(self, tmp_path):
        argv = ["compare", "--preset", "scalar-benchmark", "--realizations", "3",
                "--dt", "0.25", "--M", "4", "--seed", "42"]
        rc1 = main(argv + ["--output", str(tmp_path / "a")])
        rc2 = main(argv + ["--output", str(tmp_path / "b")])
        assert rc1 == rc2 == 0
        a = (tmp_path / "a" / "compare_lam5_M4.csv").read_bytes()
        b = (tmp_path / "b" / "compare_lam5_M4.csv").read_bytes()
        assert a == b

    def test_missing_output_dir_is_validation_error(self, capsys):
        rc = main(["compare", "--preset", "scalar-benchmark"])
        assert rc == 1
        assert "output" in capsys.readouterr().err


class TestSimulateSubcommand:
    def test_single_trajectory(self, tmp_path):
        rc = main([
            "simulate", "--preset", "scalar-benchmark", "--realizations", "1",
            "--output", str(tmp_path), "--seed", "5",
        ])
        assert rc == 0
        files = sorted(p.name for p in tmp_path.glob("trajectory_*.csv"))
        assert files == ["trajectory_lam5_r000.csv"]


class TestSweepSubcommand:
    def test_overlay_columns_present(self, tmp_path):
        rc = main([
            "sweep", "--preset", "scalar-benchmark", "--realizations", "2",
            "--dt", "0.25", "--horizon", "2", "--output", str(tmp_path),
        ])
        assert rc == 0
        header = (tmp_path / "sweep_lam5_M10.csv").read_text().split("\n")[0]
        assert header.endswith("theory_P,theory_QM,theory_gap,theory_bound")


class TestUsageErrors:
    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_unknown_flag(self, capsys):
        assert main(["compare", "--bogus", "1"]) == 1

    def test_config_file_missing(self, tmp_path, capsys):
        rc = main(["compare", "--config", str(tmp_path / "nope.cfg"), "--output", str(tmp_path)])
        assert rc == 1


class TestValidateGenerator:
    def test_smoke(self, capsys):
        rc = main(["validate-generator", "--paths", "1500", "--dt", "0.002", "--seed", "2"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "ou second moment" in out and "ok" in out
