import json

import numpy as np
import pytest

from rough_gauss.cli import ExperimentConfig, main
from rough_gauss.path_lift import PiecewisePath, write_path_csv


def _run(*argv):
    return main(list(argv))


def _read(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestConfig:
    def test_unknown_fields_rejected(self):
        with pytest.raises(ValueError, match="unknown config fields"):
            ExperimentConfig.from_dict({"experiment": "grr", "bogus": 1})

    def test_unknown_experiment_rejected(self):
        with pytest.raises(ValueError, match="unknown experiment"):
            ExperimentConfig.from_dict({"experiment": "nope"})

    def test_lists_frozen_to_tuples(self):
        cfg = ExperimentConfig.from_dict(
            {"experiment": "weak-limit", "h_ladder": [0.45, 0.5]})
        assert cfg.h_ladder == (0.45, 0.5)

    def test_missing_experiment(self):
        with pytest.raises(ValueError, match="experiment"):
            ExperimentConfig.from_dict({"kernel": "bm"})


class TestRun:
    def test_artifacts_and_echo(self, tmp_path, capsys):
        rc = _run("run", "variation", "--kernel", "fbm:H=0.4",
                  "--out-dir", str(tmp_path), "--set", "grid_intervals=6")
        assert rc == 0
        report = _read(tmp_path / "variation_report.json")
        assert report["config"]["kernel"] == "fbm:H=0.4"
        assert report["config"]["grid_intervals"] == 6
        assert report["tool"]["name"] == "rough-gauss"
        assert report["ok"] and all(c["ok"] for c in report["checks"])
        table = (tmp_path / "variation_table.csv").read_text()
        assert table.splitlines()[0] == "mode,value,exact"
        meta = _read(tmp_path / "variation_run_meta.json")
        assert meta["wall_clock_s"] > 0
        assert "wall_clock_s" not in json.dumps(report)

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "experiment": "coutin-qian", "kernel": "fbm:H=0.35", "seed": 1}))
        rc = _run("run", str(cfg), "--seed", "9", "--out-dir", str(tmp_path))
        assert rc == 0
        report = _read(tmp_path / "coutin-qian_report.json")
        assert report["seed"] == 9 and report["config"]["seed"] == 9

    def test_unknown_field_exit1_no_partial_outputs(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"experiment": "grr", "bogus": 1}))
        out = tmp_path / "out"
        rc = _run("run", str(cfg), "--out-dir", str(out))
        assert rc == 1
        assert not out.exists()
        assert "unknown config fields" in capsys.readouterr().err

    def test_malformed_json_exit1(self, tmp_path, capsys):
        cfg = tmp_path / "broken.json"
        cfg.write_text("{not json")
        assert _run("run", str(cfg), "--out-dir", str(tmp_path / "o")) == 1

    def test_runtime_error_exit1_no_partial_outputs(self, tmp_path, capsys):
        out = tmp_path / "out"
        rc = _run("run", "lift", "--path", str(tmp_path / "missing.csv"),
                  "--out-dir", str(out))
        assert rc == 1
        assert not out.exists()

    def test_check_failure_exit2_with_artifacts(self, tmp_path, capsys):
        # demanding an impossibly small constant fails the assertion but
        # still produces the full report
        rc = _run("run", "coutin-qian", "--kernel", "fbm:H=0.35",
                  "--set", "c_H=0.1", "--out-dir", str(tmp_path))
        assert rc == 2
        report = _read(tmp_path / "coutin-qian_report.json")
        assert not report["ok"]
        assert (tmp_path / "coutin-qian_table.csv").exists()

    def test_env_out_dir(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("ROUGH_GAUSS_OUT", str(tmp_path / "envout"))
        rc = _run("run", "variation", "--kernel", "bm",
                  "--set", "grid_intervals=4")
        assert rc == 0
        assert (tmp_path / "envout" / "variation_report.json").exists()

    def test_lift_from_csv(self, tmp_path, capsys):
        t = np.linspace(0, 1, 9)
        path = PiecewisePath(t, np.stack([t, np.sin(t)], axis=-1))
        csv_file = tmp_path / "path.csv"
        with open(csv_file, "w", newline="", encoding="utf-8") as fh:
            write_path_csv(path, fh)
        rc = _run("run", "lift", "--path", str(csv_file),
                  "--out-dir", str(tmp_path))
        assert rc == 0
        report = _read(tmp_path / "lift_report.json")
        hall = report["results"]["hall_log_signature"]
        assert hall["1"] == pytest.approx(1.0)
        assert hall["2"] == pytest.approx(np.sin(1.0))
        table = (tmp_path / "lift_table.csv").read_text().splitlines()
        assert table[0] == "coordinate,value"
        assert len(table) == 1 + 5  # d=2 step-3 hall basis


class TestDeterminism:
    def test_bytes_stable_across_reruns_and_workers(self, tmp_path, capsys):
        dirs = [tmp_path / n for n in ("a", "b", "c")]
        for d, workers in zip(dirs, ("1", "1", "3")):
            rc = _run("run", "level2-variance", "--kernel", "bm",
                      "--grid", "5", "--samples", "600", "--seed", "42",
                      "--workers", workers, "--out-dir", str(d))
            assert rc == 0
        blobs = [
            ((d / "level2-variance_report.json").read_bytes(),
             (d / "level2-variance_table.csv").read_bytes())
            for d in dirs
        ]
        assert blobs[0] == blobs[1] == blobs[2]


class TestTable:
    def _sweep(self, tmp_path, payload, name):
        cfg = tmp_path / f"{name}.json"
        cfg.write_text(json.dumps(payload))
        return cfg

    def test_dyadic_sweep_rows_plus_slope(self, tmp_path, capsys):
        cfg = self._sweep(tmp_path, {
            "experiment": "dyadic-convergence", "kernel": "bm",
            "samples": 20, "seed": 0,
            "sweep": {"param": "level", "values": [3, 4, 5]},
        }, "dy")
        rc = _run("table", str(cfg), "--out-dir", str(tmp_path))
        assert rc == 0
        lines = (tmp_path / "dyadic-convergence_sweep_table.csv").read_text().splitlines()
        assert lines[0] == "param,estimate,stderr,band,ok"
        assert len(lines) == 1 + 3 + 1
        assert lines[-1].startswith("slope,")

    def test_weak_limit_sweep_monotone_column(self, tmp_path, capsys):
        cfg = self._sweep(tmp_path, {
            "experiment": "weak-limit", "samples": 300, "seed": 3,
            "grid_level": 5,
            "sweep": {"param": "H", "values": [0.45, 0.48, 0.5]},
        }, "wl")
        rc = _run("table", str(cfg), "--out-dir", str(tmp_path))
        assert rc == 0
        lines = (tmp_path / "weak-limit_sweep_table.csv").read_text().splitlines()
        gaps = [float(line.split(",")[1]) for line in lines[1:]]
        assert gaps == sorted(gaps, reverse=True)

    def test_empty_sweep_header_only(self, tmp_path, capsys):
        cfg = self._sweep(tmp_path, {
            "experiment": "coutin-qian", "kernel": "fbm:H=0.35",
            "sweep": {"param": "H", "values": []},
        }, "empty")
        rc = _run("table", str(cfg), "--out-dir", str(tmp_path))
        assert rc == 0
        content = (tmp_path / "coutin-qian_sweep_table.csv").read_text()
        assert content == "param,estimate,stderr,band,ok\n"

    def test_generic_sweep(self, tmp_path, capsys):
        cfg = self._sweep(tmp_path, {
            "experiment": "coutin-qian",
            "sweep": {"param": "H", "values": [0.3, 0.4]},
        }, "cq")
        rc = _run("table", str(cfg), "--out-dir", str(tmp_path))
        assert rc == 0
        report = _read(tmp_path / "coutin-qian_sweep_report.json")
        assert [r["param"] for r in report["rows"]] == [0.3, 0.4]

    def test_unknown_sweep_param(self, tmp_path, capsys):
        cfg = self._sweep(tmp_path, {
            "experiment": "grr",
            "sweep": {"param": "nonsense", "values": [1]},
        }, "bad")
        assert _run("table", str(cfg), "--out-dir", str(tmp_path)) == 1

    def test_missing_sweep_block(self, tmp_path, capsys):
        cfg = self._sweep(tmp_path, {"experiment": "grr"}, "nosweep")
        assert _run("table", str(cfg), "--out-dir", str(tmp_path)) == 1
