import csv
import json

import pytest

from mrac.cli import CSV_COLUMNS, main
from mrac.config import build_config, parse_override
from mrac.errors import ConfigError


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text(
        "scenario: {width: 5, height: 5, horizon: 12}\n"
        "algorithm: {name: REnforceAC, epsilon: 0.3}\n"
        "execution: {seeds: [0, 1]}\n"
    )
    return p


def run(cfg_file, out, *extra):
    return main(["run", "--config", str(cfg_file), "--out", str(out), *extra])


class TestRun:
    def test_outputs(self, cfg_file, tmp_path):
        out = tmp_path / "r"
        assert run(cfg_file, out) == 0
        with (out / "metrics.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 1 + 2 * 12
        for name in ("summary.csv", "timing.csv", "trace.jsonl", "resolved_config.json"):
            assert (out / name).is_file()

    def test_override_reflected(self, cfg_file, tmp_path):
        out = tmp_path / "r"
        assert run(cfg_file, out, "--set", "algorithm.epsilon=0.7", "--seeds", "3") == 0
        resolved = json.loads((out / "resolved_config.json").read_text())
        assert resolved["algorithm"]["epsilon"] == 0.7 and resolved["execution"]["seeds"] == [3]

    def test_byte_identical_rerun(self, cfg_file, tmp_path):
        assert run(cfg_file, tmp_path / "a") == 0 and run(cfg_file, tmp_path / "b") == 0
        for name in ("metrics.csv", "summary.csv", "trace.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_missing_config(self, tmp_path, capsys):
        missing = tmp_path / "nope.yaml"
        assert main(["run", "--config", str(missing)]) == 2
        assert str(missing) in capsys.readouterr().err

    @pytest.mark.parametrize("override", ["algorithm.epsilon=1.5", "scenario.colour=3", "nonsense"])
    def test_bad_override(self, cfg_file, tmp_path, override):
        assert run(cfg_file, tmp_path / "r", "--set", override) == 2

    def test_env_output_root(self, cfg_file, tmp_path, monkeypatch):
        monkeypatch.setenv("MRAC_OUT", str(tmp_path / "root"))
        assert main(["run", "--config", str(cfg_file)]) == 0
        cfg = build_config({"scenario": {"width": 5, "height": 5, "horizon": 12},
                            "algorithm": {"name": "REnforceAC", "epsilon": 0.3},
                            "execution": {"seeds": [0, 1]}})
        assert (tmp_path / "root" / cfg.run_id() / "metrics.csv").is_file()

    def test_invalid_schema_is_config_error(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("scenario: {width: 3, height: 3, horizon: 5, comm_restr: 9}\n")
        assert main(["run", "--config", str(p), "--out", str(tmp_path / "x")]) == 2

    def test_runtime_failure(self, cfg_file, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise RuntimeError("worker died")

        monkeypatch.setattr("mrac.cli.run_batch", boom)
        assert run(cfg_file, tmp_path / "x") == 3
        assert not (tmp_path / "x" / "metrics.csv").exists()

    def test_usage_error(self):
        assert main(["bogus"]) == 2


class TestCompareTrace:
    def test_compare(self, cfg_file, tmp_path, capsys):
        run(cfg_file, tmp_path / "a", "--set", "algorithm.name=BaselineI")
        run(cfg_file, tmp_path / "b", "--set", "algorithm.name=BaselineII")
        capsys.readouterr()
        assert main(["compare", str(tmp_path / "b"), str(tmp_path / "a"), "--format", "csv",
                     "--csv", str(tmp_path / "cmp.csv")]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[1].split(",")[1] == "BaselineI" and lines[2].split(",")[1] == "BaselineII"
        assert "100.0" in lines[1].split(",")[8]
        assert (tmp_path / "cmp.csv").read_text().splitlines() == lines

    def test_compare_mismatched_horizon(self, cfg_file, tmp_path):
        run(cfg_file, tmp_path / "a")
        run(cfg_file, tmp_path / "b", "--set", "scenario.horizon=13")
        assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b")]) == 2

    def test_compare_needs_two(self, cfg_file, tmp_path):
        run(cfg_file, tmp_path / "a")
        assert main(["compare", str(tmp_path / "a")]) == 2

    def test_trace(self, cfg_file, tmp_path, capsys):
        run(cfg_file, tmp_path / "a")
        capsys.readouterr()
        assert main(["trace", str(tmp_path / "a"), "--seed", "1"]) == 0
        recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
        assert len(recs) == 12 and all(r["seed"] == 1 for r in recs)
        assert {"p_ac", "p_not_ac", "p_comm", "not_ac", "comms", "p"} <= set(recs[0])
        assert main(["trace", str(tmp_path / "a"), "--seed", "9"]) == 2


class TestConfig:
    def test_override_parsing(self):
        assert parse_override("algorithm.epsilon=0.7") == ("algorithm.epsilon", 0.7)
        with pytest.raises(ConfigError):
            parse_override("no-equals")

    def test_run_id_ignores_output(self):
        a = build_config({"execution": {"out": "x"}})
        b = build_config({"execution": {"out": "y"}})
        assert a.run_id() == b.run_id()
        assert a.run_id() != build_config(overrides=["algorithm.epsilon=0.5"]).run_id()
