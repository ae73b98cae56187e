import json
from pathlib import Path

from click.testing import CliRunner

from noisesearch.cli import main

runner = CliRunner()

SMALL = {"dims": [1, 4, 4], "steps": 5, "algorithm": "random",
         "candidates": 4, "iterations": 1, "seed": 0}


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


class TestRunCommand:
    def test_config_file(self, tmp_path):
        cfg = write_json(tmp_path / "cfg.json", SMALL)
        out = tmp_path / "trace.jsonl"
        result = runner.invoke(main, ["run", "--config", cfg, "--out", str(out)])
        assert result.exit_code == 0, result.output
        body = json.loads(result.output)
        assert body["nfe"] == 20
        assert out.exists()

    def test_flags_override_file(self, tmp_path):
        cfg = write_json(tmp_path / "cfg.json", SMALL)
        r1 = runner.invoke(main, ["run", "--config", cfg])
        r2 = runner.invoke(main, ["run", "--config", cfg, "--candidates", "8"])
        assert r1.exit_code == 0 and r2.exit_code == 0
        assert json.loads(r2.output)["nfe"] == 40
        assert json.loads(r1.output)["nfe"] == 20

    def test_ablation_flags(self, tmp_path):
        cfg = write_json(tmp_path / "cfg.json", SMALL)
        result = runner.invoke(main, ["run", "--config", cfg, "--no-gn",
                                      "--no-css", "--no-ssr"])
        assert result.exit_code == 0, result.output

    def test_bad_algorithm_exits_2(self):
        result = runner.invoke(main, ["run", "--algorithm", "bogus"])
        assert result.exit_code == 2

    def test_malformed_config_exits_2(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        result = runner.invoke(main, ["run", "--config", str(path)])
        assert result.exit_code == 2
        assert "config error" in result.output

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = write_json(tmp_path / "cfg.json", {**SMALL, "algorithm": "bogus"})
        result = runner.invoke(main, ["run", "--config", cfg])
        assert result.exit_code == 2

    def test_determinism(self, tmp_path):
        cfg = write_json(tmp_path / "cfg.json", SMALL)
        r1 = runner.invoke(main, ["run", "--config", cfg])
        r2 = runner.invoke(main, ["run", "--config", cfg])
        assert r1.output == r2.output


class TestExperimentCommand:
    def test_grid(self, tmp_path):
        spec = write_json(tmp_path / "spec.json", {
            "name": "cli",
            "configs": [{"algorithm": "random", "candidates": 3,
                         "iterations": 1}],
            "seeds": [0, 1],
            "out_dir": str(tmp_path / "out"),
            "pipeline": {"dims": [1, 4, 4], "steps": 5},
        })
        result = runner.invoke(main, ["experiment", "--spec", spec])
        assert result.exit_code == 0, result.output
        body = json.loads(result.output)
        assert len(body["trace_files"]) == 2
        assert all(Path(p).exists() for p in body["trace_files"])

    def test_cell_failure_exits_3(self, tmp_path):
        spec = write_json(tmp_path / "spec.json", {
            "name": "cli",
            "configs": [{"algorithm": "random", "candidates": 2,
                         "iterations": 1}],
            "seeds": [0],
            "out_dir": str(tmp_path / "out"),
            "pipeline": {"dims": [1, 4, 4], "steps": 5,
                         "verifier": "external:nonexistent-scorer-binary"},
        })
        result = runner.invoke(main, ["experiment", "--spec", spec])
        assert result.exit_code == 3

    def test_invalid_spec_exits_2(self, tmp_path):
        spec = write_json(tmp_path / "spec.json", {"name": "x"})
        result = runner.invoke(main, ["experiment", "--spec", spec])
        assert result.exit_code == 2


def test_similarity_command(tmp_path):
    out = tmp_path / "sim.csv"
    result = runner.invoke(main, ["similarity", "--cs", "1", "--ns", "4",
                                  "--lambdas", "0.1,1.0", "--pairs", "3",
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    rows = json.loads(result.output)["rows"]
    assert len(rows) == 2
    assert out.exists()


def test_space_compare_command(tmp_path):
    result = runner.invoke(main, ["space-compare", "--radii", "1.0",
                                  "--pivots", "2", "--candidates", "2"])
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert len(body["per_radius"]) == 1
