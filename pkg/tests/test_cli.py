import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from conftest import separable_corpus
from evd.cli import main
from evd.corpus import read_triplets, write_triplets

JS_FILE = """\
function handler(req, res) {
  if (req.query.id) {
    db.query("SELECT * FROM t WHERE id = " + req.query.id);
  }
}
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def demo_sources(tmp_path):
    """Findings file plus a matching source tree."""
    root = tmp_path / "sources"
    findings = []
    for i in range(4):
        rel = f"app/handler{i}.js"
        f = root / rel
        f.parent.mkdir(parents=True, exist_ok=True)
        f.write_text(JS_FILE)
        findings.append(
            {
                "repo": f"org/app{i}",
                "path": rel,
                "rule_id": "js/sql-injection",
                "cwe": "CWE-89",
                "title": "SQL injection",
                "message": "m",
                "start_line": 3,
                "start_col": 5,
                "end_line": 3,
                "end_col": 57,
            }
        )
    findings_path = tmp_path / "findings.jsonl"
    findings_path.write_text("".join(json.dumps(f) + "\n" for f in findings))
    return findings_path, root


def manifest_for(out_path) -> dict:
    return json.loads(Path(str(out_path) + ".manifest.json").read_text())


class TestIngest:
    def test_writes_units_and_manifest(self, runner, demo_sources, tmp_path):
        findings_path, root = demo_sources
        out = tmp_path / "units.jsonl"
        result = runner.invoke(main, ["ingest", str(findings_path), str(root), "--out", str(out)])
        assert result.exit_code == 0, result.output
        units = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(units) == 4
        assert all(u["language"] == "javascript" for u in units)
        manifest = manifest_for(out)
        assert manifest["command"] == "ingest"
        assert manifest["config"]["errors"] == 0

    def test_missing_source_reported(self, runner, demo_sources, tmp_path):
        findings_path, root = demo_sources
        (root / "app" / "handler0.js").unlink()
        out = tmp_path / "units.jsonl"
        result = runner.invoke(main, ["ingest", str(findings_path), str(root), "--out", str(out)])
        assert result.exit_code == 0
        assert "source file missing" in result.output
        assert manifest_for(out)["config"]["missing_sources"] == 1


class TestSynthesize:
    def _units(self, runner, demo_sources, tmp_path):
        findings_path, root = demo_sources
        out = tmp_path / "units.jsonl"
        runner.invoke(main, ["ingest", str(findings_path), str(root), "--out", str(out)])
        return out

    def test_pipeline_and_determinism(self, runner, demo_sources, tmp_path):
        units = self._units(runner, demo_sources, tmp_path)
        out_a = tmp_path / "a.jsonl"
        out_b = tmp_path / "b.jsonl"
        for out in (out_a, out_b):
            result = runner.invoke(main, ["synthesize", str(units), "--out", str(out), "--seed", "3"])
            assert result.exit_code == 0, result.output
        assert out_a.read_bytes() == out_b.read_bytes()
        triplets = read_triplets(out_a)
        assert triplets and any(t.label.is_vulnerable for t in triplets)
        assert manifest_for(out_a)["seed"] == 3

    def test_seed_changes_dataset(self, runner, demo_sources, tmp_path):
        units = self._units(runner, demo_sources, tmp_path)
        out_a = tmp_path / "a.jsonl"
        out_b = tmp_path / "b.jsonl"
        runner.invoke(main, ["synthesize", str(units), "--out", str(out_a), "--seed", "1"])
        runner.invoke(main, ["synthesize", str(units), "--out", str(out_b), "--seed", "2"])
        assert out_a.read_bytes() != out_b.read_bytes()


class TestTrainEvalSweep:
    @pytest.fixture
    def dataset(self, tmp_path):
        path = tmp_path / "train.jsonl"
        write_triplets(path, separable_corpus(1500, seed=4))
        return path

    @pytest.fixture
    def model(self, runner, dataset, tmp_path):
        path = tmp_path / "model.npz"
        result = runner.invoke(
            main,
            ["train", str(dataset), "--model-out", str(path), "--epochs", "20", "--seed", "0"],
        )
        assert result.exit_code == 0, result.output
        return path

    def test_train_writes_manifest(self, model):
        manifest = manifest_for(model)
        assert manifest["command"] == "train"
        assert manifest["config"]["epochs"] == 20

    def test_eval_perfect_on_separable_train_set(self, runner, dataset, model, tmp_path):
        report_out = tmp_path / "eval.json"
        result = runner.invoke(
            main, ["eval", str(model), str(dataset), "--report-out", str(report_out)]
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_out.read_text())
        assert report["f1"] == pytest.approx(1.0)
        assert "f1=1.0000" in result.output
        assert manifest_for(report_out)["command"] == "eval"

    def test_sweep_with_calibration(self, runner, dataset, model, tmp_path):
        report_out = tmp_path / "sweep.json"
        result = runner.invoke(
            main,
            [
                "sweep", str(model), str(dataset),
                "--report-out", str(report_out),
                "--steps", "11",
                "--target-positive-rate", "0.10",
            ],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_out.read_text())
        assert len(report["sweep_points"]) == 11
        assert 0.0 <= report["config"]["calibrated_threshold"] <= 1.0

    def test_train_rejects_bad_config(self, runner, dataset, tmp_path):
        result = runner.invoke(
            main,
            ["train", str(dataset), "--model-out", str(tmp_path / "m.npz"), "--epochs", "-1"],
        )
        assert result.exit_code == 2


class TestBench:
    def test_replay_run_matches_golden(self, runner, data_dir, tmp_path):
        report_out = tmp_path / "bench.json"
        result = runner.invoke(
            main,
            [
                "bench",
                "--replay-log", str(data_dir / "bench_replay.jsonl"),
                "--n-completions", "3",
                "--report-out", str(report_out),
            ],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_out.read_text())
        golden = json.loads((data_dir / "bench_golden.json").read_text())
        assert report["counts"]["before"] == golden["before"]
        assert manifest_for(report_out)["command"] == "bench"

    def test_with_detector_model(self, runner, data_dir, tmp_path):
        model_path = tmp_path / "model.npz"
        train_set = tmp_path / "train.jsonl"
        write_triplets(train_set, separable_corpus(500, seed=4))
        runner.invoke(main, ["train", str(train_set), "--model-out", str(model_path), "--epochs", "5"])
        report_out = tmp_path / "bench.json"
        result = runner.invoke(
            main,
            [
                "bench",
                "--replay-log", str(data_dir / "bench_replay.jsonl"),
                "--model", str(model_path),
                "--n-completions", "3",
                "--report-out", str(report_out),
            ],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_out.read_text())
        assert "after" in report["counts"]
        assert report["counts"]["after"]["valid"] <= report["counts"]["before"]["valid"]

    def test_requires_exactly_one_source(self, runner, data_dir, tmp_path):
        base = ["bench", "--report-out", str(tmp_path / "r.json")]
        neither = runner.invoke(main, base)
        both = runner.invoke(
            main,
            base + ["--replay-log", str(data_dir / "bench_replay.jsonl"), "--endpoint", "http://x"],
        )
        assert neither.exit_code == 2
        assert both.exit_code == 2

    def test_endpoint_requires_credential(self, runner, tmp_path, monkeypatch):
        monkeypatch.delenv("EVD_COMPLETION_API_KEY", raising=False)
        result = runner.invoke(
            main,
            ["bench", "--endpoint", "http://localhost:9/v1", "--report-out", str(tmp_path / "r.json")],
        )
        assert result.exit_code == 2
        assert "EVD_COMPLETION_API_KEY" in result.output


class TestServe:
    def test_requires_model(self, runner, monkeypatch):
        monkeypatch.delenv("EVD_MODEL_PATH", raising=False)
        result = runner.invoke(main, ["serve"])
        assert result.exit_code == 2
        assert "no model configured" in result.output


def test_version_flag(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
