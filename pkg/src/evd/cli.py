"""Operator command line: ingest, synthesize, train, eval, sweep, bench, serve.

Every command writes its outputs plus a run manifest (``<out>.manifest.json``)
recording the command, config snapshot, seed, paths and timestamps.
Exit codes: 0 success, 1 operational error, 2 usage error.
"""

from __future__ import annotations

import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click

from evd import __version__
from evd import corpus as corpus_mod
from evd import metrics as metrics_mod
from evd import scenarios as scenarios_mod
from evd import splitter as splitter_mod
from evd.classifier import TrainConfig, load_model, save_model, score, train
from evd.completion import ConfigurationError, HttpBackend, RecordingLog, ReplayBackend

EXTENSION_LANGUAGES = {
    ".js": "javascript",
    ".jsx": "javascript",
    ".ts": "javascript",
    ".py": "python",
    ".go": "go",
    ".java": "java",
    ".cc": "cpp",
    ".cpp": "cpp",
    ".cs": "csharp",
    ".rb": "ruby",
}


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    inputs: list[str]
    outputs: list[str]
    started: float
    finished: float = 0.0
    tool_version: str = __version__
    notes: list[str] = field(default_factory=list)

    def write(self, out_path: Path):
        self.finished = time.time()
        manifest_path = Path(str(out_path) + ".manifest.json")
        manifest_path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")


def _fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.version_option(version=__version__)
def main():
    """Edit-time vulnerability detection pipeline."""


@main.command()
@click.argument("findings", type=click.Path(exists=True, dir_okay=False))
@click.argument("sources_root", type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def ingest(findings, sources_root, out):
    """Validate findings and join them with source files into a unit file."""
    started = time.time()
    report = corpus_mod.IngestReport()
    records = corpus_mod.ingest_findings(findings, report)
    for lineno, reason in report.errors:
        click.echo(f"findings line {lineno}: {reason}", err=True)

    root = Path(sources_root)
    by_path: dict[str, list] = {}
    for rec in records:
        by_path.setdefault(rec.path, []).append(rec)

    units = []
    missing = 0
    for rel_path, recs in sorted(by_path.items()):
        source_file = root / rel_path
        if not source_file.is_file():
            click.echo(f"source file missing: {rel_path}", err=True)
            missing += 1
            continue
        language = EXTENSION_LANGUAGES.get(source_file.suffix)
        if language is None:
            click.echo(f"unknown language for {rel_path}, skipped", err=True)
            continue
        units.append(
            {
                "repo": recs[0].repo,
                "path": rel_path,
                "language": language,
                "text": source_file.read_text(encoding="utf-8"),
                "findings": [r.to_dict() for r in recs],
            }
        )
    out_path = Path(out)
    with out_path.open("w", encoding="utf-8") as fh:
        for unit in units:
            fh.write(json.dumps(unit, ensure_ascii=False) + "\n")
    RunManifest(
        command="ingest",
        config={"errors": len(report.errors), "missing_sources": missing},
        seed=None,
        inputs=[findings, sources_root],
        outputs=[out],
        started=started,
    ).write(out_path)
    click.echo(f"wrote {len(units)} units ({len(records)} findings, {len(report.errors)} errors)")


def read_units(path: str | Path) -> list[splitter_mod.SourceUnit]:
    units = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            findings = tuple(
                corpus_mod.FindingRecord(**{k: f[k] for k in corpus_mod.FINDING_FIELDS})
                for f in obj.get("findings", [])
            )
            units.append(
                splitter_mod.SourceUnit(
                    repo=obj["repo"],
                    path=obj["path"],
                    language=obj["language"],
                    text=obj["text"],
                    findings=findings,
                )
            )
    return units


@main.command()
@click.argument("units_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
def synthesize(units_file, out, seed):
    """Extract scopes, split them, and write the triplet dataset."""
    started = time.time()
    units = read_units(units_file)
    triplets, report = splitter_mod.synthesize(units, seed)
    out_path = Path(out)
    corpus_mod.write_triplets(out_path, triplets)
    RunManifest(
        command="synthesize",
        config=asdict(report),
        seed=seed,
        inputs=[units_file],
        outputs=[out],
        started=started,
    ).write(out_path)
    click.echo(
        f"wrote {report.triplets} triplets from {report.scopes} scopes "
        f"({report.orphan_findings} orphan findings)"
    )


@main.command("train")
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--model-out", required=True, type=click.Path(dir_okay=False))
@click.option("--epochs", default=10, show_default=True, type=int)
@click.option("--learning-rate", default=0.5, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--threshold", default=0.5, show_default=True, type=float)
@click.option("--per-cwe", is_flag=True, help="Also train per-CWE heads.")
def train_cmd(dataset, model_out, epochs, learning_rate, seed, threshold, per_cwe):
    """Train the detector on a triplet dataset."""
    started = time.time()
    try:
        config = TrainConfig(
            epochs=epochs,
            learning_rate=learning_rate,
            seed=seed,
            threshold=threshold,
            per_cwe=per_cwe,
        )
    except ValueError as exc:
        _fail(str(exc), code=2)
    triplets = corpus_mod.read_triplets(dataset)
    try:
        params = train(triplets, config)
    except Exception as exc:
        _fail(str(exc))
    out_path = Path(model_out)
    save_model(out_path, params)
    RunManifest(
        command="train",
        config=asdict(config),
        seed=seed,
        inputs=[dataset],
        outputs=[model_out],
        started=started,
    ).write(out_path)
    click.echo(f"trained on {len(triplets)} triplets -> {model_out}")


def _score_dataset(model_path, dataset):
    params = load_model(model_path)
    triplets = corpus_mod.read_triplets(dataset)
    return [(score(params, t.context, t.block), t.label.is_vulnerable) for t in triplets]


@main.command("eval")
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--report-out", required=True, type=click.Path(dir_okay=False))
@click.option("--threshold", default=0.5, show_default=True, type=float)
def eval_cmd(model, dataset, report_out, threshold):
    """Score a dataset and report precision/recall/F1."""
    started = time.time()
    scored = _score_dataset(model, dataset)
    report = metrics_mod.evaluate_scored(scored, threshold)
    out_path = Path(report_out)
    report.save(out_path)
    RunManifest(
        command="eval",
        config={"threshold": threshold},
        seed=None,
        inputs=[model, dataset],
        outputs=[report_out],
        started=started,
    ).write(out_path)
    click.echo(f"precision={report.precision:.4f} recall={report.recall:.4f} f1={report.f1:.4f}")


@main.command("sweep")
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--report-out", required=True, type=click.Path(dir_okay=False))
@click.option("--steps", default=101, show_default=True, type=int)
@click.option("--target-positive-rate", default=None, type=float)
def sweep_cmd(model, dataset, report_out, steps, target_positive_rate):
    """Sweep thresholds; optionally calibrate to a target positive rate."""
    started = time.time()
    scored = _score_dataset(model, dataset)
    thresholds = [i / (steps - 1) for i in range(steps)]
    points = metrics_mod.sweep(scored, thresholds)
    report = metrics_mod.EvalReport(
        config={"steps": steps},
        sweep_points=[asdict(p) for p in points],
    )
    if target_positive_rate is not None:
        calibrated = metrics_mod.threshold_for_positive_rate(scored, target_positive_rate)
        report.config["target_positive_rate"] = target_positive_rate
        report.config["calibrated_threshold"] = calibrated
        click.echo(f"calibrated threshold for {target_positive_rate:.2%} positive rate: {calibrated:.6f}")
    out_path = Path(report_out)
    report.save(out_path)
    RunManifest(
        command="sweep",
        config=report.config,
        seed=None,
        inputs=[model, dataset],
        outputs=[report_out],
        started=started,
    ).write(out_path)
    click.echo(f"wrote {len(points)} sweep points")


@main.command("bench")
@click.argument("scenario_file", type=click.Path(exists=True, dir_okay=False), required=False)
@click.option("--replay-log", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--endpoint", default=None, help="Completion endpoint URL.")
@click.option("--record-log", default=None, type=click.Path(dir_okay=False))
@click.option("--model", "model_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", default=0.5, show_default=True, type=float)
@click.option("--n-completions", default=25, show_default=True, type=int)
@click.option("--temperature", default=0.6, show_default=True, type=float)
@click.option("--report-out", required=True, type=click.Path(dir_okay=False))
def bench_cmd(
    scenario_file,
    replay_log,
    endpoint,
    record_log,
    model_path,
    threshold,
    n_completions,
    temperature,
    report_out,
):
    """Run the completion-filtering benchmark over the scenario set."""
    started = time.time()
    if (replay_log is None) == (endpoint is None):
        _fail("exactly one of --replay-log or --endpoint is required", code=2)
    scenarios = (
        scenarios_mod.load_scenarios(scenario_file)
        if scenario_file
        else scenarios_mod.shipped_scenarios()
    )
    try:
        backend = ReplayBackend(replay_log) if replay_log else HttpBackend(endpoint)
    except ConfigurationError as exc:
        _fail(str(exc), code=2)
    log = RecordingLog(Path(record_log)) if record_log else None

    detector = None
    if model_path:
        params = load_model(model_path)

        def detector(prompt, completion):
            value = score(params, prompt, completion)
            return value >= threshold, value

    try:
        report = scenarios_mod.run_experiment(
            scenarios,
            backend,
            detector=detector,
            n=n_completions,
            temperature=temperature,
            log=log,
        )
    except Exception as exc:
        _fail(f"experiment aborted: {exc}")
    out_path = Path(report_out)
    report.save(out_path)
    RunManifest(
        command="bench",
        config={
            "n_completions": n_completions,
            "temperature": temperature,
            "threshold": threshold,
            "with_detector": model_path is not None,
        },
        seed=None,
        inputs=[p for p in (scenario_file, replay_log, model_path) if p],
        outputs=[report_out],
        started=started,
    ).write(out_path)
    click.echo(json.dumps(report.counts, indent=2))


@main.command("serve")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", default=None, type=float)
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
def serve_cmd(config_path, model_path, threshold, host, port):
    """Run the detection service (config file < env < flags)."""
    import uvicorn

    from evd.service import DEFAULT_MAX_SNIPPET_BYTES, create_app

    config = {
        "host": "127.0.0.1",
        "port": 8077,
        "model_path": None,
        "threshold": 0.5,
        "max_snippet_bytes": DEFAULT_MAX_SNIPPET_BYTES,
    }
    if config_path:
        config.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
    for key in list(config):
        env = os.environ.get(f"EVD_{key.upper()}")
        if env is not None:
            config[key] = type(config[key])(env) if config[key] is not None else env
    if model_path:
        config["model_path"] = model_path
    if threshold is not None:
        config["threshold"] = threshold
    if host:
        config["host"] = host
    if port:
        config["port"] = port
    if not config["model_path"]:
        _fail("no model configured (set model_path in config, EVD_MODEL_PATH, or --model)", code=2)

    app = create_app(
        model_path=config["model_path"],
        threshold=float(config["threshold"]),
        max_snippet_bytes=int(config["max_snippet_bytes"]),
    )
    uvicorn.run(app, host=config["host"], port=int(config["port"]))


if __name__ == "__main__":
    main()
