"""Findings ingestion, triplet datasets, repo-level splits and dedup.

The findings and triplet files are UTF-8 JSON lines: one object per line,
unknown fields ignored. Everything here is pure; file ingestion is the only
I/O and is single-reader.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from evd.kernel import stable_unit_interval

_CWE_RE = re.compile(r"^CWE-\d+$")

FINDING_FIELDS = (
    "repo",
    "path",
    "rule_id",
    "cwe",
    "title",
    "message",
    "start_line",
    "start_col",
    "end_line",
    "end_col",
)


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class FindingRecord:
    """One static-analyzer detection with its CWE and source span."""

    repo: str
    path: str
    rule_id: str
    cwe: str
    title: str
    message: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self):
        if not _CWE_RE.match(self.cwe):
            raise ValueError(f"bad CWE id: {self.cwe!r}")
        for name in ("start_line", "start_col", "end_line", "end_col"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if (self.start_line, self.start_col) > (self.end_line, self.end_col):
            raise ValueError("finding span start must not come after its end")

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in FINDING_FIELDS}


@dataclass(frozen=True)
class VulnLabel:
    kind: str  # "clean" | "vulnerable"
    cwe: str | None = None
    rule_id: str | None = None

    def __post_init__(self):
        if self.kind not in ("clean", "vulnerable"):
            raise ValueError(f"bad label kind: {self.kind!r}")
        if (self.kind == "vulnerable") != (self.cwe is not None):
            raise ValueError("cwe must be present exactly when the label is vulnerable")

    @property
    def is_vulnerable(self) -> bool:
        return self.kind == "vulnerable"


CLEAN = VulnLabel("clean")


@dataclass(frozen=True)
class TrainingTriplet:
    """(context, block, label) unit; context+block is the original scope text."""

    context: str
    block: str
    label: VulnLabel
    repo: str
    language: str

    def __post_init__(self):
        if not self.context and not self.block:
            raise ValueError("context and block cannot both be empty")

    @property
    def text(self) -> str:
        return self.context + self.block


@dataclass
class IngestReport:
    errors: list[tuple[int, str]] = field(default_factory=list)

    def record(self, lineno: int, reason: str):
        self.errors.append((lineno, reason))


def ingest_findings(path: str | Path, report: IngestReport | None = None) -> list[FindingRecord]:
    """Parse a findings file; malformed lines go to the report, valid ones are returned."""
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"findings file not found: {path}")
    if report is None:
        report = IngestReport()
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not an object")
                kwargs = {name: obj[name] for name in FINDING_FIELDS}
            except (ValueError, KeyError) as exc:
                report.record(lineno, f"malformed record: {exc}")
                continue
            try:
                records.append(FindingRecord(**kwargs))
            except (TypeError, ValueError) as exc:
                report.record(lineno, str(exc))
    return records


def write_findings(path: str | Path, records: list[FindingRecord]):
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")


def triplet_to_dict(t: TrainingTriplet) -> dict:
    return {
        "context": t.context,
        "block": t.block,
        "label_kind": t.label.kind,
        "cwe": t.label.cwe,
        "rule_id": t.label.rule_id,
        "repo": t.repo,
        "language": t.language,
    }


def triplet_from_dict(obj: dict) -> TrainingTriplet:
    label = VulnLabel(obj["label_kind"], obj.get("cwe"), obj.get("rule_id"))
    return TrainingTriplet(
        context=obj["context"],
        block=obj["block"],
        label=label,
        repo=obj["repo"],
        language=obj["language"],
    )


def write_triplets(path: str | Path, triplets: list[TrainingTriplet]):
    with Path(path).open("w", encoding="utf-8") as fh:
        for t in triplets:
            fh.write(json.dumps(triplet_to_dict(t), ensure_ascii=False) + "\n")


def read_triplets(path: str | Path) -> list[TrainingTriplet]:
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"triplet file not found: {path}")
    out = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(triplet_from_dict(json.loads(line)))
    return out


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[TrainingTriplet, ...]
    validation: tuple[TrainingTriplet, ...]
    test: tuple[TrainingTriplet, ...]


def assign_partition(repo: str, seed: int, ratios=(0.85, 0.05, 0.10)) -> str:
    """Deterministic repo partition: hash (seed || repo) into [0,1), threshold."""
    u = stable_unit_interval(f"{seed}||{repo}")
    if u < ratios[0]:
        return "train"
    if u < ratios[0] + ratios[1]:
        return "validation"
    return "test"


def split_by_repo(
    triplets: list[TrainingTriplet],
    ratios: tuple[float, float, float] = (0.85, 0.05, 0.10),
    seed: int = 0,
) -> DatasetSplit:
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusError(f"split ratios must sum to 1.0, got {ratios}")
    parts: dict[str, list[TrainingTriplet]] = {"train": [], "validation": [], "test": []}
    for t in triplets:
        parts[assign_partition(t.repo, seed, ratios)].append(t)
    return DatasetSplit(
        train=tuple(parts["train"]),
        validation=tuple(parts["validation"]),
        test=tuple(parts["test"]),
    )


_WS_RUN = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Collapse whitespace runs and trim; the dedup equality key."""
    return _WS_RUN.sub(" ", text).strip()


def dedup_train_against_test(split: DatasetSplit) -> DatasetSplit:
    """Drop train triplets whose normalized text matches any test triplet's."""
    test_keys = {normalize_text(t.text) for t in split.test}
    kept = tuple(t for t in split.train if normalize_text(t.text) not in test_keys)
    return replace(split, train=kept)
