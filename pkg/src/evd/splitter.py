"""Scope extraction over (possibly incomplete) source and triplet synthesis.

Scopes are located with lightweight scope finders: a brace matcher for
brace-delimited languages and an indentation walker for Python-style ones.
Full grammar adapters can be registered through ``SCOPE_FINDERS``.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from evd.corpus import CLEAN, FindingRecord, TrainingTriplet, VulnLabel
from evd.kernel import hash64_str

STATEMENT = "statement"
METHOD = "method"
DECLARATION = "declaration"
CLAUSE = "clause"

SCOPE_KINDS = (STATEMENT, METHOD, DECLARATION, CLAUSE)


class SplitterError(Exception):
    pass


@dataclass(frozen=True)
class VulnSpan:
    """Character range of one finding, relative to the scope start."""

    start: int
    end: int
    cwe: str
    rule_id: str


@dataclass(frozen=True)
class Scope:
    text: str
    kind: str
    start_offset: int
    vuln_spans: tuple[VulnSpan, ...] = ()

    def __post_init__(self):
        if self.kind not in SCOPE_KINDS:
            raise ValueError(f"bad scope kind: {self.kind!r}")
        for span in self.vuln_spans:
            if not (0 <= span.start < span.end <= len(self.text)):
                raise ValueError(f"vuln span {span} outside scope of length {len(self.text)}")


@dataclass(frozen=True)
class SplitPlan:
    scope: Scope
    split_index: int
    label: VulnLabel

    def __post_init__(self):
        if not 1 <= self.split_index <= len(self.scope.text) - 1:
            raise ValueError(f"split index {self.split_index} out of range")
        if self.label.is_vulnerable and self.scope.vuln_spans:
            earliest = min(s.start for s in self.scope.vuln_spans)
            if self.split_index > max(earliest, 1):
                raise ValueError("split index falls after the earliest vulnerability")


# --- scope finders -----------------------------------------------------------

_BRACE_KEYWORDS = {
    "function": METHOD,
    "constructor": METHOD,
    "class": DECLARATION,
    "interface": DECLARATION,
    "enum": DECLARATION,
    "export": STATEMENT,
    "if": STATEMENT,
    "for": STATEMENT,
    "while": STATEMENT,
    "switch": STATEMENT,
    "do": STATEMENT,
    "try": STATEMENT,
    "else": CLAUSE,
    "catch": CLAUSE,
    "finally": CLAUSE,
}

_BRACE_KEYWORD_RE = re.compile(
    r"\b(" + "|".join(sorted(_BRACE_KEYWORDS, key=len, reverse=True)) + r")\b"
)


def _match_brace(source: str, open_idx: int) -> int | None:
    """Index of the brace closing source[open_idx] == '{', skipping strings."""
    depth = 0
    i = open_idx
    n = len(source)
    while i < n:
        ch = source[i]
        if ch in "\"'`":
            quote = ch
            i += 1
            while i < n and source[i] != quote:
                i += 2 if source[i] == "\\" else 1
            i += 1
            continue
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            i = source.find("\n", i)
            if i < 0:
                return None
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i
        i += 1
    return None


def _find_brace_scopes(source: str) -> list[tuple[int, int, str]]:
    scopes = []
    for m in _BRACE_KEYWORD_RE.finditer(source):
        kind = _BRACE_KEYWORDS[m.group(1)]
        # Header runs until the opening brace; give up if the statement ends first.
        open_idx = None
        for i in range(m.end(), len(source)):
            ch = source[i]
            if ch == "{":
                open_idx = i
                break
            if ch in ";}":
                break
        if open_idx is None:
            continue
        close_idx = _match_brace(source, open_idx)
        if close_idx is None:
            continue
        scopes.append((m.start(), close_idx + 1, kind))
    return scopes


_INDENT_KEYWORDS = {
    "def": METHOD,
    "async": METHOD,
    "class": DECLARATION,
    "if": STATEMENT,
    "for": STATEMENT,
    "while": STATEMENT,
    "try": STATEMENT,
    "with": STATEMENT,
    "elif": CLAUSE,
    "else": CLAUSE,
    "except": CLAUSE,
    "finally": CLAUSE,
}


def _find_indent_scopes(source: str) -> list[tuple[int, int, str]]:
    lines = source.splitlines(keepends=True)
    offsets = []
    pos = 0
    for line in lines:
        offsets.append(pos)
        pos += len(line)
    scopes = []
    for i, line in enumerate(lines):
        stripped = line.strip()
        word = stripped.split(" ", 1)[0].rstrip(":") if stripped else ""
        if word not in _INDENT_KEYWORDS:
            continue
        indent = len(line) - len(line.lstrip())
        end = i
        for j in range(i + 1, len(lines)):
            body = lines[j]
            if not body.strip():
                continue
            if len(body) - len(body.lstrip()) <= indent:
                break
            end = j
        if end == i and not stripped.endswith(":") and ":" not in stripped:
            continue  # keyword with no suite, e.g. a bare identifier
        start_off = offsets[i] + (len(line) - len(line.lstrip()))
        end_off = offsets[end] + len(lines[end].rstrip("\n"))
        scopes.append((start_off, end_off, _INDENT_KEYWORDS[word]))
    return scopes


SCOPE_FINDERS = {
    "javascript": _find_brace_scopes,
    "java": _find_brace_scopes,
    "go": _find_brace_scopes,
    "cpp": _find_brace_scopes,
    "csharp": _find_brace_scopes,
    "python": _find_indent_scopes,
    "ruby": _find_indent_scopes,
}


def extract_scopes(source: str, language: str) -> list[Scope]:
    """All complete statement/method/declaration/clause scopes in the source."""
    finder = SCOPE_FINDERS.get(language)
    if finder is None:
        raise SplitterError(f"unsupported language: {language!r}")
    if not source:
        return []
    scopes = [
        Scope(text=source[start:end], kind=kind, start_offset=start)
        for start, end, kind in finder(source)
    ]
    scopes.sort(key=lambda s: (s.start_offset, -len(s.text)))
    return scopes


# --- split planning ----------------------------------------------------------


def plan_split(scope: Scope, rng: random.Random) -> SplitPlan:
    """Pick the split point: before the earliest vulnerability, or anywhere."""
    n = len(scope.text)
    if n < 2:
        raise SplitterError("scope too short to split")
    if scope.vuln_spans:
        earliest = min(scope.vuln_spans, key=lambda s: s.start)
        upper = max(earliest.start, 1)
        idx = rng.randint(1, upper)
        label = VulnLabel("vulnerable", earliest.cwe, earliest.rule_id)
    else:
        idx = rng.randint(1, n - 1)
        label = CLEAN
    return SplitPlan(scope=scope, split_index=idx, label=label)


# --- synthesis ---------------------------------------------------------------


@dataclass(frozen=True)
class SourceUnit:
    """One file plus the findings reported against it."""

    repo: str
    path: str
    language: str
    text: str
    findings: tuple[FindingRecord, ...] = ()


@dataclass
class SynthesisReport:
    files: int = 0
    scopes: int = 0
    triplets: int = 0
    orphan_findings: int = 0
    short_scopes: int = 0
    unsplittable_scopes: int = 0
    warnings: list[str] = field(default_factory=list)


def _line_starts(text: str) -> list[int]:
    starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            starts.append(i + 1)
    return starts


def finding_char_span(text: str, finding: FindingRecord) -> tuple[int, int]:
    """(start, end) char offsets; columns are 1-based, end column exclusive."""
    starts = _line_starts(text)
    if finding.start_line > len(starts) or finding.end_line > len(starts):
        raise SplitterError(f"finding lines outside file: {finding.rule_id}")
    begin = starts[finding.start_line - 1] + finding.start_col - 1
    end = starts[finding.end_line - 1] + finding.end_col - 1
    return begin, min(end, len(text))


def _scopes_with_findings(unit: SourceUnit, report: SynthesisReport) -> list[Scope]:
    scopes = extract_scopes(unit.text, unit.language)
    report.scopes += len(scopes)
    spans_per_scope: dict[int, list[VulnSpan]] = {i: [] for i in range(len(scopes))}
    for finding in unit.findings:
        begin, end = finding_char_span(unit.text, finding)
        placed = False
        for i, scope in enumerate(scopes):
            lo = scope.start_offset
            hi = lo + len(scope.text)
            if lo <= begin < end <= hi:
                spans_per_scope[i].append(
                    VulnSpan(begin - lo, end - lo, finding.cwe, finding.rule_id)
                )
                placed = True
        if not placed:
            report.orphan_findings += 1
    return [
        Scope(s.text, s.kind, s.start_offset, tuple(spans_per_scope[i]))
        for i, s in enumerate(scopes)
    ]


def synthesize(units: list[SourceUnit], seed: int) -> tuple[list[TrainingTriplet], SynthesisReport]:
    """One triplet per extracted scope; deterministic per (seed, file path)."""
    report = SynthesisReport()
    triplets = []
    for unit in units:
        report.files += 1
        rng = random.Random(hash64_str(f"{seed}||{unit.path}"))
        for scope in _scopes_with_findings(unit, report):
            if len(scope.text) < 2:
                report.short_scopes += 1
                continue
            if scope.vuln_spans and min(s.start for s in scope.vuln_spans) == 0:
                # A split index of at least 1 would cut into the span.
                report.unsplittable_scopes += 1
                continue
            plan = plan_split(scope, rng)
            triplets.append(
                TrainingTriplet(
                    context=scope.text[: plan.split_index],
                    block=scope.text[plan.split_index :],
                    label=plan.label,
                    repo=unit.repo,
                    language=unit.language,
                )
            )
            report.triplets += 1
    return triplets, report
