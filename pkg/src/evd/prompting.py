"""Prompt construction for the zero-shot and few-shot detector variants,
plus Yes/No verdict parsing and example-bank handling."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path

CODEX_ZERO = "codex-zero"
TEXT_ZERO = "text-zero"
CODEX_FEW = "codex-few"
TEXT_FEW = "text-few"

STYLES = (CODEX_ZERO, TEXT_ZERO, CODEX_FEW, TEXT_FEW)

DEFAULT_K = {CODEX_FEW: 8, TEXT_FEW: 6}

# Seed phrases that produced each zero-shot prompt family, and the phrase
# variants each model suggested for itself.
CODEX_SEED_PROMPT = "# We run CodeQL security queries in order to "
TEXT_SEED_PROMPT = "What would you accomplish by running CodeQL security queries?"

CODEX_PHRASES = (
    "identify potential security vulnerabilities",
    "find potential security issues",
    "find security vulnerabilities",
    "detect security vulnerabilities",
)
TEXT_PHRASES = (
    "identify potential security vulnerabilities",
    "spot any security weaknesses",
    "detect any security risks",
    "determine any security issues",
)

COMMENT_MARKERS = {
    "javascript": "//",
    "python": "#",
    "go": "//",
    "java": "//",
    "cpp": "//",
    "csharp": "//",
    "ruby": "#",
}

# CWE ids to the vulnerability names used when requesting bank examples.
CWE_NAMES = {
    "CWE-89": "SQL Injection",
    "CWE-798": "Hardcoded Credentials",
    "CWE-94": "Code Injection",
    "CWE-22": "Path Injection",
    "CWE-312": "Clear Text Logging",
    "CWE-327": "Weak Cryptographic Algorithm",
    "CWE-20": "Incomplete URL Substring Sanitization",
}

LANGUAGE_DISPLAY = {
    "javascript": "JavaScript",
    "python": "Python",
    "go": "Go",
    "java": "Java",
    "cpp": "C++",
    "csharp": "C#",
    "ruby": "Ruby",
}


class PromptError(Exception):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    style: str
    phrase: str
    k_examples: int = 0

    def __post_init__(self):
        if self.style not in STYLES:
            raise ValueError(f"unknown prompt style: {self.style!r}")
        zero_shot = self.style in (CODEX_ZERO, TEXT_ZERO)
        if zero_shot and self.k_examples != 0:
            raise ValueError("zero-shot styles take no examples")
        if not zero_shot and self.k_examples <= 0:
            raise ValueError("few-shot styles need at least one example")


@dataclass(frozen=True)
class BankEntry:
    language: str
    label: str  # "vulnerable" | "clean"
    snippet: str
    cwe: str | None = None
    provenance: str = ""

    def __post_init__(self):
        if self.label not in ("vulnerable", "clean"):
            raise ValueError(f"bad bank label: {self.label!r}")
        if (self.label == "vulnerable") != (self.cwe is not None):
            raise ValueError("cwe must be present exactly for vulnerable entries")


@dataclass(frozen=True)
class ExampleBank:
    entries: tuple[BankEntry, ...]

    def for_language(self, language: str) -> list[BankEntry]:
        return [e for e in self.entries if e.language == language]


VERDICT_VULNERABLE = "vulnerable"
VERDICT_NOT_VULNERABLE = "not-vulnerable"
VERDICT_UNKNOWN = "unknown"


@dataclass(frozen=True)
class Verdict:
    decision: str
    raw_response: str


def comment_marker(language: str) -> str:
    try:
        return COMMENT_MARKERS[language]
    except KeyError:
        raise PromptError(f"no comment marker known for language {language!r}") from None


def _codex_block(phrase: str, marker: str, snippet: str, answer: str | None) -> str:
    answer_line = f"{marker} Answer (Yes/No, explanation):"
    if answer is not None:
        answer_line += f" {answer}"
    return f"{marker} {phrase}\n{marker} Code snippet\n{snippet}\n{answer_line}"


def _text_block(phrase: str, snippet: str, answer: str | None) -> str:
    answer_line = "Answer (Yes/No):"
    if answer is not None:
        answer_line += f" {answer}"
    return f"{phrase}\n{snippet}\n{answer_line}"


def build_zero_shot(style: str, phrase: str, language: str, snippet: str) -> str:
    """One unanswered prompt block in the requested style."""
    if style in (CODEX_ZERO, CODEX_FEW):
        return _codex_block(phrase, comment_marker(language), snippet, answer=None)
    if style in (TEXT_ZERO, TEXT_FEW):
        return _text_block(phrase, snippet, answer=None)
    raise PromptError(f"unknown prompt style: {style!r}")


def select_examples(bank: ExampleBank, language: str, k: int, seed: int) -> list[BankEntry]:
    """Alternate vulnerable/clean starting with vulnerable; seeded shuffle
    within each label. Ordering matters empirically, so it is pinned."""
    candidates = bank.for_language(language)
    if len(candidates) < k:
        raise PromptError(
            f"example bank holds {len(candidates)} {language} entries, need {k}"
        )
    rng = random.Random(seed)
    vuln = [e for e in candidates if e.label == "vulnerable"]
    clean = [e for e in candidates if e.label == "clean"]
    rng.shuffle(vuln)
    rng.shuffle(clean)
    picked: list[BankEntry] = []
    queues = [vuln, clean]
    turn = 0
    while len(picked) < k:
        if queues[turn]:
            picked.append(queues[turn].pop(0))
        elif queues[1 - turn]:
            picked.append(queues[1 - turn].pop(0))
        else:  # pragma: no cover - guarded by the length check above
            raise PromptError("example bank exhausted")
        turn = 1 - turn
    return picked


def build_few_shot(
    style: str,
    phrase: str,
    language: str,
    snippet: str,
    bank: ExampleBank,
    k: int | None = None,
    seed: int = 0,
) -> str:
    """k answered example blocks followed by the unanswered target block."""
    if k is None:
        k = DEFAULT_K.get(style, 0)
    if k == 0:
        return build_zero_shot(style, phrase, language, snippet)
    examples = select_examples(bank, language, k, seed)
    blocks = []
    for entry in examples:
        answer = "Yes" if entry.label == "vulnerable" else "No"
        if style in (CODEX_ZERO, CODEX_FEW):
            blocks.append(_codex_block(phrase, comment_marker(language), entry.snippet, answer))
        else:
            blocks.append(_text_block(phrase, entry.snippet, answer))
    blocks.append(build_zero_shot(style, phrase, language, snippet))
    return "\n\n".join(blocks)


_YES_NO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def parse_verdict(response: str) -> Verdict:
    """Earliest case-insensitive whole-word Yes/No wins; neither is Unknown."""
    m = _YES_NO_RE.search(response)
    if m is None:
        return Verdict(VERDICT_UNKNOWN, response)
    decision = VERDICT_VULNERABLE if m.group(1).lower() == "yes" else VERDICT_NOT_VULNERABLE
    return Verdict(decision, response)


def generate_example_requests(language: str, cwe_list: list[str]) -> list[str]:
    """Prompts used to grow the example bank: one per CWE plus one clean."""
    display = LANGUAGE_DISPLAY.get(language, language)
    requests = []
    for cwe in cwe_list:
        name = CWE_NAMES.get(cwe, cwe)
        requests.append(
            f"Provide an example in {display} of a code snippet that contains "
            f"{name} security vulnerability. Output the code only, do not include text:"
        )
    requests.append(
        f"Provide an example in {display} of a code snippet. "
        "Output the code only, do not include text:"
    )
    return requests


def load_example_bank(path: str | Path) -> ExampleBank:
    entries = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            entries.append(
                BankEntry(
                    language=obj["language"],
                    label=obj["label"],
                    snippet=obj["snippet"],
                    cwe=obj.get("cwe"),
                    provenance=obj.get("provenance", ""),
                )
            )
    return ExampleBank(entries=tuple(entries))


def save_example_bank(path: str | Path, bank: ExampleBank):
    with Path(path).open("w", encoding="utf-8") as fh:
        for e in bank.entries:
            fh.write(
                json.dumps(
                    {
                        "language": e.language,
                        "label": e.label,
                        "cwe": e.cwe,
                        "snippet": e.snippet,
                        "provenance": e.provenance,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
