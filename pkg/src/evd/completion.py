"""Completion backends: generic HTTP endpoint, scripted mock, record/replay.

One request shape fits every backend; transient failures are retried with
bounded exponential backoff, and every exchange can be logged for
deterministic offline replay keyed by prompt hash.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx


class CompletionError(Exception):
    pass


class ConfigurationError(CompletionError):
    pass


class TransientBackendError(CompletionError):
    """Raised by backends for failures worth retrying."""


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = 256
    temperature: float = 0.6
    n: int = 1
    stop: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be at least 1")
        if not (self.temperature >= 0.0):
            raise ValueError("temperature must be finite and non-negative")

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
            "n": self.n,
            "stop": list(self.stop) if self.stop else None,
        }


@dataclass(frozen=True)
class CompletionResult:
    texts: tuple[str, ...]
    backend_id: str
    elapsed_ms: float
    replay_id: str = ""


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class HttpBackend:
    """POSTs the request body as JSON to a single completion endpoint."""

    def __init__(self, url: str, api_key_env: str = "EVD_COMPLETION_API_KEY", timeout: float = 60.0):
        self.url = url
        self.backend_id = f"http:{url}"
        key = os.environ.get(api_key_env)
        if not key:
            raise ConfigurationError(
                f"completion credential missing: set {api_key_env} in the environment"
            )
        self._headers = {"Authorization": f"Bearer {key}"}
        self._timeout = timeout

    def complete_once(self, request: CompletionRequest) -> list[str]:
        try:
            resp = httpx.post(
                self.url, json=request.to_dict(), headers=self._headers, timeout=self._timeout
            )
        except httpx.TransportError as exc:
            raise TransientBackendError(str(exc)) from exc
        if resp.status_code >= 500 or resp.status_code == 429:
            raise TransientBackendError(f"backend returned {resp.status_code}")
        if resp.status_code != 200:
            raise CompletionError(f"backend returned {resp.status_code}: {resp.text[:200]}")
        body = resp.json()
        return list(body["texts"])


class MockBackend:
    """Scripted backend for tests: a queue of responses or exceptions."""

    backend_id = "mock"

    def __init__(self, script: list):
        self.script = list(script)
        self.calls: list[CompletionRequest] = []

    def complete_once(self, request: CompletionRequest) -> list[str]:
        self.calls.append(request)
        if not self.script:
            raise CompletionError("mock script exhausted")
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        texts = list(item) if isinstance(item, (list, tuple)) else [item]
        if len(texts) == 1 and request.n > 1:
            texts = texts * request.n
        return texts


class ReplayBackend:
    """Replays a recorded log; lookup is keyed by prompt hash, so request
    order need not match the recording order."""

    backend_id = "replay"

    def __init__(self, log_path: str | Path):
        log_path = Path(log_path)
        if not log_path.is_file():
            raise ConfigurationError(f"replay log not found: {log_path}")
        self._by_hash: dict[str, list[list[str]]] = {}
        self._cursor: dict[str, int] = {}
        with log_path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                self._by_hash.setdefault(obj["prompt_hash"], []).append(obj["texts"])
        self.log_path = log_path

    def complete_once(self, request: CompletionRequest) -> list[str]:
        key = prompt_hash(request.prompt)
        entries = self._by_hash.get(key)
        if not entries:
            raise CompletionError(f"no recorded response for prompt hash {key[:12]}")
        i = self._cursor.get(key, 0)
        texts = entries[min(i, len(entries) - 1)]
        self._cursor[key] = i + 1
        return list(texts)


def record_replay(log_path: str | Path) -> ReplayBackend:
    return ReplayBackend(log_path)


@dataclass
class RecordingLog:
    path: Path
    entries: list = field(default_factory=list)

    def append(self, request: CompletionRequest, texts: list[str], replay_id: str):
        record = {
            "replay_id": replay_id,
            "prompt_hash": prompt_hash(request.prompt),
            "n": request.n,
            "temperature": request.temperature,
            "texts": texts,
        }
        self.entries.append(record)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def complete(
    request: CompletionRequest,
    backend,
    attempts: int = 3,
    backoff_base: float = 0.5,
    sleep=time.sleep,
    log: RecordingLog | None = None,
) -> CompletionResult:
    """Run one completion request with retry; optionally append to a replay log."""
    started = time.perf_counter()
    last_error: Exception | None = None
    for attempt in range(attempts):
        try:
            texts = backend.complete_once(request)
            break
        except TransientBackendError as exc:
            last_error = exc
            if attempt + 1 < attempts:
                sleep(backoff_base * 2**attempt)
    else:
        raise CompletionError(f"completion failed after {attempts} attempts") from last_error
    if len(texts) != request.n:
        raise CompletionError(f"backend returned {len(texts)} texts, expected {request.n}")
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    replay_id = f"{prompt_hash(request.prompt)[:12]}-{len(log.entries) if log else 0}"
    if log is not None:
        log.append(request, texts, replay_id)
    return CompletionResult(
        texts=tuple(texts),
        backend_id=getattr(backend, "backend_id", "unknown"),
        elapsed_ms=elapsed_ms,
        replay_id=replay_id,
    )
