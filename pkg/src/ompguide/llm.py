"""Chat-completion client with a live HTTP backend and a file replay backend.

Replay stores are directories of ``<prompt-hash>.json`` files holding
``{"model", "prompt", "response"}``. The hash covers model and prompt, so a
changed template simply misses instead of returning a stale answer.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import httpx

from .errors import ApiError, GenerationError, IoFailure, ReplayMiss, TransportError
from .prompts import PromptSpec

logger = logging.getLogger(__name__)

LIVE = "live"
REPLAY = "replay"
_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_RETRY_STATUS = {408, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class GenerationConfig:
    model: str = "gpt-4"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 60.0
    retries: int = 3
    backend: str = REPLAY
    replay_dir: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    max_in_flight: int = 4
    backoff: float = 1.0

    def __post_init__(self):
        if self.backend not in (LIVE, REPLAY):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == REPLAY and not self.replay_dir:
            raise ValueError("replay backend needs replay_dir")
        if self.max_in_flight < 1 or self.retries < 0:
            raise ValueError("max_in_flight must be >= 1 and retries >= 0")


@dataclass(frozen=True)
class GenerationRecord:
    prompt_hash: str
    model: str
    prompt: str
    response: str
    code: str
    latency_ms: float = 0.0
    timestamp: str = ""

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "GenerationRecord":
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__ if k in obj})


def prompt_hash(model: str, prompt: str) -> str:
    payload = json.dumps({"model": model, "prompt": prompt}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def extract_code(response: str) -> str:
    """Largest fenced block of the response, or the whole response without fences."""
    blocks = _FENCE_RE.findall(response)
    if blocks:
        return max(blocks, key=len)
    return response


def _prompt_text(prompt: PromptSpec | str) -> str:
    return prompt.rendered if isinstance(prompt, PromptSpec) else prompt


class LLMClient:
    """Shareable client; ``calls`` counts generate() invocations."""

    def __init__(
        self,
        cfg: GenerationConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cfg = cfg
        self.calls = 0
        self._lock = threading.Lock()
        self._sleep = sleep
        self._http: httpx.Client | None = None
        if cfg.backend == LIVE:
            self._http = httpx.Client(timeout=cfg.timeout, transport=transport)

    def close(self) -> None:
        if self._http is not None:
            self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def generate(self, prompt: PromptSpec | str) -> GenerationRecord:
        text = _prompt_text(prompt)
        digest = prompt_hash(self.cfg.model, text)
        with self._lock:
            self.calls += 1
        if self.cfg.backend == REPLAY:
            return self._replay(digest, text)
        return self._live(digest, text)

    def generate_many(
        self, prompts: Sequence[PromptSpec | str]
    ) -> list[GenerationRecord | GenerationError]:
        """Generate with at most ``max_in_flight`` concurrent requests, preserving order."""

        def one(p):
            try:
                return self.generate(p)
            except GenerationError as exc:
                return exc

        with ThreadPoolExecutor(max_workers=self.cfg.max_in_flight) as pool:
            return list(pool.map(one, prompts))

    def _replay(self, digest: str, text: str) -> GenerationRecord:
        path = Path(self.cfg.replay_dir) / f"{digest}.json"
        try:
            entry = json.loads(path.read_text())
        except FileNotFoundError:
            raise ReplayMiss(digest, str(self.cfg.replay_dir)) from None
        response = entry["response"]
        return GenerationRecord(
            digest, self.cfg.model, text, response, extract_code(response), 0.0, entry.get("timestamp", "")
        )

    def _live(self, digest: str, text: str) -> GenerationRecord:
        key = os.environ.get(self.cfg.api_key_env)
        if not key:
            raise GenerationError(f"live backend needs an API key in ${self.cfg.api_key_env}")
        body = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": text}],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        }
        headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}
        last_error: GenerationError | None = None
        for attempt in range(self.cfg.retries + 1):
            if attempt:
                self._sleep(self.cfg.backoff * 2 ** (attempt - 1))
            start = time.monotonic()
            try:
                resp = self._http.post(self.cfg.endpoint, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = TransportError(f"{type(exc).__name__}: {exc}")
                logger.warning("attempt %d failed: %s", attempt + 1, last_error)
                continue
            latency = (time.monotonic() - start) * 1000.0
            if resp.status_code in _RETRY_STATUS:
                last_error = ApiError(resp.status_code, resp.text)
                logger.warning("attempt %d got HTTP %d", attempt + 1, resp.status_code)
                continue
            if not 200 <= resp.status_code < 300:
                raise ApiError(resp.status_code, resp.text)
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ApiError(resp.status_code, f"unexpected response shape: {resp.text}") from exc
            stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
            return GenerationRecord(digest, self.cfg.model, text, content, extract_code(content), latency, stamp)
        assert last_error is not None
        raise last_error


def generate(prompt: PromptSpec | str, cfg: GenerationConfig) -> GenerationRecord:
    with LLMClient(cfg) as client:
        return client.generate(prompt)


def record_replay(records: Iterable[GenerationRecord], directory: str | Path) -> int:
    """Write one ``<hash>.json`` per record; rewriting the same record is a no-op."""
    directory = Path(directory)
    count = 0
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for rec in records:
            entry = {"model": rec.model, "prompt": rec.prompt, "response": rec.response}
            if rec.timestamp:
                entry["timestamp"] = rec.timestamp
            (directory / f"{rec.prompt_hash}.json").write_text(
                json.dumps(entry, indent=2, ensure_ascii=False) + "\n"
            )
            count += 1
    except OSError as exc:
        raise IoFailure(f"cannot write replay store {directory}: {exc}") from exc
    return count
