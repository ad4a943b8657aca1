"""Chat-completion backends: a remote HTTP client and a scripted test double.

The contract is deliberately small: one fully rendered prompt in, one text
completion out, plus the measured wall-clock seconds the call took
(t_system_s, later subtracted from display delays). Chat-style wire formats
are adapted inside the remote client; nothing else in the package performs
network access.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field

import httpx

from .errors import AuthError, QueueExhausted, TransportError

logger = logging.getLogger(__name__)

API_KEY_ENV = "CHAT_API_KEY"

_RETRYABLE_STATUS = {408, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class ChatRequest:
    prompt: str
    model_id: str = "default"
    temperature: float = 0.7
    max_output_chars: int = 8000

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_output_chars <= 0:
            raise ValueError("max_output_chars must be positive")


@dataclass(frozen=True)
class ChatResult:
    text: str
    t_system_s: float

    def __post_init__(self):
        if self.t_system_s < 0:
            raise ValueError("t_system_s must be non-negative")


class ScriptedBackend:
    """Deterministic backend that replays a fixed list of canned replies.

    Each complete() consumes exactly one queued reply in order; running past
    the end raises QueueExhausted. Confined to a single logical session --
    the cursor is stateful and must not be shared across concurrent sessions.
    """

    def __init__(self, replies, fixed_t_system_s: float = 0.0,
                 model_id: str = "scripted", temperature: float = 0.7):
        self.queue = list(replies)
        self.cursor = 0
        self.fixed_t_system_s = float(fixed_t_system_s)
        self.model_id = model_id
        self.temperature = temperature
        self.calls: list[ChatRequest] = []

    def complete(self, req: ChatRequest) -> ChatResult:
        self.calls.append(req)
        if self.cursor >= len(self.queue):
            raise QueueExhausted(
                f"scripted backend exhausted after {len(self.queue)} replies"
            )
        text = self.queue[self.cursor]
        self.cursor += 1
        return ChatResult(text=text, t_system_s=self.fixed_t_system_s)


class RemoteBackend:
    """HTTP client for an OpenAI-style chat-completions endpoint.

    Retries transient transport failures (connect errors, timeouts, 5xx/429)
    with exponential backoff up to retry_budget extra attempts; credential
    problems fail immediately as AuthError. t_system_s is measured with a
    monotonic clock around the whole complete() call, retries included.
    """

    def __init__(self, endpoint: str, model_id: str = "default",
                 temperature: float = 0.7, api_key: str | None = None,
                 retry_budget: int = 2, backoff_base_s: float = 0.5,
                 timeout_s: float = 60.0, transport: httpx.BaseTransport | None = None):
        if not endpoint:
            raise ValueError("remote backend requires an endpoint URL")
        self.endpoint = endpoint
        self.model_id = model_id
        self.temperature = temperature
        self.retry_budget = int(retry_budget)
        self.backoff_base_s = backoff_base_s
        self._api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def close(self):
        self._client.close()

    def complete(self, req: ChatRequest) -> ChatResult:
        started = time.monotonic()
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        body = {
            "model": req.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
        }
        last_error: Exception | None = None
        for attempt in range(self.retry_budget + 1):
            if attempt:
                delay = self.backoff_base_s * (2 ** (attempt - 1))
                logger.debug("retrying chat call in %.2fs (attempt %d)", delay, attempt)
                time.sleep(delay)
            try:
                response = self._client.post(self.endpoint, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credential: HTTP {response.status_code}")
            if response.status_code in _RETRYABLE_STATUS:
                last_error = TransportError(f"HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise TransportError(
                    f"HTTP {response.status_code}: {response.text[:200]}"
                )
            text = self._extract_text(response)
            return ChatResult(
                text=text[: req.max_output_chars],
                t_system_s=time.monotonic() - started,
            )
        raise TransportError(f"chat call failed after {self.retry_budget + 1} attempts: {last_error}")

    @staticmethod
    def _extract_text(response: httpx.Response) -> str:
        try:
            payload = response.json()
        except ValueError:
            raise TransportError("endpoint returned non-JSON body")
        try:
            if "choices" in payload:
                return payload["choices"][0]["message"]["content"]
            return payload["text"]
        except (KeyError, IndexError, TypeError):
            raise TransportError("endpoint response missing completion text")


def ask(backend, prompt: str) -> ChatResult:
    """Send one rendered prompt using the backend's configured defaults."""
    return backend.complete(
        ChatRequest(
            prompt=prompt,
            model_id=getattr(backend, "model_id", "default"),
            temperature=getattr(backend, "temperature", 0.7),
        )
    )


@dataclass
class BackendConfig:
    """The [backend] config section."""

    kind: str = "scripted"
    endpoint: str = ""
    model_id: str = "default"
    temperature: float = 0.7
    retry_budget: int = 2
    backoff_base_s: float = 0.5
    timeout_s: float = 60.0
    script: list[str] = field(default_factory=list)
    script_file: str = ""
    fixed_t_system_s: float = 0.0


def make_backend(cfg: BackendConfig):
    """Build a fresh backend instance from config.

    Scripted backends are stateful, so callers needing several independent
    sessions should call this once per session.
    """
    if cfg.kind == "scripted":
        replies = list(cfg.script)
        if cfg.script_file:
            import json

            replies = json.loads(open(cfg.script_file, encoding="utf-8").read())
            if not isinstance(replies, list):
                raise ValueError("script_file must contain a JSON array of replies")
        return ScriptedBackend(
            replies,
            fixed_t_system_s=cfg.fixed_t_system_s,
            model_id=cfg.model_id,
            temperature=cfg.temperature,
        )
    if cfg.kind == "remote":
        return RemoteBackend(
            endpoint=cfg.endpoint,
            model_id=cfg.model_id,
            temperature=cfg.temperature,
            retry_budget=cfg.retry_budget,
            backoff_base_s=cfg.backoff_base_s,
            timeout_s=cfg.timeout_s,
        )
    raise ValueError(f"unknown backend kind {cfg.kind!r}")
