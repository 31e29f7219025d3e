"""Chat-completion clients for OpenAI-compatible tool-calling endpoints.

Messages are plain dicts in the wire shape: ``{"role", "content",
"tool_calls"?, "tool_call_id"?}``. Cassettes are JSONL files of
``{"fingerprint", "response"}`` lines replayed strictly in order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol

import httpx

from tsagent.errors import GatewayError

log = logging.getLogger(__name__)

FINISH_REASONS = ("stop", "tool_calls", "length")
ENV_URL = "TSAGENT_LLM_URL"
ENV_KEY = "TSAGENT_LLM_API_KEY"
ENV_MODEL = "TSAGENT_LLM_MODEL"


@dataclass(frozen=True)
class CompletionRequest:
    messages: tuple
    tools: tuple | None = None
    temperature: float = 0.0
    max_tokens: int | None = None
    model: str = ""
    seed: int | None = None

    def payload(self) -> dict:
        body = {"model": self.model, "messages": list(self.messages), "temperature": self.temperature}
        if self.tools:
            body["tools"] = list(self.tools)
        if self.max_tokens is not None:
            body["max_tokens"] = self.max_tokens
        if self.seed is not None:
            body["seed"] = self.seed
        return body

    def fingerprint(self) -> str:
        canon = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canon.encode()).hexdigest()


@dataclass(frozen=True)
class CompletionResponse:
    message: dict
    finish_reason: str
    usage: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"message": self.message, "finish_reason": self.finish_reason, "usage": self.usage}

    @classmethod
    def from_dict(cls, d: dict) -> "CompletionResponse":
        return _check_response(d.get("message"), d.get("finish_reason"), d.get("usage") or {})

    @classmethod
    def from_openai(cls, body) -> "CompletionResponse":
        try:
            choice = body["choices"][0]
            return _check_response(choice["message"], choice.get("finish_reason"), body.get("usage") or {})
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError("MALFORMED_RESPONSE", f"unexpected completion shape: {exc!r}") from exc

    @property
    def content(self) -> str | None:
        return self.message.get("content")

    @property
    def tool_calls(self) -> list[dict]:
        return self.message.get("tool_calls") or []

    @property
    def completion_tokens(self) -> int | None:
        return self.usage.get("completion_tokens")


def _check_response(message, finish_reason, usage) -> CompletionResponse:
    if not isinstance(message, dict) or message.get("role", "assistant") != "assistant":
        raise GatewayError("MALFORMED_RESPONSE", "response carries no assistant message")
    if finish_reason not in FINISH_REASONS:
        raise GatewayError("MALFORMED_RESPONSE", f"unknown finish reason {finish_reason!r}")
    msg = {"role": "assistant", "content": message.get("content")}
    calls = message.get("tool_calls")
    if calls:
        for c in calls:
            fn = c.get("function") if isinstance(c, dict) else None
            if not isinstance(fn, dict) or "name" not in fn or "id" not in c:
                raise GatewayError("MALFORMED_RESPONSE", "tool call without id or function name")
        msg["tool_calls"] = [
            {"id": c["id"], "type": "function",
             "function": {"name": c["function"]["name"], "arguments": c["function"].get("arguments", "{}")}}
            for c in calls
        ]
    usage = {k: int(usage[k]) for k in ("prompt_tokens", "completion_tokens") if usage.get(k) is not None}
    return CompletionResponse(msg, finish_reason, usage)


class ChatClient(Protocol):
    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


class HttpChatClient:
    """Live client. Retries 429, 5xx and connection failures with exponential
    backoff; malformed bodies are not retried."""

    def __init__(self, url: str, api_key: str | None = None, timeout: float = 120.0,
                 max_attempts: int = 3, backoff: float = 1.0,
                 sleep: Callable[[float], None] = time.sleep,
                 transport: httpx.BaseTransport | None = None, max_connections: int = 8):
        self.url = url
        self.max_attempts = max_attempts
        self.backoff = backoff
        self._sleep = sleep
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        limits = httpx.Limits(max_connections=max_connections)
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport, limits=limits)

    @classmethod
    def from_env(cls, **kw) -> "HttpChatClient":
        url = os.environ.get(ENV_URL)
        if not url:
            raise GatewayError("TRANSPORT", f"{ENV_URL} is not set")
        return cls(url, os.environ.get(ENV_KEY), **kw)

    def close(self) -> None:
        self._client.close()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        last = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.url, json=request.payload())
            except httpx.TransportError as exc:
                last = GatewayError("TRANSPORT", str(exc))
                log.warning("completion attempt %d failed: %s", attempt + 1, exc)
                continue
            if resp.status_code == 429:
                last = GatewayError("RATE_LIMITED", "HTTP 429")
                continue
            if resp.status_code >= 500:
                last = GatewayError("TRANSPORT", f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise GatewayError("TRANSPORT", f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                body = resp.json()
            except ValueError as exc:
                raise GatewayError("MALFORMED_RESPONSE", "body is not JSON") from exc
            return CompletionResponse.from_openai(body)
        raise last


def read_cassette(path: str | Path) -> list[dict]:
    entries = []
    with open(path) as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                e = json.loads(line)
            except ValueError as exc:
                raise GatewayError("CASSETTE_MISMATCH", f"line {i} is not JSON") from exc
            if not isinstance(e, dict) or "fingerprint" not in e or "response" not in e:
                raise GatewayError("CASSETTE_MISMATCH", f"line {i} lacks fingerprint/response")
            entries.append(e)
    return entries


class ReplayClient:
    """Serves recorded responses in order; a fingerprint mismatch is fatal."""

    def __init__(self, source: str | Path | Iterable[dict]):
        self._entries = read_cassette(source) if isinstance(source, (str, Path)) else list(source)
        self._pos = 0
        self._lock = threading.Lock()

    @property
    def remaining(self) -> int:
        return len(self._entries) - self._pos

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._lock:
            if self._pos >= len(self._entries):
                raise GatewayError("CASSETTE_MISMATCH", "cassette exhausted")
            entry = self._entries[self._pos]
            fp = request.fingerprint()
            if entry["fingerprint"] != fp:
                raise GatewayError(
                    "CASSETTE_MISMATCH",
                    f"entry {self._pos}: recorded {entry['fingerprint'][:12]}, request {fp[:12]}",
                )
            self._pos += 1
        return CompletionResponse.from_dict(entry["response"])


class RecordingClient:
    """Wraps a client and appends every exchange to a cassette file."""

    def __init__(self, inner: ChatClient, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self.path.write_text("")
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        resp = self.inner.complete(request)
        line = json.dumps({"fingerprint": request.fingerprint(), "response": resp.to_dict()},
                          sort_keys=True, ensure_ascii=False)
        with self._lock, open(self.path, "a") as fh:
            fh.write(line + "\n")
        return resp


class ScriptedClient:
    """Offline client that answers from a list of responses or a function of the request."""

    def __init__(self, script):
        self._script = script if callable(script) else iter(list(script))
        self.requests: list[CompletionRequest] = []

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        self.requests.append(request)
        if callable(self._script):
            out = self._script(request)
        else:
            try:
                out = next(self._script)
            except StopIteration:
                raise GatewayError("CASSETTE_MISMATCH", "script exhausted") from None
        if isinstance(out, Exception):
            raise out
        return out if isinstance(out, CompletionResponse) else CompletionResponse.from_dict(out)


def text_response(text: str, completion_tokens: int | None = None) -> CompletionResponse:
    tokens = completion_tokens if completion_tokens is not None else len(text.split())
    return CompletionResponse({"role": "assistant", "content": text}, "stop", {"completion_tokens": tokens})


def tool_call_response(calls: list[tuple[str, str, dict]], content: str | None = None,
                       completion_tokens: int | None = None) -> CompletionResponse:
    """``calls`` are (id, name, arguments) triples."""
    tc = [{"id": cid, "type": "function", "function": {"name": name, "arguments": json.dumps(args, sort_keys=True)}}
          for cid, name, args in calls]
    tokens = completion_tokens if completion_tokens is not None else 8 * len(calls) + len((content or "").split())
    return CompletionResponse({"role": "assistant", "content": content, "tool_calls": tc}, "tool_calls",
                              {"completion_tokens": tokens})
