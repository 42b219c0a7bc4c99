"""Chat-completion client: a live HTTP backend plus record/replay cassettes."""
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

from .errors import BackendUnavailable, CassetteError, ReplayMiss

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
FINISH_REASONS = ("stop", "length", "error")
RETRYABLE_STATUS = frozenset({408, 409, 429, 500, 502, 503, 504})


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]
    model_id: str = "gpt-3.5-turbo"
    max_output_tokens: int = 1024
    temperature: float = 0.0

    def __post_init__(self):
        msgs = tuple((str(r), str(c)) for r, c in self.messages)
        if not msgs:
            raise ValueError("a chat request needs at least one message")
        bad = [r for r, _ in msgs if r not in ROLES]
        if bad:
            raise ValueError(f"unknown message role {bad[0]!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        object.__setattr__(self, "messages", msgs)

    @classmethod
    def from_messages(cls, messages: Iterable[dict], **kw) -> "ChatRequest":
        return cls(tuple((m["role"], m["content"]) for m in messages), **kw)

    def wire(self) -> dict:
        """Chat-completions request body."""
        return {
            "model": self.model_id,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "max_tokens": self.max_output_tokens,
            "temperature": self.temperature,
        }

    @classmethod
    def from_wire(cls, body: dict) -> "ChatRequest":
        return cls(tuple((m["role"], m["content"]) for m in body["messages"]), body["model"],
                   int(body["max_tokens"]), float(body["temperature"]))

    def hash(self) -> str:
        canonical = json.dumps(self.wire(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatReply:
    content: str
    finish_reason: str = "stop"
    usage: tuple[int, int] = (0, 0)

    def to_dict(self) -> dict:
        return {"content": self.content, "finish_reason": self.finish_reason, "usage": list(self.usage)}

    @classmethod
    def from_dict(cls, d: dict) -> "ChatReply":
        reason = d.get("finish_reason", "stop")
        if reason not in FINISH_REASONS:
            raise ValueError(f"unknown finish_reason {reason!r}")
        usage = d.get("usage", (0, 0))
        return cls(str(d["content"]), reason, (int(usage[0]), int(usage[1])))


class Backend(Protocol):
    def complete(self, request: ChatRequest) -> ChatReply: ...


def complete(request: ChatRequest, backend: Backend) -> ChatReply:
    return backend.complete(request)


# ---------------------------------------------------------------------------
# live HTTP


class TokenBucket:
    """Process-wide request rate limiter."""

    def __init__(self, rate: float, capacity: float | None = None,
                 clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        self.rate = float(rate)
        self.capacity = float(capacity if capacity is not None else max(1.0, rate))
        self.tokens = self.capacity
        self.clock, self.sleep = clock, sleep
        self.stamp = clock()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        if self.rate <= 0:
            return
        while True:
            with self.lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.stamp) * self.rate)
                self.stamp = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            self.sleep(wait)


_SHARED_LIMITERS: dict[float, TokenBucket] = {}
_SHARED_LOCK = threading.Lock()


def shared_limiter(rate: float) -> TokenBucket:
    with _SHARED_LOCK:
        if rate not in _SHARED_LIMITERS:
            _SHARED_LIMITERS[rate] = TokenBucket(rate)
        return _SHARED_LIMITERS[rate]


class HttpBackend:
    """POSTs chat-completions bodies to ``{base_url}/chat/completions``.

    Retryable failures (timeouts, connection errors, 429 and 5xx) are retried
    ``retries`` times with exponential backoff before giving up.
    """

    def __init__(self, base_url: str, *, api_key_env: str = "OPENAI_API_KEY", retries: int = 3,
                 backoff_base: float = 1.0, timeout: float = 60.0, rate_per_sec: float = 0.0,
                 client: httpx.Client | None = None, sleep: Callable[[float], None] = time.sleep):
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.api_key_env = api_key_env
        self.retries = retries
        self.backoff_base = backoff_base
        self.client = client or httpx.Client(timeout=timeout)
        self.limiter = shared_limiter(rate_per_sec) if rate_per_sec > 0 else None
        self.sleep = sleep

    def _headers(self) -> dict:
        key = os.environ.get(self.api_key_env, "")
        return {"Authorization": f"Bearer {key}"} if key else {}

    def complete(self, request: ChatRequest) -> ChatReply:
        last = "no attempt made"
        for attempt in range(self.retries + 1):
            if attempt:
                delay = self.backoff_base * 2 ** (attempt - 1)
                log.info("retrying chat completion in %.2fs (%s)", delay, last)
                self.sleep(delay)
            if self.limiter is not None:
                self.limiter.acquire()
            try:
                resp = self.client.post(self.url, json=request.wire(), headers=self._headers())
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return _parse_completion(resp)
        raise BackendUnavailable(f"chat completion failed after {self.retries} retries: {last}")


def _parse_completion(resp: httpx.Response) -> ChatReply:
    try:
        body = resp.json()
        choice = body["choices"][0]
        content = choice["message"].get("content") or ""
        reason = choice.get("finish_reason") or "stop"
        usage = body.get("usage") or {}
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise BackendUnavailable(f"malformed completion response: {exc}") from exc
    if reason not in FINISH_REASONS:
        reason = "stop" if content else "error"
    return ChatReply(content, reason, (int(usage.get("prompt_tokens", 0)),
                                       int(usage.get("completion_tokens", 0))))


# ---------------------------------------------------------------------------
# cassettes


def record_cassette(session: Iterable[tuple[ChatRequest, ChatReply]], path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for req, reply in session:
                fh.write(json.dumps({"request_hash": req.hash(), "request": req.wire(),
                                     "reply": reply.to_dict()}, ensure_ascii=False, sort_keys=True) + "\n")
    except OSError as exc:
        raise CassetteError(f"cannot write cassette {path}: {exc}") from exc


def load_cassette(path) -> list[tuple[ChatRequest | None, ChatReply, str]]:
    """Entries as ``(request or None, reply, request_hash)``."""
    path = Path(path)
    out = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise CassetteError(f"cannot read cassette {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                reply = ChatReply.from_dict(rec["reply"])
                req = ChatRequest.from_wire(rec["request"]) if rec.get("request") else None
                h = rec["request_hash"]
            except (ValueError, KeyError, TypeError, IndexError) as exc:
                raise CassetteError(f"{path}: line {lineno}: {exc}") from exc
            if req is not None and req.hash() != h:
                raise CassetteError(f"{path}: line {lineno}: request_hash does not match request")
            out.append((req, reply, h))
    return out


class ReplayBackend:
    def __init__(self, entries: dict[str, ChatReply] | None = None):
        self.entries = dict(entries or {})

    @classmethod
    def from_cassette(cls, path) -> "ReplayBackend":
        return cls({h: reply for _, reply, h in load_cassette(path)})

    def complete(self, request: ChatRequest) -> ChatReply:
        h = request.hash()
        try:
            return self.entries[h]
        except KeyError:
            raise ReplayMiss(f"no recorded reply for request {h[:12]} (model {request.model_id})") from None


@dataclass
class RecordingBackend:
    """Wraps another backend and keeps every exchange for :func:`record_cassette`."""

    inner: Backend
    session: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def complete(self, request: ChatRequest) -> ChatReply:
        reply = self.inner.complete(request)
        with self.lock:
            self.session.append((request, reply))
        return reply

    def save(self, path) -> None:
        with self.lock:
            uniq = {req.hash(): (req, rep) for req, rep in self.session}
        record_cassette([uniq[h] for h in sorted(uniq)], path)


def make_backend(config: dict | None) -> Backend:
    config = config or {}
    kind = config.get("backend", "replay")
    if kind == "replay":
        if not config.get("cassette"):
            raise BackendUnavailable("replay backend needs a cassette path")
        return ReplayBackend.from_cassette(config["cassette"])
    if kind == "http":
        backend = HttpBackend(
            config.get("base_url", "https://api.openai.com/v1"),
            api_key_env=config.get("api_key_env", "OPENAI_API_KEY"),
            retries=int(config.get("retries", 3)),
            backoff_base=float(config.get("backoff_base", 1.0)),
            timeout=float(config.get("timeout", 60.0)),
            rate_per_sec=float(config.get("rate_per_sec", 0.0)),
        )
        if config.get("record_to"):
            return RecordingBackend(backend)
        return backend
    raise BackendUnavailable(f"unknown llm backend {kind!r}")


@dataclass(frozen=True)
class ChatOptions:
    model_id: str = "gpt-3.5-turbo"
    max_output_tokens: int = 1024
    temperature: float = 0.0

    def request(self, messages: Iterable[dict]) -> ChatRequest:
        return ChatRequest.from_messages(messages, model_id=self.model_id,
                                         max_output_tokens=self.max_output_tokens,
                                         temperature=self.temperature)
