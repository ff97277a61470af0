"""Chat-completion access behind one interface.

Backends:

* :class:`HttpBackend` talks to an OpenAI-compatible ``/chat/completions``
  endpoint, with retries and a token-bucket rate limit.
* :class:`ReplayBackend` answers from recorded cassettes and never touches
  the network.
* :class:`MockBackend` answers from a user-supplied rule table.
* :class:`RecordingBackend` wraps another backend and appends every new
  exchange to a cassette file.

:class:`Gateway` adds a parallelism limit on top of any backend.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .errors import (
    CassetteMiss,
    CassetteWriteError,
    ConfigError,
    ContextOverflow,
    InvalidConversation,
    MockNoMatch,
    ProviderError,
)

logger = logging.getLogger(__name__)

CASSETTE_SCHEMA = 1
RULES_SCHEMA = 1
DEFAULT_MODEL = "gpt-4"
DEFAULT_MAX_OUTPUT_TOKENS = 4096
REVIEW_TEMPERATURE = 0.0
GENERATION_TEMPERATURE = 0.7
DEFAULT_PARALLELISM = 4
DEFAULT_RATE_PER_MINUTE = 30

ENV_API_BASE = "SPECSMITH_API_BASE"
ENV_API_KEY = "SPECSMITH_API_KEY"
ENV_MODEL = "SPECSMITH_MODEL"


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if self.role is not Role.ASSISTANT and not self.content:
            raise InvalidConversation(f"{self.role.value} message must have content")

    def to_dict(self) -> dict:
        return {"role": self.role.value, "content": self.content}

    @classmethod
    def from_dict(cls, data: dict) -> "ChatMessage":
        return cls(Role(data["role"]), data["content"])


@dataclass(frozen=True)
class GenerationParams:
    model_name: str = DEFAULT_MODEL
    temperature: float = REVIEW_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self):
        if not self.model_name:
            raise InvalidConversation("model_name must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise InvalidConversation(f"temperature {self.temperature} outside [0, 2]")
        if self.max_output_tokens < 1:
            raise InvalidConversation("max_output_tokens must be positive")


@dataclass(frozen=True)
class Conversation:
    messages: tuple
    params: GenerationParams = field(default_factory=GenerationParams)

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise InvalidConversation("conversation has no messages")
        if self.messages[0].role is Role.ASSISTANT:
            raise InvalidConversation("conversation must open with a system or user message")
        for prev, cur in zip(self.messages, self.messages[1:]):
            if prev.role is Role.ASSISTANT and cur.role is Role.ASSISTANT:
                raise InvalidConversation("two consecutive assistant messages")

    def extend(self, *messages: ChatMessage) -> "Conversation":
        return Conversation(self.messages + tuple(messages), self.params)

    def to_dict(self) -> dict:
        return {
            "model_name": self.params.model_name,
            "temperature": self.params.temperature,
            "max_output_tokens": self.params.max_output_tokens,
            "messages": [m.to_dict() for m in self.messages],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Conversation":
        params = GenerationParams(data["model_name"], float(data["temperature"]), int(data["max_output_tokens"]))
        return cls(tuple(ChatMessage.from_dict(m) for m in data["messages"]), params)

    @property
    def digest(self) -> str:
        return request_digest(self)


def request_digest(conv: Conversation) -> str:
    """SHA-256 over the canonical JSON of the request, contents NFC-normalised.

    No other normalisation happens: whitespace differences change the digest.
    """
    canonical = {
        "model": conv.params.model_name,
        "temperature": float(conv.params.temperature),
        "max_tokens": conv.params.max_output_tokens,
        "messages": [
            {"role": m.role.value, "content": unicodedata.normalize("NFC", m.content)} for m in conv.messages
        ],
    }
    blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# --- cassettes ---------------------------------------------------------------


@dataclass(frozen=True)
class Interaction:
    request_digest: str
    request: Conversation
    response: ChatMessage


class Cassette:
    """Ordered request/response recordings keyed by request digest."""

    def __init__(self, interactions=()):
        self.interactions = []
        self._index = {}
        for item in interactions:
            self.add(item)

    def __len__(self):
        return len(self.interactions)

    def __contains__(self, digest):
        return digest in self._index

    def get(self, digest) -> Optional[ChatMessage]:
        item = self._index.get(digest)
        return item.response if item else None

    def add(self, item: Interaction) -> bool:
        """Append ``item``; returns False (and keeps the original) on a repeat digest."""
        if item.request_digest in self._index:
            return False
        self.interactions.append(item)
        self._index[item.request_digest] = item
        return True

    def to_dict(self) -> dict:
        return {
            "schema": CASSETTE_SCHEMA,
            "interactions": [
                {
                    "request_digest": i.request_digest,
                    "request": i.request.to_dict(),
                    "response": i.response.to_dict(),
                }
                for i in self.interactions
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Cassette":
        if data.get("schema") != CASSETTE_SCHEMA:
            raise ConfigError(f"unsupported cassette schema {data.get('schema')!r}")
        items = []
        for raw in data["interactions"]:
            conv = Conversation.from_dict(raw["request"])
            if conv.digest != raw["request_digest"]:
                raise ConfigError(f"cassette digest {raw['request_digest'][:12]} does not match its request")
            items.append(Interaction(raw["request_digest"], conv, ChatMessage.from_dict(raw["response"])))
        return cls(items)

    @classmethod
    def load(cls, path) -> "Cassette":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid cassette JSON: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path) -> None:
        path = Path(path)
        text = json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except OSError as exc:
            raise CassetteWriteError(f"cannot write cassette {path}: {exc}") from exc


def load_cassette_dir(directory) -> Cassette:
    """Merge every ``*.json`` cassette in ``directory`` (sorted by name)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"cassette directory {directory} does not exist")
    merged = Cassette()
    for path in sorted(directory.glob("*.json")):
        for item in Cassette.load(path).interactions:
            merged.add(item)
    return merged


# --- backends ----------------------------------------------------------------


class ReplayBackend:
    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    def complete(self, conv: Conversation) -> ChatMessage:
        response = self.cassette.get(conv.digest)
        if response is None:
            raise CassetteMiss(f"no recorded response for request {conv.digest[:12]}")
        return response


@dataclass(frozen=True)
class MockRule:
    contains: tuple = ()
    regex: Optional[str] = None
    response: str = ""

    def matches(self, text: str) -> bool:
        if not all(s in text for s in self.contains):
            return False
        return self.regex is None or re.search(self.regex, text) is not None


class MockBackend:
    """Deterministic canned responses.

    Rules are tried in order against the content of the last message in the
    request; the first match wins. ``default`` answers when nothing matches.
    """

    def __init__(self, rules, default: Optional[str] = None):
        self.rules = list(rules)
        self.default = default

    @classmethod
    def from_dict(cls, data: dict) -> "MockBackend":
        if data.get("schema") != RULES_SCHEMA:
            raise ConfigError(f"unsupported rule-table schema {data.get('schema')!r}")
        rules = []
        for raw in data.get("rules", []):
            contains = raw.get("contains", ())
            if isinstance(contains, str):
                contains = (contains,)
            rules.append(MockRule(tuple(contains), raw.get("regex"), _response_text(raw["response"])))
        default = data.get("default")
        return cls(rules, None if default is None else _response_text(default))

    @classmethod
    def load(cls, path) -> "MockBackend":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid rule-table JSON: {exc}") from exc

    def complete(self, conv: Conversation) -> ChatMessage:
        text = conv.messages[-1].content
        for rule in self.rules:
            if rule.matches(text):
                return ChatMessage(Role.ASSISTANT, rule.response)
        if self.default is not None:
            return ChatMessage(Role.ASSISTANT, self.default)
        raise MockNoMatch("no mock rule matches the request")


def _response_text(value) -> str:
    # structured responses (e.g. a canned finding list) are sent as JSON text
    if isinstance(value, str):
        return value
    return json.dumps(value, indent=2, ensure_ascii=False)


class TokenBucket:
    """Classic token bucket: ``capacity`` burst, refilled at ``rate_per_minute``."""

    def __init__(self, rate_per_minute=DEFAULT_RATE_PER_MINUTE, capacity=None, clock=time.monotonic, sleep=time.sleep):
        self.rate = rate_per_minute / 60.0
        self.capacity = float(capacity if capacity is not None else max(1, rate_per_minute // 6))
        self.tokens = self.capacity
        self.clock = clock
        self.sleep = sleep
        self.updated = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            self.sleep(wait)


_OVERFLOW_MARKERS = ("context_length_exceeded", "maximum context length", "context length", "too many tokens")
_TRANSIENT_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class HttpBackend:
    """OpenAI-compatible chat-completions client."""

    def __init__(
        self,
        api_base: str,
        api_key: str,
        *,
        max_attempts: int = 3,
        backoff: float = 1.0,
        timeout: float = 120.0,
        rate_limiter: Optional[TokenBucket] = None,
        transport=None,
        sleep=time.sleep,
    ):
        import httpx

        if not api_base:
            raise ConfigError(f"{ENV_API_BASE} is not set")
        if not api_key:
            raise ConfigError(f"{ENV_API_KEY} is not set")
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.sleep = sleep
        self.rate_limiter = rate_limiter if rate_limiter is not None else TokenBucket(sleep=sleep)
        self._httpx = httpx
        self.client = httpx.Client(
            base_url=api_base.rstrip("/"),
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout,
            transport=transport,
        )

    @classmethod
    def from_env(cls, **kwargs) -> "HttpBackend":
        return cls(os.environ.get(ENV_API_BASE, ""), os.environ.get(ENV_API_KEY, ""), **kwargs)

    def complete(self, conv: Conversation) -> ChatMessage:
        body = {
            "model": conv.params.model_name,
            "messages": [m.to_dict() for m in conv.messages],
            "temperature": conv.params.temperature,
            "max_tokens": conv.params.max_output_tokens,
        }
        delay = self.backoff
        last_error = None
        for attempt in range(1, self.max_attempts + 1):
            self.rate_limiter.acquire()
            try:
                resp = self.client.post("/chat/completions", json=body)
            except self._httpx.TransportError as exc:
                last_error = f"transport error: {exc}"
            else:
                if resp.status_code == 200:
                    return self._parse(resp)
                text = resp.text
                if resp.status_code == 413 or (
                    resp.status_code in (400, 422) and any(m in text.lower() for m in _OVERFLOW_MARKERS)
                ):
                    raise ContextOverflow(f"provider rejected request as too long: {text[:200]}")
                if resp.status_code not in _TRANSIENT_STATUS:
                    raise ProviderError(f"HTTP {resp.status_code}: {text[:200]}")
                last_error = f"HTTP {resp.status_code}"
            if attempt < self.max_attempts:
                logger.warning("attempt %d failed (%s); retrying in %.1fs", attempt, last_error, delay)
                self.sleep(delay)
                delay *= 2
        raise ProviderError(f"giving up after {self.max_attempts} attempts: {last_error}")

    @staticmethod
    def _parse(resp) -> ChatMessage:
        try:
            message = resp.json()["choices"][0]["message"]
            return ChatMessage(Role.ASSISTANT, message.get("content") or "")
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"unexpected response shape: {exc}") from exc


class RecordingBackend:
    """Serve from ``cassette_path`` when possible, otherwise ask ``inner`` and
    append the exchange. Writes are serialised."""

    def __init__(self, inner, cassette_path):
        self.inner = inner
        self.path = Path(cassette_path)
        self.cassette = Cassette.load(self.path) if self.path.exists() else Cassette()
        self._lock = threading.Lock()

    def complete(self, conv: Conversation) -> ChatMessage:
        digest = conv.digest
        with self._lock:
            cached = self.cassette.get(digest)
        if cached is not None:
            return cached
        response = self.inner.complete(conv)
        with self._lock:
            if self.cassette.add(Interaction(digest, conv, response)):
                self.cassette.save(self.path)
            return self.cassette.get(digest)


def record(conv: Conversation, backend, cassette_path) -> ChatMessage:
    """One-shot record: answer ``conv`` via ``backend`` and persist it."""
    return RecordingBackend(backend, cassette_path).complete(conv)


class Gateway:
    """Shared entry point; caps concurrent requests at ``parallelism``."""

    def __init__(self, backend, parallelism: int = DEFAULT_PARALLELISM, model_name: str = DEFAULT_MODEL):
        if parallelism < 1:
            raise ConfigError("parallelism must be at least 1")
        self.backend = backend
        self.parallelism = parallelism
        self.model_name = model_name
        self._slots = threading.BoundedSemaphore(parallelism)

    def params(self, temperature: float) -> GenerationParams:
        return GenerationParams(self.model_name, temperature)

    def complete(self, conv: Conversation) -> ChatMessage:
        with self._slots:
            reply = self.backend.complete(conv)
        if reply.role is not Role.ASSISTANT:
            raise ProviderError("backend returned a non-assistant message")
        return reply

    def map(self, fn, items, parallelism: Optional[int] = None) -> list:
        """Run ``fn`` over ``items`` concurrently; results come back in input order."""
        items = list(items)
        workers = min(parallelism or self.parallelism, self.parallelism, max(1, len(items)))
        if workers == 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
