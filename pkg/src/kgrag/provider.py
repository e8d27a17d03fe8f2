"""Chat-completion and embedding backends behind one small interface.

Two implementations: an OpenAI-compatible HTTP client for live runs, and a
deterministic offline mock that every test and `--offline` run relies on.

Mock directive protocol
-----------------------
The mock's chat output is a pure function of the prompt. If any line of the
prompt starts with a directive marker, the remainder of that line is returned
verbatim; otherwise a deterministic digest sentence of the prompt is returned.
Markers are checked in priority order:

    ECHO:           test override, returns the payload as-is
    SCORE_JSON:     judge payloads, planted in reference answers
    TAGS_JSON:      tagging payloads
    TRIPLES_JSON:   extraction payloads, planted in synthetic filings

Directive lines are control-channel, not content: anything that renders
retrieved text into a downstream prompt strips them first (see
``strip_directives``), so planted extraction payloads never leak into
synthesis or judge prompts. Real filings never contain the markers, making
the stripping a no-op in live mode.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
from dataclasses import dataclass

import httpx

from .errors import DataError, ProviderError

logger = logging.getLogger(__name__)

DIRECTIVE_MARKERS = ("ECHO:", "SCORE_JSON:", "TAGS_JSON:", "TRIPLES_JSON:")

_RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})
_MAX_ATTEMPTS = 3
_BACKOFF_SCHEDULE = (0.5, 1.0)


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise DataError(f"invalid chat role: {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_output_tokens: int = 1024

    def __post_init__(self):
        if not any(m.role == "user" for m in self.messages):
            raise DataError("chat request needs at least one user message")
        if self.temperature < 0:
            raise DataError("temperature must be >= 0")

    @classmethod
    def simple(cls, model: str, prompt: str, system: str | None = None) -> "ChatRequest":
        messages = []
        if system:
            messages.append(ChatMessage("system", system))
        messages.append(ChatMessage("user", prompt))
        return cls(model=model, messages=tuple(messages))

    def full_text(self) -> str:
        return "\n".join(m.content for m in self.messages)


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise DataError("empty embedding vector")
        if not all(v == v and abs(v) != float("inf") for v in self.values):
            raise DataError("embedding vector contains non-finite values")

    @property
    def dimension(self) -> int:
        return len(self.values)

    def norm(self) -> float:
        return sum(v * v for v in self.values) ** 0.5

    def unit(self) -> "EmbeddingVector":
        n = self.norm()
        if n == 0.0:
            raise DataError("cannot normalize a zero vector")
        return EmbeddingVector(tuple(v / n for v in self.values))

    def cosine(self, other: "EmbeddingVector") -> float:
        if self.dimension != other.dimension:
            raise DataError("cosine of vectors with different dimensions")
        dot = sum(a * b for a, b in zip(self.values, other.values))
        denom = self.norm() * other.norm()
        if denom == 0.0:
            return 0.0
        return max(-1.0, min(1.0, dot / denom))


def find_directive(text: str) -> tuple[str, str] | None:
    """First directive by marker priority, then by position in the text.

    Returns (marker, payload) where payload runs from just after the marker
    to the end of that line; directives are single-line by convention.
    """
    for marker in DIRECTIVE_MARKERS:
        pos = text.find(marker)
        if pos >= 0:
            end = text.find("\n", pos)
            payload = text[pos + len(marker):] if end < 0 else text[pos + len(marker): end]
            return marker, payload.strip()
    return None


def strip_directives(text: str) -> str:
    """Cut directives out before text is rendered into another prompt.

    Each line is truncated at its first marker; lines left empty are dropped.
    """
    kept = []
    for line in text.splitlines():
        positions = [line.find(m) for m in DIRECTIVE_MARKERS if m in line]
        if positions:
            line = line[: min(positions)].rstrip()
        if line.strip():
            kept.append(line)
    return "\n".join(kept).strip()


class MockProvider:
    """Offline deterministic provider.

    chat: directive payload if present, else a digest sentence of the prompt.
    embed: a unit vector built from seeded hashes of the text's word set, so
    identical texts embed identically and shared vocabulary raises cosine.
    """

    def __init__(self, seed: int = 0, dim: int = 32):
        if dim < 2:
            raise DataError("mock embedding dimension must be >= 2")
        self.seed = seed
        self.dim = dim
        self._key = seed.to_bytes(8, "little", signed=True)
        self.transcript: list[ChatRequest] = []
        self._lock = threading.Lock()

    def chat(self, request: ChatRequest) -> str:
        with self._lock:
            self.transcript.append(request)
        prompt = request.full_text()
        found = find_directive(prompt)
        if found is not None:
            return found[1]
        digest = hashlib.blake2b(prompt.encode("utf-8"), key=self._key, digest_size=6)
        return (
            f"Synthesized finding {digest.hexdigest()} drawn from "
            f"{len(prompt)} characters of prompt context."
        )

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        if not texts:
            raise DataError("embed requires a non-empty list of texts")
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> EmbeddingVector:
        words = set(re.findall(r"[a-z0-9]+", text.lower()))
        buckets = [0.0] * self.dim
        for word in words:
            h = hashlib.blake2b(word.encode("utf-8"), key=self._key, digest_size=8)
            idx = int.from_bytes(h.digest(), "little") % self.dim
            buckets[idx] += 1.0
        if not words:
            buckets[0] = 1.0
        return EmbeddingVector(tuple(buckets)).unit()


class OpenAIProvider:
    """OpenAI-compatible wire client: POST /chat/completions and /embeddings.

    Retries 429/5xx with exponential backoff (3 attempts total). In-flight
    calls across threads are bounded by an admission semaphore.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        *,
        embed_model: str = "text-embedding-3-small",
        timeout_s: float = 30.0,
        concurrency: int = 4,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        if not base_url:
            raise DataError("provider base_url is not configured")
        self.base_url = base_url.rstrip("/")
        self.embed_model = embed_model
        self._sleep = sleep
        self._gate = threading.BoundedSemaphore(max(1, concurrency))
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            headers=headers, timeout=timeout_s, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def chat(self, request: ChatRequest) -> str:
        body = {
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        payload = self._post("/chat/completions", body)
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed chat completion body: {exc!r}") from exc
        logger.debug(
            "chat: %d prompt chars -> %d response chars",
            len(request.full_text()),
            len(text),
        )
        return text

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        if not texts:
            raise DataError("embed requires a non-empty list of texts")
        body = {"model": self.embed_model, "input": list(texts)}
        payload = self._post("/embeddings", body)
        try:
            rows = sorted(payload["data"], key=lambda row: row["index"])
            vectors = [EmbeddingVector(tuple(float(v) for v in row["embedding"])) for row in rows]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"malformed embeddings body: {exc!r}") from exc
        if len(vectors) != len(texts):
            raise ProviderError(
                f"embeddings count mismatch: sent {len(texts)}, got {len(vectors)}"
            )
        dims = {v.dimension for v in vectors}
        if len(dims) > 1:
            raise ProviderError(f"embedding dimensions differ within batch: {sorted(dims)}")
        return vectors

    def _post(self, route: str, body: dict) -> dict:
        url = self.base_url + route
        last_status = None
        for attempt in range(_MAX_ATTEMPTS):
            with self._gate:
                try:
                    response = self._client.post(url, json=body)
                except httpx.TimeoutException as exc:
                    raise ProviderError(f"request to {route} timed out") from exc
                except httpx.HTTPError as exc:
                    raise ProviderError(f"transport failure on {route}: {exc}") from exc
            last_status = response.status_code
            if response.status_code == 200:
                try:
                    return response.json()
                except (json.JSONDecodeError, ValueError) as exc:
                    raise ProviderError(
                        f"non-JSON body from {route}", status=response.status_code
                    ) from exc
            if response.status_code in _RETRYABLE_STATUSES and attempt < _MAX_ATTEMPTS - 1:
                delay = _BACKOFF_SCHEDULE[min(attempt, len(_BACKOFF_SCHEDULE) - 1)]
                logger.warning(
                    "%s returned %d, retrying in %.1fs (attempt %d/%d)",
                    route, response.status_code, delay, attempt + 1, _MAX_ATTEMPTS,
                )
                self._sleep(delay)
                continue
            raise ProviderError(
                f"{route} failed with HTTP {response.status_code}",
                status=response.status_code,
            )
        raise ProviderError(f"{route} exhausted retries", status=last_status)
