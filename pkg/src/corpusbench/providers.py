"""Clients for chat, embedding, reranking, and faithfulness providers.

Every network call in the package goes through this module. Real endpoints
speak the OpenAI-compatible JSON protocol over HTTP; endpoints whose base URL
uses the ``mock://`` scheme resolve to the deterministic in-process mocks in
:mod:`corpusbench.mocks`, which makes whole pipeline runs reproducible and
network-free.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

logger = logging.getLogger(__name__)


class ProviderError(Exception):
    """Base class for provider-layer failures."""


class EndpointUnreachable(ProviderError):
    pass


class AuthFailure(ProviderError):
    pass


class ResponseTruncated(ProviderError):
    pass


class RetriesExhausted(ProviderError):
    pass


class TransientProviderError(ProviderError):
    """Retryable failure (5xx, 429, connection reset)."""


class DimensionMismatch(ProviderError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    system: str
    user: str


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "stop"
    usage: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ModelEndpoint:
    """Configuration for one evaluable chat endpoint."""

    name: str
    base_url: str
    model_id: str = ""
    api_key_ref: str = ""
    temperature: float = 0.0
    max_output_tokens: int = 1024
    request_timeout: float = 60.0
    max_retries: int = 3
    max_concurrency: int = 4

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")


@dataclass(frozen=True)
class EmbeddingEndpoint:
    """Configuration for an embedding provider."""

    name: str
    base_url: str
    model_id: str = ""
    api_key_ref: str = ""
    dimension: int = 0
    granularity: str = "sequence"  # "sequence" | "token"
    request_timeout: float = 60.0
    max_retries: int = 3


class ChatClient(Protocol):
    def chat(self, req: ChatRequest) -> ChatResponse: ...


class Embedder(Protocol):
    name: str
    dimension: int
    granularity: str

    def embed(self, texts: list[str]) -> list[np.ndarray]: ...

    def embed_tokens(self, text: str) -> np.ndarray: ...


class Reranker(Protocol):
    name: str

    def score(self, query: str, texts: list[str]) -> list[float]: ...


class FaithfulnessScorer(Protocol):
    name: str

    def score(self, context: str, claim: str) -> float: ...


# ---------------------------------------------------------------------------
# Audit log


def _canonical_hash(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class AuditLog:
    """Append-only request/response hash log for reproducibility audits."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def record(self, endpoint: str, request_payload, response_payload) -> None:
        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "endpoint": endpoint,
            "request_hash": _canonical_hash(request_payload),
            "response_hash": _canonical_hash(response_payload),
        }
        line = json.dumps(entry, sort_keys=True) + "\n"
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(line)


# ---------------------------------------------------------------------------
# Retry helper


def with_retries(
    fn: Callable[[], object],
    max_retries: int,
    backoff_base: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
):
    """Run ``fn`` with up to ``max_retries`` retries on transient failures.

    Total attempts = max_retries + 1; backoff doubles per retry.
    """
    last: Exception | None = None
    for attempt in range(max_retries + 1):
        try:
            return fn()
        except (TransientProviderError, EndpointUnreachable) as exc:
            last = exc
            if attempt < max_retries:
                delay = backoff_base * (2 ** attempt)
                logger.debug("transient failure (%s), retry %d in %.2fs", exc, attempt + 1, delay)
                sleep(delay)
    raise RetriesExhausted(f"gave up after {max_retries + 1} attempts: {last}") from last


# ---------------------------------------------------------------------------
# OpenAI-compatible HTTP transport

Transport = Callable[[str, dict, dict, float], tuple[int, dict]]


def _requests_transport(url: str, payload: dict, headers: dict, timeout: float) -> tuple[int, dict]:
    import requests

    try:
        resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    except requests.exceptions.RequestException as exc:
        raise EndpointUnreachable(f"POST {url}: {exc}") from exc
    try:
        body = resp.json()
    except ValueError:
        body = {"raw": resp.text}
    return resp.status_code, body


def _check_status(status: int, url: str, body: dict) -> None:
    if status in (401, 403):
        raise AuthFailure(f"{url} returned HTTP {status}")
    if status == 429 or status >= 500:
        raise TransientProviderError(f"{url} returned HTTP {status}")
    if status >= 400:
        raise ProviderError(f"{url} returned HTTP {status}: {body}")


def _auth_headers(api_key_ref: str) -> dict:
    headers = {"Content-Type": "application/json"}
    if api_key_ref:
        key = os.environ.get(api_key_ref)
        if key is None:
            raise AuthFailure(f"API key environment variable {api_key_ref!r} is not set")
        headers["Authorization"] = f"Bearer {key}"
    return headers


class HttpChatClient:
    """Chat client for OpenAI-compatible ``/chat/completions`` endpoints."""

    def __init__(
        self,
        endpoint: ModelEndpoint,
        transport: Transport = _requests_transport,
        audit: AuditLog | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self._transport = transport
        self._audit = audit
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, endpoint.max_concurrency))

    def chat(self, req: ChatRequest) -> ChatResponse:
        ep = self.endpoint
        url = ep.base_url.rstrip("/") + "/chat/completions"
        payload = {
            "model": ep.model_id,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
            "temperature": ep.temperature,
            "max_tokens": ep.max_output_tokens,
        }
        headers = _auth_headers(ep.api_key_ref)

        def attempt() -> ChatResponse:
            with self._slots:
                status, body = self._transport(url, payload, headers, ep.request_timeout)
            _check_status(status, url, body)
            try:
                choice = body["choices"][0]
                text = choice["message"]["content"]
                finish = choice.get("finish_reason", "stop")
            except (KeyError, IndexError, TypeError) as exc:
                raise ProviderError(f"malformed chat response from {url}: {body}") from exc
            if finish in ("length", "truncated"):
                raise ResponseTruncated(f"{url} truncated the response (finish_reason={finish})")
            if self._audit is not None:
                self._audit.record(ep.name, payload, body)
            return ChatResponse(text=text, finish_reason=finish, usage=body.get("usage", {}))

        return with_retries(attempt, ep.max_retries, sleep=self._sleep)


class HttpEmbedder:
    """Embedder backed by an OpenAI-compatible ``/embeddings`` endpoint."""

    granularity = "sequence"

    def __init__(
        self,
        endpoint: EmbeddingEndpoint,
        transport: Transport = _requests_transport,
        audit: AuditLog | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.name = endpoint.name
        self.dimension = endpoint.dimension
        self._transport = transport
        self._audit = audit
        self._sleep = sleep

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        ep = self.endpoint
        url = ep.base_url.rstrip("/") + "/embeddings"
        payload = {"model": ep.model_id, "input": list(texts)}
        headers = _auth_headers(ep.api_key_ref)

        def attempt() -> list[np.ndarray]:
            status, body = self._transport(url, payload, headers, ep.request_timeout)
            _check_status(status, url, body)
            try:
                rows = sorted(body["data"], key=lambda d: d["index"])
                vectors = [np.asarray(r["embedding"], dtype=np.float32) for r in rows]
            except (KeyError, TypeError) as exc:
                raise ProviderError(f"malformed embedding response from {url}: {body}") from exc
            if self._audit is not None:
                self._audit.record(ep.name, payload, body)
            return vectors

        vectors = with_retries(attempt, ep.max_retries, sleep=self._sleep)
        if len(vectors) != len(texts):
            raise ProviderError(f"{url} returned {len(vectors)} vectors for {len(texts)} inputs")
        for v in vectors:
            if self.dimension and v.shape[0] != self.dimension:
                raise DimensionMismatch(f"expected dim {self.dimension}, got {v.shape[0]}")
        return vectors

    def embed_tokens(self, text: str) -> np.ndarray:
        raise ProviderError(f"embedder {self.name!r} has sequence granularity, not token")


# ---------------------------------------------------------------------------
# Provider resolution (mock:// URLs -> in-process mocks)


def get_chat_client(
    endpoint: ModelEndpoint,
    transport: Transport = _requests_transport,
    audit: AuditLog | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatClient:
    if endpoint.base_url.startswith("mock://"):
        from . import mocks

        return mocks.resolve_mock_chat(endpoint)
    return HttpChatClient(endpoint, transport=transport, audit=audit, sleep=sleep)


def get_embedder(
    endpoint: EmbeddingEndpoint,
    transport: Transport = _requests_transport,
    audit: AuditLog | None = None,
) -> Embedder:
    if endpoint.base_url.startswith("mock://"):
        from . import mocks

        return mocks.resolve_mock_embedder(endpoint)
    return HttpEmbedder(endpoint, transport=transport, audit=audit)


def get_reranker(name: str) -> Reranker:
    from . import mocks

    if name.startswith("mock://") or name == "lexical":
        return mocks.LexicalReranker()
    raise ProviderError(f"unknown reranker {name!r} (built-in: 'lexical')")


def get_faithfulness_scorer(name: str = "containment") -> FaithfulnessScorer:
    from . import mocks

    if name.startswith("mock://") or name == "containment":
        return mocks.ContainmentFaithfulness()
    raise ProviderError(f"unknown faithfulness scorer {name!r} (built-in: 'containment')")


# ---------------------------------------------------------------------------
# Functional operation surface


def chat(
    endpoint: ModelEndpoint,
    req: ChatRequest,
    transport: Transport = _requests_transport,
    audit: AuditLog | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatResponse:
    """Send one chat request, retrying transient failures per the endpoint config."""
    return get_chat_client(endpoint, transport=transport, audit=audit, sleep=sleep).chat(req)


def embed(provider: Embedder, texts: list[str]):
    """Embed a batch of texts; one vector (or token matrix) per input."""
    if not texts:
        raise ValueError("embed() requires at least one text")
    if provider.granularity == "token":
        return [provider.embed_tokens(t) for t in texts]
    return provider.embed(list(texts))


def faithfulness(context: str, claim: str, scorer: FaithfulnessScorer | None = None) -> float:
    """Score how well ``claim`` is grounded in ``context`` (0..1, higher = better)."""
    if not context or not claim:
        raise ValueError("faithfulness() requires non-empty context and claim")
    if scorer is None:
        scorer = get_faithfulness_scorer()
    return scorer.score(context, claim)
