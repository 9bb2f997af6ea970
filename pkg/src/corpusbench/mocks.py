"""Deterministic in-process providers for tests and offline pipeline runs.

Every mock is a pure function of (configuration, request): fixed seeds give
bit-identical outputs across runs and platforms. Chat mocks are addressable
through ``mock://`` base URLs (e.g. ``mock://qa-generator?max_items=4``),
so a run config can describe an entirely network-free pipeline.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import prompts
from .providers import (
    ChatRequest,
    ChatResponse,
    EmbeddingEndpoint,
    ModelEndpoint,
    ProviderError,
    TransientProviderError,
    with_retries,
)
from .tokens import word_tokens

STOPWORDS = frozenset(
    """a an and are as at be been but by for from had has have if in into is it its
    of on or such that the their then there these they this to was were which will
    with would he she his her not no nor so than too very can could do does did
    about after before between during over under again further once here when
    where why how all any both each few more most other some own same s t don
    should now what who whom""".split()
)


def _stable_hash(key: str) -> int:
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")


# ---------------------------------------------------------------------------
# Embedders


class HashEmbedder:
    """Seeded hash-based embeddings: same text, same vector, any platform.

    The sequence vector is the mean of per-token hash vectors, so texts that
    share words land closer together, which is enough structure for retrieval
    tests. Token granularity returns one hash vector per word token.
    """

    def __init__(self, dimension: int = 64, seed: int = 0, granularity: str = "sequence",
                 name: str = "hash"):
        if granularity not in ("sequence", "token"):
            raise ValueError(f"granularity must be sequence|token, got {granularity!r}")
        self.dimension = dimension
        self.seed = seed
        self.granularity = granularity
        self.name = name
        self._memo: dict[str, np.ndarray] = {}

    def _vec(self, key: str) -> np.ndarray:
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        need = 4 * self.dimension
        data = b""
        counter = 0
        while len(data) < need:
            data += hashlib.sha256(f"{self.seed}|{counter}|{key}".encode("utf-8")).digest()
            counter += 1
        words = np.frombuffer(data[:need], dtype="<u4").astype(np.float64)
        vec = ((words / 2**31) - 1.0).astype(np.float32)
        self._memo[key] = vec
        return vec

    def _text_vector(self, text: str) -> np.ndarray:
        tokens = word_tokens(text)
        if not tokens:
            return self._vec("<empty>")
        rows = np.stack([self._vec(t) for t in tokens])
        return rows.mean(axis=0).astype(np.float32)

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        return [self._text_vector(t) for t in texts]

    def embed_tokens(self, text: str) -> np.ndarray:
        tokens = word_tokens(text)
        if not tokens:
            raise ProviderError("cannot token-embed text with no word tokens")
        return np.stack([self._vec(t) for t in tokens])


class OneHotEmbedder:
    """Exactly orthogonal token embeddings over a fixed vocabulary.

    Unknown tokens embed to the zero vector. Useful where tests need
    disjoint vocabularies to score exactly zero.
    """

    granularity = "token"

    def __init__(self, vocab: list[str], name: str = "onehot"):
        self.vocab = {tok: i for i, tok in enumerate(dict.fromkeys(vocab))}
        self.dimension = len(self.vocab)
        self.name = name

    def _row(self, token: str) -> np.ndarray:
        row = np.zeros(self.dimension, dtype=np.float32)
        idx = self.vocab.get(token)
        if idx is not None:
            row[idx] = 1.0
        return row

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        return [
            np.sum([self._row(t) for t in word_tokens(text)] or [self._row("")], axis=0)
            for text in texts
        ]

    def embed_tokens(self, text: str) -> np.ndarray:
        tokens = word_tokens(text)
        if not tokens:
            raise ProviderError("cannot token-embed text with no word tokens")
        return np.stack([self._row(t) for t in tokens])


def resolve_mock_embedder(endpoint: EmbeddingEndpoint):
    parsed = urlparse(endpoint.base_url)
    params = {k: v[-1] for k, v in parse_qs(parsed.query).items()}
    kind = parsed.netloc or parsed.path.lstrip("/")
    if kind in ("hash", "hash-embedder"):
        return HashEmbedder(
            dimension=int(params.get("dim", endpoint.dimension or 64)),
            seed=int(params.get("seed", 0)),
            granularity=params.get("granularity", endpoint.granularity or "sequence"),
            name=endpoint.name,
        )
    raise ProviderError(f"unknown mock embedder {endpoint.base_url!r}")


# ---------------------------------------------------------------------------
# Reranker and faithfulness


class LexicalReranker:
    """Scores (query, chunk) pairs by shared distinct word count."""

    name = "lexical"

    def score(self, query: str, texts: list[str]) -> list[float]:
        q = set(word_tokens(query))
        return [float(len(q & set(word_tokens(t)))) for t in texts]


def _content_words(text: str) -> list[str]:
    return [w for w in word_tokens(text) if w not in STOPWORDS]


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


class ContainmentFaithfulness:
    """Fallback groundedness score: clipped containment of the claim's content
    1-3-grams in the context, weighted by n-gram length."""

    name = "containment"

    def score(self, context: str, claim: str) -> float:
        ctx = _content_words(context)
        cl = _content_words(claim)
        if not cl:
            return 0.0
        num = 0.0
        den = 0.0
        for n in (1, 2, 3):
            claim_grams = _ngrams(cl, n)
            total = sum(claim_grams.values())
            if total == 0:
                continue
            ctx_grams = _ngrams(ctx, n)
            matched = sum(min(c, ctx_grams[g]) for g, c in claim_grams.items())
            num += n * (matched / total)
            den += n
        return num / den if den else 0.0


# ---------------------------------------------------------------------------
# Chat behaviors


def _sentences(text: str) -> list[str]:
    parts = re.split(r"(?<=[.!?])\s+", text)
    out = []
    for p in parts:
        p = re.sub(r"^#{1,6}\s+", "", p.strip())
        if len(word_tokens(p)) >= 4:
            out.append(p)
    return out


def _extract_context(user: str) -> str:
    markers = [
        ("Here is the context for generating medical questions:", prompts.QA_FORMAT_INSTRUCTIONS),
        ("Generate multiple-choice questions from this context:", prompts.MCQ_FORMAT_INSTRUCTIONS),
    ]
    for header, stop in markers:
        i = user.find(header)
        if i < 0:
            continue
        start = i + len(header)
        j = user.find(stop, start)
        return user[start:j] if j >= 0 else user[start:]
    return user


def _extract_between(text: str, after: str, before: str) -> str:
    i = text.find(after)
    if i < 0:
        return ""
    start = i + len(after)
    j = text.find(before, start)
    return text[start:j].strip() if j >= 0 else text[start:].strip()


def _behavior_echo(req: ChatRequest, params: dict) -> str:
    return req.user


def _behavior_first_words(req: ChatRequest, params: dict) -> str:
    n = int(params.get("n", 30))
    return " ".join(req.user.split()[:n])


def _behavior_qa_generator(req: ChatRequest, params: dict) -> str:
    max_items = int(params.get("max_items", 4))
    context = _extract_context(req.user)
    items = []
    for sent in _sentences(context)[:max_items]:
        topic = " ".join(_content_words(sent)[:3]) or "this topic"
        items.append({
            "question": f"What does the source material state about {topic}?",
            "answer": sent,
        })
    return json.dumps(items, ensure_ascii=False)


def _behavior_mcq_generator(req: ChatRequest, params: dict) -> str:
    max_items = int(params.get("max_items", 4))
    context = _extract_context(req.user)
    items = []
    for sent in _sentences(context)[:max_items]:
        topic = " ".join(_content_words(sent)[:3]) or "this topic"
        stem = sent[0].lower() + sent[1:] if sent else sent
        items.append({
            "question": f"Which statement about {topic} is accurate?",
            "options": [
                sent,
                f"It is not established that {stem}",
                f"Current evidence rules out that {stem}",
                f"Guidelines advise against assuming that {stem}",
            ],
            "correct": 0,
        })
    return json.dumps(items, ensure_ascii=False)


def _behavior_letter_uniform(req: ChatRequest, params: dict) -> str:
    seed = params.get("seed", "0")
    return "ABCD"[_stable_hash(f"{seed}:{req.user}") % 4]


def _behavior_letter_fixed(req: ChatRequest, params: dict) -> str:
    return params.get("letter", "A")


def _behavior_marker_answer(req: ChatRequest, params: dict) -> str:
    marker = params.get("marker", "[*]")
    for line in req.user.splitlines():
        m = re.match(r"^([A-D])\.\s", line)
        if m and marker in line:
            return m.group(1)
    return "A"


def _behavior_judge_overlap(req: ChatRequest, params: dict) -> str:
    threshold = float(params.get("threshold", 0.3))
    reference = _extract_between(req.user, "Reference answer:", "Source context:")
    candidate = _extract_between(req.user, "Candidate answer:", "Is the candidate answer correct?")
    ref_words = set(_content_words(reference))
    cand_words = set(_content_words(candidate))
    overlap = len(ref_words & cand_words) / len(ref_words) if ref_words else 0.0
    verdict = "correct" if overlap >= threshold else "incorrect"
    return json.dumps({
        "verdict": verdict,
        "rationale": f"reference content-word overlap {overlap:.2f}",
    })


def _behavior_refuse(req: ChatRequest, params: dict) -> str:
    return params.get("text", "I cannot answer that.")


BEHAVIORS = {
    "echo": _behavior_echo,
    "first-words": _behavior_first_words,
    "qa-generator": _behavior_qa_generator,
    "mcq-generator": _behavior_mcq_generator,
    "letter-uniform": _behavior_letter_uniform,
    "letter-fixed": _behavior_letter_fixed,
    "marker-answer": _behavior_marker_answer,
    "judge-overlap": _behavior_judge_overlap,
    "refuse": _behavior_refuse,
}


class MockChatClient:
    """Chat client around a deterministic behavior function.

    Supports the same retry contract as the HTTP client. ``fail_first`` makes
    the first N calls raise a transient error; ``break_json_first`` corrupts
    the first N payloads (for JSON-repair paths).
    """

    def __init__(self, behavior, params: dict | None = None, max_retries: int = 3,
                 fail_first: int = 0, fail_always: bool = False, break_json_first: int = 0):
        self._behavior = BEHAVIORS[behavior] if isinstance(behavior, str) else behavior
        self._params = params or {}
        self._max_retries = max_retries
        self._fail_remaining = fail_first
        self._fail_always = fail_always
        self._break_json_remaining = break_json_first
        self.attempts = 0

    def _attempt(self, req: ChatRequest) -> ChatResponse:
        self.attempts += 1
        if self._fail_always:
            raise TransientProviderError("mock endpoint configured to always fail")
        if self._fail_remaining > 0:
            self._fail_remaining -= 1
            raise TransientProviderError("mock transient failure")
        text = self._behavior(req, self._params)
        if self._break_json_remaining > 0:
            self._break_json_remaining -= 1
            text = "{ this is not valid json :: " + text[:20]
        return ChatResponse(text=text, finish_reason="stop")

    def chat(self, req: ChatRequest) -> ChatResponse:
        return with_retries(lambda: self._attempt(req), self._max_retries, sleep=lambda _: None)


class CallableChatClient:
    """Wrap a plain ``fn(ChatRequest) -> str`` as a chat client (test helper)."""

    def __init__(self, fn):
        self._fn = fn

    def chat(self, req: ChatRequest) -> ChatResponse:
        return ChatResponse(text=self._fn(req), finish_reason="stop")


def resolve_mock_chat(endpoint: ModelEndpoint) -> MockChatClient:
    parsed = urlparse(endpoint.base_url)
    params = {k: v[-1] for k, v in parse_qs(parsed.query).items()}
    kind = parsed.netloc or parsed.path.lstrip("/")
    fail_first = int(params.pop("fail_first", 0))
    fail_always = params.pop("fail_always", "0") in ("1", "true")
    break_json_first = int(params.pop("break_json_first", 0))
    if kind not in BEHAVIORS:
        raise ProviderError(f"unknown mock chat behavior {kind!r} (known: {sorted(BEHAVIORS)})")
    return MockChatClient(
        kind,
        params=params,
        max_retries=endpoint.max_retries,
        fail_first=fail_first,
        fail_always=fail_always,
        break_json_first=break_json_first,
    )
