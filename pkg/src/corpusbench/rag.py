"""Exact-cosine vector store, retrieval with optional reranking, and prompt
augmentation.

Search is exhaustive (no approximate index): corpora here are thousands of
chunks, so a normalized matrix product is both fast enough and exactly
reproducible, which the test suite relies on.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import prompts
from .corpus import Chunk, ChunkStrategy
from .providers import (
    ChatClient,
    ChatRequest,
    DimensionMismatch,
    Embedder,
    ModelEndpoint,
    Reranker,
    get_chat_client,
    get_reranker,
)
from .tokens import estimate_tokens

logger = logging.getLogger(__name__)

INDEX_FORMAT = "corpusbench-index-v1"


class EmptyStore(ValueError):
    pass


class TemplateMissingPlaceholder(ValueError):
    pass


@dataclass(frozen=True)
class RerankSpec:
    provider: str = "lexical"
    keep: int = 5


@dataclass(frozen=True)
class RetrievalConfig:
    name: str = "recursive1024+100_top20_rerank5"
    strategy: ChunkStrategy = ChunkStrategy.RECURSIVE
    chunk_size: int = 1024
    chunk_overlap: int = 100
    embedding: str = "pubmedbert"
    top_k: int = 20
    rerank: RerankSpec | None = field(default_factory=RerankSpec)

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if self.rerank is not None and self.rerank.keep > self.top_k:
            raise ValueError(
                f"rerank.keep ({self.rerank.keep}) cannot exceed top_k ({self.top_k})"
            )


@dataclass(frozen=True)
class RetrievedChunk:
    chunk_id: str
    doc_id: str
    score: float
    text: str


@dataclass(frozen=True)
class RetrievedContext:
    chunks: tuple[RetrievedChunk, ...]
    total_tokens: int


class VectorStore:
    """Immutable store of L2-normalized chunk embeddings plus metadata."""

    def __init__(self, dimension: int, embedding_name: str, matrix: np.ndarray, entries: list[dict]):
        self.dimension = dimension
        self.metric = "cosine"
        self.embedding_name = embedding_name
        self.matrix = matrix  # (count, dimension) float32, rows normalized
        self.entries = entries  # [{chunk_id, doc_id, text}]
        self._matrix64 = matrix.astype(np.float64)  # scores computed in float64
        ids = [e["chunk_id"] for e in entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate chunk_id in vector store")

    def __len__(self) -> int:
        return len(self.entries)

    def search(self, query_vector: np.ndarray, top_k: int) -> list[tuple[int, float]]:
        """Exact cosine top-k as (entry index, score), ties broken by chunk_id."""
        if len(self.entries) == 0:
            raise EmptyStore("vector store has no entries")
        if np.asarray(query_vector).shape[0] != self.dimension:
            raise DimensionMismatch(
                f"query dim {np.asarray(query_vector).shape[0]} != store dim {self.dimension}"
            )
        q = np.asarray(query_vector, dtype=np.float64)
        norm = float(np.linalg.norm(q))
        if norm > 0:
            q = q / norm
        scores = self._matrix64 @ q
        order = sorted(
            range(len(self.entries)),
            key=lambda i: (-scores[i], self.entries[i]["chunk_id"]),
        )
        return [(i, float(scores[i])) for i in order[:top_k]]

    def save(self, path: str | Path) -> None:
        header = {
            "format": INDEX_FORMAT,
            "dimension": self.dimension,
            "metric": self.metric,
            "count": len(self.entries),
            "embedding": self.embedding_name,
        }
        with Path(path).open("wb") as fh:
            fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
            fh.write(self.matrix.astype("<f4").tobytes())
            for entry in self.entries:
                fh.write((json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n").encode("utf-8"))

    @classmethod
    def load(cls, path: str | Path) -> "VectorStore":
        with Path(path).open("rb") as fh:
            header = json.loads(fh.readline().decode("utf-8"))
            if header.get("format") != INDEX_FORMAT:
                raise ValueError(f"not a {INDEX_FORMAT} file: {path}")
            count, dim = header["count"], header["dimension"]
            raw = fh.read(count * dim * 4)
            matrix = np.frombuffer(raw, dtype="<f4").reshape(count, dim).copy()
            entries = [json.loads(line) for line in fh.read().decode("utf-8").splitlines() if line]
        return cls(dim, header["embedding"], matrix, entries)


def build_index(chunks: list[Chunk], embedder: Embedder) -> VectorStore:
    """Embed chunks and assemble a normalized store (one entry per chunk)."""
    if not chunks:
        raise EmptyStore("cannot build an index from zero chunks")
    vectors = embedder.embed([c.text for c in chunks])
    matrix = np.stack([np.asarray(v, dtype=np.float32) for v in vectors])
    if matrix.shape[1] != getattr(embedder, "dimension", matrix.shape[1]):
        raise DimensionMismatch(
            f"embedder announced dim {embedder.dimension}, produced {matrix.shape[1]}"
        )
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    matrix = np.divide(matrix, norms, out=np.zeros_like(matrix), where=norms > 0)
    entries = [{"chunk_id": c.chunk_id, "doc_id": c.doc_id, "text": c.text} for c in chunks]
    return VectorStore(matrix.shape[1], getattr(embedder, "name", ""), matrix, entries)


def retrieve(
    store: VectorStore,
    query: str,
    cfg: RetrievalConfig,
    embedder: Embedder,
    reranker: Reranker | None = None,
) -> RetrievedContext:
    """Exact top-k retrieval; with reranking, the top-k candidates are
    re-scored jointly against the query and the best ``keep`` survive in
    rerank order. Reranking never sees chunks outside the candidate set."""
    if len(store) == 0:
        raise EmptyStore("vector store has no entries")
    query_vec = embedder.embed([query])[0]
    hits = store.search(query_vec, cfg.top_k)

    if cfg.rerank is not None:
        reranker = reranker or get_reranker(cfg.rerank.provider)
        texts = [store.entries[i]["text"] for i, _ in hits]
        rerank_scores = reranker.score(query, texts)
        ranked = sorted(
            zip(hits, rerank_scores),
            key=lambda pair: (-pair[1], store.entries[pair[0][0]]["chunk_id"]),
        )
        hits = [(i, rs) for (i, _), rs in ranked[:cfg.rerank.keep]]

    chunks = tuple(
        RetrievedChunk(
            chunk_id=store.entries[i]["chunk_id"],
            doc_id=store.entries[i]["doc_id"],
            score=score,
            text=store.entries[i]["text"],
        )
        for i, score in hits
    )
    total = sum(estimate_tokens(c.text) for c in chunks)
    return RetrievedContext(chunks=chunks, total_tokens=total)


def augment_prompt(
    question: str,
    ctx: RetrievedContext,
    template: str = prompts.DEFAULT_RAG_TEMPLATE,
    system: str = prompts.RAG_SYSTEM_PROMPT,
) -> ChatRequest:
    """Compose the retrieval-augmented chat request.

    Chunks are concatenated in rank order, each prefixed with its source
    document id; an empty retrieval yields an explicit no-context marker.
    """
    if "{question}" not in template or "{context}" not in template:
        raise TemplateMissingPlaceholder(
            "RAG template must contain {question} and {context} placeholders"
        )
    if ctx.chunks:
        block = "\n\n".join(f"[source: {c.doc_id}]\n{c.text}" for c in ctx.chunks)
    else:
        block = prompts.NO_CONTEXT_MARKER
    user = template.replace("{context}", block).replace("{question}", question)
    logger.debug("augmented prompt holds ~%d tokens", estimate_tokens(user))
    return ChatRequest(system=system, user=user)


@dataclass(frozen=True)
class RagAnswer:
    text: str
    retrieved: RetrievedContext


def answer_with_rag(
    endpoint: ModelEndpoint | ChatClient,
    store: VectorStore,
    cfg: RetrievalConfig,
    question: str,
    embedder: Embedder,
    reranker: Reranker | None = None,
    template: str = prompts.DEFAULT_RAG_TEMPLATE,
) -> RagAnswer:
    """retrieve -> augment -> chat; the retrieved context rides along for the
    judge layer."""
    ctx = retrieve(store, question, cfg, embedder, reranker=reranker)
    req = augment_prompt(question, ctx, template=template)
    client = endpoint if hasattr(endpoint, "chat") else get_chat_client(endpoint)
    response = client.chat(req)
    return RagAnswer(text=response.text, retrieved=ctx)


def default_config_grid() -> list[RetrievalConfig]:
    """The retrieval configuration sweep: recursive vs header chunking,
    several top-k settings, reranked variants, both embedding model names."""
    grid = []
    for top_k, rerank in [(20, 5), (10, 5), (10, None), (5, None), (3, None)]:
        for embedding in ("pubmedbert", "multilingual"):
            suffix = f"top{top_k}" + (f"_rerank{rerank}" if rerank else "")
            grid.append(RetrievalConfig(
                name=f"recursive1024+100_{suffix}_{embedding}",
                strategy=ChunkStrategy.RECURSIVE,
                chunk_size=1024,
                chunk_overlap=100,
                embedding=embedding,
                top_k=top_k,
                rerank=RerankSpec(keep=rerank) if rerank else None,
            ))
    for embedding in ("pubmedbert", "multilingual"):
        grid.append(RetrievalConfig(
            name=f"markdownheader_top2_{embedding}",
            strategy=ChunkStrategy.MARKDOWN_HEADER,
            chunk_size=1024,
            chunk_overlap=0,
            embedding=embedding,
            top_k=2,
            rerank=None,
        ))
    return grid


DEFAULT_RETRIEVAL_CONFIG = RetrievalConfig()
