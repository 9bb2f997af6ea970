"""Markdown corpus ingestion: boilerplate cleaning, chapter windows, chunks.

Documents arrive as markdown (conversion from PDF or anything else happens
upstream). This module removes boilerplate sections, cuts each document into
token-bounded chapter windows for generation, and slices it into retrieval
chunks. Everything is a pure function over immutable inputs.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .tokens import DEFAULT_ESTIMATOR, TokenEstimator

logger = logging.getLogger(__name__)

DEFAULT_BOILERPLATE_PATTERNS = (
    "references",
    "bibliography",
    "acknowledg*",
    "table of contents",
    "contents",
    "author*",
    "conflict of interest",
)

MAX_CHAPTERS = 10
MAX_CHAPTER_TOKENS = 50_000

_HEADING_RE = re.compile(r"^(#{1,6})[ \t]+(.*?)[ \t]*#*[ \t]*$")


class DocumentEmpty(ValueError):
    """Document has no usable text."""


class InvalidChunkParams(ValueError):
    """Chunking called with overlap >= size or a non-positive size."""


class ChunkStrategy(str, Enum):
    RECURSIVE = "recursive"
    MARKDOWN_HEADER = "markdown_header"


@dataclass(frozen=True)
class CorpusDocument:
    id: str
    path: str
    title: str
    raw_text: str
    cleaned_text: str
    essential: bool = False
    special: bool = False


@dataclass(frozen=True)
class Chapter:
    doc_id: str
    index: int
    heading: str
    text: str
    token_estimate: int


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    chunk_id: str
    text: str
    token_count: int
    char_span: tuple[int, int]
    strategy: ChunkStrategy


def _compile_patterns(patterns) -> list[re.Pattern]:
    # Patterns are simple globs ("acknowledg*"), matched case-insensitively
    # against the full heading text.
    compiled = []
    for pat in patterns:
        regex = "".join(".*" if ch == "*" else re.escape(ch) for ch in pat)
        compiled.append(re.compile(regex, re.IGNORECASE))
    return compiled


def _heading_lines(text: str, max_level: int = 6) -> list[tuple[int, int, str]]:
    """(char offset of line start, level, heading text) for every ATX heading."""
    out = []
    offset = 0
    for line in text.splitlines(keepends=True):
        m = _HEADING_RE.match(line.rstrip("\n"))
        if m and len(m.group(1)) <= max_level:
            out.append((offset, len(m.group(1)), m.group(2)))
        offset += len(line)
    return out


def clean_document(raw: str, patterns=DEFAULT_BOILERPLATE_PATTERNS) -> str:
    """Remove boilerplate sections from markdown, preserving the rest verbatim.

    A level-1 or level-2 section whose heading matches one of the glob
    patterns (case-insensitive) is dropped in full: the heading line and the
    body up to the next heading of the same or higher level. All other bytes
    pass through untouched, so the operation is idempotent.
    """
    compiled = _compile_patterns(patterns)
    headings = _heading_lines(raw)
    removed: list[tuple[int, int]] = []
    for i, (start, level, title) in enumerate(headings):
        if level > 2:
            continue
        normalized = title.strip().rstrip(":").strip()
        if not any(p.fullmatch(normalized) for p in compiled):
            continue
        end = len(raw)
        for later_start, later_level, _ in headings[i + 1:]:
            if later_level <= level:
                end = later_start
                break
        removed.append((start, end))

    if not removed:
        return raw
    kept = []
    cursor = 0
    for start, end in removed:
        if start > cursor:
            kept.append(raw[cursor:start])
        cursor = max(cursor, end)
    kept.append(raw[cursor:])
    return "".join(kept)


def _paragraph_pieces(text: str) -> list[str]:
    """Partition text after each blank-line run; pieces concatenate to text."""
    boundaries = [m.end() for m in re.finditer(r"\n[ \t]*\n+", text)]
    pieces = []
    prev = 0
    for b in boundaries:
        pieces.append(text[prev:b])
        prev = b
    if prev < len(text):
        pieces.append(text[prev:])
    return [p for p in pieces if p]


def _sentence_pieces(text: str) -> list[str]:
    boundaries = [m.end() for m in re.finditer(r"[.!?](?=\s)", text)]
    pieces = []
    prev = 0
    for b in boundaries:
        pieces.append(text[prev:b])
        prev = b
    if prev < len(text):
        pieces.append(text[prev:])
    return [p for p in pieces if p]


def _hard_split(text: str, max_tokens: int, estimator: TokenEstimator) -> list[str]:
    spans = estimator.spans(text)
    if len(spans) <= max_tokens:
        return [text]
    parts = []
    prev = 0
    for i in range(max_tokens, len(spans), max_tokens):
        cut = spans[i][0]
        parts.append(text[prev:cut])
        prev = cut
    parts.append(text[prev:])
    return parts


def _pack_pieces(pieces: list[str], max_tokens: int, estimator: TokenEstimator) -> list[str]:
    """Greedily pack consecutive pieces into windows of at most max_tokens."""
    windows: list[str] = []
    current = ""
    current_tokens = 0
    for piece in pieces:
        n = estimator.count(piece)
        if n > max_tokens:
            # One piece alone blows the cap: split it further.
            sub = _sentence_pieces(piece)
            if len(sub) == 1:
                sub = _hard_split(piece, max_tokens, estimator)
            for s in _pack_pieces(sub, max_tokens, estimator):
                if current:
                    windows.append(current)
                    current, current_tokens = "", 0
                windows.append(s)
            continue
        # Concatenation can merge a token at the seam, never create one.
        if current and current_tokens + n > max_tokens:
            windows.append(current)
            current, current_tokens = piece, n
        else:
            current += piece
            current_tokens += n
    if current:
        windows.append(current)
    return windows


def split_chapters(
    doc: CorpusDocument,
    max_chapters: int = MAX_CHAPTERS,
    max_tokens: int = MAX_CHAPTER_TOKENS,
    estimator: TokenEstimator | None = None,
) -> list[Chapter]:
    """Cut a cleaned document into at most ``max_chapters`` generation windows.

    Splits at top-level headings; a heading span larger than ``max_tokens``
    is subdivided at paragraph (then sentence) boundaries. Windows beyond the
    chapter cap are dropped and logged. Emitted chapter texts concatenate to
    the retained prefix of ``cleaned_text`` exactly.
    """
    est = estimator or DEFAULT_ESTIMATOR
    text = doc.cleaned_text.rstrip()
    if not text:
        raise DocumentEmpty(f"document {doc.id!r} has no text after cleaning")

    top = [(pos, title) for pos, level, title in _heading_lines(text) if level == 1]
    spans: list[tuple[str, str]] = []  # (heading, span text)
    if not top:
        spans.append(("", text))
    else:
        preamble = text[:top[0][0]]
        if preamble.strip():
            spans.append(("", preamble))
        for i, (pos, title) in enumerate(top):
            end = top[i + 1][0] if i + 1 < len(top) else len(text)
            if i == 0 and not preamble.strip():
                pos = 0  # fold whitespace-only preamble into the first chapter
            spans.append((title, text[pos:end]))

    windows: list[tuple[str, str]] = []
    for heading, span_text in spans:
        if est.count(span_text) <= max_tokens:
            windows.append((heading, span_text))
        else:
            for w in _pack_pieces(_paragraph_pieces(span_text), max_tokens, est):
                windows.append((heading, w))

    if len(windows) > max_chapters:
        logger.warning(
            "document %s: dropping %d chapter window(s) beyond the %d-chapter cap",
            doc.id, len(windows) - max_chapters, max_chapters,
        )
        windows = windows[:max_chapters]

    return [
        Chapter(doc_id=doc.id, index=i, heading=h, text=t, token_estimate=est.count(t))
        for i, (h, t) in enumerate(windows)
    ]


def chunk_document(
    doc: CorpusDocument,
    strategy: ChunkStrategy = ChunkStrategy.RECURSIVE,
    size: int = 1024,
    overlap: int = 100,
    estimator: TokenEstimator | None = None,
) -> list[Chunk]:
    """Slice ``cleaned_text`` into retrieval chunks.

    ``recursive`` is a token sliding window: windows of ``size`` tokens with
    ``overlap`` shared tokens between neighbours, so dropping each chunk's
    first ``overlap`` tokens (except the first chunk's) replays the document
    token stream exactly. ``markdown_header`` tiles the document at heading
    boundaries with no overlap.
    """
    strategy = ChunkStrategy(strategy)
    if strategy is ChunkStrategy.RECURSIVE:
        if size <= 0 or overlap < 0 or overlap >= size:
            raise InvalidChunkParams(f"need 0 <= overlap < size, got size={size} overlap={overlap}")
    est = estimator or DEFAULT_ESTIMATOR
    text = doc.cleaned_text

    def mk(i: int, start: int, end: int, n_tokens: int) -> Chunk:
        return Chunk(
            doc_id=doc.id,
            chunk_id=f"{doc.id}:{strategy.value}:{i:05d}",
            text=text[start:end],
            token_count=n_tokens,
            char_span=(start, end),
            strategy=strategy,
        )

    if strategy is ChunkStrategy.MARKDOWN_HEADER:
        headings = _heading_lines(text)
        starts = [pos for pos, _, _ in headings]
        if starts and not text[:starts[0]].strip():
            starts[0] = 0  # fold whitespace-only preamble into the first section
        if not starts or starts[0] > 0:
            starts = [0] + starts
        bounds = starts + [len(text)]
        return [
            mk(i, bounds[i], bounds[i + 1], est.count(text[bounds[i]:bounds[i + 1]]))
            for i in range(len(starts))
        ]

    spans = est.spans(text)
    if len(spans) <= size:
        return [mk(0, 0, len(text), len(spans))]

    step = size - overlap
    chunks = []
    start_tok = 0
    i = 0
    while True:
        end_tok = min(start_tok + size, len(spans))
        char_start = 0 if i == 0 else spans[start_tok][0]
        if end_tok == len(spans):
            chunks.append(mk(i, char_start, len(text), end_tok - start_tok))
            break
        if overlap == 0:
            char_end = spans[end_tok][0]  # carry inter-token whitespace
        else:
            char_end = spans[end_tok - 1][1]
        chunks.append(mk(i, char_start, char_end, end_tok - start_tok))
        start_tok += step
        i += 1
    return chunks


# ---------------------------------------------------------------------------
# Corpus manifest and chunk store files


def load_manifest(path: str | Path) -> list[dict]:
    """Read a corpus manifest: {"documents": [{path, id?, title?, essential?, special?}]}."""
    manifest_path = Path(path)
    data = json.loads(manifest_path.read_text(encoding="utf-8"))
    docs = data["documents"]
    for entry in docs:
        entry.setdefault("id", Path(entry["path"]).stem)
        entry.setdefault("title", entry["id"])
        entry.setdefault("essential", False)
        entry.setdefault("special", False)
    return docs


def load_corpus(
    manifest_path: str | Path,
    patterns=DEFAULT_BOILERPLATE_PATTERNS,
) -> list[CorpusDocument]:
    """Load and clean every document listed in a manifest file.

    Relative document paths resolve against the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    docs = []
    seen: set[str] = set()
    for entry in load_manifest(manifest_path):
        if entry["id"] in seen:
            raise ValueError(f"duplicate document id in manifest: {entry['id']!r}")
        seen.add(entry["id"])
        doc_path = Path(entry["path"])
        if not doc_path.is_absolute():
            doc_path = manifest_path.parent / doc_path
        raw = doc_path.read_text(encoding="utf-8")
        docs.append(
            CorpusDocument(
                id=entry["id"],
                path=str(entry["path"]),
                title=entry["title"],
                essential=bool(entry["essential"]),
                special=bool(entry["special"]),
                raw_text=raw,
                cleaned_text=clean_document(raw, patterns),
            )
        )
    return docs


def write_chunk_store(chunks: list[Chunk], path: str | Path) -> None:
    """Write chunks as line-delimited JSON records."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for c in chunks:
            record = {
                "doc_id": c.doc_id,
                "chunk_id": c.chunk_id,
                "strategy": c.strategy.value,
                "char_span": list(c.char_span),
                "text": c.text,
                "token_count": c.token_count,
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def read_chunk_store(path: str | Path) -> list[Chunk]:
    chunks = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            chunks.append(
                Chunk(
                    doc_id=rec["doc_id"],
                    chunk_id=rec["chunk_id"],
                    text=rec["text"],
                    token_count=rec.get("token_count", DEFAULT_ESTIMATOR.count(rec["text"])),
                    char_span=tuple(rec["char_span"]),
                    strategy=ChunkStrategy(rec["strategy"]),
                )
            )
    return chunks
