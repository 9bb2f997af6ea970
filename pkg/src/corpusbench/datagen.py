"""Synthetic exam generation: Q&A pairs and multiple-choice items.

Chapters go to a generator endpoint with the exam-writing prompts; returned
JSON is parsed defensively (one repair retry), grounded against the source
chapter with a faithfulness scorer, deduplicated, split per document, and
profiled for readability.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path

from . import prompts
from .corpus import Chapter, MAX_CHAPTER_TOKENS
from .providers import (
    ChatClient,
    ChatRequest,
    FaithfulnessScorer,
    ModelEndpoint,
    get_chat_client,
    get_faithfulness_scorer,
)

logger = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test")
DEFAULT_SPLIT_RATIOS = (0.8, 0.1, 0.1)
DEFAULT_FAITHFULNESS_THRESHOLD = 0.5


class GeneratorRefused(RuntimeError):
    """Generator produced no parseable JSON, even after the repair retry."""


class EmptyText(ValueError):
    pass


@dataclass(frozen=True)
class QAPair:
    id: str
    doc_id: str
    chapter_index: int
    question: str
    answer: str
    context_ref: str
    faithfulness_score: float = 0.0
    split: str | None = None
    checked: bool = False
    special: bool = False


@dataclass(frozen=True)
class MCQItem:
    id: str
    doc_id: str
    chapter_index: int
    question: str
    options: tuple[str, str, str, str]
    correct_index: int
    context_ref: str
    split: str | None = None
    checked: bool = False
    special: bool = False

    def __post_init__(self):
        if len(self.options) != 4 or len(set(self.options)) != 4:
            raise ValueError("MCQ items need exactly 4 pairwise-distinct options")
        if not 0 <= self.correct_index <= 3:
            raise ValueError(f"correct_index out of range: {self.correct_index}")


@dataclass(frozen=True)
class DatasetProfile:
    n_items: int
    mean_flesch: float
    split_counts: dict


def context_ref(doc_id: str, chapter_index: int) -> str:
    return f"{doc_id}#{chapter_index}"


# ---------------------------------------------------------------------------
# Generation


def _client(generator: ModelEndpoint | ChatClient) -> ChatClient:
    if hasattr(generator, "chat"):
        return generator  # already a client
    return get_chat_client(generator)


def _parse_json_array(text: str):
    """Pull the first JSON array out of possibly chatty model output."""
    text = text.strip()
    if text.startswith("```"):
        text = re.sub(r"^```[a-zA-Z]*\n?|```$", "", text).strip()
    try:
        parsed = json.loads(text)
        return parsed if isinstance(parsed, list) else None
    except ValueError:
        pass
    start, end = text.find("["), text.rfind("]")
    if 0 <= start < end:
        try:
            parsed = json.loads(text[start:end + 1])
            return parsed if isinstance(parsed, list) else None
        except ValueError:
            return None
    return None


def _generate_items(client: ChatClient, system: str, user: str) -> list:
    response = client.chat(ChatRequest(system=system, user=user))
    items = _parse_json_array(response.text)
    if items is None:
        logger.info("generator output was not JSON; issuing one repair retry")
        retry = client.chat(ChatRequest(system=system, user=user + "\n" + prompts.JSON_REPAIR_REMINDER))
        items = _parse_json_array(retry.text)
    if items is None:
        raise GeneratorRefused("generator returned no parseable JSON array after repair retry")
    return items


def generate_qa(
    chapter: Chapter,
    generator: ModelEndpoint | ChatClient,
    scorer: FaithfulnessScorer | None = None,
    faithfulness_threshold: float = DEFAULT_FAITHFULNESS_THRESHOLD,
    max_items_per_chapter: int | None = None,
    special: bool = False,
) -> list[QAPair]:
    """Prompt the generator for free-text Q&A pairs grounded in one chapter.

    Pairs whose answers score below the faithfulness threshold against the
    chapter text are dropped, as are malformed entries, each with a logged
    reason.
    """
    if chapter.token_estimate > MAX_CHAPTER_TOKENS:
        raise ValueError(
            f"chapter {chapter.doc_id}#{chapter.index} exceeds the "
            f"{MAX_CHAPTER_TOKENS}-token generation window"
        )
    scorer = scorer or get_faithfulness_scorer()
    user = prompts.QA_USER_TEMPLATE.format(
        context=chapter.text, format_instructions=prompts.QA_FORMAT_INSTRUCTIONS
    )
    raw_items = _generate_items(_client(generator), prompts.QA_SYSTEM_PROMPT, user)

    pairs: list[QAPair] = []
    for raw in raw_items:
        if max_items_per_chapter is not None and len(pairs) >= max_items_per_chapter:
            break
        if not isinstance(raw, dict):
            logger.info("dropping non-object generation item: %r", raw)
            continue
        question = str(raw.get("question", "")).strip()
        answer = str(raw.get("answer", "")).strip()
        if not question or not answer:
            logger.info("dropping item with empty question or answer")
            continue
        score = scorer.score(chapter.text, answer)
        if score < faithfulness_threshold:
            logger.info("dropping unfaithful pair (%.2f < %.2f): %s",
                        score, faithfulness_threshold, question[:60])
            continue
        pairs.append(
            QAPair(
                id=f"{chapter.doc_id}:{chapter.index}:qa{len(pairs)}",
                doc_id=chapter.doc_id,
                chapter_index=chapter.index,
                question=question,
                answer=answer,
                context_ref=context_ref(chapter.doc_id, chapter.index),
                faithfulness_score=score,
                special=special,
            )
        )
    return pairs


def generate_mcq(
    chapter: Chapter,
    generator: ModelEndpoint | ChatClient,
    max_items_per_chapter: int | None = None,
    special: bool = False,
) -> list[MCQItem]:
    """Prompt the generator for 4-option multiple-choice items.

    Entries violating the option contract (exactly 4, pairwise distinct,
    resolvable correct index) are dropped with a logged reason.
    """
    if chapter.token_estimate > MAX_CHAPTER_TOKENS:
        raise ValueError(
            f"chapter {chapter.doc_id}#{chapter.index} exceeds the "
            f"{MAX_CHAPTER_TOKENS}-token generation window"
        )
    user = prompts.MCQ_USER_TEMPLATE.format(
        context=chapter.text, format_instructions=prompts.MCQ_FORMAT_INSTRUCTIONS
    )
    raw_items = _generate_items(_client(generator), prompts.MCQ_SYSTEM_PROMPT, user)

    items: list[MCQItem] = []
    for raw in raw_items:
        if max_items_per_chapter is not None and len(items) >= max_items_per_chapter:
            break
        if not isinstance(raw, dict):
            logger.info("dropping non-object MCQ item: %r", raw)
            continue
        question = str(raw.get("question", "")).strip()
        options = raw.get("options")
        correct = raw.get("correct", raw.get("correct_index"))
        if not question or not isinstance(options, list):
            logger.info("dropping MCQ item with missing question or options")
            continue
        options = [str(o).strip() for o in options]
        if len(options) != 4 or len(set(options)) != 4:
            logger.info("dropping MCQ item without 4 distinct options: %s", question[:60])
            continue
        if isinstance(correct, str) and correct in options:
            correct = options.index(correct)
        if not isinstance(correct, int) or not 0 <= correct <= 3:
            logger.info("dropping MCQ item with unresolvable correct option: %s", question[:60])
            continue
        items.append(
            MCQItem(
                id=f"{chapter.doc_id}:{chapter.index}:mcq{len(items)}",
                doc_id=chapter.doc_id,
                chapter_index=chapter.index,
                question=question,
                options=tuple(options),
                correct_index=correct,
                context_ref=context_ref(chapter.doc_id, chapter.index),
                special=special,
            )
        )
    return items


# ---------------------------------------------------------------------------
# Splitting, dedup, profiling


def _doc_rng(seed: int, doc_id: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{doc_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def split_counts(n: int, ratios=DEFAULT_SPLIT_RATIOS) -> list[int]:
    """Per-split item counts for one document.

    Each split in order takes round-half-up(n * ratio) capped by what is
    left; the final split takes the remainder. For 10 items at 80/10/10 this
    is 8/1/1, for 7 items 6/1/0.
    """
    counts = []
    remaining = n
    for ratio in ratios[:-1]:
        c = min(int(math.floor(n * ratio + 0.5)), remaining)
        counts.append(c)
        remaining -= c
    counts.append(remaining)
    return counts


def split_dataset(items, ratios=DEFAULT_SPLIT_RATIOS, seed: int = 0, essential_docs=frozenset()):
    """Assign train/validation/test labels per document with seeded shuffling.

    Items from essential documents all go to train. Each document is split
    independently (the RNG is derived from seed and doc id), so the result
    does not depend on document order. Items must not be split already.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    if any(item.split is not None for item in items):
        raise ValueError("split_dataset called on items that already carry a split")

    by_doc: dict[str, list[int]] = {}
    for idx, item in enumerate(items):
        by_doc.setdefault(item.doc_id, []).append(idx)

    assigned: dict[int, str] = {}
    for doc_id, indices in by_doc.items():
        if doc_id in essential_docs:
            for idx in indices:
                assigned[idx] = "train"
            continue
        order = list(indices)
        _doc_rng(seed, doc_id).shuffle(order)
        counts = split_counts(len(order), ratios)
        cursor = 0
        for split_name, count in zip(SPLITS, counts):
            for idx in order[cursor:cursor + count]:
                assigned[idx] = split_name
            cursor += count

    return [replace(item, split=assigned[idx]) for idx, item in enumerate(items)]


def _normalized_question(question: str) -> str:
    return " ".join(question.split()).casefold()


def dedup(items):
    """Drop later items whose normalized question text repeats an earlier one."""
    seen: set[str] = set()
    out = []
    for item in items:
        key = _normalized_question(item.question)
        if key in seen:
            continue
        seen.add(key)
        out.append(item)
    return out


# ---------------------------------------------------------------------------
# Readability

_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")
_TERMINAL_RE = re.compile(r"[.!?]+")


def _syllables(word: str) -> int:
    w = re.sub(r"[^a-z]", "", word.lower())
    if not w:
        return 1
    groups = len(_VOWEL_GROUP_RE.findall(w))
    if groups > 1 and w.endswith("e") and not w.endswith("le"):
        groups -= 1
    return max(groups, 1)


def flesch_reading_ease(text: str) -> float:
    """206.835 - 1.015 * words/sentence - 84.6 * syllables/word.

    Words are whitespace units containing at least one alphanumeric
    character; sentences are runs of terminal punctuation (minimum one);
    syllables come from a vowel-group heuristic with a silent-e adjustment.
    The raw value is reported unclamped.
    """
    words = [w for w in text.split() if any(ch.isalnum() for ch in w)]
    if not words:
        raise EmptyText("Flesch reading ease needs at least one word")
    sentences = max(len(_TERMINAL_RE.findall(text)), 1)
    syllables = sum(_syllables(w) for w in words)
    return 206.835 - 1.015 * (len(words) / sentences) - 84.6 * (syllables / len(words))


def profile_dataset(items) -> DatasetProfile:
    """Item count, mean question readability, and split sizes."""
    if not items:
        raise ValueError("cannot profile an empty dataset")
    counts = Counter(item.split if item.split is not None else "unsplit" for item in items)
    mean = sum(flesch_reading_ease(item.question) for item in items) / len(items)
    return DatasetProfile(n_items=len(items), mean_flesch=mean, split_counts=dict(sorted(counts.items())))


# ---------------------------------------------------------------------------
# Dataset and chapter files (line-delimited JSON)


def write_qa_dataset(items: list[QAPair], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for it in items:
            fh.write(json.dumps({
                "id": it.id,
                "doc_id": it.doc_id,
                "chapter_index": it.chapter_index,
                "question": it.question,
                "answer": it.answer,
                "context_ref": it.context_ref,
                "split": it.split,
                "checked": it.checked,
                "special": it.special,
                "faithfulness": it.faithfulness_score,
            }, ensure_ascii=False, sort_keys=True) + "\n")


def read_qa_dataset(path: str | Path) -> list[QAPair]:
    items = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        items.append(QAPair(
            id=rec["id"],
            doc_id=rec["doc_id"],
            chapter_index=rec.get("chapter_index", 0),
            question=rec["question"],
            answer=rec["answer"],
            context_ref=rec["context_ref"],
            faithfulness_score=rec.get("faithfulness", 0.0),
            split=rec.get("split"),
            checked=rec.get("checked", False),
            special=rec.get("special", False),
        ))
    return items


def write_mcq_dataset(items: list[MCQItem], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for it in items:
            fh.write(json.dumps({
                "id": it.id,
                "doc_id": it.doc_id,
                "chapter_index": it.chapter_index,
                "question": it.question,
                "options": list(it.options),
                "correct_index": it.correct_index,
                "context_ref": it.context_ref,
                "split": it.split,
                "checked": it.checked,
                "special": it.special,
            }, ensure_ascii=False, sort_keys=True) + "\n")


def read_mcq_dataset(path: str | Path) -> list[MCQItem]:
    items = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        items.append(MCQItem(
            id=rec["id"],
            doc_id=rec["doc_id"],
            chapter_index=rec.get("chapter_index", 0),
            question=rec["question"],
            options=tuple(rec["options"]),
            correct_index=rec["correct_index"],
            context_ref=rec["context_ref"],
            split=rec.get("split"),
            checked=rec.get("checked", False),
            special=rec.get("special", False),
        ))
    return items


def write_chapter_store(chapters: list[Chapter], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for ch in chapters:
            fh.write(json.dumps({
                "doc_id": ch.doc_id,
                "index": ch.index,
                "heading": ch.heading,
                "text": ch.text,
                "token_estimate": ch.token_estimate,
            }, ensure_ascii=False, sort_keys=True) + "\n")


def read_chapter_store(path: str | Path) -> dict[str, Chapter]:
    """Chapters keyed by context_ref (``doc_id#index``)."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        ch = Chapter(
            doc_id=rec["doc_id"],
            index=rec["index"],
            heading=rec.get("heading", ""),
            text=rec["text"],
            token_estimate=rec.get("token_estimate", 0),
        )
        out[context_ref(ch.doc_id, ch.index)] = ch
    return out


def validate_context_refs(items, chapters: dict[str, Chapter]) -> list[str]:
    """Referential-integrity pass: ids of items whose context_ref does not
    resolve to a stored chapter."""
    return [item.id for item in items if item.context_ref not in chapters]
