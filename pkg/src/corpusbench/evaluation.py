"""The four evaluation layers: multiple choice, text similarity, LLM judge,
and human-label ingestion.

Each run_* helper evaluates one system over a list of items and emits one
EvalRecord per item. Single-item failures (transport errors, unparseable
responses) are recorded with score 0 and a flag; they never abort the run.
Response texts are stored on every record so scores can be recomputed
offline without re-querying any endpoint.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import prompts
from .corpus import Chapter
from .datagen import MCQItem, QAPair
from .grading import LABEL_SCORES, UnknownCategory, canonical_category
from .metrics import EmptyCandidate, EmptyInput, similarity_report
from .providers import (
    ChatClient,
    ChatRequest,
    Embedder,
    ModelEndpoint,
    ProviderError,
    get_chat_client,
)
from .rag import RetrievalConfig, RetrievedContext, VectorStore, answer_with_rag
from .ranking import MisalignedVectors, ScoreVector

logger = logging.getLogger(__name__)

LAYERS = ("mcq", "text_sim", "judge", "human")
LETTERS = "ABCD"

_LETTER_RE = re.compile(r"\b([A-D])\b")


class UnknownLabel(ValueError):
    pass


class UnknownItem(KeyError):
    pass


class ContextUnresolvable(KeyError):
    pass


@dataclass(frozen=True)
class EvalRecord:
    system: str
    item_id: str
    layer: str
    response_text: str
    score: float
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0,1], got {self.score}")


@dataclass
class SystemUnderTest:
    """One evaluable system: a chat client, optionally wrapped in RAG."""

    name: str
    client: ChatClient
    rag_store: VectorStore | None = None
    rag_config: RetrievalConfig | None = None
    rag_embedder: Embedder | None = None

    @classmethod
    def plain(cls, name: str, endpoint: ModelEndpoint | ChatClient) -> "SystemUnderTest":
        client = endpoint if hasattr(endpoint, "chat") else get_chat_client(endpoint)
        return cls(name=name, client=client)

    def answer(self, user_text: str, system_prompt: str | None = None) -> tuple[str, RetrievedContext | None]:
        if self.rag_store is not None:
            result = answer_with_rag(
                self.client, self.rag_store, self.rag_config, user_text, self.rag_embedder
            )
            return result.text, result.retrieved
        req = ChatRequest(system=system_prompt or prompts.PLAIN_ANSWER_SYSTEM_PROMPT, user=user_text)
        return self.client.chat(req).text, None


def _derive_item_seed(seed: int, item_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{item_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _retrieved_ids(ctx: RetrievedContext | None) -> list[str]:
    return [c.chunk_id for c in ctx.chunks] if ctx is not None else []


def run_mcq(system: SystemUnderTest, items: list[MCQItem], seed: int = 0) -> list[EvalRecord]:
    """Ask every multiple-choice item with per-item seeded option shuffling.

    The answer is the first standalone capital A-D in the response; anything
    else flags the item as unparseable with score 0 (position bias is
    controlled by the shuffle, not by the parser).
    """
    if not items:
        raise ValueError("run_mcq needs at least one item")
    records = []
    for item in items:
        rng = random.Random(_derive_item_seed(seed, item.id))
        permutation = rng.sample(range(4), 4)  # slot j shows original option permutation[j]
        correct_slot = permutation.index(item.correct_index)
        correct_letter = LETTERS[correct_slot]
        options_block = "\n".join(
            f"{LETTERS[j]}. {item.options[permutation[j]]}" for j in range(4)
        )
        prompt = prompts.MCQ_ANSWER_TEMPLATE.format(question=item.question, options=options_block)
        detail: dict = {"permutation": permutation, "correct_letter": correct_letter}
        try:
            response, retrieved = system.answer(prompt, system_prompt=prompts.MCQ_ANSWER_SYSTEM_PROMPT)
        except ProviderError as exc:
            logger.warning("mcq item %s failed on %s: %s", item.id, system.name, exc)
            records.append(EvalRecord(
                system=system.name, item_id=item.id, layer="mcq", response_text="",
                score=0.0, detail=detail | {"flag": "transport_error"},
            ))
            continue
        if retrieved is not None:
            detail["retrieved"] = _retrieved_ids(retrieved)
        match = _LETTER_RE.search(response)
        if match is None:
            detail["flag"] = "unparseable"
            detail["parsed_letter"] = None
            score = 0.0
        else:
            detail["parsed_letter"] = match.group(1)
            score = 1.0 if match.group(1) == correct_letter else 0.0
        records.append(EvalRecord(
            system=system.name, item_id=item.id, layer="mcq",
            response_text=response, score=score, detail=detail,
        ))
    return records


def run_text_sim(system: SystemUnderTest, qa_items: list[QAPair], embedder: Embedder | None = None) -> list[EvalRecord]:
    """Free-text answers scored with the full similarity report.

    The scalar score that feeds the bootstrap is ROUGE-1 F1; the whole report
    rides along in the record detail. Items must come from the test split.
    """
    if not qa_items:
        raise ValueError("run_text_sim needs at least one item")
    outside = [it.id for it in qa_items if it.split != "test"]
    if outside:
        raise ValueError(f"text-similarity evaluation expects test-split items; got {outside[:5]}")
    records = []
    for item in qa_items:
        detail: dict = {}
        try:
            response, retrieved = system.answer(item.question)
        except ProviderError as exc:
            logger.warning("text_sim item %s failed on %s: %s", item.id, system.name, exc)
            records.append(EvalRecord(
                system=system.name, item_id=item.id, layer="text_sim", response_text="",
                score=0.0, detail={"flag": "transport_error"},
            ))
            continue
        if retrieved is not None:
            detail["retrieved"] = _retrieved_ids(retrieved)
        try:
            report = similarity_report(response, item.answer, embedder)
            detail["metrics"] = report.as_dict()
            score = report.rouge1.f1
        except (EmptyCandidate, EmptyInput):
            detail["flag"] = "unscorable"
            score = 0.0
        records.append(EvalRecord(
            system=system.name, item_id=item.id, layer="text_sim",
            response_text=response, score=score, detail=detail,
        ))
    return records


def _extract_json_object(text: str) -> dict | None:
    """First balanced JSON object in the text, or None."""
    start = text.find("{")
    while start != -1:
        depth = 0
        for i in range(start, len(text)):
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(text[start:i + 1])
                        return obj if isinstance(obj, dict) else None
                    except ValueError:
                        break
        start = text.find("{", start + 1)
    return None


def run_judge(
    system: SystemUnderTest,
    qa_items: list[QAPair],
    judge: ModelEndpoint | ChatClient,
    chapters: dict[str, Chapter],
) -> list[EvalRecord]:
    """Correct/incorrect verdicts from a judge endpoint.

    The judge sees the question, the reference answer, the source chapter the
    question was generated from (hallucination control), and the system's
    answer; it must reply with a JSON verdict object. One repair retry, then
    the item is flagged with score 0.
    """
    if not qa_items:
        raise ValueError("run_judge needs at least one item")
    unresolved = [it.id for it in qa_items if it.context_ref not in chapters]
    if unresolved:
        raise ContextUnresolvable(f"no stored chapter for items {unresolved[:5]}")
    judge_client = judge if hasattr(judge, "chat") else get_chat_client(judge)

    records = []
    for item in qa_items:
        detail: dict = {}
        try:
            response, retrieved = system.answer(item.question)
        except ProviderError as exc:
            logger.warning("judge item %s failed on %s: %s", item.id, system.name, exc)
            records.append(EvalRecord(
                system=system.name, item_id=item.id, layer="judge", response_text="",
                score=0.0, detail={"flag": "transport_error"},
            ))
            continue
        if retrieved is not None:
            detail["retrieved"] = _retrieved_ids(retrieved)
        judge_user = prompts.JUDGE_USER_TEMPLATE.format(
            question=item.question,
            reference=item.answer,
            context=chapters[item.context_ref].text,
            answer=response,
        )
        verdict_obj = None
        try:
            reply = judge_client.chat(ChatRequest(system=prompts.JUDGE_SYSTEM_PROMPT, user=judge_user))
            verdict_obj = _extract_json_object(reply.text)
            if verdict_obj is None or verdict_obj.get("verdict") not in ("correct", "incorrect"):
                retry = judge_client.chat(ChatRequest(
                    system=prompts.JUDGE_SYSTEM_PROMPT,
                    user=judge_user + "\n" + prompts.JSON_REPAIR_REMINDER,
                ))
                verdict_obj = _extract_json_object(retry.text)
        except ProviderError as exc:
            logger.warning("judge call for item %s failed: %s", item.id, exc)
            verdict_obj = None

        if verdict_obj is None or verdict_obj.get("verdict") not in ("correct", "incorrect"):
            detail["flag"] = "judge_unparseable"
            score = 0.0
        else:
            detail["verdict"] = verdict_obj["verdict"]
            detail["rationale"] = str(verdict_obj.get("rationale", ""))
            score = 1.0 if verdict_obj["verdict"] == "correct" else 0.0
        records.append(EvalRecord(
            system=system.name, item_id=item.id, layer="judge",
            response_text=response, score=score, detail=detail,
        ))
    return records


def ingest_human_labels(
    csv_source: str | Path,
    known_items: set[tuple[str, str]] | None = None,
) -> list[EvalRecord]:
    """Turn a grading CSV export {system, item_id, category} into human-layer
    records using the standard category-to-score mapping."""
    if isinstance(csv_source, (str, Path)) and "\n" not in str(csv_source):
        text = Path(csv_source).read_text(encoding="utf-8")
    else:
        text = str(csv_source)
    records = []
    for row in csv.DictReader(text.splitlines()):
        try:
            category = canonical_category(row["category"])
        except UnknownCategory as exc:
            raise UnknownLabel(str(exc)) from None
        key = (row["system"], row["item_id"])
        if known_items is not None and key not in known_items:
            raise UnknownItem(f"no stored response for {key}")
        records.append(EvalRecord(
            system=row["system"], item_id=row["item_id"], layer="human",
            response_text="", score=LABEL_SCORES[category], detail={"category": category},
        ))
    return records


# ---------------------------------------------------------------------------
# Subsets, record files, run manifests


def filter_subset(items, subset: str):
    """Evaluation subsets: ``full`` is everything outside train, ``special``
    restricts to special-flagged documents, ``checked`` to expert-verified
    items, ``test`` to the held-out split."""
    if subset == "full":
        return [it for it in items if it.split != "train"]
    if subset == "special":
        return [it for it in items if it.split != "train" and it.special]
    if subset == "checked":
        return [it for it in items if it.split != "train" and it.checked]
    if subset == "test":
        return [it for it in items if it.split == "test"]
    raise ValueError(f"unknown subset {subset!r} (full|special|checked|test)")


def write_records(records: list[EvalRecord], path: str | Path, append: bool = False) -> None:
    mode = "a" if append else "w"
    with Path(path).open(mode, encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({
                "system": r.system, "item_id": r.item_id, "layer": r.layer,
                "response_text": r.response_text, "score": r.score, "detail": r.detail,
            }, ensure_ascii=False, sort_keys=True) + "\n")


def read_records(path: str | Path) -> list[EvalRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        records.append(EvalRecord(
            system=rec["system"], item_id=rec["item_id"], layer=rec["layer"],
            response_text=rec.get("response_text", ""), score=rec["score"],
            detail=rec.get("detail", {}),
        ))
    return records


def score_vectors(records: list[EvalRecord], layer: str) -> list[ScoreVector]:
    """Aligned per-system score vectors for one layer.

    All systems must cover exactly the same item ids; items sort by id so the
    pairing is stable regardless of record order.
    """
    by_system: dict[str, dict[str, float]] = {}
    for r in records:
        if r.layer != layer:
            continue
        by_system.setdefault(r.system, {})[r.item_id] = r.score
    if not by_system:
        return []
    id_sets = {frozenset(scores) for scores in by_system.values()}
    if len(id_sets) != 1:
        raise MisalignedVectors(
            f"systems cover different item sets in layer {layer!r}: "
            f"{sorted(len(s) for s in id_sets)} items"
        )
    item_ids = tuple(sorted(next(iter(id_sets))))
    return [
        ScoreVector(
            system=system, layer=layer, item_ids=item_ids,
            scores=np.array([scores[i] for i in item_ids], dtype=np.float64),
        )
        for system, scores in sorted(by_system.items())
    ]


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_run_manifest(
    path: str | Path,
    config: dict,
    dataset_paths: dict[str, str | Path],
    endpoint_roster: list[str],
    seed: int,
) -> dict:
    """Persist the reproducibility manifest: config hash, dataset hashes,
    endpoint roster, seed, prompt versions."""
    manifest = {
        "config_hash": hashlib.sha256(
            json.dumps(config, sort_keys=True, ensure_ascii=False).encode("utf-8")
        ).hexdigest(),
        "dataset_hashes": {name: file_sha256(p) for name, p in sorted(dataset_paths.items())},
        "endpoint_roster": sorted(endpoint_roster),
        "seed": seed,
        "prompt_versions": {
            "qa": prompts.QA_PROMPT_VERSION,
            "mcq": prompts.MCQ_PROMPT_VERSION,
            "rag": prompts.RAG_TEMPLATE_VERSION,
            "judge": prompts.JUDGE_PROMPT_VERSION,
        },
    }
    Path(path).write_text(
        json.dumps(manifest, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    return manifest
