"""Reference-based text-similarity metrics: BLEU, ROUGE-1/2/L, BERTScore.

All metrics tokenize the same way (lowercased word tokens, punctuation
dropped) and report values in [0, 1]. They are sentence-level; batch scoring
averages per-item values arithmetically.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .providers import DimensionMismatch, Embedder
from .tokens import word_tokens


class EmptyCandidate(ValueError):
    pass


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class ScoreTriple:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class SimilarityReport:
    bleu: float
    rouge1: ScoreTriple
    rouge2: ScoreTriple
    rougeL: ScoreTriple
    bertscore: ScoreTriple

    def as_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "rouge1": vars(self.rouge1),
            "rouge2": vars(self.rouge2),
            "rougeL": vars(self.rougeL),
            "bertscore": vars(self.bertscore),
        }


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, references: list[str], max_n: int = 4) -> float:
    """Sentence BLEU: geometric mean of clipped n-gram precisions x brevity penalty.

    Precisions use add-one smoothing for n > 1 when the raw match count is
    zero; orders longer than the candidate are skipped so that a candidate
    identical to its reference always scores 1.0. A candidate with no unigram
    match scores 0.0.
    """
    cand = word_tokens(candidate)
    if not cand:
        raise EmptyCandidate("BLEU candidate has no word tokens")
    if not references:
        raise ValueError("BLEU requires at least one reference")
    refs = [word_tokens(r) for r in references]

    c = len(cand)
    # Closest reference length; ties go to the shorter reference.
    r = min((abs(len(ref) - c), len(ref)) for ref in refs)[1]

    log_sum = 0.0
    orders = 0
    for n in range(1, min(max_n, c) + 1):
        cand_grams = _ngram_counts(cand, n)
        total = sum(cand_grams.values())
        max_ref = Counter()
        for ref in refs:
            ref_grams = _ngram_counts(ref, n)
            for g, cnt in ref_grams.items():
                if cnt > max_ref[g]:
                    max_ref[g] = cnt
        matched = sum(min(cnt, max_ref[g]) for g, cnt in cand_grams.items())
        if matched == 0:
            if n == 1:
                return 0.0
            p = 1.0 / (total + 1.0)
        else:
            p = matched / total
        log_sum += math.log(p)
        orders += 1

    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    return brevity * math.exp(log_sum / orders)


def rouge_n(candidate: str, reference: str, n: int) -> ScoreTriple:
    """N-gram multiset overlap: precision over the candidate, recall over the
    reference. Degenerate n (longer than both inputs) scores all zeros."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cand = word_tokens(candidate)
    ref = word_tokens(reference)
    if not cand or not ref:
        raise EmptyInput("ROUGE-N requires non-empty candidate and reference")
    cand_grams = _ngram_counts(cand, n)
    ref_grams = _ngram_counts(ref, n)
    overlap = sum(min(cnt, ref_grams[g]) for g, cnt in cand_grams.items())
    p = overlap / sum(cand_grams.values()) if cand_grams else 0.0
    r = overlap / sum(ref_grams.values()) if ref_grams else 0.0
    return ScoreTriple(p, r, _f1(p, r))


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> ScoreTriple:
    """Longest-common-subsequence overlap over word tokens."""
    cand = word_tokens(candidate)
    ref = word_tokens(reference)
    if not cand or not ref:
        raise EmptyInput("ROUGE-L requires non-empty candidate and reference")
    lcs = _lcs_length(cand, ref)
    p = lcs / len(cand)
    r = lcs / len(ref)
    return ScoreTriple(p, r, _f1(p, r))


def bertscore(candidate: str, reference: str, embedder: Embedder) -> ScoreTriple:
    """Greedy soft-matching of token embeddings, no IDF weighting or rescaling.

    Recall averages, over reference tokens, the best cosine against any
    candidate token; precision mirrors that over candidate tokens. Negative
    averages (possible under arbitrary embedders) clamp to 0 so every
    reported value stays in [0, 1].
    """
    if getattr(embedder, "granularity", "sequence") != "token":
        raise ValueError("bertscore needs a token-granularity embedder")
    if not word_tokens(candidate) or not word_tokens(reference):
        raise EmptyInput("BERTScore requires non-empty candidate and reference")
    cand = np.asarray(embedder.embed_tokens(candidate), dtype=np.float64)
    ref = np.asarray(embedder.embed_tokens(reference), dtype=np.float64)
    if cand.shape[1] != ref.shape[1]:
        raise DimensionMismatch(
            f"candidate dim {cand.shape[1]} != reference dim {ref.shape[1]}"
        )

    def normalize(m: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(m, axis=1, keepdims=True)
        return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)

    sim = normalize(cand) @ normalize(ref).T  # candidates x references
    p = float(np.clip(sim.max(axis=1).mean(), 0.0, 1.0))
    r = float(np.clip(sim.max(axis=0).mean(), 0.0, 1.0))
    return ScoreTriple(p, r, _f1(p, r))


def similarity_report(
    candidate: str,
    references: str | list[str],
    embedder: Embedder | None = None,
) -> SimilarityReport:
    """All metrics for one candidate. ROUGE and BERTScore use the first
    reference; BLEU uses all of them. BERTScore is zeroed when no
    token-granularity embedder is supplied."""
    refs = [references] if isinstance(references, str) else list(references)
    if not refs:
        raise ValueError("similarity_report requires at least one reference")
    primary = refs[0]
    bert = (
        bertscore(candidate, primary, embedder)
        if embedder is not None
        else ScoreTriple(0.0, 0.0, 0.0)
    )
    return SimilarityReport(
        bleu=bleu(candidate, refs),
        rouge1=rouge_n(candidate, primary, 1),
        rouge2=rouge_n(candidate, primary, 2),
        rougeL=rouge_l(candidate, primary),
        bertscore=bert,
    )


def mean_report(reports: list[SimilarityReport]) -> dict:
    """Arithmetic per-metric means across items, as a flat dict."""
    if not reports:
        raise ValueError("no reports to aggregate")

    def mean(vals):
        return sum(vals) / len(vals)

    out = {"bleu": mean([r.bleu for r in reports])}
    for name in ("rouge1", "rouge2", "rougeL", "bertscore"):
        for part in ("precision", "recall", "f1"):
            out[f"{name}_{part}"] = mean([getattr(getattr(r, name), part) for r in reports])
    return out
