import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpusbench.metrics import (
    EmptyCandidate,
    EmptyInput,
    bertscore,
    bleu,
    mean_report,
    rouge_l,
    rouge_n,
    similarity_report,
)
from corpusbench.mocks import HashEmbedder, OneHotEmbedder
from corpusbench.providers import DimensionMismatch

TOL = 1e-9


class FixedEmbedder:
    """Token embeddings pinned to explicit vectors (test oracle fixture)."""

    granularity = "token"
    name = "fixed"

    def __init__(self, table):
        self.table = {k: np.array(v, dtype=np.float64) for k, v in table.items()}
        self.dimension = len(next(iter(table.values())))

    def embed_tokens(self, text):
        return np.stack([self.table[t] for t in text.lower().split()])


# ---------------------------------------------------------------------------
# Golden fixture suite: every expected value is hand arithmetic, written as
# the explicit formula it came from.

BLEU_CASES = [
    # (candidate, references, expected)
    ("the quick brown fox", ["the quick brown fox"], 1.0),
    ("alpha beta", ["gamma delta"], 0.0),
    # c=3, r=6, all precisions 1 -> brevity penalty alone.
    ("the cat sat", ["the cat sat on the mat"], math.exp(1 - 6 / 3)),
    # p = (1, 3/4, 2/3, 1/2), c=5, r=6.
    ("the cat sat on mat", ["the cat sat on the mat"],
     math.exp(1 - 6 / 5) * (1.0 * (3 / 4) * (2 / 3) * (1 / 2)) ** (1 / 4)),
    # Bigram miss smoothed add-one: p2 = 1/(1+1); orders capped at c=2; r=3.
    ("x y", ["x z y"], math.exp(1 - 3 / 2) * math.sqrt(1.0 * 0.5)),
    # Clipping against the best reference: p1=2/3, p2=1/2, p3 smoothed 1/2; r=3=c.
    ("the the the", ["the cat", "the the dog"], ((2 / 3) * 0.5 * 0.5) ** (1 / 3)),
]


@pytest.mark.parametrize("candidate,references,expected", BLEU_CASES)
def test_bleu_golden(candidate, references, expected):
    assert abs(bleu(candidate, references) - expected) < TOL


ROUGE_N_CASES = [
    # (candidate, reference, n, P, R, F1)
    ("a b", "a c", 1, 0.5, 0.5, 0.5),
    ("same text here", "same text here", 1, 1.0, 1.0, 1.0),
    # overlap bigrams 3 of cand-4 / ref-5 -> F1 = 2*(3/4)(3/5)/((3/4)+(3/5)) = 2/3.
    ("the cat sat on mat", "the cat sat on the mat", 2, 3 / 4, 3 / 5, 2 / 3),
    ("a b", "a c", 5, 0.0, 0.0, 0.0),  # degenerate n
]


@pytest.mark.parametrize("candidate,reference,n,p,r,f1", ROUGE_N_CASES)
def test_rouge_n_golden(candidate, reference, n, p, r, f1):
    got = rouge_n(candidate, reference, n)
    assert abs(got.precision - p) < TOL
    assert abs(got.recall - r) < TOL
    assert abs(got.f1 - f1) < TOL


ROUGE_L_CASES = [
    # LCS("a x b y", "a b") = 2 -> P=1/2, R=1, F1=2*(1/2)*1/(3/2).
    ("a x b y", "a b", 0.5, 1.0, 2 * 0.5 * 1.0 / 1.5),
    ("w1 w2 w3", "w1 w2 w3", 1.0, 1.0, 1.0),
    ("a b c", "x y z", 0.0, 0.0, 0.0),
]


@pytest.mark.parametrize("candidate,reference,p,r,f1", ROUGE_L_CASES)
def test_rouge_l_golden(candidate, reference, p, r, f1):
    got = rouge_l(candidate, reference)
    assert abs(got.precision - p) < TOL
    assert abs(got.recall - r) < TOL
    assert abs(got.f1 - f1) < TOL


def test_bertscore_three_by_two_matrix_oracle():
    embedder = FixedEmbedder({"aa": (1.0, 0.0), "bb": (0.0, 1.0), "cc": (0.6, 0.8)})
    got = bertscore("aa bb cc", "aa cc", embedder)

    # Exhaustive max-over-rows/columns oracle on the 3x2 cosine matrix.
    cand = embedder.embed_tokens("aa bb cc")
    ref = embedder.embed_tokens("aa cc")
    sims = np.zeros((3, 2))
    for i in range(3):
        for j in range(2):
            a, b = cand[i], ref[j]
            sims[i, j] = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    p_oracle = sum(max(sims[i]) for i in range(3)) / 3
    r_oracle = sum(max(sims[:, j]) for j in range(2)) / 2

    assert abs(got.precision - p_oracle) < TOL
    assert abs(got.recall - r_oracle) < TOL
    # Hand arithmetic: P = (1 + 0.8 + 1)/3 = 14/15, R = 1, F1 = 28/29.
    assert abs(got.precision - 14 / 15) < TOL
    assert abs(got.recall - 1.0) < TOL
    assert abs(got.f1 - 28 / 29) < TOL


def test_bertscore_identity_and_disjoint():
    hash_embedder = HashEmbedder(dimension=32, seed=5, granularity="token")
    same = bertscore("heart rate rises", "heart rate rises", hash_embedder)
    assert abs(same.precision - 1.0) < 1e-6
    assert abs(same.recall - 1.0) < 1e-6
    assert abs(same.f1 - 1.0) < 1e-6

    onehot = OneHotEmbedder(["aa", "bb", "cc", "dd"])
    disjoint = bertscore("aa bb", "cc dd", onehot)
    assert disjoint == (disjoint.__class__(0.0, 0.0, 0.0))


def test_bertscore_errors():
    onehot = OneHotEmbedder(["aa"])
    with pytest.raises(EmptyInput):
        bertscore("", "aa", onehot)
    with pytest.raises(ValueError):
        bertscore("aa", "aa", HashEmbedder(granularity="sequence"))

    class TwoDim(FixedEmbedder):
        def embed_tokens(self, text):
            if text == "wide input":
                return np.ones((2, 3))
            return np.ones((1, 2))

    with pytest.raises(DimensionMismatch):
        bertscore("wide input", "narrow", TwoDim({"x": (1.0, 0.0)}))


def test_empty_inputs_raise():
    with pytest.raises(EmptyCandidate):
        bleu("", ["ref"])
    with pytest.raises(EmptyInput):
        rouge_n("a", "", 1)
    with pytest.raises(EmptyInput):
        rouge_l("", "b")


# ---------------------------------------------------------------------------
# Properties


@given(st.lists(st.sampled_from("abcde"), min_size=1, max_size=12),
       st.lists(st.sampled_from("abcde"), min_size=1, max_size=12))
@settings(max_examples=100, deadline=None)
def test_rouge_precision_recall_duality(tokens_a, tokens_b):
    a, b = " ".join(tokens_a), " ".join(tokens_b)
    ab = rouge_n(a, b, 1)
    ba = rouge_n(b, a, 1)
    assert abs(ab.precision - ba.recall) < TOL
    assert abs(ab.recall - ba.precision) < TOL


@given(st.lists(st.sampled_from(["red", "green", "blue", "cyan"]), min_size=1, max_size=10))
@settings(max_examples=50, deadline=None)
def test_bleu_self_identity(tokens):
    assert abs(bleu(" ".join(tokens), [" ".join(tokens)]) - 1.0) < TOL


@given(st.lists(st.sampled_from(["one", "two", "three", "four"]), min_size=1, max_size=8),
       st.lists(st.sampled_from(["one", "two", "three", "four"]), min_size=1, max_size=8))
@settings(max_examples=60, deadline=None)
def test_all_metrics_within_unit_interval(tokens_a, tokens_b):
    a, b = " ".join(tokens_a), " ".join(tokens_b)
    embedder = HashEmbedder(dimension=16, seed=2, granularity="token")
    report = similarity_report(a, b, embedder)
    flat = [report.bleu]
    for triple in (report.rouge1, report.rouge2, report.rougeL, report.bertscore):
        flat += [triple.precision, triple.recall, triple.f1]
    assert all(0.0 <= v <= 1.0 for v in flat)
    for triple in (report.rouge1, report.rouge2, report.rougeL, report.bertscore):
        expected_f1 = (2 * triple.precision * triple.recall / (triple.precision + triple.recall)
                       if triple.precision + triple.recall else 0.0)
        assert abs(triple.f1 - expected_f1) < TOL


# ---------------------------------------------------------------------------
# Independent counting oracle for ROUGE on random strings


def rouge1_oracle(candidate, reference):
    cand = candidate.lower().split()
    ref = reference.lower().split()
    ref_counts = Counter(ref)
    hit = 0
    for tok in cand:
        if ref_counts[tok] > 0:
            ref_counts[tok] -= 1
            hit += 1
    return hit / len(cand), hit / len(ref)


@given(st.lists(st.sampled_from("pqrs"), min_size=1, max_size=10),
       st.lists(st.sampled_from("pqrs"), min_size=1, max_size=10))
@settings(max_examples=100, deadline=None)
def test_rouge1_against_counting_oracle(tokens_a, tokens_b):
    a, b = " ".join(tokens_a), " ".join(tokens_b)
    p_oracle, r_oracle = rouge1_oracle(a, b)
    got = rouge_n(a, b, 1)
    assert abs(got.precision - p_oracle) < TOL
    assert abs(got.recall - r_oracle) < TOL


def test_mean_report_averages():
    embedder = OneHotEmbedder(["a", "b", "c"])
    reports = [
        similarity_report("a b", "a b", embedder),
        similarity_report("a b", "c", embedder),
    ]
    means = mean_report(reports)
    assert abs(means["rouge1_f1"] - (1.0 + 0.0) / 2) < TOL
    assert abs(means["bleu"] - (1.0 + 0.0) / 2) < TOL
