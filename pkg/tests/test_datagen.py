import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpusbench.corpus import Chapter
from corpusbench.datagen import (
    EmptyText,
    GeneratorRefused,
    MCQItem,
    QAPair,
    dedup,
    flesch_reading_ease,
    generate_mcq,
    generate_qa,
    profile_dataset,
    read_mcq_dataset,
    read_qa_dataset,
    split_counts,
    split_dataset,
    validate_context_refs,
    write_mcq_dataset,
    write_qa_dataset,
)
from corpusbench.mocks import CallableChatClient, MockChatClient

CONTEXT = (
    "The sinoatrial node initiates each heartbeat from the right atrium. "
    "Vagal tone slows the pacemaker rate during rest. "
    "Escape rhythms protect the circulation when higher pacemakers fail."
)


def chapter(text=CONTEXT, doc_id="doc1", index=0):
    return Chapter(doc_id=doc_id, index=index, heading="H", text=text, token_estimate=50)


def qa(i, doc="d", question=None, split=None, checked=False, special=False):
    return QAPair(
        id=f"{doc}:{i}", doc_id=doc, chapter_index=0,
        question=question or f"Question number {i}?", answer=f"Answer {i}.",
        context_ref=f"{doc}#0", split=split, checked=checked, special=special,
    )


# ---------------------------------------------------------------------------
# generate_qa


def test_generate_qa_parses_fixed_payload():
    payload = json.dumps([
        {"question": "What slows the pacemaker rate?",
         "answer": "Vagal tone slows the pacemaker rate during rest."},
        {"question": "What initiates each heartbeat?",
         "answer": "The sinoatrial node initiates each heartbeat from the right atrium."},
        {"question": "What protects the circulation?",
         "answer": "Escape rhythms protect the circulation when higher pacemakers fail."},
    ])
    pairs = generate_qa(chapter(), CallableChatClient(lambda req: payload))
    assert len(pairs) == 3
    assert pairs[0].question == "What slows the pacemaker rate?"
    assert pairs[0].answer.startswith("Vagal tone")
    assert all(p.faithfulness_score == 1.0 for p in pairs)
    assert all(p.context_ref == "doc1#0" for p in pairs)
    assert all(p.split is None and p.checked is False for p in pairs)


def test_generate_qa_repair_retry_recovers_json():
    payload = json.dumps([{"question": "What slows the rate?",
                           "answer": "Vagal tone slows the pacemaker rate during rest."}])
    calls = []

    def flaky(req):
        calls.append(req.user)
        return "not json at all" if len(calls) == 1 else payload

    pairs = generate_qa(chapter(), CallableChatClient(flaky))
    assert len(pairs) == 1
    assert len(calls) == 2
    assert calls[1].endswith("Output: ONLY JSON.")


def test_generate_qa_faithfulness_filter():
    payload = json.dumps([
        {"question": "Q grounded?", "answer": "Vagal tone slows the pacemaker rate during rest."},
        {"question": "Q invented?", "answer": "Solar flares regulate lunar tides strongly."},
    ])
    pairs = generate_qa(chapter(), CallableChatClient(lambda req: payload),
                        faithfulness_threshold=0.5)
    assert [p.question for p in pairs] == ["Q grounded?"]
    assert pairs[0].faithfulness_score >= 0.5


def test_generate_qa_refusal_raises():
    client = MockChatClient("refuse")
    with pytest.raises(GeneratorRefused):
        generate_qa(chapter(), client)


def test_generate_qa_rejects_oversize_chapter():
    big = Chapter(doc_id="d", index=0, heading="", text="x", token_estimate=60_000)
    with pytest.raises(ValueError):
        generate_qa(big, MockChatClient("qa-generator"))


def test_generate_qa_drops_malformed_entries():
    payload = json.dumps([
        {"question": "", "answer": "Vagal tone slows the pacemaker rate during rest."},
        "just a string",
        {"question": "Valid one?", "answer": "Escape rhythms protect the circulation when higher pacemakers fail."},
    ])
    pairs = generate_qa(chapter(), CallableChatClient(lambda req: payload))
    assert [p.question for p in pairs] == ["Valid one?"]


# ---------------------------------------------------------------------------
# generate_mcq


def test_generate_mcq_valid_payload():
    payload = json.dumps([
        {"question": "Which node initiates the beat?",
         "options": ["The sinoatrial node", "The mitral valve", "The aorta", "The pericardium"],
         "correct": 0},
        {"question": "What slows the rate?",
         "options": ["Vagal tone", "Thyroxine", "Adrenaline", "Caffeine"],
         "correct": "Vagal tone"},
    ])
    items = generate_mcq(chapter(), CallableChatClient(lambda req: payload))
    assert len(items) == 2
    assert items[0].correct_index == 0
    assert items[1].correct_index == 0  # resolved from option text


def test_generate_mcq_drops_three_option_item():
    payload = json.dumps([
        {"question": "Bad?", "options": ["a", "b", "c"], "correct": 0},
        {"question": "Good?", "options": ["a", "b", "c", "d"], "correct": 2},
    ])
    items = generate_mcq(chapter(), CallableChatClient(lambda req: payload))
    assert [i.question for i in items] == ["Good?"]


def test_generate_mcq_drops_duplicate_options():
    payload = json.dumps([
        {"question": "Dup?", "options": ["same", "same", "c", "d"], "correct": 0},
    ])
    assert generate_mcq(chapter(), CallableChatClient(lambda req: payload)) == []


def test_mcq_item_invariants():
    with pytest.raises(ValueError):
        MCQItem(id="x", doc_id="d", chapter_index=0, question="q",
                options=("a", "a", "b", "c"), correct_index=0, context_ref="d#0")
    with pytest.raises(ValueError):
        MCQItem(id="x", doc_id="d", chapter_index=0, question="q",
                options=("a", "b", "c", "d"), correct_index=4, context_ref="d#0")


# ---------------------------------------------------------------------------
# split_dataset


def test_split_counts_exhaustive_rounding_oracle():
    # Enumeration oracle: for every n, counts must sum to n, stay within one
    # item of the exact quota, and keep the train fraction inside 0.8 +- 1/n.
    for n in range(1, 60):
        counts = split_counts(n)
        assert sum(counts) == n
        for count, ratio in zip(counts, (0.8, 0.1, 0.1)):
            assert abs(count - n * ratio) <= 1.0
        assert 0.8 - 1 / n <= counts[0] / n <= 0.8 + 1 / n
    assert split_counts(10) == [8, 1, 1]
    assert split_counts(7) == [6, 1, 0]


def test_split_ten_items_is_8_1_1():
    items = split_dataset([qa(i) for i in range(10)], seed=3)
    by_split = {s: sum(1 for it in items if it.split == s) for s in ("train", "validation", "test")}
    assert by_split == {"train": 8, "validation": 1, "test": 1}


def test_split_essential_doc_goes_fully_to_train():
    items = split_dataset([qa(i, doc="ess") for i in range(10)], seed=3,
                          essential_docs={"ess"})
    assert all(it.split == "train" for it in items)


def test_split_seven_items_is_6_1_0():
    items = split_dataset([qa(i) for i in range(7)], seed=11)
    by_split = {s: sum(1 for it in items if it.split == s) for s in ("train", "validation", "test")}
    assert by_split == {"train": 6, "validation": 1, "test": 0}


def test_split_is_seed_reproducible_and_per_doc_independent():
    items = [qa(i, doc="a") for i in range(9)] + [qa(i, doc="b") for i in range(6)]
    first = split_dataset(items, seed=5)
    second = split_dataset(items, seed=5)
    assert first == second
    # Document order must not matter: same assignments when docs swap order.
    swapped = split_dataset(items[9:] + items[:9], seed=5)
    by_id = {it.id: it.split for it in swapped}
    assert all(by_id[it.id] == it.split for it in first)


def test_split_rejects_presplit_items():
    with pytest.raises(ValueError):
        split_dataset([qa(0, split="train")], seed=1)


@given(st.integers(min_value=1, max_value=80), st.integers(min_value=0, max_value=2**32))
@settings(max_examples=80, deadline=None)
def test_split_train_fraction_bound_property(n, seed):
    items = split_dataset([qa(i) for i in range(n)], seed=seed)
    train = sum(1 for it in items if it.split == "train")
    assert 0.8 - 1 / n <= train / n <= 0.8 + 1 / n


# ---------------------------------------------------------------------------
# dedup


def test_dedup_case_and_whitespace():
    items = [qa(0, question="What is  the SA node?"), qa(1, question="what is the sa NODE?")]
    assert len(dedup(items)) == 1


def test_dedup_distinct_unchanged():
    items = [qa(i) for i in range(5)]
    assert dedup(items) == items


def test_dedup_cluster_counting_oracle():
    # Clusters of sizes 2, 3, 4 plus 2 singletons: 11 in, 3 + 2 out.
    items = []
    k = 0
    for cluster, size in (("alpha", 2), ("beta", 3), ("gamma", 4)):
        for _ in range(size):
            items.append(qa(k, question=f"Shared {cluster} question?"))
            k += 1
    items.append(qa(k, question="Lone question one?"))
    items.append(qa(k + 1, question="Lone question two?"))
    assert len(items) == 11
    assert len(dedup(items)) == 5


def test_dedup_idempotent():
    items = [qa(i, question=f"Q {i % 3}?") for i in range(9)]
    once = dedup(items)
    assert dedup(once) == once


# ---------------------------------------------------------------------------
# flesch


def test_flesch_the_cat_sat():
    # 3 words, 1 sentence, 3 syllables: 206.835 - 1.015*3 - 84.6*1.
    expected = 206.835 - 1.015 * 3 - 84.6 * 1
    assert abs(flesch_reading_ease("The cat sat.") - expected) < 1e-6
    assert abs(expected - 119.19) < 1e-9


def test_flesch_single_word():
    expected = 206.835 - 1.015 * 1 - 84.6 * 1
    assert abs(flesch_reading_ease("A") - expected) < 1e-6
    assert abs(expected - 121.22) < 1e-9


def test_flesch_monotone_in_difficulty():
    simple = "The cat sat. The dog ran. The sun rose."
    complex_ = ("Multisyllabic terminology proliferates unnecessarily throughout "
                "institutional documentation, obscuring fundamental interpretability.")
    assert flesch_reading_ease(complex_) < flesch_reading_ease(simple)


def test_flesch_empty_raises():
    with pytest.raises(EmptyText):
        flesch_reading_ease("   ...   ")


def test_profile_dataset_counts_and_direction():
    simple_items = [qa(i, question="The cat sat on the mat?") for i in range(3)]
    complex_items = [qa(i, question="Which pathophysiological mechanisms precipitate "
                                    "decompensation following myocardial infarction?")
                     for i in range(3)]
    simple_profile = profile_dataset(split_dataset(simple_items, seed=1))
    complex_profile = profile_dataset(split_dataset(complex_items, seed=1))
    assert simple_profile.n_items == 3
    assert sum(simple_profile.split_counts.values()) == simple_profile.n_items
    assert complex_profile.mean_flesch < simple_profile.mean_flesch


# ---------------------------------------------------------------------------
# dataset files and referential integrity


def test_qa_roundtrip(tmp_path):
    items = split_dataset([qa(i) for i in range(6)], seed=2)
    path = tmp_path / "qa.jsonl"
    write_qa_dataset(items, path)
    assert read_qa_dataset(path) == items
    schema = set(json.loads(path.read_text().splitlines()[0]))
    assert {"id", "doc_id", "question", "answer", "context_ref",
            "split", "checked", "faithfulness"} <= schema


def test_mcq_roundtrip(tmp_path):
    items = [
        MCQItem(id=f"m{i}", doc_id="d", chapter_index=0, question=f"Q{i}?",
                options=(f"a{i}", f"b{i}", f"c{i}", f"d{i}"), correct_index=i % 4,
                context_ref="d#0")
        for i in range(4)
    ]
    items = split_dataset(items, seed=2)
    path = tmp_path / "mcq.jsonl"
    write_mcq_dataset(items, path)
    assert read_mcq_dataset(path) == items
    schema = set(json.loads(path.read_text().splitlines()[0]))
    assert {"id", "doc_id", "question", "options", "correct_index",
            "split", "checked", "special"} <= schema


def test_validate_context_refs():
    chapters = {"doc1#0": chapter()}
    good = qa(0, doc="doc1")
    bad = qa(1, doc="other")
    assert validate_context_refs([good, bad], chapters) == ["other:1"]
