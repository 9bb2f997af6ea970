import json
import math
import random

import numpy as np
import pytest

from corpusbench.corpus import Chapter
from corpusbench.datagen import MCQItem, QAPair
from corpusbench.evaluation import (
    ContextUnresolvable,
    EvalRecord,
    SystemUnderTest,
    UnknownItem,
    UnknownLabel,
    _extract_json_object,
    filter_subset,
    ingest_human_labels,
    read_records,
    run_judge,
    run_mcq,
    run_text_sim,
    score_vectors,
    write_records,
    write_run_manifest,
)
from corpusbench.mocks import CallableChatClient, MockChatClient, OneHotEmbedder
from corpusbench.providers import TransientProviderError
from corpusbench.ranking import MisalignedVectors


def mcq_item(i, correct=0, marker=False):
    options = [f"option {i} {c}" for c in "wxyz"]
    if marker:
        options[correct] = options[correct] + " [*]"
    return MCQItem(
        id=f"m{i}", doc_id="d", chapter_index=0, question=f"Question {i}?",
        options=tuple(options), correct_index=correct, context_ref="d#0", split="test",
    )


def qa_item(i, doc="d", split="test"):
    return QAPair(
        id=f"q{i}", doc_id=doc, chapter_index=0,
        question=f"What is fact number {i}?",
        answer=f"Fact number {i} concerns the cardiac cycle stage {i}.",
        context_ref=f"{doc}#0", split=split,
    )


CHAPTERS = {
    "d#0": Chapter(doc_id="d", index=0, heading="H",
                   text="Fact number 0 concerns the cardiac cycle stage 0. "
                        "Fact number 1 concerns the cardiac cycle stage 1. "
                        "Fact number 2 concerns the cardiac cycle stage 2.",
                   token_estimate=30),
}


# ---------------------------------------------------------------------------
# run_mcq


def test_mcq_marker_answerer_scores_perfect():
    items = [mcq_item(i, correct=i % 4, marker=True) for i in range(12)]
    system = SystemUnderTest.plain("oracle", MockChatClient("marker-answer"))
    records = run_mcq(system, items, seed=9)
    assert len(records) == 12
    assert all(r.score == 1.0 for r in records)
    assert {r.item_id for r in records} == {f"m{i}" for i in range(12)}


def test_mcq_letter_e_flagged_unparseable():
    items = [mcq_item(i) for i in range(5)]
    system = SystemUnderTest.plain("e-bot", MockChatClient("letter-fixed", params={"letter": "E"}))
    records = run_mcq(system, items, seed=9)
    assert all(r.score == 0.0 for r in records)
    assert all(r.detail.get("flag") == "unparseable" for r in records)


def test_mcq_parse_takes_first_standalone_letter():
    system = SystemUnderTest.plain(
        "chatty", CallableChatClient(lambda req: "I believe the answer is B. Not D."))
    [record] = run_mcq(system, [mcq_item(0)], seed=1)
    assert record.detail["parsed_letter"] == "B"


def test_mcq_shuffle_reproducible_and_seed_sensitive():
    items = [mcq_item(i) for i in range(6)]
    system = SystemUnderTest.plain("any", MockChatClient("letter-fixed", params={"letter": "A"}))
    perms = lambda seed: [r.detail["permutation"] for r in run_mcq(system, items, seed=seed)]
    assert perms(5) == perms(5)
    assert perms(5) != perms(6)


def test_mcq_uniform_random_answerer_near_chance():
    items = [mcq_item(i, correct=i % 4) for i in range(1000)]
    system = SystemUnderTest.plain(
        "random", MockChatClient("letter-uniform", params={"seed": "13"}))
    records = run_mcq(system, items, seed=31)
    accuracy = sum(r.score for r in records) / len(records)
    sigma = math.sqrt(0.25 * 0.75 / 1000)
    assert abs(accuracy - 0.25) <= 3 * sigma


def test_mcq_position_frequencies_balanced():
    items = [mcq_item(i, correct=0) for i in range(1000)]
    system = SystemUnderTest.plain("any", MockChatClient("letter-fixed", params={"letter": "A"}))
    records = run_mcq(system, items, seed=17)
    positions = [r.detail["correct_letter"] for r in records]
    for letter in "ABCD":
        frequency = positions.count(letter) / len(positions)
        assert abs(frequency - 0.25) <= 0.05


def test_mcq_transport_error_recorded_not_raised():
    class Exploding:
        def chat(self, req):
            raise TransientProviderError("down")

    system = SystemUnderTest.plain("down", Exploding())
    records = run_mcq(system, [mcq_item(0), mcq_item(1)], seed=1)
    assert [r.score for r in records] == [0.0, 0.0]
    assert all(r.detail["flag"] == "transport_error" for r in records)


# ---------------------------------------------------------------------------
# run_text_sim


def reference_lookup_client(items):
    by_question = {it.question: it.answer for it in items}

    def fn(req):
        for question, answer in by_question.items():
            if question in req.user:
                return answer
        return "no idea"

    return CallableChatClient(fn)


def test_text_sim_echoing_reference_scores_one():
    items = [qa_item(i) for i in range(3)]
    system = SystemUnderTest(name="echo-ref", client=reference_lookup_client(items))
    records = run_text_sim(system, items)
    assert all(r.score == pytest.approx(1.0) for r in records)
    metrics = records[0].detail["metrics"]
    assert metrics["bleu"] == pytest.approx(1.0)
    assert metrics["rougeL"]["f1"] == pytest.approx(1.0)


def test_text_sim_unrelated_fixed_text_scores_zero():
    items = [qa_item(i) for i in range(3)]
    system = SystemUnderTest.plain(
        "off-topic", CallableChatClient(lambda req: "entirely unrelated planetary physics"))
    records = run_text_sim(system, items)
    assert all(r.score == 0.0 for r in records)
    assert all(r.detail["metrics"]["bleu"] == 0.0 for r in records)


def test_text_sim_means_match_hand_average():
    items = [qa_item(i) for i in range(3)]
    responses = {
        items[0].question: items[0].answer,                 # perfect -> rouge1 f1 = 1
        items[1].question: "entirely unrelated words here",  # disjoint -> 0
        items[2].question: items[2].answer,                 # perfect -> 1
    }
    system = SystemUnderTest.plain(
        "mixed", CallableChatClient(
            lambda req: next(v for k, v in responses.items() if k in req.user)))
    records = run_text_sim(system, items)
    mean_score = sum(r.score for r in records) / 3
    assert mean_score == pytest.approx((1.0 + 0.0 + 1.0) / 3)


def test_text_sim_requires_test_split():
    with pytest.raises(ValueError):
        run_text_sim(SystemUnderTest.plain("x", MockChatClient("echo")),
                     [qa_item(0, split="train")])


def test_text_sim_empty_response_flagged():
    items = [qa_item(0)]
    system = SystemUnderTest.plain("empty", CallableChatClient(lambda req: "..."))
    [record] = run_text_sim(system, items)
    assert record.score == 0.0
    assert record.detail["flag"] == "unscorable"


# ---------------------------------------------------------------------------
# run_judge


def exact_match_judge():
    def fn(req):
        reference = req.user.split("Reference answer:\n")[1].split("\n\nSource context:")[0]
        candidate = req.user.split("Candidate answer:\n")[1].split("\n\nIs the candidate")[0]
        verdict = "correct" if reference.strip() == candidate.strip() else "incorrect"
        return json.dumps({"verdict": verdict, "rationale": "exact comparison"})

    return CallableChatClient(fn)


def test_judge_exact_match_echo_system_all_correct():
    items = [qa_item(i) for i in range(3)]
    system = SystemUnderTest(name="echo-ref", client=reference_lookup_client(items))
    records = run_judge(system, items, exact_match_judge(), CHAPTERS)
    assert all(r.score == 1.0 for r in records)
    assert all(r.detail["verdict"] == "correct" for r in records)


def test_judge_prompt_contains_all_sections():
    seen = {}

    def spy_judge(req):
        seen["user"] = req.user
        return json.dumps({"verdict": "incorrect", "rationale": "spy"})

    items = [qa_item(0)]
    system = SystemUnderTest.plain("any", CallableChatClient(lambda req: "some answer"))
    run_judge(system, items, CallableChatClient(spy_judge), CHAPTERS)
    user = seen["user"]
    assert items[0].question in user
    assert items[0].answer in user
    assert CHAPTERS["d#0"].text in user
    assert "some answer" in user


def test_judge_417_item_count():
    items = [qa_item(i) for i in range(417)]
    chapters = dict(CHAPTERS)
    system = SystemUnderTest.plain("echo", CallableChatClient(lambda req: "answer text"))
    judge = CallableChatClient(
        lambda req: json.dumps({"verdict": "correct", "rationale": "ok"}))
    records = run_judge(system, items, judge, chapters)
    assert len(records) == 417


def test_judge_json_wrapped_in_prose_parses():
    items = [qa_item(0)]
    system = SystemUnderTest.plain("any", CallableChatClient(lambda req: "an answer"))
    judge = CallableChatClient(
        lambda req: 'Sure thing! Here is my verdict: {"verdict": "correct", "rationale": "fine"} Hope that helps.')
    [record] = run_judge(system, items, judge, CHAPTERS)
    assert record.score == 1.0


def test_judge_unparseable_after_retry_flags_item():
    items = [qa_item(0)]
    system = SystemUnderTest.plain("any", CallableChatClient(lambda req: "an answer"))
    judge = CallableChatClient(lambda req: "I simply cannot decide.")
    [record] = run_judge(system, items, judge, CHAPTERS)
    assert record.score == 0.0
    assert record.detail["flag"] == "judge_unparseable"


def test_judge_repair_retry_recovers():
    calls = []

    def flaky_judge(req):
        calls.append(req.user)
        if len(calls) == 1:
            return "verdict: correct (not json)"
        return json.dumps({"verdict": "correct", "rationale": "second try"})

    items = [qa_item(0)]
    system = SystemUnderTest.plain("any", CallableChatClient(lambda req: "an answer"))
    [record] = run_judge(system, items, CallableChatClient(flaky_judge), CHAPTERS)
    assert record.score == 1.0
    assert len(calls) == 2


def test_judge_unresolvable_context_raises():
    items = [qa_item(0, doc="unknown-doc")]
    system = SystemUnderTest.plain("any", MockChatClient("echo"))
    with pytest.raises(ContextUnresolvable):
        run_judge(system, items, MockChatClient("judge-overlap"), CHAPTERS)


def test_extract_json_object_nested():
    obj = _extract_json_object('noise {"verdict": "correct", "detail": {"x": 1}} trailing')
    assert obj == {"verdict": "correct", "detail": {"x": 1}}


# ---------------------------------------------------------------------------
# ingest_human_labels


def csv_text(rows):
    lines = ["system,item_id,category"]
    lines += [f"{s},{i},{c}" for s, i, c in rows]
    return "\n".join(lines) + "\n"


def test_ingest_mapping_matches_standard_scores():
    text = csv_text([
        ("sysA", "q1", "correct"),
        ("sysA", "q2", "correct_incomplete"),
        ("sysA", "q3", "partially incorrect"),
        ("sysA", "q4", "incorrect"),
    ])
    records = ingest_human_labels(text)
    assert [r.score for r in records] == [1.0, 0.75, 0.25, 0.0]
    assert all(r.layer == "human" for r in records)


def test_ingest_accepts_partially_correct_alias():
    [record] = ingest_human_labels(csv_text([("s", "q", "partially correct")]))
    assert record.score == 0.75
    assert record.detail["category"] == "correct_incomplete"


def test_ingest_unknown_label():
    with pytest.raises(UnknownLabel):
        ingest_human_labels(csv_text([("s", "q", "somewhat ok")]))


def test_ingest_unknown_item():
    text = csv_text([("s", "q9", "correct")])
    with pytest.raises(UnknownItem):
        ingest_human_labels(text, known_items={("s", "q1")})
    records = ingest_human_labels(text, known_items={("s", "q9")})
    assert records[0].score == 1.0


def test_ingest_from_file(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text(csv_text([("s", "q", "correct")]), encoding="utf-8")
    assert ingest_human_labels(path)[0].score == 1.0


# ---------------------------------------------------------------------------
# subsets, records store, vectors


def test_filter_subsets():
    items = [
        qa_item(0, split="train"),
        qa_item(1, split="validation"),
        qa_item(2, split="test"),
    ]
    items[1] = QAPair(**{**vars(items[1]), "special": True})
    items[2] = QAPair(**{**vars(items[2]), "checked": True})
    assert [i.id for i in filter_subset(items, "full")] == ["q1", "q2"]
    assert [i.id for i in filter_subset(items, "special")] == ["q1"]
    assert [i.id for i in filter_subset(items, "checked")] == ["q2"]
    assert [i.id for i in filter_subset(items, "test")] == ["q2"]
    with pytest.raises(ValueError):
        filter_subset(items, "everything")


def test_records_roundtrip_and_offline_rescoring(tmp_path):
    records = [
        EvalRecord(system="s", item_id="q1", layer="mcq", response_text="A", score=1.0,
                   detail={"permutation": [0, 1, 2, 3], "correct_letter": "A"}),
        EvalRecord(system="s", item_id="q2", layer="mcq", response_text="B", score=0.0,
                   detail={"permutation": [3, 2, 1, 0], "correct_letter": "C"}),
    ]
    path = tmp_path / "records.jsonl"
    write_records(records, path)
    loaded = read_records(path)
    assert loaded == records
    # Scores are recomputable offline from the stored response + detail.
    for r in loaded:
        recomputed = 1.0 if r.response_text == r.detail["correct_letter"] else 0.0
        assert recomputed == r.score


def test_score_vectors_alignment(tmp_path):
    records = [
        EvalRecord(system="a", item_id="q1", layer="mcq", response_text="", score=1.0),
        EvalRecord(system="a", item_id="q2", layer="mcq", response_text="", score=0.0),
        EvalRecord(system="b", item_id="q2", layer="mcq", response_text="", score=1.0),
        EvalRecord(system="b", item_id="q1", layer="mcq", response_text="", score=0.0),
    ]
    vectors = score_vectors(records, "mcq")
    assert [v.system for v in vectors] == ["a", "b"]
    assert vectors[0].item_ids == vectors[1].item_ids == ("q1", "q2")
    assert list(vectors[0].scores) == [1.0, 0.0]
    assert list(vectors[1].scores) == [0.0, 1.0]

    records.append(EvalRecord(system="c", item_id="q1", layer="mcq", response_text="", score=1.0))
    with pytest.raises(MisalignedVectors):
        score_vectors(records, "mcq")


def test_run_manifest(tmp_path):
    data = tmp_path / "data.jsonl"
    data.write_text('{"x": 1}\n', encoding="utf-8")
    manifest = write_run_manifest(
        tmp_path / "manifest.json",
        config={"systems": ["a"]},
        dataset_paths={"qa": data},
        endpoint_roster=["gen", "judge"],
        seed=7,
    )
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == manifest
    assert on_disk["seed"] == 7
    assert set(on_disk["dataset_hashes"]) == {"qa"}
    assert on_disk["endpoint_roster"] == ["gen", "judge"]
    assert len(on_disk["config_hash"]) == 64
