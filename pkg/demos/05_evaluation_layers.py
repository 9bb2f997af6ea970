"""Run the evaluation layers (multiple choice, text similarity, judge) for
two mock systems and show the per-item records.

Run: python3 demos/05_evaluation_layers.py
"""

import json

from corpusbench import SystemUnderTest, run_judge, run_mcq, run_text_sim
from corpusbench.corpus import Chapter
from corpusbench.datagen import MCQItem, QAPair
from corpusbench.mocks import CallableChatClient, HashEmbedder, MockChatClient

MCQ_ITEMS = [
    MCQItem(id=f"m{i}", doc_id="demo", chapter_index=0,
            question=f"Which structure performs role {i}?",
            options=(f"candidate {i}a [*]", f"candidate {i}b",
                     f"candidate {i}c", f"candidate {i}d"),
            correct_index=0, context_ref="demo#0", split="test")
    for i in range(6)
]

QA_ITEMS = [
    QAPair(id=f"q{i}", doc_id="demo", chapter_index=0,
           question=f"What is fact {i}?",
           answer=f"Fact {i} concerns chamber pressure stage {i}.",
           context_ref="demo#0", split="test")
    for i in range(4)
]

CHAPTERS = {"demo#0": Chapter(doc_id="demo", index=0, heading="",
                              text=" ".join(item.answer for item in QA_ITEMS),
                              token_estimate=50)}


def main():
    # An oracle that spots the marked correct option, and a random guesser.
    oracle = SystemUnderTest.plain("marker-oracle", MockChatClient("marker-answer"))
    guesser = SystemUnderTest.plain("guesser",
                                    MockChatClient("letter-uniform", params={"seed": "5"}))

    print("--- multiple choice ---")
    for system in (oracle, guesser):
        records = run_mcq(system, MCQ_ITEMS, seed=11)
        accuracy = sum(r.score for r in records) / len(records)
        print(f"{system.name:<14} accuracy {accuracy:.2f}")

    print("\n--- text similarity ---")
    lookup = {item.question: item.answer for item in QA_ITEMS}
    perfect = SystemUnderTest.plain("echo-reference", CallableChatClient(
        lambda req: next((a for q, a in lookup.items() if q in req.user), "unknown")))
    records = run_text_sim(perfect, QA_ITEMS, HashEmbedder(dimension=16, granularity="token"))
    print(f"{perfect.name:<14} mean rouge1-f1 "
          f"{sum(r.score for r in records) / len(records):.2f}")

    print("\n--- judge ---")
    judge = MockChatClient("judge-overlap", params={"threshold": "0.6"})
    records = run_judge(perfect, QA_ITEMS, judge, CHAPTERS)
    verdicts = [r.detail.get("verdict") for r in records]
    print(f"verdicts: {verdicts}")
    print("one full record:")
    r = records[0]
    print(json.dumps({"system": r.system, "item_id": r.item_id, "score": r.score,
                      "detail": r.detail}, indent=2)[:400])


if __name__ == "__main__":
    main()
