"""Blinded human grading end to end: open a session, label every answer,
export the un-blinded CSV, and ingest it as human-layer records.

Run: python3 demos/07_grading_workflow.py
"""

import random
import tempfile

from corpusbench import ingest_human_labels
from corpusbench.grading import GradingStore

ITEMS = [
    {"item_id": "q1", "question": "Why does standing drop arterial pressure briefly?"},
    {"item_id": "q2", "question": "What closes the aortic valve?"},
]
SYSTEMS = ["system-one", "system-two"]
RESPONSES = {
    ("system-one", "q1"): "Venous pooling lowers return until reflexes respond.",
    ("system-two", "q1"): "Because gravity is stronger while standing.",
    ("system-one", "q2"): "The reversing pressure gradient in early diastole.",
    ("system-two", "q2"): "Backflow pressure at the start of diastole.",
}
GRADES = ["correct", "incorrect", "correct", "correct_incomplete"]


def main():
    with tempfile.TemporaryDirectory() as data_dir:
        store = GradingStore(data_dir)
        session = store.create_session(ITEMS, SYSTEMS, grader="expert",
                                       responses=RESPONSES, rng=random.Random(1))
        print(f"session {session.session_id}: {session.total} blinded answers")

        grades = iter(GRADES)
        while (pending := store.next_unlabeled(session.session_id)) is not None:
            category = next(grades)
            print(f"  grading {pending['item_id']} / key={pending['blind_key'][:6]}... "
                  f"-> {category}")
            store.submit_label(session.session_id, pending["item_id"],
                               pending["blind_key"], category)

        store.complete(session.session_id)
        csv_text = store.export_labels(session.session_id)
        print("\nun-blinded export:")
        print(csv_text)

        records = ingest_human_labels(csv_text)
        for r in sorted(records, key=lambda r: (r.item_id, r.system)):
            print(f"  {r.system:<12} {r.item_id}  score={r.score}")


if __name__ == "__main__":
    main()
