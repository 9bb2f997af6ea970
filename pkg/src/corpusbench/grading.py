"""Blinded human-grading sessions with durable, append-only persistence.

A session presents each question with the competing systems' answers under
opaque blind keys; the key-to-system mapping never leaves the server side.
Labels are replayed from an append-only log on restart, so no submitted
grade is ever lost.
"""

from __future__ import annotations

import csv
import io
import json
import random
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path

LABEL_CATEGORIES = ("correct", "correct_incomplete", "partially_incorrect", "incorrect")

# The standard score mapping. "partially_correct" is accepted as an alias of
# "correct_incomplete": the grading workflow names the 0.75 category
# "correct but incomplete" while the score mapping calls it "partially
# correct"; they are the same category.
LABEL_SCORES = {
    "correct": 1.0,
    "correct_incomplete": 0.75,
    "partially_incorrect": 0.25,
    "incorrect": 0.0,
}
LABEL_ALIASES = {"partially_correct": "correct_incomplete", "correct_but_incomplete": "correct_incomplete"}


class MissingResponse(ValueError):
    pass


class SessionClosed(RuntimeError):
    pass


class SessionIncomplete(RuntimeError):
    pass


class UnknownSession(KeyError):
    pass


class UnknownKey(KeyError):
    pass


class UnknownCategory(ValueError):
    pass


def canonical_category(category: str) -> str:
    name = category.strip().lower().replace(" ", "_").replace("-", "_")
    name = LABEL_ALIASES.get(name, name)
    if name not in LABEL_SCORES:
        raise UnknownCategory(f"unknown grading category {category!r}; expected one of {LABEL_CATEGORIES}")
    return name


@dataclass
class GradingSession:
    session_id: str
    grader: str
    # ordered items: {item_id, question, answers: [{blind_key, text}]}
    items: list[dict]
    labels: dict[tuple[str, str], str] = field(default_factory=dict)
    state: str = "open"

    @property
    def total(self) -> int:
        return sum(len(item["answers"]) for item in self.items)

    @property
    def done(self) -> int:
        return len(self.labels)

    def public_payload(self) -> dict:
        """Session view safe to serialize to graders: no system names anywhere."""
        return {
            "session_id": self.session_id,
            "grader": self.grader,
            "state": self.state,
            "progress": {"done": self.done, "total": self.total},
            "items": [
                {
                    "item_id": item["item_id"],
                    "question": item["question"],
                    "context": item.get("context", ""),
                    "answers": [
                        {"blind_key": a["blind_key"], "text": a["text"]}
                        for a in item["answers"]
                    ],
                }
                for item in self.items
            ],
        }


class GradingStore:
    """Durable store for grading sessions under one data directory.

    Layout per session: ``session.json`` (blinded payload), ``keymap.json``
    (blind_key -> system, server-side only), ``events.jsonl`` (append-only
    label/complete log replayed on load).
    """

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._sessions: dict[str, GradingSession] = {}
        self._keymaps: dict[str, dict[str, str]] = {}  # session -> blind_key -> system
        for session_dir in sorted(self.data_dir.glob("session-*")):
            self._load_session(session_dir)

    # -- persistence ---------------------------------------------------------

    def _session_dir(self, session_id: str) -> Path:
        return self.data_dir / f"session-{session_id}"

    def _load_session(self, session_dir: Path) -> None:
        payload = json.loads((session_dir / "session.json").read_text(encoding="utf-8"))
        keymap = json.loads((session_dir / "keymap.json").read_text(encoding="utf-8"))
        session = GradingSession(
            session_id=payload["session_id"],
            grader=payload["grader"],
            items=payload["items"],
        )
        events_path = session_dir / "events.jsonl"
        if events_path.exists():
            for line in events_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                event = json.loads(line)
                if event["type"] == "label":
                    session.labels[(event["item_id"], event["blind_key"])] = event["category"]
                elif event["type"] == "complete":
                    session.state = "complete"
        self._sessions[session.session_id] = session
        self._keymaps[session.session_id] = keymap

    def _append_event(self, session_id: str, event: dict) -> None:
        path = self._session_dir(session_id) / "events.jsonl"
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    # -- operations ----------------------------------------------------------

    def create_session(
        self,
        items: list[dict],
        systems: list[str],
        grader: str,
        responses: dict[tuple[str, str], str],
        contexts: dict[str, str] | None = None,
        rng: random.Random | None = None,
    ) -> GradingSession:
        """Open a blinded session over ``items`` x ``systems``.

        ``responses`` maps (system, item_id) to the stored answer text; every
        combination must exist. Answers are shuffled per item under fresh
        blind keys, so two sessions over the same items never share keys.
        """
        if not systems:
            raise MissingResponse("cannot grade a session with zero systems")
        if not items:
            raise MissingResponse("cannot grade a session with zero items")
        missing = [
            (system, item["item_id"])
            for item in items
            for system in systems
            if (system, item["item_id"]) not in responses
        ]
        if missing:
            raise MissingResponse(f"no stored response for {missing[:5]}" +
                                  (" ..." if len(missing) > 5 else ""))

        def fresh_key() -> str:
            if rng is not None:
                return f"{rng.getrandbits(64):016x}"
            return secrets.token_hex(8)

        session_id = f"{rng.getrandbits(48):012x}" if rng is not None else secrets.token_hex(6)
        keymap: dict[str, str] = {}
        blinded_items = []
        for item in items:
            answers = []
            for system in systems:
                key = fresh_key()
                keymap[key] = system
                answers.append({"blind_key": key, "text": responses[(system, item["item_id"])]})
            if rng is not None:
                rng.shuffle(answers)
            else:
                random.SystemRandom().shuffle(answers)
            blinded_items.append({
                "item_id": item["item_id"],
                "question": item["question"],
                "context": (contexts or {}).get(item["item_id"], ""),
                "answers": answers,
            })

        session = GradingSession(session_id=session_id, grader=grader, items=blinded_items)
        with self._lock:
            session_dir = self._session_dir(session_id)
            session_dir.mkdir(parents=True, exist_ok=False)
            (session_dir / "session.json").write_text(
                json.dumps(session.public_payload() | {"items": blinded_items},
                           ensure_ascii=False, sort_keys=True),
                encoding="utf-8",
            )
            (session_dir / "keymap.json").write_text(
                json.dumps(keymap, sort_keys=True), encoding="utf-8"
            )
            self._sessions[session_id] = session
            self._keymaps[session_id] = keymap
        return session

    def get(self, session_id: str) -> GradingSession:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSession(session_id) from None

    def next_unlabeled(self, session_id: str) -> dict | None:
        """The next (item, answer) pair awaiting a label, or None when done."""
        session = self.get(session_id)
        for item in session.items:
            for answer in item["answers"]:
                if (item["item_id"], answer["blind_key"]) not in session.labels:
                    return {
                        "item_id": item["item_id"],
                        "question": item["question"],
                        "context": item.get("context", ""),
                        "blind_key": answer["blind_key"],
                        "answer": answer["text"],
                    }
        return None

    def submit_label(self, session_id: str, item_id: str, blind_key: str, category: str) -> dict:
        """Store one label; resubmission overwrites. Returns progress."""
        category = canonical_category(category)
        with self._lock:
            session = self.get(session_id)
            if session.state != "open":
                raise SessionClosed(f"session {session_id} is complete")
            valid = any(
                item["item_id"] == item_id and any(a["blind_key"] == blind_key for a in item["answers"])
                for item in session.items
            )
            if not valid:
                raise UnknownKey(f"no answer ({item_id!r}, {blind_key!r}) in session {session_id}")
            session.labels[(item_id, blind_key)] = category
            self._append_event(session_id, {
                "type": "label", "item_id": item_id, "blind_key": blind_key, "category": category,
            })
            return {"done": session.done, "total": session.total}

    def complete(self, session_id: str) -> None:
        with self._lock:
            session = self.get(session_id)
            if session.state == "complete":
                return
            if session.done < session.total:
                raise SessionIncomplete(
                    f"{session.total - session.done} of {session.total} answers still unlabeled"
                )
            session.state = "complete"
            self._append_event(session_id, {"type": "complete"})

    def export_labels(self, session_id: str) -> str:
        """Un-blinded CSV {system, item_id, category}, ordered by (item_id, system).

        Only complete sessions export; the output is deterministic, so
        exporting twice yields identical bytes.
        """
        session = self.get(session_id)
        if session.state != "complete":
            raise SessionIncomplete(f"session {session_id} is not complete")
        keymap = self._keymaps[session_id]
        rows = [
            {"system": keymap[key], "item_id": item_id, "category": category}
            for (item_id, key), category in session.labels.items()
        ]
        rows.sort(key=lambda r: (r["item_id"], r["system"]))
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["system", "item_id", "category"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
