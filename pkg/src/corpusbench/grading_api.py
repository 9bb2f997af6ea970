"""HTTP surface of the grading service (FastAPI).

Endpoints:
  POST /sessions                  open a blinded session
  GET  /sessions/{id}/next        next ungraded answer + progress
  POST /sessions/{id}/labels      submit one label (idempotent overwrite)
  POST /sessions/{id}/complete    close the session (all answers labeled)
  GET  /sessions/{id}/export.csv  un-blinded CSV for ingest_human_labels

Payloads never pair a system name with an answer while a session is open;
blinding lives in the store, the API only ever serializes blind keys.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Header, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import HTMLResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .evaluation import read_records
from .grading import (
    GradingStore,
    MissingResponse,
    SessionClosed,
    SessionIncomplete,
    UnknownCategory,
    UnknownKey,
    UnknownSession,
)


class SessionItem(BaseModel):
    item_id: str
    question: str


class CreateSessionRequest(BaseModel):
    grader: str
    systems: list[str]
    items: list[SessionItem]
    contexts: dict[str, str] = Field(default_factory=dict)


class LabelRequest(BaseModel):
    item_id: str
    blind_key: str
    category: str


def load_responses(records_path: str | Path) -> dict[tuple[str, str], str]:
    """(system, item_id) -> response text, from an eval records file."""
    responses: dict[tuple[str, str], str] = {}
    for record in read_records(records_path):
        if record.response_text:
            responses[(record.system, record.item_id)] = record.response_text
    return responses


def create_app(
    data_dir: str | Path,
    responses: dict[tuple[str, str], str] | None = None,
    records_path: str | Path | None = None,
    auth_token: str | None = None,
) -> FastAPI:
    """Build the service around a data directory and a response store."""
    store = GradingStore(data_dir)
    if responses is None:
        responses = load_responses(records_path) if records_path else {}

    app = FastAPI(title="corpusbench grading service")
    app.state.store = store
    app.state.responses = responses
    # The review UI may be served from another origin during development.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    def check_auth(token: str | None) -> None:
        if auth_token is not None and token != auth_token:
            raise HTTPException(status_code=401, detail="missing or wrong auth token")

    @app.post("/sessions")
    def create_session(body: CreateSessionRequest, x_auth_token: str | None = Header(default=None)):
        check_auth(x_auth_token)
        try:
            session = store.create_session(
                items=[item.model_dump() for item in body.items],
                systems=body.systems,
                grader=body.grader,
                responses=app.state.responses,
                contexts=body.contexts,
            )
        except MissingResponse as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return session.public_payload()

    @app.get("/sessions/{session_id}/next")
    def next_answer(session_id: str, x_auth_token: str | None = Header(default=None)):
        check_auth(x_auth_token)
        try:
            session = store.get(session_id)
        except UnknownSession:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}") from None
        pending = store.next_unlabeled(session_id)
        payload = {
            "state": session.state,
            "progress": {"done": session.done, "total": session.total},
            "complete": pending is None,
        }
        if pending is not None:
            payload["item"] = pending
        return payload

    @app.post("/sessions/{session_id}/labels")
    def submit_label(session_id: str, body: LabelRequest,
                     x_auth_token: str | None = Header(default=None)):
        check_auth(x_auth_token)
        try:
            progress = store.submit_label(session_id, body.item_id, body.blind_key, body.category)
        except UnknownSession:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}") from None
        except UnknownKey as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        except UnknownCategory as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        except SessionClosed as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return {"ok": True, "progress": progress}

    @app.post("/sessions/{session_id}/complete")
    def complete_session(session_id: str, x_auth_token: str | None = Header(default=None)):
        check_auth(x_auth_token)
        try:
            store.complete(session_id)
        except UnknownSession:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}") from None
        except SessionIncomplete as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        session = store.get(session_id)
        return {"state": session.state, "progress": {"done": session.done, "total": session.total}}

    @app.get("/sessions/{session_id}/export.csv", response_class=PlainTextResponse)
    def export_csv(session_id: str, x_auth_token: str | None = Header(default=None)):
        check_auth(x_auth_token)
        try:
            return store.export_labels(session_id)
        except UnknownSession:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}") from None
        except SessionIncomplete as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None

    @app.get("/", response_class=HTMLResponse)
    def index():
        ui = Path(__file__).parent / "static" / "review.html"
        if ui.exists():
            return ui.read_text(encoding="utf-8")
        return "<h1>corpusbench grading service</h1><p>No review UI bundled.</p>"

    return app
