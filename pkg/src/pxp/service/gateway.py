"""The live session gateway.

A :class:`GatewayConnection` holds one client's state and turns each
incoming frame into the frames to send back. The WebSocket endpoint in
``app`` only moves JSON between the socket and this object, which keeps the
protocol testable without a network.

Per connection at most one session is open. The client plays one agent
through a :class:`~pxp.agents.RemoteAgent`; the other side is a local agent
built from ``machine`` in the ``session_open`` payload. Every recorded step
is pushed as a ``message`` frame followed by a ``verdict_update`` carrying
the live intelligibility verdict and the tags the client may send next.
"""
from __future__ import annotations

import threading
from dataclasses import replace
from typing import Any

from pydantic import ValidationError

from ..agents import RemoteAgent
from ..engine import Decision, Session, legal_responses
from ..intelligibility import classify_two_way
from ..model import ProtocolError, Step, Tag, Transcript, decode_payload, dumps_transcript, step_to_json
from ..pex import PexError
from .handlers import HandlerError, build_agent, build_policy
from .schemas import (
    SCHEMA_VERSION,
    ClientMessagePayload,
    Frame,
    OpenSessionPayload,
)


class TranscriptStore:
    """Closed and aborted transcripts, shared by all connections."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._items: dict[str, Transcript] = {}

    def put(self, t: Transcript) -> None:
        with self._lock:
            self._items[t.session_id] = t

    def get(self, session_id: str) -> Transcript | None:
        with self._lock:
            return self._items.get(session_id)

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._items)

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


class GatewayConnection:
    def __init__(self, store: TranscriptStore | None = None):
        self.store = store if store is not None else TranscriptStore()
        self.session: Session | None = None
        self.client: RemoteAgent | None = None
        self.seq = 0

    # -- frame helpers

    def _frame(self, kind: str, payload: dict[str, Any] | None = None) -> dict[str, Any]:
        sid = self.session.session_id if self.session is not None else None
        f = Frame(kind=kind, session_id=sid, seq=self.seq, payload=payload or {})
        self.seq += 1
        return f.model_dump()

    def error(self, detail: str) -> dict[str, Any]:
        return self._frame("error", {"detail": detail,
                                     "legal": [t.value for t in self.legal()]})

    def hello(self) -> dict[str, Any]:
        return self._frame("hello", {"schema_version": SCHEMA_VERSION,
                                     "tags": [t.value for t in Tag]})

    # -- state

    @property
    def your_turn(self) -> bool:
        s = self.session
        return s is not None and not s.done and s.to_move is self.client

    def legal(self) -> list[Tag]:
        """Tags the client may send now; empty when it is not its turn."""
        if not self.your_turn:
            return []
        s = self.session
        incoming = s.pending if s.transcript.steps else None
        return legal_responses(incoming, s.rules)

    def _verdict(self, upto: int | None = None) -> dict[str, Any]:
        """Verdict over the first ``upto`` steps; the legal set is only
        offered for the latest step, since earlier ones are already answered."""
        t = self.session.transcript
        latest = upto is None or upto >= len(t.steps)
        if not latest:
            t = replace(t, steps=t.steps[:upto])
        payload = classify_two_way(t).to_json()
        payload["legal"] = [x.value for x in self.legal()] if latest else []
        payload["your_turn"] = self.your_turn if latest else False
        return self._frame("verdict_update", payload)

    def _push(self, steps: list[Step]) -> list[dict[str, Any]]:
        out: list[dict[str, Any]] = []
        for s in steps:
            out.append(self._frame("message", step_to_json(s)))
            out.append(self._verdict(s.index + 1))
        if self.session.done:
            out.append(self._closed())
        return out

    def _closed(self) -> dict[str, Any]:
        t = self.session.transcript
        self.store.put(t)
        frame = self._frame("session_closed", {
            "status": t.status.value,
            "closing_row": t.closing_row,
            "error": t.error,
            "verdict": classify_two_way(t).to_json(),
            "transcript": dumps_transcript(t),
        })
        self.session = None
        self.client = None
        return frame

    # -- dispatch

    def handle(self, raw: Any) -> list[dict[str, Any]]:
        """Frames answering one client frame."""
        try:
            frame = Frame.model_validate(raw)
        except ValidationError as exc:
            return [self.error(f"malformed frame: {exc.errors()[0]['msg']}")]
        if frame.kind == "session_open":
            return self._open(frame.payload)
        if frame.kind == "message":
            if self.session is not None and frame.session_id not in (None, self.session.session_id):
                return [self.error(f"unknown session {frame.session_id}")]
            return self._message(frame.payload)
        return [self.error(f"clients may not send {frame.kind} frames")]

    def _open(self, raw: dict[str, Any]) -> list[dict[str, Any]]:
        if self.session is not None:
            return [self.error("a session is already open on this connection")]
        try:
            req = OpenSessionPayload.model_validate(raw)
            client = RemoteAgent(req.name, req.y, req.e)
            machine = build_agent(req.machine, "m")
            if machine.name == client.name:
                raise HandlerError("the machine and the client need different names")
            policy = build_policy(req.policy, req.x)
            pair = (client, machine) if req.role == "initiator" else (machine, client)
            session = Session(*pair, policy)
        except (ValidationError, HandlerError, ProtocolError, ValueError) as exc:
            return [self.error(f"cannot open session: {exc}")]
        self.session, self.client = session, client
        out = [self._frame("session_open", {
            "initiator": session.initiator.name,
            "responder": session.responder.name,
            "you": client.name,
            "x": req.x,
            "policy": session.transcript.policy,
        })]
        if req.role == "initiator":
            out.append(self._verdict())
            return out
        steps = self._guarded(session.run_local)
        return out + self._push(steps)

    def _guarded(self, fn) -> list[Step]:
        s = self.session
        before = len(s.transcript.steps)
        try:
            return fn()
        except (PexError, ProtocolError) as exc:
            s.abort(str(exc))
            return s.transcript.steps[before:]

    def _message(self, raw: dict[str, Any]) -> list[dict[str, Any]]:
        s = self.session
        if s is None:
            return [self.error("no open session")]
        try:
            m = ClientMessagePayload.model_validate(raw)
        except ValidationError as exc:
            return [self.error(f"malformed message: {exc.errors()[0]['msg']}")]
        tag = Tag(m.tag)
        if not self.your_turn:
            return [self.error("it is not your turn")]
        if tag is Tag.INIT and s.transcript.steps:
            return [self.error("Init only opens sessions")]
        if tag not in self.legal():
            return [self.error(f"{tag.value} is not legal here")]
        y = decode_payload(m.y) if m.y is not None else None
        e = decode_payload(m.e) if m.e is not None else None
        before = len(s.transcript.steps)
        try:
            steps = s.submit(Decision(tag, y, e, m.row, m.then_term))
        except ProtocolError as exc:
            if len(s.transcript.steps) != before:  # failed after the client's step
                s.abort(str(exc))
                return self._push(s.transcript.steps[before:])
            return [self.error(str(exc))]
        except PexError as exc:
            s.abort(str(exc))
            steps = s.transcript.steps[before:]
        return self._push(steps)

    def disconnect(self) -> None:
        """The client went away: abort and store any open session."""
        if self.session is not None:
            self.session.abort("client disconnected")
            self.store.put(self.session.transcript)
            self.session = None
            self.client = None


__all__ = ["GatewayConnection", "TranscriptStore"]
