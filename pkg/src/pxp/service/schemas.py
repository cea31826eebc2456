"""Request, response and gateway frame models."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = 1
TagName = Literal["Init", "Ratify", "Refute", "Revise", "Reject", "Term"]
FrameKind = Literal["hello", "session_open", "message", "verdict_update", "session_closed", "error"]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ------------------------------------------------------------------ agents


class ScriptStepModel(_Model):
    tag: TagName
    y: Optional[str] = None
    e: Optional[str] = None
    expect: Optional[TagName] = None
    row: Optional[str] = None
    then_term: bool = False


class TableEntry(_Model):
    x: Any
    y: str
    e: str


class AgentSpec(_Model):
    """How to build one agent. ``hypothesis`` is rule-list text for
    ``rulelist``; ``table`` rows feed ``table``; ``script`` drives
    ``scripted``; ``verdicts`` are (x, label) pairs for ``oracle``."""

    kind: Literal["rulelist", "table", "scripted", "oracle"] = "rulelist"
    name: Optional[str] = None
    hypothesis: Optional[str] = None
    table: list[TableEntry] = Field(default_factory=list)
    default: Optional[list[str]] = None
    accept_explanations: bool = True
    script: list[ScriptStepModel] = Field(default_factory=list)
    y: str = "pos"
    e: str = "default(pos)"
    verdicts: list[tuple[Any, str]] = Field(default_factory=list)


class PolicyModel(_Model):
    k: int = Field(2, ge=0)
    terminate_after_ratify: bool = True
    max_steps: int = Field(64, ge=2)
    assume_compatible: bool = False
    init_y: Optional[str] = None  # "?" sends an unknown prediction
    init_e: Optional[str] = None


class RunRequest(_Model):
    a: AgentSpec
    b: AgentSpec
    x: Any
    policy: PolicyModel = Field(default_factory=PolicyModel)
    session_id: Optional[str] = None


class RunResponse(_Model):
    session_id: str
    status: str
    tags: list[str]
    rows: list[str]
    closing_row: Optional[str]
    verdict: dict[str, Any]
    transcript: str  # JSON lines


class AnalyzeRequest(_Model):
    transcripts: str  # JSON lines, one or more transcripts back to back
    human: Optional[str] = None
    reading: Literal["own", "counterpart"] = "own"


class AnalyzeResponse(_Model):
    sessions: list[dict[str, Any]]
    strength: Optional[str] = None


class GraphResponse(_Model):
    table: str
    k: int
    nodes: list[str]
    edges: list[dict[str, Any]]
    bound: dict[str, Any]
    brute_force_max_length: Optional[int]
    dot: str


class MmsvPathsResponse(_Model):
    graph: Literal["full", "minus"]
    max_len: int
    measure: Literal["edges", "nodes"]
    paths: list[list[int]]


class MmsvMapRequest(_Model):
    path: list[int]
    l: Optional[int] = None
    full: bool = False


class CaseReportResponse(_Model):
    case: str
    ok: bool
    summary: str
    report: dict[str, Any]


# ------------------------------------------------------------------ gateway


class Frame(_Model):
    """One gateway frame. ``seq`` increases by one per frame sent on a
    connection, so clients can check ordering."""

    kind: FrameKind
    session_id: Optional[str] = None
    seq: int = 0
    payload: dict[str, Any] = Field(default_factory=dict)


class OpenSessionPayload(_Model):
    """Sent by a client to start a session as one of the two agents."""

    role: Literal["initiator", "responder"] = "responder"
    name: str = "h"
    y: str = Field(..., description="the client's own prediction for x")
    e: str = Field(..., description="the client's own explanation for x")
    x: Any
    machine: AgentSpec = Field(default_factory=lambda: AgentSpec(name="m"))
    policy: PolicyModel = Field(default_factory=PolicyModel)


class ClientMessagePayload(_Model):
    """A client's move; ``y``/``e`` default to its standing opinion."""

    tag: TagName
    y: Optional[str] = None
    e: Optional[str] = None
    then_term: bool = False
    row: Optional[str] = None


class ServerMessagePayload(_Model):
    step: int
    sender: str
    tag: TagName
    x: Any
    y: str
    e: str
    guards: dict[str, Any]
    row: str
    h: Optional[str] = None


class VerdictPayload(_Model):
    one_way_for: dict[str, bool]
    two_way: bool
    reading: str
    legal: list[TagName]
    your_turn: bool


class ErrorPayload(_Model):
    detail: str
    legal: list[TagName] = Field(default_factory=list)


def frame_schema() -> dict[str, Any]:
    """Machine-readable schema of every frame and payload."""
    models = {
        "Frame": Frame,
        "OpenSessionPayload": OpenSessionPayload,
        "ClientMessagePayload": ClientMessagePayload,
        "ServerMessagePayload": ServerMessagePayload,
        "VerdictPayload": VerdictPayload,
        "ErrorPayload": ErrorPayload,
    }
    return {
        "schema_version": SCHEMA_VERSION,
        "transport": "WebSocket text messages, one JSON frame per message",
        "client_kinds": ["session_open", "message"],
        "server_kinds": ["hello", "session_open", "message", "verdict_update",
                         "session_closed", "error"],
        "models": {name: m.model_json_schema() for name, m in models.items()},
    }


SCHEMA_FILE = Path(__file__).with_name("frame_schema.json")


def render_schema() -> str:
    return json.dumps(frame_schema(), indent=2, sort_keys=True) + "\n"


if __name__ == "__main__":  # regenerate the checked-in schema file
    SCHEMA_FILE.write_text(render_schema(), encoding="utf-8")
