"""Domain values shared by the engine, the analysers and the service.

Instances, predictions and explanations are opaque JSON payloads here; all of
their meaning lives in an agent's PEX functions.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Union

ORACLE_NAME = "oracle"


class Mark(enum.Enum):
    """Non-payload values a prediction or explanation slot can hold."""

    UNKNOWN = "?"
    ORACLE = "▲"

    def __repr__(self) -> str:
        return f"Mark.{self.name}"


UNKNOWN = Mark.UNKNOWN
ORACLE_MARK = Mark.ORACLE

Prediction = Union[str, Mark]
Explanation = Union[str, Mark]

# wire spellings of the two marks; payloads may not use them
_WIRE_UNKNOWN = "?"
_WIRE_ORACLE = "oracle"


class Tag(str, enum.Enum):
    INIT = "Init"
    RATIFY = "Ratify"
    REFUTE = "Refute"
    REVISE = "Revise"
    REJECT = "Reject"
    TERM = "Term"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Tag":
        for tag in cls:
            if tag.value.lower() == text.strip().lower():
                return tag
        raise ValueError(f"unknown message tag {text!r}")


class ProtocolError(Exception):
    """A message or session broke a protocol rule."""


@dataclass(frozen=True)
class AgentId:
    name: str
    is_oracle: bool = False

    def __post_init__(self) -> None:
        if self.is_oracle and self.name != ORACLE_NAME:
            raise ValueError(f"the oracle must be named {ORACLE_NAME!r}")
        if not self.is_oracle and self.name == ORACLE_NAME:
            raise ValueError(f"{ORACLE_NAME!r} is reserved for the oracle")

    def __str__(self) -> str:
        return self.name


ORACLE_ID = AgentId(ORACLE_NAME, is_oracle=True)


def instance_key(x: Any) -> str:
    """Canonical text for an instance; equal instances give equal keys."""
    return json.dumps(x, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _check_payload(value: Any, what: str) -> None:
    if isinstance(value, Mark):
        return
    if not isinstance(value, str):
        raise TypeError(f"{what} must be a string or a Mark, got {type(value).__name__}")
    if value in (_WIRE_UNKNOWN, _WIRE_ORACLE):
        raise ValueError(f"{what} payload {value!r} is reserved")


@dataclass(frozen=True)
class Message:
    sender: AgentId
    tag: Tag
    instance: Any
    y: Prediction
    e: Explanation

    def __post_init__(self) -> None:
        _check_payload(self.y, "prediction")
        _check_payload(self.e, "explanation")
        if self.y is ORACLE_MARK:
            raise ProtocolError("a prediction cannot be the oracle mark")
        if self.e is ORACLE_MARK and not self.sender.is_oracle:
            raise ProtocolError(f"{self.sender} is not the oracle but sent an oracle mark")
        if (self.y is UNKNOWN or self.e is UNKNOWN) and self.tag is not Tag.INIT:
            raise ProtocolError(f"'?' is only allowed in Init messages, not {self.tag}")

    @property
    def has_unknown(self) -> bool:
        return self.y is UNKNOWN or self.e is UNKNOWN


@dataclass(frozen=True)
class DataTuple:
    instance: Any
    y: Prediction
    e: Explanation
    provenance: AgentId

    @classmethod
    def from_message(cls, msg: Message) -> "DataTuple":
        return cls(msg.instance, msg.y, msg.e, msg.sender)

    @property
    def is_oracular(self) -> bool:
        return self.e is ORACLE_MARK and self.provenance.is_oracle


class State(str, enum.Enum):
    CAN_SEND = "CAN_SEND"
    CAN_RECEIVE = "CAN_RECEIVE"


@dataclass(frozen=True)
class LocalConfiguration:
    state: State
    hypothesis: Any
    dataset: tuple[DataTuple, ...] = ()
    last_message: Message | None = None
    sent: bool = False  # direction of last_message: True for '+', False for '-'


@dataclass(frozen=True)
class GuardRecord:
    """Guard values seen by the agent that chose a transition.

    ``source`` is ``"computed"`` when the engine evaluated MATCH/AGREE,
    ``"asserted"`` when a scripted or remote agent chose its tag and the
    guards were read off the chosen row, and ``"none"`` for rows guarded
    by the trivial guard.
    """

    g1: bool = False
    g2: bool = False
    g3: bool = False
    g4: bool = False
    g_prime: bool | None = None
    source: str = "computed"

    @classmethod
    def from_outcomes(cls, match: bool, agree: bool) -> "GuardRecord":
        return cls(
            g1=match and agree,
            g2=match and not agree,
            g3=not match and agree,
            g4=not match and not agree,
        )

    @property
    def active(self) -> str | None:
        for name in ("g1", "g2", "g3", "g4"):
            if getattr(self, name):
                return name
        return None

    def to_json(self) -> dict[str, Any]:
        return {
            "g1": self.g1,
            "g2": self.g2,
            "g3": self.g3,
            "g4": self.g4,
            "g_prime": self.g_prime,
            "source": self.source,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "GuardRecord":
        return cls(d["g1"], d["g2"], d["g3"], d["g4"], d.get("g_prime"), d.get("source", "computed"))


NO_GUARDS = GuardRecord(source="none")


@dataclass(frozen=True)
class Step:
    index: int
    message: Message
    guards: GuardRecord
    row: str
    snapshot: str | None = None  # sender's hypothesis after the step

    @property
    def sender(self) -> AgentId:
        return self.message.sender

    @property
    def tag(self) -> Tag:
        return self.message.tag


class SessionStatus(str, enum.Enum):
    OPEN = "open"
    TERMINATED = "terminated"
    ABORTED = "aborted"
    CAPPED = "safety-capped"


@dataclass
class Transcript:
    """Append-only record of one session."""

    session_id: str
    initiator: AgentId
    responder: AgentId
    instance: Any
    steps: list[Step] = field(default_factory=list)
    status: SessionStatus = SessionStatus.OPEN
    closing_row: str | None = None
    policy: dict[str, Any] = field(default_factory=dict)
    error: str | None = None

    @property
    def terminated(self) -> bool:
        return self.status is SessionStatus.TERMINATED

    @property
    def agents(self) -> tuple[AgentId, AgentId]:
        return (self.initiator, self.responder)

    def other(self, agent: AgentId) -> AgentId:
        if agent == self.initiator:
            return self.responder
        if agent == self.responder:
            return self.initiator
        raise KeyError(f"agent {agent} did not take part in session {self.session_id}")

    def agent_named(self, name: str) -> AgentId:
        for a in self.agents:
            if a.name == name:
                return a
        raise KeyError(f"no agent named {name!r} in session {self.session_id}")

    @property
    def tags(self) -> list[Tag]:
        return [s.tag for s in self.steps]

    @property
    def rows(self) -> list[str]:
        return [s.row for s in self.steps]

    def append(self, step: Step) -> None:
        if self.status is not SessionStatus.OPEN:
            raise ProtocolError(f"session {self.session_id} is {self.status.value}; cannot append")
        if step.index != len(self.steps):
            raise ProtocolError(f"step index {step.index} out of order")
        if not self.steps and step.tag is not Tag.INIT:
            raise ProtocolError("a session must open with Init")
        if self.steps and step.tag is Tag.INIT:
            raise ProtocolError("Init only opens sessions")
        if step.sender not in self.agents:
            raise ProtocolError(f"{step.sender} is not part of session {self.session_id}")
        if self.steps and step.sender == self.steps[-1].sender and step.tag is not Tag.TERM:
            raise ProtocolError(f"{step.sender} cannot send twice in a row except to terminate")
        if not self.steps and step.sender != self.initiator:
            raise ProtocolError("only the initiator may open the session")
        self.steps.append(step)
        if step.tag is Tag.TERM:
            self.status = SessionStatus.TERMINATED

    def validate(self) -> list[str]:
        """Return a description of every structural rule the transcript breaks."""
        problems: list[str] = []
        if not self.steps:
            return ["empty transcript"]
        if self.steps[0].tag is not Tag.INIT:
            problems.append("first tag is not Init")
        for i, s in enumerate(self.steps):
            if s.index != i:
                problems.append(f"step {i} has index {s.index}")
            if i and s.tag is Tag.INIT:
                problems.append(f"step {i}: Init after the opening message")
            if i and s.sender == self.steps[i - 1].sender and s.tag is not Tag.TERM:
                problems.append(f"step {i}: {s.sender} sent twice in a row")
            if s.tag is Tag.TERM and i != len(self.steps) - 1:
                problems.append(f"step {i}: message after Term")
        if self.terminated and self.steps[-1].tag is not Tag.TERM:
            problems.append("terminated transcript does not end with Term")
        return problems


@dataclass(frozen=True)
class TagSequence:
    sender: AgentId
    receiver: AgentId
    tags: tuple[Tag, ...]

    def __contains__(self, tag: object) -> bool:
        return tag in self.tags

    def __iter__(self) -> Iterator[Tag]:
        return iter(self.tags)

    def __len__(self) -> int:
        return len(self.tags)


def project_tags(t: Transcript, sender: AgentId | str) -> TagSequence:
    """Tags sent by ``sender`` in ``t``, in transcript order."""
    if isinstance(sender, str):
        sender = t.agent_named(sender)
    receiver = t.other(sender)
    return TagSequence(sender, receiver, tuple(s.tag for s in t.steps if s.sender == sender))


# ---------------------------------------------------------------- JSON lines


def encode_payload(v: Prediction | Explanation) -> str:
    if v is UNKNOWN:
        return _WIRE_UNKNOWN
    if v is ORACLE_MARK:
        return _WIRE_ORACLE
    return v


def decode_payload(v: str) -> Prediction | Explanation:
    if v == _WIRE_UNKNOWN:
        return UNKNOWN
    if v == _WIRE_ORACLE:
        return ORACLE_MARK
    return v


def _agent_json(a: AgentId) -> dict[str, Any]:
    return {"name": a.name, "oracle": a.is_oracle}


def step_to_json(s: Step) -> dict[str, Any]:
    d: dict[str, Any] = {
        "step": s.index,
        "sender": s.sender.name,
        "tag": s.tag.value,
        "x": s.message.instance,
        "y": encode_payload(s.message.y),
        "e": encode_payload(s.message.e),
        "guards": s.guards.to_json(),
        "row": s.row,
    }
    if s.snapshot is not None:
        d["h"] = s.snapshot
    return d


def transcript_header(t: Transcript) -> dict[str, Any]:
    return {
        "session": t.session_id,
        "initiator": _agent_json(t.initiator),
        "responder": _agent_json(t.responder),
        "x": t.instance,
        "status": t.status.value,
        "closing_row": t.closing_row,
        "policy": t.policy,
        "error": t.error,
    }


def _dumps(d: dict[str, Any]) -> str:
    return json.dumps(d, ensure_ascii=False, separators=(",", ":"))


def dumps_transcript(t: Transcript) -> str:
    lines = [_dumps({"header": transcript_header(t)})]
    lines.extend(_dumps(step_to_json(s)) for s in t.steps)
    return "\n".join(lines) + "\n"


def loads_transcript(text: str) -> Transcript:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty transcript document")
    first = json.loads(lines[0])
    if "header" not in first:
        raise ValueError("transcript must start with a header line")
    h = first["header"]
    initiator = AgentId(h["initiator"]["name"], h["initiator"]["oracle"])
    responder = AgentId(h["responder"]["name"], h["responder"]["oracle"])
    by_name = {initiator.name: initiator, responder.name: responder}
    t = Transcript(
        session_id=h["session"],
        initiator=initiator,
        responder=responder,
        instance=h["x"],
        policy=h.get("policy") or {},
        closing_row=h.get("closing_row"),
        error=h.get("error"),
    )
    for ln in lines[1:]:
        d = json.loads(ln)
        msg = Message(
            sender=by_name[d["sender"]],
            tag=Tag(d["tag"]),
            instance=d["x"],
            y=decode_payload(d["y"]),
            e=decode_payload(d["e"]),
        )
        t.steps.append(Step(d["step"], msg, GuardRecord.from_json(d["guards"]), d["row"], d.get("h")))
    t.status = SessionStatus(h["status"])
    return t


def dump_transcripts(ts: Iterable[Transcript]) -> str:
    return "".join(dumps_transcript(t) for t in ts)


def load_transcripts(text: str) -> list[Transcript]:
    """Split a file holding several transcripts back to back."""
    out: list[Transcript] = []
    chunk: list[str] = []
    for ln in text.splitlines():
        if not ln.strip():
            continue
        if ln.startswith('{"header"') and chunk:
            out.append(loads_transcript("\n".join(chunk)))
            chunk = []
        chunk.append(ln)
    if chunk:
        out.append(loads_transcript("\n".join(chunk)))
    return out
