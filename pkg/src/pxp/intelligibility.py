"""One-Way, Two-Way, Strong and Ultra-Strong intelligibility, and the axiom check.

Two readings of whose tags decide an agent's verdict are supported:

``"own"`` (default)
    agent m's verdict looks at the tags m itself sent. This is what every
    casebook entry agrees with: the extended lucky machine is intelligible
    for the machine only, a human Ratify makes a Covid session intelligible
    for the human, and the correctness argument reads the human's own tags.
``"counterpart"``
    agent m's verdict looks at the tags its counterpart sent back.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .model import AgentId, Tag, Transcript, project_tags

READINGS = ("own", "counterpart")
_POSITIVE = frozenset({Tag.RATIFY, Tag.REVISE})


def _agent(t: Transcript, agent: AgentId | str) -> AgentId:
    if isinstance(agent, str):
        return t.agent_named(agent)
    t.other(agent)  # raises for strangers
    return agent


def tags_deciding(t: Transcript, agent: AgentId | str, reading: str = "own") -> tuple[Tag, ...]:
    if reading not in READINGS:
        raise ValueError(f"reading must be one of {READINGS}")
    a = _agent(t, agent)
    sender = a if reading == "own" else t.other(a)
    return project_tags(t, sender).tags


def one_way_from_tags(tags: Iterable[Tag]) -> bool:
    tags = tuple(tags)
    return any(x in _POSITIVE for x in tags) and Tag.REJECT not in tags


def classify_one_way(t: Transcript, agent: AgentId | str, reading: str = "own") -> bool:
    return one_way_from_tags(tags_deciding(t, agent, reading))


@dataclass(frozen=True)
class IntelligibilityVerdict:
    one_way_for: Mapping[str, bool]
    two_way: bool
    reading: str = "own"

    def to_json(self) -> dict[str, Any]:
        return {"one_way_for": dict(self.one_way_for), "two_way": self.two_way,
                "reading": self.reading}


def classify_two_way(t: Transcript, reading: str = "own") -> IntelligibilityVerdict:
    flags = {a.name: classify_one_way(t, a, reading) for a in t.agents}
    return IntelligibilityVerdict(flags, all(flags.values()), reading)


class Strength(str, enum.Enum):
    NOT_STRONG = "NotStrong"
    STRONG = "Strong"
    ULTRA_STRONG = "UltraStrong"


def classify_strength(sessions: Sequence[Transcript], human: AgentId | str,
                      machine: AgentId | str, reading: str = "own") -> Strength:
    if not sessions:
        raise ValueError("need at least one session")
    h_name = human.name if isinstance(human, AgentId) else human
    m_name = machine.name if isinstance(machine, AgentId) else machine
    revise = False
    for t in sessions:
        names = {a.name for a in t.agents}
        if names != {h_name, m_name}:
            raise ValueError(f"session {t.session_id} is not between {h_name} and {m_name}")
        if not classify_one_way(t, h_name, reading):
            return Strength.NOT_STRONG
        revise = revise or Tag.REVISE in project_tags(t, h_name)
    return Strength.ULTRA_STRONG if revise else Strength.STRONG


# ---------------------------------------------------------------- axioms


class Axiom(str, enum.Enum):
    MACHINE_CONFIRMATION = "Machine-Confirmation"
    MACHINE_REFUTABILITY = "Machine-Refutability"
    MACHINE_PERFORMANCE = "Machine-Performance"
    HUMAN_CONFIRMATION = "Human-Confirmation"
    HUMAN_REFUTABILITY = "Human-Refutability"
    HUMAN_PERFORMANCE = "Human-Performance"


# axioms whose antecedent is an action by the given side
_BY_HUMAN = (Axiom.HUMAN_CONFIRMATION, Axiom.HUMAN_REFUTABILITY, Axiom.HUMAN_PERFORMANCE)
_BY_MACHINE = (Axiom.MACHINE_CONFIRMATION, Axiom.MACHINE_REFUTABILITY, Axiom.MACHINE_PERFORMANCE)

RATIFIED = "ratified"
IMPROVED = "improved"


@dataclass
class ActuationLog:
    """Harness-declared events per step: ``ratified`` when the sender
    ratified the counterpart's explanation, ``improved`` when its
    performance improved after revising."""

    events: dict[int, set[str]] = field(default_factory=dict)

    def record(self, step: int, event: str) -> None:
        if event not in (RATIFIED, IMPROVED):
            raise ValueError(f"unknown actuation event {event!r}")
        self.events.setdefault(step, set()).add(event)

    def has(self, step: int, event: str) -> bool:
        return event in self.events.get(step, set())

    @classmethod
    def from_guards(cls, t: Transcript) -> "ActuationLog":
        """The log an agent harness obeying the actuation constraints keeps:
        MATCH and AGREE both true means ratification (AC1), and a failed
        check that succeeds after LEARN means improvement (AC2)."""
        log = cls()
        for s in t.steps:
            g = s.guards
            if g.g1:
                log.record(s.index, RATIFIED)
            if (g.g2 or g.g3) and g.g_prime:
                log.record(s.index, IMPROVED)
        return log


class UnverifiableStep(Exception):
    def __init__(self, step: int, tag: Tag):
        super().__init__(f"unverifiable step {step}: {tag.value} has no actuation event")
        self.step = step


@dataclass
class AxiomFirings:
    witnesses: dict[Axiom, list[int]] = field(default_factory=lambda: {a: [] for a in Axiom})
    one_way_human: bool = False
    one_way_machine: bool = False

    def fired(self, axiom: Axiom) -> bool:
        return bool(self.witnesses[axiom])

    @property
    def machine_to_human(self) -> bool:
        return self.fired(Axiom.HUMAN_CONFIRMATION) or self.fired(Axiom.HUMAN_PERFORMANCE)

    @property
    def human_to_machine(self) -> bool:
        return self.fired(Axiom.MACHINE_CONFIRMATION) or self.fired(Axiom.MACHINE_PERFORMANCE)

    @property
    def correct(self) -> bool:
        return ((not self.one_way_human or self.machine_to_human)
                and (not self.one_way_machine or self.human_to_machine))

    def to_json(self) -> dict[str, Any]:
        return {"fired": {a.value: w for a, w in self.witnesses.items() if w},
                "one_way_human": self.one_way_human, "one_way_machine": self.one_way_machine,
                "correct": self.correct}


def check_actuation_correctness(t: Transcript, log: ActuationLog, human: AgentId | str,
                                reading: str = "own") -> AxiomFirings:
    """Antecedents fired in ``t``, and whether intelligibility implies one.

    A human Ratify step with a ``ratified`` event fires Human-Confirmation; a
    human Revise with ``improved`` fires Human-Performance; a human Refute
    fires Human-Refutability. Machine axioms mirror these.
    """
    h = _agent(t, human)
    out = AxiomFirings(one_way_human=classify_one_way(t, h, reading),
                       one_way_machine=classify_one_way(t, t.other(h), reading))
    for s in t.steps:
        conf, refu, perf = _BY_HUMAN if s.sender == h else _BY_MACHINE
        if s.tag is Tag.RATIFY:
            if not log.has(s.index, RATIFIED):
                raise UnverifiableStep(s.index, s.tag)
            out.witnesses[conf].append(s.index)
        elif s.tag is Tag.REVISE:
            if not log.has(s.index, IMPROVED):
                raise UnverifiableStep(s.index, s.tag)
            out.witnesses[perf].append(s.index)
        elif s.tag is Tag.REFUTE:
            out.witnesses[refu].append(s.index)
    return out


def analyse(t: Transcript, human: str | None = None, reading: str = "own") -> dict[str, Any]:
    """Per-session summary used by the CLI and the gateway."""
    v = classify_two_way(t, reading)
    row: dict[str, Any] = {"session": t.session_id, "status": t.status.value,
                           "tags": [f"{s.tag.value}_{s.sender.name}" for s in t.steps],
                           **v.to_json()}
    if human is not None:
        try:
            row["axioms"] = check_actuation_correctness(
                t, ActuationLog.from_guards(t), human, reading).to_json()
        except UnverifiableStep as exc:
            row["axioms"] = {"error": str(exc)}
    return row


__all__ = [
    "ActuationLog",
    "Axiom",
    "AxiomFirings",
    "IntelligibilityVerdict",
    "READINGS",
    "Strength",
    "UnverifiableStep",
    "analyse",
    "check_actuation_correctness",
    "classify_one_way",
    "classify_strength",
    "classify_two_way",
    "one_way_from_tags",
    "tags_deciding",
]
