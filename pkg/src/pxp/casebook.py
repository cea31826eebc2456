"""Case studies and hypothetical machines replayed as engine sessions.

Fixtures live in ``pxp/data/cases.json``; radiologist-style assessment logs
are CSV files with columns ``prediction_opinion`` (correct, wrong, unsure),
``explanation_opinion`` (sufficient, incomplete, incorrect) and
``clarifies`` (yes, no). Extra columns are kept as session ids when one is
called ``id``.
"""
from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Callable, Sequence

from .agents import (
    RuleList,
    RuleListAgent,
    ScriptedAgent,
    ScriptStep,
    TableAgent,
    TableHypothesis,
    clause_agree,
    script_pair,
)
from .engine import Decision, InitPayload, Session, SessionPolicy
from .intelligibility import classify_one_way, classify_two_way
from .model import Message, Tag, Transcript


@lru_cache(maxsize=None)
def load_fixtures() -> dict[str, Any]:
    return json.loads(resources.files("pxp.data").joinpath("cases.json").read_text("utf-8"))


def _data_text(name: str) -> str:
    return resources.files("pxp.data").joinpath(name).read_text("utf-8")


def tag_label(t: Transcript) -> str:
    return ", ".join(f"{s.tag.value.upper()}_{s.sender.name}" for s in t.steps)


# ------------------------------------------------------- canonical machines


@dataclass(frozen=True)
class CanonicalMachine:
    name: str
    sequence: tuple[tuple[str, Tag], ...]  # (sender, tag); senders "m" and "h"
    one_way_human: bool
    one_way_machine: bool

    @property
    def two_way(self) -> bool:
        return self.one_way_human and self.one_way_machine


def _seq(text: str) -> tuple[tuple[str, Tag], ...]:
    out = []
    for tok in text.split():
        tag, sender = tok.split("_")
        out.append((sender, Tag.parse(tag)))
    return tuple(out)


def canonical_machines() -> list[CanonicalMachine]:
    """The hypothetical machines with their expected verdicts."""
    return [
        CanonicalMachine("lucky", _seq("INIT_m REFUTE_h TERM_h"), False, False),
        CanonicalMachine("lucky-extended",
                         _seq("INIT_m REFUTE_h REVISE_m REFUTE_h REVISE_m TERM_h"), False, True),
        CanonicalMachine("obdurate",
                         _seq("INIT_m REFUTE_h REFUTE_m REFUTE_h REFUTE_m TERM_h"), False, False),
        CanonicalMachine("compliant", _seq("INIT_m REFUTE_h REVISE_m RATIFY_h TERM_h"), True, True),
        CanonicalMachine("compliant-extended",
                         _seq("INIT_m REFUTE_h REVISE_m REFUTE_h REVISE_m RATIFY_h TERM_h"),
                         True, True),
        CanonicalMachine("helpful", _seq("INIT_m REVISE_h RATIFY_m TERM_h"), True, True),
        CanonicalMachine("helpful-extended",
                         _seq("INIT_m REVISE_h REFUTE_m REVISE_h RATIFY_m TERM_h"), True, True),
        CanonicalMachine("incomprehensible", _seq("INIT_m REJECT_h TERM_h"), False, False),
    ]


def replay_sequence(sequence: Sequence[tuple[str, Tag]], k: int = 2, x: Any = None,
                    a: str = "m", b: str = "h", payloads=None, rows=None) -> Transcript:
    """Run scripted agents that send exactly ``sequence``."""
    ia, ib = script_pair(sequence, a, b, payloads, rows)
    first = sequence[0][0]
    init, resp = (ia, ib) if first == a else (ib, ia)
    policy = SessionPolicy(k=k, initiator_payload=InitPayload(x if x is not None else {"id": "x"}))
    return Session(init, resp, policy).run()


# ---------------------------------------------------------------- reports


@dataclass
class SessionOutcome:
    id: str
    transcript: Transcript
    expected: dict[str, Any] = field(default_factory=dict)
    actual: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.actual.get(k) == v for k, v in self.expected.items())


@dataclass
class CaseReport:
    case: str
    description: str
    sessions: list[SessionOutcome]
    counts: dict[str, int]
    expected_counts: dict[str, int]
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def mismatched(self) -> list[str]:
        return [s.id for s in self.sessions if not s.ok]

    @property
    def ok(self) -> bool:
        counts_ok = all(self.counts.get(k, 0) == v for k, v in self.expected_counts.items())
        return counts_ok and not self.mismatched

    def summary(self) -> str:
        parts = [f"{k}: {self.counts.get(k, 0)}" for k in self.expected_counts]
        verdict = "ok" if self.ok else "FAILED"
        return f"{self.case}: {', '.join(parts)} [{verdict}]"

    def to_json(self) -> dict[str, Any]:
        return {
            "case": self.case,
            "ok": self.ok,
            "counts": self.counts,
            "expected": self.expected_counts,
            "mismatched": self.mismatched,
            "metadata": self.metadata,
            "sessions": [{"id": s.id, "tags": tag_label(s.transcript),
                          "rows": s.transcript.rows, "expected": s.expected,
                          "actual": s.actual} for s in self.sessions],
        }


def _verdicts(t: Transcript) -> dict[str, bool]:
    v = classify_two_way(t)
    return {f"one_way_{n}": f for n, f in v.one_way_for.items()} | {"two_way": v.two_way}


def replay_canonical(k: int = 3) -> CaseReport:
    outcomes = []
    for m in canonical_machines():
        t = replay_sequence(m.sequence, k=k)
        outcomes.append(SessionOutcome(
            m.name, t,
            {"one_way_h": m.one_way_human, "one_way_m": m.one_way_machine,
             "two_way": m.two_way, "tags": list(m.sequence)},
            _verdicts(t) | {"tags": [(s.sender.name, s.tag) for s in t.steps]}))
    counts = Counter("two-way" if o.actual["two_way"] else "not two-way" for o in outcomes)
    expected = Counter("two-way" if m.two_way else "not two-way" for m in canonical_machines())
    return CaseReport("canonical", "hypothetical machines", outcomes, dict(counts), dict(expected))


# ---------------------------------------------------------------- case 1


class UnmappedAssessment(ValueError):
    pass


def assessment_tag(prediction_opinion: str, explanation_opinion: str, clarifies: bool) -> Tag:
    """Map one assessment to the human's reply tag.

    Rule order: an insufficient explanation is refuted whatever the
    prediction opinion; a sufficient explanation with a correct prediction
    is ratified; an incorrect explanation is refuted when the prediction is
    correct or unsure and a clarification was given, and rejected when the
    prediction is wrong and nothing was clarified.
    """
    p = prediction_opinion.strip().lower()
    e = explanation_opinion.strip().lower()
    if e in ("incomplete", "insufficient"):
        return Tag.REFUTE
    if e == "sufficient" and p == "correct":
        return Tag.RATIFY
    if e == "incorrect" and p in ("correct", "unsure") and clarifies:
        return Tag.REFUTE
    if e == "incorrect" and p in ("wrong", "incorrect") and not clarifies:
        return Tag.REJECT
    raise UnmappedAssessment(f"no mapping rule for prediction={p!r}, explanation={e!r}, "
                             f"clarifies={clarifies}")


@dataclass(frozen=True)
class Assessment:
    id: str
    prediction_opinion: str
    explanation_opinion: str
    clarifies: bool

    @property
    def tag(self) -> Tag:
        return assessment_tag(self.prediction_opinion, self.explanation_opinion, self.clarifies)


_YES = {"yes", "y", "true", "1"}
_NO = {"no", "n", "false", "0", ""}


def ingest_assessments(text: str) -> list[Assessment]:
    reader = csv.DictReader(io.StringIO(text))
    need = {"prediction_opinion", "explanation_opinion", "clarifies"}
    missing = need - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"assessment log lacks columns {sorted(missing)}")
    out = []
    for i, row in enumerate(reader, 1):
        c = row["clarifies"].strip().lower()
        if c not in _YES | _NO:
            raise ValueError(f"line {i + 1}: clarifies must be yes or no, got {c!r}")
        out.append(Assessment(row.get("id") or f"row-{i}", row["prediction_opinion"],
                              row["explanation_opinion"], c in _YES))
    return out


def replay_assessments(assessments: Sequence[Assessment], fx: dict[str, Any] | None = None,
                       k: int = 2) -> list[SessionOutcome]:
    fx = fx or load_fixtures()["covid"]
    pos, neg = fx["labels"]
    out = []
    for a in assessments:
        x = {"image": a.id}
        machine = TableAgent("m", TableHypothesis.from_items([(x, pos, fx["machine_explanation"])]))
        tag = a.tag
        if tag is Tag.RATIFY:
            step = ScriptStep(tag, then_term=True)
        elif tag is Tag.REFUTE:
            wrong = a.prediction_opinion.strip().lower() == "wrong"
            step = ScriptStep(tag, neg if wrong else pos, fx["clarification"],
                              row="4" if wrong else "2", then_term=True)
        else:
            step = ScriptStep(tag, neg, fx["rejection"], then_term=True)
        human = ScriptedAgent("h", [step], pos, fx["clarification"])
        t = Session(machine, human, SessionPolicy(k=k, initiator_payload=InitPayload(x))).run()
        out.append(SessionOutcome(
            a.id, t, {"reply": tag.value},
            {"reply": t.steps[1].tag.value, "one_way_h": classify_one_way(t, "h")}))
    return out


def replay_covid(csv_text: str | None = None) -> CaseReport:
    fx = load_fixtures()["covid"]
    text = csv_text if csv_text is not None else _data_text(fx["assessments"])
    outcomes = replay_assessments(ingest_assessments(text), fx)
    counts = Counter(o.actual["reply"] for o in outcomes)
    counts["one_way_human"] = sum(o.actual["one_way_h"] for o in outcomes)
    return CaseReport("covid", fx["description"], outcomes, dict(counts), dict(fx["expected"]))


# ---------------------------------------------------------------- case 2


def replay_dnn(model: str) -> CaseReport:
    fx = load_fixtures()["dnn"]
    if model not in fx["models"]:
        raise KeyError(f"unknown network {model!r}; choose from {sorted(fx['models'])}")
    tally = fx["models"][model]
    label = fx["label"]
    outcomes = []
    n = 0
    for outcome in ("better", "same", "worse"):
        for _ in range(tally[outcome]):
            n += 1
            x = {"dataset": f"ds{n:02d}"}
            machine = TableAgent(
                "m", TableHypothesis.from_items([(x, label, f"{label} :- lookup=ds{n:02d}")]),
                accept_explanations=(outcome == "better"))
            human = ScriptedAgent("h", [ScriptStep(Tag.INIT)], label,
                                  f"{label} :- motif=m{n:02d}, ring=r{n:02d}")
            t = Session(human, machine, SessionPolicy(initiator_payload=InitPayload(x))).run()
            expected = Tag.REVISE if outcome == "better" else Tag.REFUTE
            outcomes.append(SessionOutcome(
                x["dataset"], t, {"reply": expected.value, "outcome": outcome},
                {"reply": t.steps[1].tag.value, "outcome": outcome,
                 "one_way_m": classify_one_way(t, "m")}))
    counts = Counter(o.actual["reply"] for o in outcomes)
    counts["one_way_machine"] = sum(o.actual["one_way_m"] for o in outcomes)
    return CaseReport(f"dnn-{model}", fx["description"], outcomes, dict(counts),
                      dict(fx["expected"][model]), {"model": model, **tally})


# ---------------------------------------------------------------- case 3

_REFUTING = {"prune", "rebut", "pick", "constrain", "overgeneral", "overspecific"}
_SILENT = {"extent", "db_extent"}


def acuity_steps(actions: Sequence[str], explanations: dict[str, str],
                 label: str) -> list[ScriptStep]:
    """Expert menu actions as the human's script (the opening Init included)."""
    steps: list[ScriptStep] = []
    last_e = None
    for act in actions:
        base = act.split(":")[0].split(" ")[0]
        if base in ("enter", "re-enter"):
            last_e = explanations.get(base, explanations.get("enter"))
            steps.append(ScriptStep(Tag.INIT, label, last_e))
        elif base in _SILENT:
            continue
        elif base == "accept":
            steps.append(ScriptStep(Tag.RATIFY))
        elif base in _REFUTING:
            last_e = explanations[base]
            steps.append(ScriptStep(Tag.REFUTE, label, last_e))
        elif base in ("none", "end"):
            ending = act.partition(":")[2] or "ratify"
            if ending == "ratify":
                steps.append(ScriptStep(Tag.RATIFY, then_term=True))
            elif ending == "refute":
                steps.append(ScriptStep(Tag.REFUTE, label, last_e, then_term=True))
            else:
                raise ValueError(f"session end must be none:ratify or none:refute, got {act!r}")
        else:
            raise ValueError(f"unknown ACUITY action {act!r}")
    return steps


def replay_acuity() -> CaseReport:
    fx = load_fixtures()["acuity"]
    outcomes = []
    for s in fx["sessions"]:
        human = ScriptedAgent("h", acuity_steps(s["actions"], fx["explanations"], fx["label"]),
                              fx["label"], fx["explanations"]["enter"])
        machine = RuleListAgent("m", RuleList((), fx["machine_default"]))
        t = Session(human, machine,
                    SessionPolicy(k=3, initiator_payload=InitPayload(fx["instance"]))).run()
        outcomes.append(SessionOutcome(s["id"], t, {"two_way": s["expected_two_way"]},
                                       _verdicts(t)))
    counts = Counter("two-way" if o.actual["two_way"] else "not two-way" for o in outcomes)
    expected = Counter("two-way" if s["expected_two_way"] else "not two-way"
                       for s in fx["sessions"])
    return CaseReport("acuity", fx["description"], outcomes, dict(counts), dict(expected))


# ---------------------------------------------------------------- case 4


class ExpertAgent(ScriptedAgent):
    """A pathologist who ratifies a report whose explanation matches their
    own rule and otherwise refutes it with that rule."""

    def __init__(self, name: str, rule: str, label: str):
        super().__init__(name, [], label, rule)
        self.rule = rule

    def decide(self, incoming: Message | None, x: Any) -> Decision:
        if incoming is None:
            return Decision(Tag.INIT)
        if incoming.tag in (Tag.INIT, Tag.REVISE, Tag.REFUTE, Tag.RATIFY):
            if incoming.y == self.hypothesis[0] and clause_agree(incoming.e, self.rule):
                return Decision(Tag.RATIFY, incoming.y, incoming.e)
            return Decision(Tag.REFUTE, incoming.y, self.rule)
        return Decision(Tag.TERM)


def replay_peirs() -> CaseReport:
    fx = load_fixtures()["peirs"]
    machine = RuleListAgent("m", fx["machine"])
    outcomes = []
    for s in fx["sessions"]:
        label = RuleList.parse(s["expert"] + "\ndefault(none)").rules[0].head
        human = ExpertAgent("h", s["expert"], label)
        t = Session(machine, human,
                    SessionPolicy(k=3, initiator_payload=InitPayload(s["x"]))).run()
        v = _verdicts(t)
        kind = "B" if Tag.REVISE in t.tags else "A"
        outcomes.append(SessionOutcome(
            s["id"], t,
            {"type": s["type"], "one_way_h": True, "two_way": s["type"] == "B"},
            {"type": kind, **v}))
    counts = Counter(o.actual["type"] for o in outcomes)
    expected = Counter(s["type"] for s in fx["sessions"])
    return CaseReport("peirs", fx["description"], outcomes, dict(counts), dict(expected),
                      dict(fx["metadata"]) | {"rules_after": len(machine.hypothesis.rules)})


CASES: dict[str, Callable[[], CaseReport]] = {
    "canonical": replay_canonical,
    "covid": replay_covid,
    "dnn-mlp": lambda: replay_dnn("mlp"),
    "dnn-gnn": lambda: replay_dnn("gnn"),
    "acuity": replay_acuity,
    "peirs": replay_peirs,
}


def replay_case(case: str) -> CaseReport:
    try:
        return CASES[case]()
    except KeyError:
        raise KeyError(f"unknown case {case!r}; choose from {sorted(CASES)}") from None


__all__ = [
    "Assessment",
    "CASES",
    "CanonicalMachine",
    "CaseReport",
    "ExpertAgent",
    "SessionOutcome",
    "UnmappedAssessment",
    "acuity_steps",
    "assessment_tag",
    "canonical_machines",
    "ingest_assessments",
    "load_fixtures",
    "replay_acuity",
    "replay_assessments",
    "replay_canonical",
    "replay_case",
    "replay_covid",
    "replay_dnn",
    "replay_peirs",
    "replay_sequence",
    "tag_label",
]
