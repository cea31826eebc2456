"""Reference agents: a rule-list learner, a lookup table, scripted and remote agents.

Rule grammar, one clause per line::

    pos :- ring=true, heavy=false
    neg :- true
    default(neg)

Bodies are conjunctions of ``attribute=value`` tests; attribute order is not
significant. A hypothesis is the clause list followed by one ``default(label)``
line.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .engine import Decision
from .model import (
    ORACLE_MARK,
    UNKNOWN,
    DataTuple,
    Explanation,
    Message,
    Mark,
    Prediction,
    ProtocolError,
    Tag,
    instance_key,
)
from .pex import Agent, OracleAgent, OracleRecordStore, PexFunctions

# ------------------------------------------------------------------ rules


def _value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.-]*$")


@dataclass(frozen=True)
class Rule:
    head: str
    body: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        norm = tuple(sorted(set((a, _value(v)) for a, v in self.body)))
        attrs = [a for a, _ in norm]
        if len(set(attrs)) != len(attrs):
            raise ValueError(f"rule tests one attribute twice: {norm}")
        object.__setattr__(self, "body", norm)

    def covers(self, x: dict[str, Any]) -> bool:
        for a, v in self.body:
            if a not in x:
                raise KeyError(f"instance has no attribute {a!r}")
            if _value(x[a]) != v:
                return False
        return True

    def covers_safe(self, x: dict[str, Any]) -> bool:
        try:
            return self.covers(x)
        except KeyError:
            return False

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head} :- true"
        return f"{self.head} :- " + ", ".join(f"{a}={v}" for a, v in self.body)

    @classmethod
    def parse(cls, text: str) -> "Rule":
        if not isinstance(text, str) or ":-" not in text:
            raise ValueError(f"not a rule: {text!r}")
        head, _, body = text.partition(":-")
        head = head.strip()
        if not _NAME.match(head):
            raise ValueError(f"bad rule head {head!r}")
        body = body.strip()
        if body in ("", "true"):
            return cls(head)
        tests = []
        for part in body.split(","):
            a, eq, v = part.partition("=")
            a, v = a.strip(), v.strip()
            if not eq or not _NAME.match(a) or not v:
                raise ValueError(f"bad test {part.strip()!r} in {text!r}")
            tests.append((a, v))
        return cls(head, tuple(tests))


_DEFAULT = re.compile(r"^default\(\s*([A-Za-z_][A-Za-z0-9_.-]*)\s*\)$")


def default_token(label: str) -> str:
    return f"default({label})"


def parse_explanation(e: Explanation) -> Rule | str:
    """A Rule, or the label inside a ``default(label)`` token."""
    if isinstance(e, Mark):
        raise ValueError("marks are not explanations")
    m = _DEFAULT.match(e.strip())
    if m:
        return m.group(1)
    return Rule.parse(e)


def clause_agree(e1: Explanation, e2: Explanation) -> bool:
    """Restricted θ-equivalence: same head and the same set of ground tests."""
    try:
        a, b = parse_explanation(e1), parse_explanation(e2)
    except ValueError:
        return False
    return a == b


@dataclass(frozen=True)
class RuleList:
    rules: tuple[Rule, ...] = ()
    default: str = "neg"

    def first_match(self, x: dict[str, Any]) -> Rule | None:
        for r in self.rules:
            if r.covers(x):
                return r
        return None

    def predict(self, x: dict[str, Any]) -> str:
        r = self.first_match(x)
        return self.default if r is None else r.head

    def __str__(self) -> str:
        return "\n".join([*map(str, self.rules), default_token(self.default)])

    @classmethod
    def parse(cls, text: str) -> "RuleList":
        rules, default = [], None
        for ln in text.splitlines():
            ln = ln.strip()
            if not ln or ln.startswith("%"):
                continue
            m = _DEFAULT.match(ln)
            if m:
                if default is not None:
                    raise ValueError("two default lines")
                default = m.group(1)
            else:
                if default is not None:
                    raise ValueError("rules after the default line")
                rules.append(Rule.parse(ln))
        if default is None:
            raise ValueError("hypothesis needs a default(label) line")
        return cls(tuple(rules), default)


def rulelist_predict(x: dict[str, Any], h: RuleList) -> Prediction:
    return h.predict(x)


def rulelist_explain(x: dict[str, Any], y: Prediction, h: RuleList) -> Explanation:
    r = h.first_match(x)
    label = h.default if r is None else r.head
    if y != label:
        raise ValueError(f"{y!r} is not what the hypothesis predicts for this instance")
    return default_token(label) if r is None else str(r)


def _targets(dataset: Sequence[DataTuple]) -> dict[str, tuple[dict, str]]:
    """Label per instance: the oracle's if any, otherwise the latest."""
    oracle: dict[str, str] = {}
    latest: dict[str, tuple[dict, str]] = {}
    for t in dataset:
        if t.y is UNKNOWN:
            continue
        k = instance_key(t.instance)
        if t.is_oracular:
            if k in oracle and oracle[k] != t.y:
                raise ValueError(f"contradictory oracle labels for {k}")
            oracle[k] = t.y
        latest[k] = (t.instance, t.y)
    for k, y in oracle.items():
        latest[k] = (latest[k][0], y)
    return latest


def _consistent(r: Rule, targets: Iterable[tuple[dict, str]]) -> bool:
    return all(y == r.head for x, y in targets if r.covers_safe(x))


def _generalise(x: dict[str, Any], label: str, targets: list[tuple[dict, str]]) -> Rule:
    tests = sorted((a, _value(v)) for a, v in x.items())
    for t in list(tests):
        trial = [u for u in tests if u != t]
        if _consistent(Rule(label, tuple(trial)), targets):
            tests = trial
    return Rule(label, tuple(tests))


def rulelist_learn(h: RuleList, dataset: Sequence[DataTuple]) -> RuleList:
    """Separate-and-conquer repair of ``h`` against the dataset.

    Counterpart clauses that fit every target are adopted first, then each
    still-misclassified instance gets a greedily generalised clause placed
    ahead of the old ones.
    """
    if not dataset:
        return h
    targets = _targets(dataset)
    tlist = list(targets.values())
    advice: list[Rule] = []
    for t in reversed(dataset):
        if isinstance(t.e, Mark) or t.y is UNKNOWN:
            continue
        try:
            r = parse_explanation(t.e)
        except ValueError:
            continue
        if not isinstance(r, Rule) or r in advice:
            continue
        label = targets[instance_key(t.instance)][1]
        if r.head == label and r.covers_safe(t.instance) and _consistent(r, tlist):
            advice.append(r)
    repairs: list[Rule] = []

    def current() -> RuleList:
        seen: list[Rule] = []
        for r in (*advice, *repairs, *h.rules):
            if r not in seen:
                seen.append(r)
        return RuleList(tuple(seen), h.default)

    while True:
        cand = current()
        wrong = [(x, y) for x, y in tlist if cand.predict(x) != y]
        if not wrong:
            return cand
        x, y = wrong[0]
        repairs.append(_generalise(x, y, tlist))


def _is_mark(v: Any) -> bool:
    return isinstance(v, Mark)


class RuleListPex(PexFunctions):
    transitive_match = True

    def predict(self, x, h: RuleList):
        return rulelist_predict(x, h)

    def explain(self, x, y, h: RuleList):
        return rulelist_explain(x, y, h)

    def learn(self, h: RuleList, dataset):
        return rulelist_learn(h, dataset)

    def match(self, a, b):
        return not _is_mark(a) and not _is_mark(b) and a == b

    def agree(self, a, b):
        if _is_mark(a) or _is_mark(b):
            return False
        return clause_agree(a, b)

    def describe(self, h: RuleList) -> str:
        return str(h)


class RuleListAgent(Agent):
    def __init__(self, name: str, hypothesis: RuleList | str | None = None,
                 dataset: Sequence[DataTuple] = ()):
        if isinstance(hypothesis, str):
            hypothesis = RuleList.parse(hypothesis)
        super().__init__(name, RuleListPex(), hypothesis or RuleList(), dataset)


# ------------------------------------------------------------------ table


@dataclass(frozen=True)
class TableHypothesis:
    entries: tuple[tuple[str, str, str], ...] = ()  # (instance key, label, explanation)
    default: tuple[str, str] = ("neg", "default(neg)")

    def lookup(self, x: Any) -> tuple[str, str]:
        k = instance_key(x)
        for key, y, e in self.entries:
            if key == k:
                return y, e
        return self.default

    def with_entry(self, x: Any, y: str, e: str) -> "TableHypothesis":
        k = instance_key(x)
        rest = tuple(t for t in self.entries if t[0] != k)
        return TableHypothesis(tuple(sorted(rest + ((k, y, e),))), self.default)

    @classmethod
    def from_items(cls, items: Iterable[tuple[Any, str, str]],
                   default: tuple[str, str] = ("neg", "default(neg)")) -> "TableHypothesis":
        h = cls((), default)
        for x, y, e in items:
            h = h.with_entry(x, y, e)
        return h


class TablePex(PexFunctions):
    """Lookup hypotheses. LEARN takes the latest label per instance (the
    oracle's wins); explanations are adopted only if ``accept_explanations``."""

    transitive_match = True

    def __init__(self, accept_explanations: bool = True):
        self.accept_explanations = accept_explanations

    def predict(self, x, h: TableHypothesis):
        return h.lookup(x)[0]

    def explain(self, x, y, h: TableHypothesis):
        label, e = h.lookup(x)
        return e if y == label else default_token(y)

    def learn(self, h: TableHypothesis, dataset):
        if not dataset:
            return h
        explained: dict[str, str] = {}
        for t in dataset:
            if isinstance(t.e, str):
                explained[instance_key(t.instance)] = t.e
        for x, y in _targets(dataset).values():
            old_y, old_e = h.lookup(x)
            e = old_e
            if self.accept_explanations and instance_key(x) in explained:
                e = explained[instance_key(x)]
            elif y != old_y:
                e = default_token(y) if old_e.startswith("default(") else f"{old_e} => {y}"
            h = h.with_entry(x, y, e)
        return h

    def match(self, a, b):
        return not _is_mark(a) and not _is_mark(b) and a == b

    def agree(self, a, b):
        if _is_mark(a) or _is_mark(b):
            return False
        try:
            return parse_explanation(a) == parse_explanation(b)
        except ValueError:
            return a == b

    def describe(self, h: TableHypothesis) -> str:
        return "; ".join(f"{k}->{y}|{e}" for k, y, e in h.entries) or "empty table"


class TableAgent(Agent):
    def __init__(self, name: str, hypothesis: TableHypothesis | None = None,
                 accept_explanations: bool = True, dataset: Sequence[DataTuple] = ()):
        super().__init__(name, TablePex(accept_explanations), hypothesis or TableHypothesis(), dataset)


# ---------------------------------------------------------- scripted agents


class StandingPex(PexFunctions):
    """PEX functions of an agent that chooses its own tags: its hypothesis is
    just its standing (y, e). LEARN leaves it alone unless the dataset holds
    an oracle verdict, which it then adopts."""

    transitive_match = True

    def predict(self, x, h):
        return h[0]

    def explain(self, x, y, h):
        return h[1]

    def learn(self, h, dataset):
        for t in reversed(dataset):
            if t.is_oracular:
                return h if h[0] == t.y else (t.y, default_token(t.y))
        return h

    def match(self, a, b):
        return not _is_mark(a) and not _is_mark(b) and a == b

    def agree(self, a, b):
        return not _is_mark(a) and not _is_mark(b) and a == b

    def describe(self, h) -> str:
        return f"{h[0]} | {h[1]}"


@dataclass(frozen=True)
class ScriptStep:
    """One turn of a script. ``y``/``e`` left as None echo the incoming
    message (or the agent's standing opinion when opening)."""

    tag: Tag
    y: Prediction | None = None
    e: Explanation | None = None
    expect: Tag | None = None
    row: str | None = None
    then_term: bool = False


class ScriptedAgent(Agent):
    asserts_tags = True

    def __init__(self, name: str, steps: Sequence[ScriptStep] = (), y: str = "pos",
                 e: str = "default(pos)"):
        super().__init__(name, StandingPex(), (y, e))
        self.steps = list(steps)
        self.cursor = 0

    def adopt(self, y: Prediction, e: Explanation) -> None:
        if not _is_mark(y) and not _is_mark(e):
            self.hypothesis = (y, e)

    def decide(self, incoming: Message | None, x: Any) -> Decision:
        if self.cursor >= len(self.steps):
            return Decision(Tag.TERM)
        step = self.steps[self.cursor]
        self.cursor += 1
        got = incoming.tag if incoming is not None else None
        if step.expect is not None and step.expect is not got:
            raise ProtocolError(f"{self.name} expected {step.expect.value}, "
                                f"got {got.value if got else 'nothing'}")
        y, e = step.y, step.e
        if incoming is not None and not incoming.has_unknown and not _is_mark(incoming.e):
            y = incoming.y if y is None else y
            e = incoming.e if e is None else e
        return Decision(step.tag, y, e, step.row, step.then_term)


class RemoteAgent(Agent):
    """Stand-in for an agent whose decisions arrive over the gateway."""

    asserts_tags = True

    def __init__(self, name: str, y: str = "pos", e: str = "default(pos)"):
        super().__init__(name, StandingPex(), (y, e))

    def adopt(self, y: Prediction, e: Explanation) -> None:
        if not _is_mark(y) and not _is_mark(e):
            self.hypothesis = (y, e)


def script_pair(sequence: Sequence[tuple[str, Tag]], a: str, b: str,
                payloads: dict[int, tuple[str, str]] | None = None,
                rows: dict[int, str] | None = None) -> tuple[ScriptedAgent, ScriptedAgent]:
    """Two scripted agents that together send ``sequence``.

    ``sequence`` lists (sender name, tag). A Term sent by the agent that also
    sent the previous message becomes a ``then_term`` on that turn; a Term
    right after the counterpart's message is an ordinary reply.
    """
    payloads = payloads or {}
    rows = rows or {}
    if not sequence or sequence[0][1] is not Tag.INIT:
        raise ValueError("a tag sequence must open with Init")
    scripts: dict[str, list[ScriptStep]] = {a: [], b: []}
    prev_sender = None
    for i, (sender, tag) in enumerate(sequence):
        if sender not in scripts:
            raise ValueError(f"unknown sender {sender!r}")
        y, e = payloads.get(i, (None, None))
        if tag is Tag.TERM and sender == prev_sender:
            last = scripts[sender][-1]
            scripts[sender][-1] = ScriptStep(last.tag, last.y, last.e, last.expect, last.row, True)
            break
        if sender == prev_sender:
            raise ValueError(f"{sender} sends twice in a row at position {i}")
        expect = sequence[i - 1][1] if i else None
        scripts[sender].append(ScriptStep(tag, y, e, expect, rows.get(i)))
        prev_sender = sender
        if tag is Tag.TERM:
            break
    return ScriptedAgent(a, scripts[a]), ScriptedAgent(b, scripts[b])


# --------------------------------------------------------------- registry


def _oracle(name: str = "oracle", store: OracleRecordStore | None = None, **_: Any) -> OracleAgent:
    return OracleAgent(store or OracleRecordStore())


AGENT_KINDS: dict[str, Callable[..., Agent]] = {
    "rulelist": RuleListAgent,
    "table": TableAgent,
    "scripted": ScriptedAgent,
    "oracle": _oracle,
}


def make_agent(kind: str, name: str | None = None, **options: Any) -> Agent:
    try:
        factory = AGENT_KINDS[kind]
    except KeyError:
        raise KeyError(f"unknown agent kind {kind!r}; choose from {sorted(AGENT_KINDS)}") from None
    return factory(name or kind, **options)


# -------------------------------------------------------- random fixtures


@dataclass
class Domain:
    """Boolean attributes and class labels for randomly generated agents."""

    attributes: tuple[str, ...] = ("a0", "a1", "a2", "a3")
    labels: tuple[str, ...] = ("pos", "neg")
    rng: random.Random = field(default_factory=random.Random)

    def instance(self) -> dict[str, bool]:
        return {a: self.rng.random() < 0.5 for a in self.attributes}

    def rule(self, max_tests: int = 3) -> Rule:
        n = self.rng.randint(0, min(max_tests, len(self.attributes)))
        attrs = self.rng.sample(self.attributes, n)
        return Rule(self.rng.choice(self.labels),
                    tuple((a, _value(self.rng.random() < 0.5)) for a in attrs))

    def rulelist(self, max_rules: int = 5, max_tests: int = 3) -> RuleList:
        rules = [self.rule(max_tests) for _ in range(self.rng.randint(0, max_rules))]
        uniq: list[Rule] = []
        for r in rules:
            if r not in uniq:
                uniq.append(r)
        return RuleList(tuple(uniq), self.rng.choice(self.labels))


__all__ = [
    "AGENT_KINDS",
    "Domain",
    "RemoteAgent",
    "Rule",
    "RuleList",
    "RuleListAgent",
    "RuleListPex",
    "ScriptStep",
    "ScriptedAgent",
    "StandingPex",
    "TableAgent",
    "TableHypothesis",
    "TablePex",
    "clause_agree",
    "make_agent",
    "parse_explanation",
    "rulelist_explain",
    "rulelist_learn",
    "rulelist_predict",
    "script_pair",
]
