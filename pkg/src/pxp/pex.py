"""The five-function agent contract and the oracle."""
from __future__ import annotations

import abc
import copy
from dataclasses import dataclass, field
from typing import Any, Sequence

from .model import (
    ORACLE_ID,
    ORACLE_MARK,
    UNKNOWN,
    AgentId,
    DataTuple,
    Explanation,
    LocalConfiguration,
    Message,
    Prediction,
    ProtocolError,
    State,
    Tag,
    instance_key,
)


class PexError(Exception):
    """A PEX function failed; names the function that raised."""

    def __init__(self, function: str, agent: str, cause: BaseException):
        super().__init__(f"{function} failed for agent {agent}: {cause}")
        self.function = function
        self.agent = agent
        self.cause = cause


class PexFunctions(abc.ABC):
    """PREDICT, EXPLAIN, LEARN, MATCH and AGREE for one kind of agent.

    MATCH and AGREE must return False whenever either argument is
    ``UNKNOWN``; PREDICT and EXPLAIN never return it.
    """

    #: declared capability; the oracle-agreement check requires it
    transitive_match: bool = False
    #: only the oracle explains with the oracle mark
    oracle_explanations: bool = False

    @abc.abstractmethod
    def predict(self, x: Any, h: Any) -> Prediction: ...

    @abc.abstractmethod
    def explain(self, x: Any, y: Prediction, h: Any) -> Explanation: ...

    @abc.abstractmethod
    def learn(self, h: Any, dataset: Sequence[DataTuple]) -> Any: ...

    @abc.abstractmethod
    def match(self, a: Prediction, b: Prediction) -> bool: ...

    @abc.abstractmethod
    def agree(self, a: Explanation, b: Explanation) -> bool: ...

    def describe(self, h: Any) -> str:
        return str(h)


class Agent:
    """A participant in sessions: PEX functions plus hypothesis and dataset.

    Hypothesis and dataset persist across sessions, so an agent that once
    heard from the oracle keeps that tuple.
    """

    #: scripted and remote agents choose their own tags
    asserts_tags = False

    def __init__(self, name: str | AgentId, pex: PexFunctions, hypothesis: Any = None,
                 dataset: Sequence[DataTuple] = ()):
        self.id = name if isinstance(name, AgentId) else AgentId(name)
        self.pex = pex
        self.hypothesis = hypothesis
        self.dataset: list[DataTuple] = list(dataset)
        self.open_session: str | None = None
        self.state = State.CAN_RECEIVE
        self.last_message: Message | None = None
        self.last_sent = False

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.id.name!r})"

    @property
    def name(self) -> str:
        return self.id.name

    def _call(self, fn: str, *args: Any) -> Any:
        try:
            return getattr(self.pex, fn)(*args)
        except PexError:
            raise
        except Exception as exc:  # noqa: BLE001 - rewrapped with the function name
            raise PexError(fn.upper(), self.name, exc) from exc

    def predict(self, x: Any, h: Any = None) -> Prediction:
        return self._call("predict", x, self.hypothesis if h is None else h)

    def explain(self, x: Any, y: Prediction, h: Any = None) -> Explanation:
        return self._call("explain", x, y, self.hypothesis if h is None else h)

    def opinion(self, x: Any, h: Any = None) -> tuple[Prediction, Explanation]:
        h = self.hypothesis if h is None else h
        y = self.predict(x, h)
        return y, self.explain(x, y, h)

    def learn(self, dataset: Sequence[DataTuple]) -> Any:
        return self._call("learn", self.hypothesis, list(dataset))

    def match(self, a: Prediction, b: Prediction) -> bool:
        return bool(self._call("match", a, b))

    def agree(self, a: Explanation, b: Explanation) -> bool:
        return bool(self._call("agree", a, b))

    def describe(self) -> str:
        return self.pex.describe(self.hypothesis)

    def configuration(self) -> LocalConfiguration:
        return LocalConfiguration(self.state, self.hypothesis, tuple(self.dataset),
                                  self.last_message, self.last_sent)

    def clone(self) -> "Agent":
        twin = copy.copy(self)
        twin.dataset = list(self.dataset)
        twin.open_session = None
        return twin


# ------------------------------------------------------------------ oracle


@dataclass
class OracleRecordStore:
    """Infallible labels, one per instance, fixed once set."""

    _labels: dict[str, Prediction] = field(default_factory=dict)

    def set(self, x: Any, y: Prediction) -> None:
        if y is UNKNOWN or y is ORACLE_MARK:
            raise ValueError("the oracle's verdict must be a concrete label")
        key = instance_key(x)
        if key in self._labels and self._labels[key] != y:
            raise ValueError(f"oracle verdict for {key} is already {self._labels[key]!r}")
        self._labels[key] = y

    def get(self, x: Any) -> Prediction | None:
        return self._labels.get(instance_key(x))

    def __contains__(self, x: Any) -> bool:
        return instance_key(x) in self._labels

    def __len__(self) -> int:
        return len(self._labels)

    @classmethod
    def from_pairs(cls, pairs) -> "OracleRecordStore":
        store = cls()
        for x, y in pairs:
            store.set(x, y)
        return store


class NoVerdictError(ProtocolError):
    def __init__(self, x: Any):
        super().__init__(f"oracle has no verdict for {instance_key(x)}")
        self.instance = x


def oracle_respond(store: OracleRecordStore, incoming: Message) -> Message:
    if incoming.tag is not Tag.INIT:
        raise ProtocolError(f"the oracle only answers Init, got {incoming.tag}")
    y = store.get(incoming.instance)
    if y is None:
        raise NoVerdictError(incoming.instance)
    return Message(ORACLE_ID, Tag.TERM, incoming.instance, y, ORACLE_MARK)


class _OraclePex(PexFunctions):
    # The oracle is not a PEX agent; these exist so it can sit in a session.
    transitive_match = True
    oracle_explanations = True

    def __init__(self, store: OracleRecordStore):
        self.store = store

    def predict(self, x, h):
        y = self.store.get(x)
        if y is None:
            raise NoVerdictError(x)
        return y

    def explain(self, x, y, h):
        return ORACLE_MARK

    def learn(self, h, dataset):
        return h

    def match(self, a, b):
        return a is not UNKNOWN and b is not UNKNOWN and a == b

    def agree(self, a, b):
        return False


class OracleAgent(Agent):
    def __init__(self, store: OracleRecordStore):
        super().__init__(ORACLE_ID, _OraclePex(store))
        self.store = store

    def respond(self, incoming: Message) -> Message:
        return oracle_respond(self.store, incoming)

    def describe(self) -> str:
        return f"oracle({len(self.store)} verdicts)"


# -------------------------------------------------------------- validation


@dataclass(frozen=True)
class Probe:
    instance: Any
    hypothesis: Any
    predictions: tuple[Prediction, ...] = ()
    explanations: tuple[Explanation, ...] = ()


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    witness: tuple[Any, ...] = ()


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    checks: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def validate_pex(p: PexFunctions, probes: Sequence[Probe]) -> ValidationReport:
    """Exercise the contract on every probe; violations become report entries."""
    if not probes:
        raise ValueError("probe set must not be empty")
    rep = ValidationReport()

    def fail(kind: str, detail: str, *witness: Any) -> None:
        rep.violations.append(Violation(kind, detail, witness))

    for probe in probes:
        ys = list(probe.predictions)
        es = list(probe.explanations)
        try:
            own_y = p.predict(probe.instance, probe.hypothesis)
            own_e = p.explain(probe.instance, own_y, probe.hypothesis)
        except Exception as exc:  # noqa: BLE001
            fail("predict-explain", f"raised {exc!r}", probe.instance)
            continue
        rep.checks += 1
        if own_y is UNKNOWN or own_y is ORACLE_MARK:
            fail("predict-unknown", "PREDICT returned a mark", probe.instance)
        if own_e is UNKNOWN or (own_e is ORACLE_MARK and not p.oracle_explanations):
            fail("explain-unknown", "EXPLAIN returned a mark", probe.instance)
        ys.append(own_y)
        es.append(own_e)

        for a in ys:
            for b in ys:
                rep.checks += 1
                if p.match(a, b) != p.match(b, a):
                    fail("commutativity", "MATCH(a,b) != MATCH(b,a)", a, b)
        for a in ys:
            rep.checks += 2
            if p.match(a, UNKNOWN) or p.match(UNKNOWN, a):
                fail("unknown-match", "MATCH with '?' returned true", a)
        for a in es:
            rep.checks += 2
            if p.agree(a, UNKNOWN) or p.agree(UNKNOWN, a):
                fail("unknown-agree", "AGREE with '?' returned true", a)

        for y in ys:
            if y is UNKNOWN:
                continue
            rep.checks += 1
            oracle_tuple = DataTuple(probe.instance, y, ORACLE_MARK, ORACLE_ID)
            try:
                h2 = p.learn(probe.hypothesis, [oracle_tuple])
                y2 = p.predict(probe.instance, h2)
            except Exception as exc:  # noqa: BLE001
                fail("oracle-consistency", f"LEARN/PREDICT raised {exc!r}", probe.instance, y)
                continue
            if not p.match(y2, y):
                fail("oracle-consistency", "prediction after learning disagrees with the oracle",
                     probe.instance, y, y2)
    return rep


def pex_of(agent: Agent | PexFunctions) -> PexFunctions:
    return agent.pex if isinstance(agent, Agent) else agent


__all__ = [
    "Agent",
    "NoVerdictError",
    "OracleAgent",
    "OracleRecordStore",
    "PexError",
    "PexFunctions",
    "Probe",
    "ValidationReport",
    "Violation",
    "oracle_respond",
    "pex_of",
    "validate_pex",
]
