"""Guard evaluation, transition selection and session execution."""
from __future__ import annotations

import uuid
from dataclasses import asdict, dataclass
from typing import Any, Sequence

from .model import (
    NO_GUARDS,
    UNKNOWN,
    AgentId,
    DataTuple,
    Explanation,
    GuardRecord,
    LocalConfiguration,
    Message,
    Prediction,
    ProtocolError,
    SessionStatus,
    State,
    Step,
    Tag,
    Transcript,
)
from .pex import Agent, NoVerdictError, OracleAgent, PexError, PexFunctions
from .table import (
    RULES_BY_ROW,
    TransitionRule,
    Update,
    compatible_table,
    pxpk_table,
    unknown_pattern,
)


@dataclass(frozen=True)
class InitPayload:
    """What the initiator puts in its Init. ``None`` means "use my own
    prediction/explanation"; ``UNKNOWN`` sends '?'."""

    x: Any
    y: Prediction | None = None
    e: Explanation | None = None


@dataclass
class SessionPolicy:
    k: int = 2
    terminate_after_ratify: bool = True
    max_steps: int = 64
    initiator_payload: InitPayload | None = None
    assume_compatible: bool = False
    snapshots: bool = True

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("loop budget k must be non-negative")
        if self.max_steps < 2:
            raise ValueError("max_steps must be at least 2")

    def rules(self) -> tuple[TransitionRule, ...]:
        return pxpk_table(compatible=self.assume_compatible)

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d.pop("initiator_payload")
        return d


class Budgets:
    """Remaining occurrences of each budgeted row in one session."""

    def __init__(self, k: int, rules: Sequence[TransitionRule]):
        self.k = k
        self.remaining = {r.row: k for r in rules if r.budgeted}

    def available(self, row: str) -> bool:
        return self.remaining.get(row, 0) > 0

    def spend(self, row: str) -> None:
        if not self.available(row):
            raise ProtocolError(f"budget for row {row} is exhausted")
        self.remaining[row] -= 1

    def used(self, row: str) -> int:
        return self.k - self.remaining[row]


# ---------------------------------------------------------------- guards


def _call(pex: PexFunctions, fn: str, owner: str, *args: Any) -> Any:
    try:
        return getattr(pex, fn)(*args)
    except PexError:
        raise
    except Exception as exc:  # noqa: BLE001
        raise PexError(fn.upper(), owner, exc) from exc


def _opinion(pex: PexFunctions, x: Any, h: Any, owner: str) -> tuple[Prediction, Explanation]:
    y = _call(pex, "predict", owner, x, h)
    return y, _call(pex, "explain", owner, x, y, h)


def evaluate_guards(receiver: LocalConfiguration, pex: PexFunctions, incoming: Message,
                    owner: str = "receiver") -> GuardRecord:
    """g1..g4 from the receiver's own opinion of ``incoming.instance``.

    An incoming "?" makes every guard false; rows 36-38 handle it instead.
    """
    if incoming.has_unknown:
        return GuardRecord()
    y_n, e_n = _opinion(pex, incoming.instance, receiver.hypothesis, owner)
    m = bool(_call(pex, "match", owner, y_n, incoming.y))
    a = bool(_call(pex, "agree", owner, e_n, incoming.e))
    return GuardRecord.from_outcomes(m, a)


def post_learning_check(pex: PexFunctions, x: Any, learned: Any, incoming: Message,
                        owner: str = "receiver") -> bool:
    y2, e2 = _opinion(pex, x, learned, owner)
    return bool(_call(pex, "match", owner, y2, incoming.y)) and bool(
        _call(pex, "agree", owner, e2, incoming.e))


# ------------------------------------------------------------- selection


def _candidates(rules: Sequence[TransitionRule], received: Tag | None) -> list[TransitionRule]:
    return [r for r in rules if r.received is received]


def select_transition(received: Message | Tag | None, guards: GuardRecord, budgets: Budgets,
                      policy: SessionPolicy,
                      rules: Sequence[TransitionRule] | None = None) -> TransitionRule:
    """Pick the single rule a PEX agent fires, spending loop budget if needed.

    Determinisation: Ratify under g1 with ``terminate_after_ratify`` ends the
    session (row 31); a budgeted row whose budget is spent yields its Term
    twin; Term rows with the trivial guard are otherwise left to scripted
    agents.
    """
    rules = policy.rules() if rules is None else rules
    msg = received if isinstance(received, Message) else None
    tag = msg.tag if msg is not None else received

    if tag is None:
        return RULES_BY_ROW["0"]
    if tag is Tag.TERM:
        return RULES_BY_ROW["39"]
    if msg is not None and msg.has_unknown:
        pattern = unknown_pattern(msg)
        for r in rules:
            if r.received is Tag.INIT and r.unknown == pattern:
                return r
        raise ProtocolError(f"no rule handles Init with pattern {pattern}")
    if tag is Tag.RATIFY and guards.g1 and policy.terminate_after_ratify:
        return RULES_BY_ROW["31"]

    live = [r for r in _candidates(rules, tag)
            if r.guard.base is not None and r.unknown is None and r.guard.holds(guards)]
    if not live:
        raise ProtocolError(
            f"no transition for {tag.value} under {guards.active or 'no guard'}"
            f" (g'={guards.g_prime}) in the active table")
    budgeted = [r for r in live if r.budgeted]
    plain = [r for r in live if not r.budgeted and not r.row.endswith("'")]
    if budgeted:
        r = budgeted[0]
        if budgets.available(r.row):
            budgets.spend(r.row)
            return r
        return RULES_BY_ROW[r.twin]
    if len(plain) != 1:
        raise AssertionError(f"guard exclusivity broken: {[r.row for r in plain]}")
    return plain[0]


def legal_responses(received: Message | None, rules: Sequence[TransitionRule]) -> list[Tag]:
    """Tags some rule lets an agent send in reply to ``received``."""
    if received is None:
        return [Tag.INIT]
    if received.tag is Tag.TERM:
        return []
    pattern = unknown_pattern(received)
    tags: list[Tag] = []
    for r in _candidates(rules, received.tag):
        if r.sent is None or r.row.endswith("'"):
            continue
        if r.unknown != pattern and not (r.guard.base is None and r.unknown is None):
            continue
        if r.sent not in tags:
            tags.append(r.sent)
    return sorted(tags, key=list(Tag).index)


def resolve_asserted(received: Message | None, sent: Tag, budgets: Budgets,
                     rules: Sequence[TransitionRule], hint: str | None = None) -> TransitionRule:
    """Row for a tag chosen by a scripted or remote agent."""
    tag = received.tag if received is not None else None
    pattern = unknown_pattern(received) if received is not None else None
    pool = [r for r in _candidates(rules, tag) if r.sent is sent]
    if hint is not None:
        pool = [r for r in pool if r.row == hint]
        if not pool:
            raise ProtocolError(f"row {hint} does not send {sent.value} after "
                                f"{tag.value if tag else 'no message'}")
    if tag is Tag.INIT and sent is not Tag.TERM:
        pool = [r for r in pool if r.unknown == pattern]
    if tag is None:
        pool = [r for r in pool if r.row in ("0", "40")]
    if sent is Tag.TERM:
        pool.sort(key=lambda r: (r.guard.base is not None, r.row.endswith("'")))
    else:
        pool = [r for r in pool if not r.row.endswith("'")]
    if not pool:
        raise ProtocolError(f"{sent.value} is not a legal reply to "
                            f"{tag.value if tag else 'no message'}")
    for r in pool:
        if not r.budgeted:
            return r
        if budgets.available(r.row):
            budgets.spend(r.row)
            return r
    return RULES_BY_ROW[pool[0].twin]


# ----------------------------------------------------------- application


@dataclass(frozen=True)
class Applied:
    config: LocalConfiguration
    message: Message | None


def apply_transition(config: LocalConfiguration, incoming: Message | None, rule: TransitionRule,
                     pex: PexFunctions, me: AgentId, *, x: Any = None,
                     learned: Any = None) -> Applied:
    """Run the transition's computation and build the outgoing message.

    ``learned`` short-cuts LEARN when the engine already ran it to decide g'.
    """
    dataset = config.dataset
    if incoming is not None:
        dataset = dataset + (DataTuple.from_message(incoming),)
        x = incoming.instance
    h = config.hypothesis
    if rule.update is Update.LEARN:
        h2 = learned if learned is not None else _call(pex, "learn", me.name, h, list(dataset))
    else:
        h2 = h
    out = None
    if rule.sent is not None:
        y, e = _opinion(pex, x, h if rule.pre_learning_reply else h2, me.name)
        out = Message(me, rule.sent, x, y, e)
    cfg = LocalConfiguration(State.CAN_RECEIVE if out is not None else State.CAN_SEND,
                             h2, dataset, out if out is not None else incoming, out is not None)
    return Applied(cfg, out)


# ---------------------------------------------------------------- session


@dataclass(frozen=True)
class Decision:
    """A tag chosen by a scripted or remote agent."""

    tag: Tag
    y: Prediction | None = None
    e: Explanation | None = None
    row: str | None = None
    then_term: bool = False


class AwaitingDecision(Exception):
    """The agent to move is remote; call ``Session.submit``."""


class Session:
    """A stepping session between two agents.

    Local PEX agents, scripted agents (which have ``decide``) and the oracle
    move on ``advance``; a remote agent's turn stops ``run_local`` until a
    ``Decision`` arrives through ``submit``.
    """

    def __init__(self, initiator: Agent, responder: Agent, policy: SessionPolicy | None = None,
                 session_id: str | None = None):
        policy = policy or SessionPolicy()
        if initiator is responder or initiator.id == responder.id:
            raise ValueError("a session needs two distinct agents")
        if isinstance(initiator, OracleAgent):
            raise ProtocolError("the oracle never initiates a session")
        if policy.initiator_payload is None:
            raise ValueError("policy.initiator_payload must name the instance")
        for a in (initiator, responder):
            if a.open_session is not None:
                raise ProtocolError(f"{a.name} is already in session {a.open_session}")
        self.initiator, self.responder, self.policy = initiator, responder, policy
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.rules = policy.rules()
        self.budgets = Budgets(policy.k, self.rules)
        self.transcript = Transcript(self.session_id, initiator.id, responder.id,
                                     policy.initiator_payload.x, policy=policy.to_json())
        self.pending: Message | None = None
        self.to_move: Agent | None = initiator
        for a in (initiator, responder):
            a.open_session = self.session_id

    # -- bookkeeping

    @property
    def done(self) -> bool:
        return self.transcript.status is not SessionStatus.OPEN

    @property
    def awaiting_remote(self) -> bool:
        a = self.to_move
        return a is not None and not self.done and a.asserts_tags and not hasattr(a, "decide")

    def other(self, agent: Agent) -> Agent:
        return self.responder if agent is self.initiator else self.initiator

    def _release(self) -> None:
        for a in (self.initiator, self.responder):
            if a.open_session == self.session_id:
                a.open_session = None

    def abort(self, reason: str) -> None:
        if self.done:
            return
        self.transcript.status = SessionStatus.ABORTED
        self.transcript.error = reason
        self.to_move = None
        self._release()

    def _record(self, agent: Agent, msg: Message, guards: GuardRecord, row: str) -> Step:
        snap = agent.describe() if self.policy.snapshots else None
        step = Step(len(self.transcript.steps), msg, guards, row, snap)
        self.transcript.append(step)
        other = self.other(agent)
        agent.last_message, agent.last_sent, agent.state = msg, True, State.CAN_RECEIVE
        other.last_message, other.last_sent, other.state = msg, False, State.CAN_SEND
        self.pending = msg
        self.to_move = other
        if msg.tag is Tag.TERM:
            self._close(other, msg)
        elif len(self.transcript.steps) >= self.policy.max_steps:
            self.transcript.status = SessionStatus.CAPPED
            self.transcript.error = f"no Term within {self.policy.max_steps} messages"
            self.to_move = None
            self._release()
        return step

    def _close(self, receiver: Agent, term: Message) -> None:
        """Row 39: the receiver of Term adds it to its data and learns."""
        self.to_move = None
        self.transcript.closing_row = "39"
        receiver.dataset.append(DataTuple.from_message(term))
        try:
            if not isinstance(receiver, OracleAgent):
                receiver.hypothesis = receiver.learn(receiver.dataset)
        except PexError as exc:
            self.transcript.status = SessionStatus.ABORTED
            self.transcript.error = str(exc)
        finally:
            self._release()

    def _guarded(self, fn):
        try:
            return fn()
        except PexError as exc:
            self.abort(str(exc))
            return []
        except ProtocolError as exc:
            self.abort(str(exc))
            if isinstance(exc, NoVerdictError):
                return []
            raise

    # -- moves

    def open(self) -> list[Step]:
        if self.transcript.steps:
            raise ProtocolError("session already opened")
        a = self.initiator
        if a.asserts_tags:
            if not hasattr(a, "decide"):
                raise AwaitingDecision(a.name)
            return self._assert(a, a.decide(None, self.transcript.instance))
        return self._guarded(lambda: self._open_local(a))

    def _open_local(self, a: Agent) -> list[Step]:
        payload = self.policy.initiator_payload
        y, e = payload.y, payload.e
        if y is None or e is None:
            own_y, own_e = a.opinion(payload.x)
            y = own_y if y is None else y
            e = own_e if e is None else e
        return [self._record(a, Message(a.id, Tag.INIT, payload.x, y, e), NO_GUARDS, "0")]

    def advance(self) -> list[Step]:
        """Let the agent to move answer the pending message."""
        if self.done:
            return []
        if not self.transcript.steps:
            return self.open()
        agent, incoming = self.to_move, self.pending
        assert agent is not None and incoming is not None
        if isinstance(agent, OracleAgent):
            return self._guarded(lambda: self._oracle(agent, incoming))
        if agent.asserts_tags:
            if not hasattr(agent, "decide"):
                raise AwaitingDecision(agent.name)
            return self._guarded(lambda: self._assert(agent, agent.decide(incoming, incoming.instance)))
        return self._guarded(lambda: self._respond(agent, incoming))

    def submit(self, decision: Decision) -> list[Step]:
        """Apply a remote agent's decision, then let local agents move.

        An illegal decision raises ``ProtocolError`` and leaves the session
        unchanged.
        """
        if self.done:
            raise ProtocolError("session is closed")
        if not self.awaiting_remote and not (
                not self.transcript.steps and self.initiator.asserts_tags):
            raise ProtocolError("it is not the remote agent's turn")
        agent = self.to_move
        steps = self._assert(agent, decision)
        return steps + self.run_local()

    def run_local(self) -> list[Step]:
        """Advance until finished or a remote agent must decide."""
        out: list[Step] = []
        while not self.done and not self.awaiting_remote:
            out.extend(self.advance())
        return out

    def run(self) -> Transcript:
        if not self.transcript.steps:
            self.open()
        self.run_local()
        if self.awaiting_remote:
            raise AwaitingDecision(self.to_move.name)
        return self.transcript

    def _oracle(self, oracle: OracleAgent, incoming: Message) -> list[Step]:
        reply = oracle.respond(incoming)
        oracle.dataset.append(DataTuple.from_message(incoming))
        return [self._record(oracle, reply, NO_GUARDS, "35")]

    def _assert(self, agent: Agent, d: Decision) -> list[Step]:
        incoming = self.pending if self.transcript.steps else None
        if incoming is not None and d.tag is Tag.INIT:
            raise ProtocolError("Init only opens sessions")
        if incoming is None and d.tag is not Tag.INIT:
            raise ProtocolError("a session must open with Init")
        budget_before = dict(self.budgets.remaining)
        rule = resolve_asserted(incoming, d.tag, self.budgets, self.rules, d.row)
        x = self.transcript.instance
        y, e = d.y, d.e
        if incoming is None:
            payload = self.policy.initiator_payload
            y = payload.y if y is None else y
            e = payload.e if e is None else e
        if y is None or e is None:
            own_y, own_e = agent.opinion(x)
            y = own_y if y is None else y
            e = own_e if e is None else e
        try:
            msg = Message(agent.id, rule.sent, x, y, e)
        except (ProtocolError, TypeError, ValueError):
            self.budgets.remaining = budget_before
            raise
        if incoming is not None:
            agent.dataset.append(DataTuple.from_message(incoming))
        if hasattr(agent, "adopt"):
            agent.adopt(y, e)
        guards = NO_GUARDS if rule.guard.base is None else rule.guard.asserted()
        steps = [self._record(agent, msg, guards, rule.row)]
        if d.then_term and rule.sent is not Tag.TERM and not self.done:
            if msg.has_unknown:
                y, e = agent.opinion(x)
            term = Message(agent.id, Tag.TERM, x, y, e)
            steps.append(self._record(agent, term, NO_GUARDS, "40"))
        return steps

    def _respond(self, agent: Agent, incoming: Message) -> list[Step]:
        cfg = agent.configuration()
        if incoming.has_unknown:
            rule = select_transition(incoming, NO_GUARDS, self.budgets, self.policy, self.rules)
            applied = apply_transition(cfg, incoming, rule, agent.pex, agent.id)
            return self._commit(agent, applied, NO_GUARDS, rule)

        guards = evaluate_guards(cfg, agent.pex, incoming, agent.name)
        learned = None
        if (guards.g2 or guards.g3):
            dataset = list(cfg.dataset) + [DataTuple.from_message(incoming)]
            learned = _call(agent.pex, "learn", agent.name, cfg.hypothesis, dataset)
            gp = post_learning_check(agent.pex, incoming.instance, learned, incoming, agent.name)
            guards = GuardRecord(guards.g1, guards.g2, guards.g3, guards.g4, gp)
        rule = select_transition(incoming, guards, self.budgets, self.policy, self.rules)
        if rule.update is not Update.LEARN:
            learned = None
        applied = apply_transition(cfg, incoming, rule, agent.pex, agent.id, learned=learned)
        return self._commit(agent, applied, guards, rule)

    def _commit(self, agent: Agent, applied: Applied, guards: GuardRecord,
                rule: TransitionRule) -> list[Step]:
        agent.hypothesis = applied.config.hypothesis
        agent.dataset = list(applied.config.dataset)
        assert applied.message is not None
        return [self._record(agent, applied.message, guards, rule.row)]


def run_session(a: Agent, b: Agent, policy: SessionPolicy, session_id: str | None = None) -> Transcript:
    """Run a session between two local agents until it ends."""
    return Session(a, b, policy, session_id).run()


__all__ = [
    "AwaitingDecision",
    "Budgets",
    "Decision",
    "InitPayload",
    "Session",
    "SessionPolicy",
    "apply_transition",
    "compatible_table",
    "evaluate_guards",
    "legal_responses",
    "resolve_asserted",
    "run_session",
    "select_transition",
]
