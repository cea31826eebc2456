from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pxp.agents import (
    RemoteAgent,
    RuleListAgent,
    ScriptedAgent,
    ScriptStep,
    StandingPex,
)
from pxp.engine import (
    AwaitingDecision,
    Budgets,
    Decision,
    InitPayload,
    Session,
    SessionPolicy,
    apply_transition,
    evaluate_guards,
    legal_responses,
    run_session,
    select_transition,
)
from pxp.model import (
    UNKNOWN,
    AgentId,
    GuardRecord,
    LocalConfiguration,
    Message,
    ProtocolError,
    SessionStatus,
    State,
    Tag,
)
from pxp.pex import Agent, PexError, PexFunctions
from pxp.table import RULES_BY_ROW, Update, pxpk_table, rule

from support import random_session

M = AgentId("m")


class Fixed(PexFunctions):
    """MATCH and AGREE return fixed answers."""

    def __init__(self, m: bool, a: bool):
        self.m, self.a = m, a

    def predict(self, x, h):
        return "pos"

    def explain(self, x, y, h):
        return "e"

    def learn(self, h, dataset):
        return h

    def match(self, a, b):
        return self.m and UNKNOWN not in (a, b)

    def agree(self, a, b):
        return self.a and UNKNOWN not in (a, b)


def _cfg(h=None):
    return LocalConfiguration(State.CAN_SEND, h)


@pytest.mark.parametrize("m,a", list(itertools.product([True, False], repeat=2)))
def test_exactly_one_guard_per_combination(m, a):
    g = evaluate_guards(_cfg(), Fixed(m, a), Message(M, Tag.INIT, "x", "pos", "e"))
    flags = [g.g1, g.g2, g.g3, g.g4]
    assert sum(flags) == 1
    assert flags.index(True) == {(True, True): 0, (True, False): 1,
                                 (False, True): 2, (False, False): 3}[(m, a)]


def test_identical_pair_gives_g1():
    g = evaluate_guards(_cfg(("pos", "e")), StandingPex(), Message(M, Tag.INIT, "x", "pos", "e"))
    assert g.active == "g1"


def test_unknown_prediction_gives_no_guard():
    for y, e in ((UNKNOWN, UNKNOWN), ("pos", UNKNOWN), (UNKNOWN, "e")):
        g = evaluate_guards(_cfg(), Fixed(True, True), Message(M, Tag.INIT, "x", y, e))
        assert g.active is None


class Boom(Fixed):
    def agree(self, a, b):
        raise RuntimeError("kaput")


def test_pex_failure_names_the_function():
    with pytest.raises(PexError, match="AGREE"):
        evaluate_guards(_cfg(), Boom(True, True), Message(M, Tag.INIT, "x", "pos", "e"), "h")


# -------------------------------------------------------------- selection


def _budgets(k, policy):
    return Budgets(k, policy.rules())


def test_init_g1_selects_row_one():
    p = SessionPolicy(initiator_payload=InitPayload("x"))
    r = select_transition(Tag.INIT, GuardRecord.from_outcomes(True, True), _budgets(2, p), p)
    assert (r.row, r.sent) == ("1", Tag.RATIFY)


def test_unknown_init_selects_row_36():
    p = SessionPolicy(initiator_payload=InitPayload("x"))
    msg = Message(M, Tag.INIT, "x", UNKNOWN, UNKNOWN)
    r = select_transition(msg, GuardRecord(), _budgets(2, p), p)
    assert (r.row, r.sent) == ("36", Tag.REFUTE)
    assert select_transition(Message(M, Tag.INIT, "x", "pos", UNKNOWN), GuardRecord(),
                             _budgets(2, p), p).row == "37"


def test_exhausted_ratify_loop_gives_primed_term():
    p = SessionPolicy(k=0, terminate_after_ratify=False, initiator_payload=InitPayload("x"))
    r = select_transition(Tag.RATIFY, GuardRecord.from_outcomes(True, True), _budgets(0, p), p)
    assert (r.row, r.sent) == ("7'", Tag.TERM)


def test_budget_spent_then_twin():
    p = SessionPolicy(k=1, terminate_after_ratify=False, initiator_payload=InitPayload("x"))
    b = _budgets(1, p)
    g = GuardRecord.from_outcomes(True, True)
    assert select_transition(Tag.RATIFY, g, b, p).row == "7-k"
    assert b.used("7-k") == 1
    assert select_transition(Tag.RATIFY, g, b, p).row == "7'"


def test_ratify_with_terminate_policy_fires_31():
    p = SessionPolicy(initiator_payload=InitPayload("x"))
    r = select_transition(Tag.RATIFY, GuardRecord.from_outcomes(True, True), _budgets(2, p), p)
    assert r.row == "31"


def test_term_received_is_row_39():
    p = SessionPolicy(initiator_payload=InitPayload("x"))
    assert select_transition(Tag.TERM, GuardRecord(), _budgets(2, p), p).row == "39"


def test_forbidden_row_unavailable_in_compatible_mode():
    p = SessionPolicy(assume_compatible=True, initiator_payload=InitPayload("x"))
    g = GuardRecord(g2=True, g_prime=False)
    with pytest.raises(ProtocolError):
        select_transition(Tag.RATIFY, g, _budgets(2, p), p)
    p2 = SessionPolicy(assume_compatible=False, initiator_payload=InitPayload("x"))
    assert select_transition(Tag.RATIFY, g, _budgets(2, p2), p2).row == "8"


def test_policy_validation():
    with pytest.raises(ValueError):
        SessionPolicy(k=-1)
    with pytest.raises(ValueError):
        SessionPolicy(max_steps=1)


def test_legal_responses():
    rules = pxpk_table(compatible=True)
    init = Message(M, Tag.INIT, "x", "pos", "e")
    assert legal_responses(init, rules) == [Tag.RATIFY, Tag.REFUTE, Tag.REVISE, Tag.REJECT, Tag.TERM]
    q = Message(M, Tag.INIT, "x", UNKNOWN, UNKNOWN)
    assert legal_responses(q, rules) == [Tag.REFUTE, Tag.TERM]
    assert legal_responses(None, rules) == [Tag.INIT]
    # compatible agents never answer Revise with Refute or Reject
    rev = Message(M, Tag.REVISE, "x", "pos", "e")
    assert legal_responses(rev, rules) == [Tag.RATIFY, Tag.TERM]


# ------------------------------------------------------------ application


def test_row_one_keeps_hypothesis():
    a = RuleListAgent("h", "pos :- ring=true\ndefault(neg)")
    x = {"ring": True}
    incoming = Message(M, Tag.INIT, x, "pos", "pos :- ring=true")
    out = apply_transition(a.configuration(), incoming, rule("1"), a.pex, a.id)
    assert out.config.hypothesis is a.hypothesis
    assert (out.message.tag, out.message.y) == (Tag.RATIFY, "pos")
    assert out.config.dataset[-1].instance == x
    assert out.config.state is State.CAN_RECEIVE


def test_row_three_learns_and_revises():
    a = RuleListAgent("h", "pos :- heavy=false\ndefault(neg)")
    x = {"ring": True, "heavy": False}
    incoming = Message(M, Tag.INIT, x, "pos", "pos :- ring=true")
    out = apply_transition(a.configuration(), incoming, rule("3"), a.pex, a.id)
    assert out.config.hypothesis != a.hypothesis
    assert out.message.tag is Tag.REVISE
    assert out.message.e == "pos :- ring=true"


def test_row_39_learns_without_message():
    a = RuleListAgent("h", "default(neg)")
    x = {"ring": True}
    incoming = Message(M, Tag.TERM, x, "pos", "pos :- ring=true")
    out = apply_transition(a.configuration(), incoming, rule("39"), a.pex, a.id)
    assert out.message is None
    assert out.config.hypothesis.predict(x) == "pos"
    assert rule("39").update is Update.LEARN


# ---------------------------------------------------------------- sessions


def test_compliant_machine_scenario():
    x = {"ring": True, "heavy": False}
    machine = RuleListAgent("m", "pos :- heavy=false\ndefault(neg)")
    human = ScriptedAgent("h", [
        ScriptStep(Tag.REFUTE, "pos", "pos :- ring=true", expect=Tag.INIT),
        ScriptStep(Tag.RATIFY, expect=Tag.REVISE, then_term=True),
    ])
    t = run_session(machine, human, SessionPolicy(initiator_payload=InitPayload(x)))
    assert [(s.tag.value, s.sender.name) for s in t.steps] == [
        ("Init", "m"), ("Refute", "h"), ("Revise", "m"), ("Ratify", "h"), ("Term", "h")]
    assert t.rows == ["0", "2", "15", "19", "40"]
    assert t.steps[2].guards.g2 and t.steps[2].guards.g_prime
    assert t.status is SessionStatus.TERMINATED and t.closing_row == "39"


def test_ratify_loop_is_budgeted():
    x = {"a": True}
    h = "pos :- a=true\ndefault(neg)"
    policy = SessionPolicy(k=2, terminate_after_ratify=False, initiator_payload=InitPayload(x))
    t = run_session(RuleListAgent("m", h), RuleListAgent("h", h), policy)
    assert t.rows == ["0", "1", "7-k", "7-k", "7'"]
    assert t.tags[-1] is Tag.TERM


def test_reject_loop_then_cap():
    x = {"a": True}
    policy = SessionPolicy(k=5, max_steps=4, initiator_payload=InitPayload(x))
    t = run_session(RuleListAgent("m", "pos :- a=true\ndefault(neg)"),
                    RuleListAgent("h", "neg :- a=true\ndefault(pos)"), policy)
    assert t.status is SessionStatus.CAPPED
    assert len(t.steps) == 4


def test_unknown_init_answered_with_refute():
    x = {"a": True}
    policy = SessionPolicy(initiator_payload=InitPayload(x, UNKNOWN, UNKNOWN))
    t = run_session(RuleListAgent("m"), RuleListAgent("h", "pos :- a=true\ndefault(neg)"), policy)
    assert t.rows[1] == "36" and t.tags[1] is Tag.REFUTE
    assert t.steps[1].message.y == "pos"


def test_pots_one_open_session_per_agent():
    a, b, c = RuleListAgent("a"), RuleListAgent("b"), RuleListAgent("c")
    policy = SessionPolicy(initiator_payload=InitPayload({"z": 1}))
    s = Session(a, b, policy)
    with pytest.raises(ProtocolError, match="already in session"):
        Session(c, a, policy)
    s.run()
    assert a.open_session is None
    Session(c, a, policy).run()


def test_distinct_agents_required():
    a = RuleListAgent("a")
    with pytest.raises(ValueError):
        Session(a, a, SessionPolicy(initiator_payload=InitPayload("x")))


class BadLearner(PexFunctions):
    def predict(self, x, h):
        return "pos"

    def explain(self, x, y, h):
        return "e1"

    def learn(self, h, dataset):
        raise RuntimeError("cannot learn")

    def match(self, a, b):
        return a == b and a is not UNKNOWN

    def agree(self, a, b):
        return a == b and a is not UNKNOWN


def test_learn_failure_aborts_session():
    a = Agent("a", BadLearner())
    b = ScriptedAgent("b", [ScriptStep(Tag.REFUTE, "pos", "e2")], y="pos", e="e2")
    t = run_session(a, b, SessionPolicy(initiator_payload=InitPayload("x")))
    assert t.status is SessionStatus.ABORTED
    assert "LEARN" in t.error
    assert a.open_session is None and b.open_session is None


def test_remote_agent_awaits_and_illegal_submit_changes_nothing():
    x = {"a": True}
    machine = RuleListAgent("m", "pos :- a=true\ndefault(neg)")
    human = RemoteAgent("h", "pos", "pos :- a=true")
    s = Session(machine, human, SessionPolicy(initiator_payload=InitPayload(x)))
    s.run_local()
    assert s.awaiting_remote
    with pytest.raises(AwaitingDecision):
        s.run()
    before = (len(s.transcript.steps), dict(s.budgets.remaining))
    with pytest.raises(ProtocolError, match="Init only opens"):
        s.submit(Decision(Tag.INIT))
    with pytest.raises(ProtocolError):
        s.submit(Decision(Tag.REFUTE, UNKNOWN, UNKNOWN))
    assert (len(s.transcript.steps), dict(s.budgets.remaining)) == before
    s.submit(Decision(Tag.RATIFY, then_term=True))
    assert s.transcript.tags == [Tag.INIT, Tag.RATIFY, Tag.TERM]
    assert s.transcript.steps[1].guards.source == "asserted"


def test_session_bounded_by_graph_bound():
    from pxp.graph import brute_force_max_length

    rng = random.Random(11)
    bound = brute_force_max_length(pxpk_table(compatible=True), 2)
    for _ in range(300):
        t = random_session(rng, 2, compatible=True)
        assert t.status is SessionStatus.TERMINATED
        assert len(t.steps) <= bound


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 3), st.booleans())
def test_engine_transcripts_alternate_and_respect_budgets(seed, k, unknown):
    t = random_session(random.Random(seed), k, unknown_init=unknown)
    assert t.validate() == []
    for i, s in enumerate(t.steps):
        if i:
            assert s.message.y is not UNKNOWN and s.message.e is not UNKNOWN
        if s.guards.source == "computed" and not s.message.has_unknown and i:
            assert sum([s.guards.g1, s.guards.g2, s.guards.g3, s.guards.g4]) == 1
    for row in ("7-k", "14-k", "16-k", "30-k"):
        assert t.rows.count(row) <= k
    if unknown:
        assert t.tags[1] in (Tag.REFUTE, Tag.TERM)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_keep_rows_leave_hypothesis_unchanged(seed):
    """Between two sends by the same agent only its own transition can
    change its hypothesis, so a Keep row repeats the previous snapshot."""
    t = random_session(random.Random(seed), 2)
    last: dict[str, str] = {}
    for s in t.steps:
        r = RULES_BY_ROW[s.row]
        if s.sender.name in last and r.update is Update.KEEP:
            assert s.snapshot == last[s.sender.name]
        last[s.sender.name] = s.snapshot
