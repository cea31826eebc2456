from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pxp.agents import (
    Domain,
    Rule,
    RuleList,
    RuleListAgent,
    ScriptedAgent,
    ScriptStep,
    TableAgent,
    TableHypothesis,
    TablePex,
    clause_agree,
    make_agent,
    rulelist_explain,
    rulelist_learn,
    script_pair,
)
from pxp.engine import InitPayload, SessionPolicy, run_session
from pxp.model import ORACLE_ID, ORACLE_MARK, AgentId, DataTuple, ProtocolError, Tag
from pxp.pex import OracleAgent

H = AgentId("h")


def test_rule_round_trip_normalises_body_order():
    r = Rule.parse("pos :- ring=true, heavy=false")
    assert str(r) == "pos :- heavy=false, ring=true"
    assert Rule.parse(str(r)) == r
    assert str(Rule.parse("neg :- true")) == "neg :- true"


@pytest.mark.parametrize("bad", ["pos", "pos :- ring", "1x :- a=b", "pos :- a=1, a=2", "pos :- =x"])
def test_rule_parse_rejects(bad):
    with pytest.raises(ValueError):
        Rule.parse(bad)


def test_rulelist_grammar():
    h = RuleList.parse("% comment\npos :- a=true\n\nneg :- b=1\ndefault(pos)")
    assert len(h.rules) == 2 and h.default == "pos"
    assert RuleList.parse(str(h)) == h
    with pytest.raises(ValueError, match="default"):
        RuleList.parse("pos :- a=true")
    with pytest.raises(ValueError):
        RuleList.parse("default(pos)\npos :- a=true")


def _scan(h: RuleList, x: dict) -> str:
    for r in h.rules:
        if all(str(x[a]).lower() == v for a, v in r.body):
            return r.head
    return h.default


@settings(max_examples=200)
@given(st.integers(0, 100_000))
def test_prediction_is_the_first_covering_rule(seed):
    d = Domain(rng=random.Random(seed))
    h, x = d.rulelist(), d.instance()
    assert h.predict(x) == _scan(h, x)


def test_explain_names_the_firing_clause_or_default():
    h = RuleList.parse("pos :- a=true\ndefault(neg)")
    assert rulelist_explain({"a": True}, "pos", h) == "pos :- a=true"
    assert rulelist_explain({"a": False}, "neg", h) == "default(neg)"
    with pytest.raises(ValueError):
        rulelist_explain({"a": False}, "pos", h)


def test_missing_attribute_is_an_error():
    h = RuleList.parse("pos :- a=true\ndefault(neg)")
    with pytest.raises(KeyError, match="'a'"):
        h.predict({"b": True})


def _tuple(x, y, e="default(pos)", who=H):
    return DataTuple(x, y, e, who)


def test_learn_on_empty_dataset_is_identity():
    h = RuleList.parse("pos :- a=true\ndefault(neg)")
    assert rulelist_learn(h, []) is h


def test_learn_fits_oracle_label_over_counterpart():
    x = {"a": True, "b": False}
    h = RuleList.parse("default(neg)")
    data = [_tuple(x, "neg", "default(neg)"), DataTuple(x, "pos", ORACLE_MARK, ORACLE_ID)]
    assert rulelist_learn(h, data).predict(x) == "pos"


def test_learn_adopts_a_consistent_counterpart_clause():
    x = {"ring": True, "heavy": False}
    h = RuleList.parse("default(neg)")
    learned = rulelist_learn(h, [_tuple(x, "pos", "pos :- ring=true")])
    assert learned.rules[0] == Rule.parse("pos :- ring=true")


def test_contradictory_oracle_labels_raise():
    x = {"a": True}
    data = [DataTuple(x, "pos", ORACLE_MARK, ORACLE_ID), DataTuple(x, "neg", ORACLE_MARK, ORACLE_ID)]
    with pytest.raises(ValueError, match="contradictory"):
        rulelist_learn(RuleList(), data)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_learn_fits_twenty_random_tuples_deterministically(seed):
    rng = random.Random(seed)
    d = Domain(rng=rng)
    data, seen = [], {}
    for _ in range(20):
        x = d.instance()
        y = seen.setdefault(tuple(sorted(x.items())), rng.choice(d.labels))
        data.append(_tuple(x, y, str(d.rule()) if rng.random() < 0.5 else "default(pos)"))
    h = d.rulelist()
    learned = rulelist_learn(h, data)
    assert all(learned.predict(t.instance) == t.y for t in data)
    assert rulelist_learn(h, data) == learned


def test_clause_agree_examples():
    assert clause_agree("pos :- a=true, b=false", "pos :- b=false, a=true")
    assert clause_agree("default(pos)", "default( pos )")
    assert not clause_agree("pos :- a=true", "neg :- a=true")
    assert not clause_agree("pos :- a=true", "pos :- a=true, b=true")
    assert not clause_agree("default(pos)", "pos :- true")
    assert not clause_agree("gibberish", "gibberish")


@settings(max_examples=200)
@given(st.integers(0, 100_000))
def test_clause_agree_is_symmetric_and_reflexive(seed):
    d = Domain(rng=random.Random(seed))
    a, b = str(d.rule()), str(d.rule())
    assert clause_agree(a, b) == clause_agree(b, a)
    assert clause_agree(a, a)


def test_rulelist_pex_never_matches_marks():
    p = RuleListAgent("a").pex
    assert not p.match("pos", ORACLE_MARK)
    assert not p.agree(ORACLE_MARK, ORACLE_MARK)


# ------------------------------------------------------------------ table


def test_table_lookup_and_learn():
    x = {"a": True}
    h = TableHypothesis.from_items([(x, "neg", "neg :- a=true")])
    p = TablePex(accept_explanations=True)
    assert (p.predict(x, h), p.explain(x, "neg", h)) == ("neg", "neg :- a=true")
    learned = p.learn(h, [_tuple(x, "pos", "pos :- a=true")])
    assert p.predict(x, learned) == "pos"
    assert p.explain(x, "pos", learned) == "pos :- a=true"


def test_table_without_explanation_uptake_keeps_its_own():
    x = {"a": True}
    h = TableHypothesis.from_items([(x, "neg", "neg :- a=true")])
    p = TablePex(accept_explanations=False)
    learned = p.learn(h, [_tuple(x, "pos", "pos :- a=true")])
    assert p.predict(x, learned) == "pos"
    assert p.explain(x, "pos", learned) != "pos :- a=true"


def test_table_agent_in_session_with_rulelist():
    x = {"a": True}
    t = run_session(RuleListAgent("m", "pos :- a=true\ndefault(neg)"), TableAgent("h"),
                    SessionPolicy(initiator_payload=InitPayload(x)))
    assert t.tags[0] is Tag.INIT
    assert t.validate() == []


# ---------------------------------------------------------------- scripted


def test_scripted_agent_sends_term_when_script_runs_out():
    a = ScriptedAgent("a", [ScriptStep(Tag.INIT)])
    b = ScriptedAgent("b", [])
    t = run_session(a, b, SessionPolicy(initiator_payload=InitPayload("x")))
    assert t.tags == [Tag.INIT, Tag.TERM]


def test_scripted_expectation_mismatch_raises():
    a = ScriptedAgent("a", [ScriptStep(Tag.INIT)])
    b = ScriptedAgent("b", [ScriptStep(Tag.RATIFY, expect=Tag.REVISE)])
    with pytest.raises(ProtocolError, match="expected Revise"):
        run_session(a, b, SessionPolicy(initiator_payload=InitPayload("x")))


def test_script_pair_folds_trailing_term():
    q, e = script_pair([("q", Tag.INIT), ("e", Tag.REFUTE), ("e", Tag.TERM)], "q", "e")
    assert [s.tag for s in e.steps] == [Tag.REFUTE] and e.steps[0].then_term
    t = run_session(q, e, SessionPolicy(initiator_payload=InitPayload("x")))
    assert [(s.tag, s.sender.name) for s in t.steps] == [
        (Tag.INIT, "q"), (Tag.REFUTE, "e"), (Tag.TERM, "e")]
    with pytest.raises(ValueError):
        script_pair([("q", Tag.RATIFY)], "q", "e")


def test_make_agent_registry():
    assert isinstance(make_agent("rulelist", "m"), RuleListAgent)
    assert make_agent("table").name == "table"
    assert isinstance(make_agent("oracle"), OracleAgent)
    with pytest.raises(KeyError, match="unknown agent kind"):
        make_agent("wizard")
