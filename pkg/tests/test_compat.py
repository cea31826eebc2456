from __future__ import annotations

import random

from pxp.agents import RuleListAgent, TableHypothesis, TablePex
from pxp.compat import assert_no_forbidden, check_compatibility
from pxp.engine import InitPayload, SessionPolicy, run_session
from pxp.model import ORACLE_MARK, Tag
from pxp.pex import Agent, OracleAgent, OracleRecordStore
from pxp.table import FORBIDDEN_ROWS

from support import random_session, transcript_of


class Agreeable(TablePex):
    """Agrees with every explanation, but never adopts one."""

    def __init__(self):
        super().__init__(accept_explanations=False)

    def agree(self, a, b):
        return a is not ORACLE_MARK and b is not ORACLE_MARK


def _incompatible_session():
    x = {"a": True, "b": True}
    a = RuleListAgent("a", "pos :- a=true\ndefault(neg)")
    b = Agent("b", Agreeable(), TableHypothesis.from_items([(x, "neg", "neg :- b=true")]))
    policy = SessionPolicy(assume_compatible=False, initiator_payload=InitPayload(x))
    return a, b, run_session(a, b, policy)


def test_incompatible_pair_fires_a_forbidden_revise_row():
    a, b, t = _incompatible_session()
    assert t.tags[:3] == [Tag.INIT, Tag.REVISE, Tag.REFUTE]
    assert t.rows[1] == "5"
    assert t.rows[2] in {"20", "21", "22", "23", "24"}
    rep = check_compatibility(t, a.pex, b.pex)
    assert not rep.compatible and rep.y_agreement and not rep.e_agreement
    w = rep.e_witnesses[0]
    assert (w.initiator_says, w.responder_says) == (False, True)
    assert w.a == "pos :- a=true"
    assert any(f.row in FORBIDDEN_ROWS for f in rep.forbidden_rows_fired)
    assert rep.to_json()["compatible"] is False


def test_same_functions_are_compatible():
    rng = random.Random(3)
    for _ in range(200):
        t = random_session(rng, 2)
        p = RuleListAgent("x").pex
        rep = check_compatibility(t, p, p)
        assert rep.compatible
        assert rep.forbidden_rows_fired == []


def test_oracle_session_is_compatible():
    x = {"a": True}
    a = RuleListAgent("a")
    oracle = OracleAgent(OracleRecordStore.from_pairs([(x, "pos")]))
    t = run_session(a, oracle, SessionPolicy(initiator_payload=InitPayload(x)))
    assert check_compatibility(t, a.pex, oracle.pex).compatible


def test_init_then_term_has_nothing_to_compare():
    t = transcript_of("Init_m Term_h")
    p = RuleListAgent("x").pex
    rep = check_compatibility(t, p, p)
    assert rep.compatible and assert_no_forbidden(t) == []


def test_witnesses_mirror_when_roles_swap():
    a, b, t = _incompatible_session()
    ab = check_compatibility(t, a.pex, b.pex)
    ba = check_compatibility(t, b.pex, a.pex)
    assert len(ab.e_witnesses) == len(ba.e_witnesses)
    assert {(w.initiator_says, w.responder_says) for w in ab.e_witnesses} == {
        (w.responder_says, w.initiator_says) for w in ba.e_witnesses}
