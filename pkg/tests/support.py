"""Helpers shared by the test modules."""
from __future__ import annotations

import random
import re
from typing import Any, Sequence

from pxp.agents import Domain, script_pair
from pxp.engine import InitPayload, SessionPolicy, run_session
from pxp.mmsv import PxpSequence
from pxp.model import UNKNOWN, AgentId, GuardRecord, Message, Step, Tag, Transcript

_TOKEN = re.compile(r"^(Init|Ratify|Refute|Revise|Reject|Term)_(\w+)$")


def transcript_of(text: str, x: Any = "x1") -> Transcript:
    """Build a transcript straight from ``"Init_m Refute_h Term_h"``,
    bypassing the engine. The first sender initiates."""
    pairs = []
    for tok in text.split():
        m = _TOKEN.match(tok)
        assert m, tok
        pairs.append((Tag(m.group(1)), m.group(2)))
    names = list(dict.fromkeys(s for _, s in pairs))
    if len(names) == 1:
        names.append("other" if names[0] != "other" else "other2")
    ids = {n: AgentId(n) for n in names}
    t = Transcript("s", ids[names[0]], ids[names[1]], x)
    for i, (tag, who) in enumerate(pairs):
        t.append(Step(i, Message(ids[who], tag, x, "pos", "default(pos)"), GuardRecord(), "0"))
    return t


def parse_seq(text: str) -> list[tuple[str, Tag]]:
    out = []
    for tok in text.split():
        m = _TOKEN.match(tok)
        assert m, tok
        out.append((m.group(2), Tag(m.group(1))))
    return out


def random_session(rng: random.Random, k: int, *, compatible: bool = False,
                   unknown_init: bool = False) -> Transcript:
    d = Domain(rng=rng)
    from pxp.agents import RuleListAgent

    a = RuleListAgent("m", d.rulelist())
    b = RuleListAgent("h", d.rulelist())
    x = d.instance()
    payload = InitPayload(x, UNKNOWN, UNKNOWN) if unknown_init else InitPayload(x)
    policy = SessionPolicy(k=k, initiator_payload=payload, assume_compatible=compatible,
                           terminate_after_ratify=rng.random() < 0.7)
    return run_session(a, b, policy)


def replay_pxp(seq: PxpSequence, k: int) -> Transcript:
    """Drive a mapped dialogue sequence through the engine with scripted
    agents, using the mapped rows as hints."""
    sequence = [(sender, tag) for tag, sender in seq.messages]
    rows = {i: r for i, r in enumerate(seq.rows[:len(sequence)]) if i and r != "40"}
    payloads = {0: (UNKNOWN, UNKNOWN)} if sequence[0][0] == "Q" else {}
    q, e = script_pair(sequence, "Q", "E", payloads=payloads, rows=rows)
    first, second = (q, e) if sequence[0][0] == "Q" else (e, q)
    init_y = init_e = UNKNOWN if sequence[0][0] == "Q" else None
    policy = SessionPolicy(k=k, assume_compatible=True,
                           initiator_payload=InitPayload("x", init_y, init_e))
    return run_session(first, second, policy)


def tags_with_senders(t: Transcript) -> list[tuple[Tag, str]]:
    return [(s.tag, s.sender.name) for s in t.steps]


def alternating(names: Sequence[str], tags: Sequence[Tag]) -> str:
    return " ".join(f"{tag.value}_{names[i % 2]}" for i, tag in enumerate(tags))


def reference_probes(rng: random.Random, n: int) -> dict[str, tuple[Any, list]]:
    """``n`` random probes for each reference agent's PEX functions."""
    from pxp.agents import RuleListPex, StandingPex, TableHypothesis, TablePex, default_token
    from pxp.pex import OracleAgent, OracleRecordStore, Probe

    d = Domain(rng=rng)
    labels = list(d.labels)
    out: dict[str, tuple[Any, list]] = {}

    def noise() -> tuple[tuple[str, ...], tuple[str, ...]]:
        ys = tuple(rng.sample(labels + ["maybe"], 2))
        es = tuple(str(d.rule()) if rng.random() < 0.7 else default_token(rng.choice(labels))
                   for _ in range(2))
        return ys, es

    probes = []
    for _ in range(n):
        ys, es = noise()
        probes.append(Probe(d.instance(), d.rulelist(), ys, es))
    out["rulelist"] = (RuleListPex(), probes)

    for flag in (True, False):
        probes = []
        for _ in range(n):
            items = [(d.instance(), rng.choice(labels), str(d.rule())) for _ in range(rng.randint(0, 4))]
            ys, es = noise()
            x = rng.choice([it[0] for it in items]) if items and rng.random() < 0.5 else d.instance()
            probes.append(Probe(x, TableHypothesis.from_items(items), ys, es))
        out[f"table(accept_explanations={flag})"] = (TablePex(flag), probes)

    probes = []
    for _ in range(n):
        y = rng.choice(labels)
        ys, es = noise()
        probes.append(Probe(d.instance(), (y, default_token(y)), ys, es))
    out["scripted"] = (StandingPex(), probes)

    store = OracleRecordStore()
    instances = []
    for _ in range(n):
        x = d.instance()
        if store.get(x) is None:
            store.set(x, rng.choice(labels))
        instances.append(x)
    # the oracle only ever states its own verdicts
    out["oracle"] = (OracleAgent(store).pex, [Probe(x, None, (store.get(x),), ()) for x in instances])
    return out
