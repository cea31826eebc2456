"""Operations shared by the HTTP service and the local CLI.

Each handler takes a request model and returns a response model, so the
CLI can call them in-process or post the same JSON to a running server.
"""
from __future__ import annotations

from typing import Any

from ..agents import (
    RuleListAgent,
    ScriptedAgent,
    ScriptStep,
    TableAgent,
    TableHypothesis,
)
from ..casebook import CASES, replay_case
from ..engine import InitPayload, Session, SessionPolicy
from ..graph import brute_force_max_length, build_graph, verify_bounded
from ..intelligibility import analyse, classify_strength, classify_two_way
from ..mmsv import enumerate_paths, map_to_pxp, mmsv_graph
from ..model import Tag, decode_payload, dumps_transcript, load_transcripts
from ..pex import Agent, OracleAgent, OracleRecordStore
from ..table import FULL_TABLE, compatible_table, pxpk_table
from .schemas import (
    AgentSpec,
    AnalyzeRequest,
    AnalyzeResponse,
    CaseReportResponse,
    GraphResponse,
    MmsvMapRequest,
    MmsvPathsResponse,
    PolicyModel,
    RunRequest,
    RunResponse,
)

TABLES = {
    "pxpk": lambda: pxpk_table(compatible=True),
    "pxpk-full": lambda: pxpk_table(compatible=False),
    "compatible": compatible_table,
    "full": lambda: FULL_TABLE,
}


class HandlerError(ValueError):
    """A request that names something unknown or cannot be carried out."""


def build_agent(spec: AgentSpec, default_name: str) -> Agent:
    name = spec.name or default_name
    if spec.kind == "rulelist":
        return RuleListAgent(name, spec.hypothesis)
    if spec.kind == "table":
        default = tuple(spec.default) if spec.default else ("neg", "default(neg)")
        if len(default) != 2:
            raise HandlerError("table default must be [label, explanation]")
        h = TableHypothesis.from_items(((t.x, t.y, t.e) for t in spec.table), default)
        return TableAgent(name, h, spec.accept_explanations)
    if spec.kind == "scripted":
        steps = [ScriptStep(Tag(s.tag), s.y, s.e, Tag(s.expect) if s.expect else None,
                            s.row, s.then_term) for s in spec.script]
        return ScriptedAgent(name, steps, spec.y, spec.e)
    if spec.kind == "oracle":
        return OracleAgent(OracleRecordStore.from_pairs(spec.verdicts))
    raise HandlerError(f"unknown agent kind {spec.kind!r}")


def build_policy(p: PolicyModel, x: Any) -> SessionPolicy:
    y = decode_payload(p.init_y) if p.init_y is not None else None
    e = decode_payload(p.init_e) if p.init_e is not None else None
    return SessionPolicy(k=p.k, terminate_after_ratify=p.terminate_after_ratify,
                         max_steps=p.max_steps, assume_compatible=p.assume_compatible,
                         initiator_payload=InitPayload(x, y, e))


def run(req: RunRequest) -> RunResponse:
    a = build_agent(req.a, "a")
    b = build_agent(req.b, "b")
    session = Session(a, b, build_policy(req.policy, req.x), req.session_id)
    t = session.run()
    return RunResponse(
        session_id=t.session_id,
        status=t.status.value,
        tags=[s.tag.value for s in t.steps],
        rows=t.rows,
        closing_row=t.closing_row,
        verdict=classify_two_way(t).to_json(),
        transcript=dumps_transcript(t),
    )


def analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    try:
        transcripts = load_transcripts(req.transcripts)
    except (ValueError, KeyError) as exc:
        raise HandlerError(f"cannot read transcripts: {exc}") from exc
    rows = [analyse(t, req.human, req.reading) for t in transcripts]
    strength = None
    if req.human is not None and transcripts:
        pairs = {frozenset(a.name for a in t.agents) for t in transcripts}
        if len(pairs) == 1 and req.human in next(iter(pairs)):
            machine = next(n for n in next(iter(pairs)) if n != req.human)
            strength = classify_strength(transcripts, req.human, machine, req.reading).value
    return AnalyzeResponse(sessions=rows, strength=strength)


def graph(table: str = "pxpk", k: int = 2) -> GraphResponse:
    if table not in TABLES:
        raise HandlerError(f"unknown table {table!r}; choose from {sorted(TABLES)}")
    if k < 0:
        raise HandlerError("k must be non-negative")
    rules = TABLES[table]()
    g = build_graph(rules)
    bound = verify_bounded(g, k)
    brute = brute_force_max_length(rules, k) if bound.is_bounded else None
    edges = [{"src": e.src.value, "dst": e.dst.value, "rows": list(e.rows),
              "budgeted_rows": list(e.budgeted_rows)} for e in g.edges.values()]
    return GraphResponse(table=table, k=k, nodes=[n.value for n in g.nodes], edges=edges,
                         bound=bound.to_json(), brute_force_max_length=brute, dot=g.to_dot())


def mmsv_paths(max_len: int = 5, measure: str = "nodes", full: bool = True) -> MmsvPathsResponse:
    if measure not in ("edges", "nodes"):
        raise HandlerError("measure is 'edges' or 'nodes'")
    try:
        paths = enumerate_paths(mmsv_graph(full), max_len, measure=measure)
    except ValueError as exc:
        raise HandlerError(str(exc)) from exc
    return MmsvPathsResponse(graph="full" if full else "minus", max_len=max_len,
                             measure=measure, paths=[list(p) for p in paths])


def mmsv_map(req: MmsvMapRequest) -> dict[str, Any]:
    try:
        return map_to_pxp(req.path, req.l, full=req.full).to_json()
    except ValueError as exc:
        raise HandlerError(str(exc)) from exc


def replay(case: str) -> CaseReportResponse:
    if case not in CASES:
        raise HandlerError(f"unknown case {case!r}; choose from {sorted(CASES)}")
    report = replay_case(case)
    return CaseReportResponse(case=case, ok=report.ok, summary=report.summary(),
                              report=report.to_json())


__all__ = [
    "HandlerError",
    "TABLES",
    "analyze",
    "build_agent",
    "build_policy",
    "graph",
    "mmsv_map",
    "mmsv_paths",
    "replay",
    "run",
]
