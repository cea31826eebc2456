"""Command-line client.

Every subcommand runs in-process by default. With ``--server URL`` the same
request goes to a running service instead.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from pydantic import ValidationError

from .casebook import CASES
from .service import handlers
from .service.schemas import (
    AgentSpec,
    AnalyzeRequest,
    MmsvMapRequest,
    PolicyModel,
    RunRequest,
)


class CliError(Exception):
    pass


def _text_arg(value: str | None) -> str | None:
    """``@path`` reads a file; otherwise ';' separates lines."""
    if value is None:
        return None
    if value.startswith("@"):
        return Path(value[1:]).read_text(encoding="utf-8")
    return value.replace(";", "\n")


def _json_arg(value: str) -> Any:
    """JSON text, ``@path``, or the path of an existing JSON file."""
    if value.startswith("@"):
        value = Path(value[1:]).read_text(encoding="utf-8")
    elif Path(value).is_file():
        value = Path(value).read_text(encoding="utf-8")
    try:
        return json.loads(value)
    except json.JSONDecodeError as exc:
        raise CliError(f"not valid JSON: {exc}") from exc


class Backend:
    """In-process handlers, or HTTP calls when a server URL is given."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def _http(self, method: str, path: str, *, params=None, body=None) -> dict[str, Any]:
        import httpx

        try:
            r = httpx.request(method, self.server + path, params=params, json=body, timeout=60.0)
        except httpx.HTTPError as exc:
            raise CliError(f"cannot reach {self.server}: {exc}") from exc
        if r.status_code >= 400:
            try:
                detail = r.json().get("detail")
            except ValueError:
                detail = r.text
            raise CliError(f"server said {r.status_code}: {detail}")
        return r.json()

    def run(self, req: RunRequest) -> dict[str, Any]:
        if self.server:
            return self._http("POST", "/sessions/run", body=req.model_dump())
        return handlers.run(req).model_dump()

    def analyze(self, req: AnalyzeRequest) -> dict[str, Any]:
        if self.server:
            return self._http("POST", "/analyze", body=req.model_dump())
        return handlers.analyze(req).model_dump()

    def graph(self, table: str, k: int) -> dict[str, Any]:
        if self.server:
            return self._http("GET", "/graph", params={"table": table, "k": k})
        return handlers.graph(table, k).model_dump()

    def mmsv_paths(self, max_len: int, measure: str, full: bool) -> dict[str, Any]:
        if self.server:
            return self._http("GET", "/mmsv/paths", params={
                "max_len": max_len, "measure": measure, "full": str(full).lower()})
        return handlers.mmsv_paths(max_len, measure, full).model_dump()

    def mmsv_map(self, req: MmsvMapRequest) -> dict[str, Any]:
        if self.server:
            return self._http("POST", "/mmsv/map", body=req.model_dump())
        return handlers.mmsv_map(req)

    def replay(self, case: str) -> dict[str, Any]:
        if self.server:
            return self._http("POST", f"/casebook/{case}/replay")
        return handlers.replay(case).model_dump()


# ---------------------------------------------------------------- commands


def _agent_spec(args: argparse.Namespace, side: str) -> AgentSpec:
    kind = getattr(args, side)
    opts: dict[str, Any] = {"kind": kind, "name": getattr(args, f"{side}_name")}
    hyp = _text_arg(getattr(args, f"{side}_hypothesis"))
    if kind == "rulelist":
        opts["hypothesis"] = hyp
    elif hyp is not None:
        raise CliError(f"--{side}-hypothesis only applies to rulelist agents")
    return AgentSpec(**opts)


def cmd_run(args: argparse.Namespace, be: Backend) -> int:
    if args.request:
        req = RunRequest.model_validate(_json_arg(args.request))
    else:
        if args.x is None:
            raise CliError("give --x or --request")
        req = RunRequest(
            a=_agent_spec(args, "a"), b=_agent_spec(args, "b"), x=_json_arg(args.x),
            policy=PolicyModel(k=args.k, terminate_after_ratify=not args.keep_going,
                               max_steps=args.max_steps, assume_compatible=args.assume_compatible,
                               init_y=args.init_y, init_e=args.init_e),
            session_id=args.session_id)
    res = be.run(req)
    out = Path(args.out or f"{res['session_id']}.jsonl")
    out.write_text(res["transcript"], encoding="utf-8")
    if args.json:
        print(json.dumps(res, indent=2))
    else:
        print(f"session {res['session_id']}: {res['status']}")
        print("tags: " + " ".join(res["tags"]))
        print("rows: " + " ".join(res["rows"]))
        flags = ", ".join(f"{n}={v}" for n, v in res["verdict"]["one_way_for"].items())
        print(f"one-way: {flags}; two-way: {res['verdict']['two_way']}")
        print(f"transcript written to {out}")
    return 0


def cmd_analyze(args: argparse.Namespace, be: Backend) -> int:
    text = sys.stdin.read() if args.file == "-" else Path(args.file).read_text(encoding="utf-8")
    res = be.analyze(AnalyzeRequest(transcripts=text, human=args.human, reading=args.reading))
    if args.json:
        print(json.dumps(res, indent=2))
        return 0
    for row in res["sessions"]:
        flags = ", ".join(f"{n}={v}" for n, v in row["one_way_for"].items())
        print(f"{row['session']} [{row['status']}] {' '.join(row['tags'])}")
        print(f"  one-way: {flags}; two-way: {row['two_way']}")
        if "axioms" in row:
            print(f"  axioms: {json.dumps(row['axioms'])}")
    if res.get("strength"):
        print(f"strength for {args.human}: {res['strength']}")
    return 0


def cmd_graph(args: argparse.Namespace, be: Backend) -> int:
    res = be.graph(args.table, args.k)
    if args.dot:
        sys.stdout.write(res["dot"])
        return 0
    if args.json:
        print(json.dumps(res, indent=2))
        return 0
    b = res["bound"]
    print(f"table {res['table']}, k={res['k']}: {len(res['edges'])} edges")
    if b["is_bounded"]:
        print(f"bounded; longest session {b['max_length']} messages "
              f"(brute force {res['brute_force_max_length']})")
        print("longest walk: " + " ".join(b["longest_walk"]))
    else:
        print("unbounded")
        if b["cycle"]:
            print("cycle: " + " -> ".join(b["cycle"]))
        for loop in b["unbudgeted_loops"]:
            print(f"unbudgeted self-loop at {loop['node']}: rows {', '.join(loop['rows'])}")
    return 0


def cmd_mmsv(args: argparse.Namespace, be: Backend) -> int:
    if not args.map:
        res = be.mmsv_paths(args.max_len, args.measure, not args.minus)
        if args.json:
            print(json.dumps(res, indent=2))
        else:
            for p in res["paths"]:
                print("(" + ",".join(str(n) for n in p) + ")")
            print(f"{len(res['paths'])} paths")
        return 0
    res = be.mmsv_map(MmsvMapRequest(path=args.map, l=args.l, full=args.full))
    if args.json:
        print(json.dumps(res, indent=2))
        return 0
    print(f"path {tuple(res['mmsv_path'])}" + (" (repeated questions collapsed)" if res["collapsed"] else ""))
    for s in res["sequences"]:
        print(f"  {', '.join(s['messages'])}   rows {','.join(s['rows'])}")
    return 0


def cmd_replay(args: argparse.Namespace, be: Backend) -> int:
    cases = sorted(CASES) if args.case == "all" else [args.case]
    failed = 0
    for case in cases:
        res = be.replay(case)
        if args.json:
            print(json.dumps(res, indent=2))
        else:
            print(res["summary"])
            if not res["ok"]:
                for sid in res["report"]["mismatched"]:
                    print(f"  mismatch: {sid}")
        failed += not res["ok"]
    return 1 if failed else 0


def cmd_serve(args: argparse.Namespace, be: Backend) -> int:
    import uvicorn

    uvicorn.run("pxp.service.app:app", host=args.host, port=args.port, log_level=args.log_level)
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pxp", description=__doc__.splitlines()[0])
    p.add_argument("--server", metavar="URL", help="send requests to a running service")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one session between two agents")
    for side, default_name in (("a", "m"), ("b", "h")):
        r.add_argument(f"--{side}", choices=["rulelist", "table", "oracle"], default="rulelist")
        r.add_argument(f"--{side}-name", default=default_name)
        r.add_argument(f"--{side}-hypothesis", metavar="RULES",
                       help="rule list, ';' between lines, or @file")
    r.add_argument("--x", metavar="JSON", help="the instance, as JSON or @file")
    r.add_argument("--k", type=int, default=2)
    r.add_argument("--max-steps", type=int, default=64)
    r.add_argument("--keep-going", action="store_true", help="do not Term right after a Ratify")
    r.add_argument("--assume-compatible", action="store_true")
    r.add_argument("--init-y", help="prediction in the Init ('?' for unknown)")
    r.add_argument("--init-e", help="explanation in the Init ('?' for unknown)")
    r.add_argument("--session-id")
    r.add_argument("--request", metavar="JSON", help="a full run request, as JSON or @file")
    r.add_argument("--out", help="transcript file (default: <session id>.jsonl)")
    r.add_argument("--json", action="store_true")
    r.set_defaults(fn=cmd_run)

    a = sub.add_parser("analyze", help="intelligibility of stored transcripts")
    a.add_argument("file", help="JSON-lines transcripts, or - for stdin")
    a.add_argument("--human", help="name of the human agent (enables the axiom check)")
    a.add_argument("--reading", choices=["own", "counterpart"], default="own")
    a.add_argument("--json", action="store_true")
    a.set_defaults(fn=cmd_analyze)

    g = sub.add_parser("graph", help="message graph and session-length bound")
    g.add_argument("--table", choices=sorted(handlers.TABLES), default="pxpk")
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--dot", action="store_true", help="print Graphviz source")
    g.add_argument("--json", action="store_true")
    g.set_defaults(fn=cmd_graph)

    m = sub.add_parser("mmsv", help="dialogue-graph paths and their tag sequences")
    m.add_argument("--max-len", type=int, default=5)
    m.add_argument("--measure", choices=["nodes", "edges"], default="nodes",
                   help="count path length in nodes (default) or edges")
    m.add_argument("--minus", action="store_true", help="drop the repeated-question edge")
    m.add_argument("--map", type=int, nargs="+", metavar="NODE",
                   help="map one path to tag sequences instead of listing paths")
    m.add_argument("--l", type=int, help="length limit for --map (default: the path's edges)")
    m.add_argument("--full", action="store_true", help="with --map, accept repeated questions")
    m.add_argument("--json", action="store_true")
    m.set_defaults(fn=cmd_mmsv)

    c = sub.add_parser("replay", help="replay a casebook entry against its expected outcome")
    c.add_argument("--case", choices=[*sorted(CASES), "all"], default="all")
    c.add_argument("--json", action="store_true")
    c.set_defaults(fn=cmd_replay)

    s = sub.add_parser("serve", help="start the HTTP and WebSocket service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--log-level", default="info")
    s.set_defaults(fn=cmd_serve)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args, Backend(args.server))
    except (CliError, handlers.HandlerError, ValidationError, OSError, ValueError, KeyError) as exc:
        print(f"pxp: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
