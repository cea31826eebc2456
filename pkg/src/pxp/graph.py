"""Message graphs of transition tables and session-length bounds."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

from .model import Tag
from .table import TransitionRule


@dataclass(frozen=True)
class Edge:
    src: Tag
    dst: Tag
    rows: tuple[str, ...]
    budgeted_rows: tuple[str, ...] = ()

    @property
    def self_loop(self) -> bool:
        return self.src is self.dst

    @property
    def free_rows(self) -> tuple[str, ...]:
        """Rows on this edge with no loop budget."""
        return tuple(r for r in self.rows if r not in self.budgeted_rows)


@dataclass
class MessageGraph:
    nodes: tuple[Tag, ...]
    edges: dict[tuple[Tag, Tag], Edge]
    detached_rows: tuple[str, ...] = ()  # rows without both a received and a sent tag

    def successors(self, node: Tag) -> list[Tag]:
        return [d for (s, d) in self.edges if s is node]

    def edge_of_row(self, row: str) -> Edge | None:
        for e in self.edges.values():
            if row in e.rows:
                return e
        return None

    def self_loops(self) -> list[Edge]:
        return [e for e in self.edges.values() if e.self_loop]

    def to_dot(self, name: str = "messages") -> str:
        lines = [f"digraph {name} {{", "  rankdir=LR;"]
        for n in self.nodes:
            lines.append(f'  "{n.value}";')
        for e in self.edges.values():
            label = ",".join(e.rows)
            style = " style=dashed" if e.budgeted_rows else ""
            lines.append(f'  "{e.src.value}" -> "{e.dst.value}" [label="{label}"{style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_graph(rules: Sequence[TransitionRule]) -> MessageGraph:
    if not rules:
        raise ValueError("rules must not be empty")
    grouped: dict[tuple[Tag, Tag], list[TransitionRule]] = {}
    detached: list[str] = []
    for r in rules:
        if r.received is None or r.sent is None:
            detached.append(r.row)
            continue
        grouped.setdefault((r.received, r.sent), []).append(r)
    edges = {k: Edge(k[0], k[1], tuple(r.row for r in rs),
                     tuple(r.row for r in rs if r.budgeted))
             for k, rs in grouped.items()}
    used = {t for k in edges for t in k}
    nodes = tuple(t for t in Tag if t in used or t in (Tag.INIT, Tag.TERM))
    return MessageGraph(nodes, edges, tuple(detached))


# ------------------------------------------------------------ structure


def find_cycle(g: MessageGraph) -> list[Tag] | None:
    """A cycle of length ≥ 2 (self-loops ignored), as a closed node list."""
    succ = {n: [d for d in g.successors(n) if d is not n] for n in g.nodes}
    colour = {n: 0 for n in g.nodes}
    stack: list[Tag] = []

    def visit(n: Tag) -> list[Tag] | None:
        colour[n] = 1
        stack.append(n)
        for d in succ[n]:
            if colour[d] == 1:
                return stack[stack.index(d):] + [d]
            if colour[d] == 0:
                found = visit(d)
                if found:
                    return found
        stack.pop()
        colour[n] = 2
        return None

    for n in g.nodes:
        if colour[n] == 0:
            found = visit(n)
            if found:
                return found
    return None


@dataclass(frozen=True)
class BoundReport:
    is_bounded: bool
    max_length: int | None
    cycle: tuple[Tag, ...] | None = None
    unbudgeted_loops: tuple[tuple[Tag, tuple[str, ...]], ...] = ()
    longest_walk: tuple[Tag, ...] = ()

    def to_json(self) -> dict:
        return {
            "is_bounded": self.is_bounded,
            "max_length": self.max_length,
            "cycle": [t.value for t in self.cycle] if self.cycle else None,
            "unbudgeted_loops": [{"node": n.value, "rows": list(rows)}
                                 for n, rows in self.unbudgeted_loops],
            "longest_walk": [t.value for t in self.longest_walk],
        }


def verify_bounded(g: MessageGraph, k: int) -> BoundReport:
    """Bounded iff the graph without self-loops is a DAG and every self-loop
    is made only of budgeted rows; the bound counts messages on the longest
    Init→Term walk, each budgeted row used at most ``k`` times."""
    if k < 0:
        raise ValueError("k must be non-negative")
    cycle = find_cycle(g)
    free = tuple((e.src, e.free_rows) for e in g.self_loops() if e.free_rows)
    if cycle or free:
        return BoundReport(False, None, tuple(cycle) if cycle else None, free)

    extra = {n: 0 for n in g.nodes}
    for e in g.self_loops():
        extra[e.src] = k * len(e.budgeted_rows)

    @lru_cache(maxsize=None)
    def longest(n: Tag) -> tuple[int, tuple[Tag, ...]] | None:
        here = 1 + extra[n]
        if n is Tag.TERM:
            return here, (n,) * here
        best = None
        for d in g.successors(n):
            if d is n:
                continue
            sub = longest(d)
            if sub is not None and (best is None or sub[0] > best[0]):
                best = sub
        if best is None:
            return None
        return here + best[0], (n,) * here + best[1]

    res = longest(Tag.INIT)
    if res is None:
        return BoundReport(True, 0)
    return BoundReport(True, res[0], longest_walk=res[1])


# ---------------------------------------------------------- brute force


def enumerate_walks(rules: Sequence[TransitionRule], k: int, limit: int = 200,
                    ) -> Iterator[tuple[tuple[Tag, ...], tuple[str, ...]]]:
    """Every Init→Term message walk the rules allow, with its rows.

    Each budgeted row may be used ``k`` times. Walks longer than ``limit``
    messages are cut off with a ``RuntimeError``, which flags an unbounded
    rule set.
    """
    by_tag: dict[Tag, list[TransitionRule]] = {}
    for r in rules:
        if r.received is not None and r.sent is not None:
            by_tag.setdefault(r.received, []).append(r)
    used: dict[str, int] = {}

    def walk(tags: list[Tag], rows: list[str]):
        if len(tags) > limit:
            raise RuntimeError(f"walk exceeded {limit} messages: rule set looks unbounded")
        last = tags[-1]
        if last is Tag.TERM:
            yield tuple(tags), tuple(rows)
            return
        for r in by_tag.get(last, []):
            if r.budgeted:
                if used.get(r.row, 0) >= k:
                    continue
                used[r.row] = used.get(r.row, 0) + 1
            tags.append(r.sent)
            rows.append(r.row)
            yield from walk(tags, rows)
            tags.pop()
            rows.pop()
            if r.budgeted:
                used[r.row] -= 1

    yield from walk([Tag.INIT], ["0"])


def brute_force_max_length(rules: Sequence[TransitionRule], k: int, limit: int = 200) -> int:
    best = 0
    for tags, _ in enumerate_walks(rules, k, limit):
        best = max(best, len(tags))
    return best


def is_walk(g: MessageGraph, tags: Sequence[Tag]) -> bool:
    """Whether consecutive tags follow edges; a Term sent right after the
    sender's own message (no message received) is allowed as well."""
    for a, b in zip(tags, tags[1:]):
        if (a, b) not in g.edges and b is not Tag.TERM:
            return False
    return True


__all__ = [
    "BoundReport",
    "Edge",
    "MessageGraph",
    "brute_force_max_length",
    "build_graph",
    "enumerate_walks",
    "find_cycle",
    "is_walk",
    "verify_bounded",
]
