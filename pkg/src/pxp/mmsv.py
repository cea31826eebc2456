"""The MMSV explanation-dialogue graph and its mapping onto PXP(k) tag sequences.

Node 7 and the edges through it are reconstructed from the path language
``0(1|)2(12|312|342|562|5672)*(8|38|348|568|5678)`` and the segment
dictionary; the other nodes and labels are fixed below.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

from .model import Tag
from .table import TransitionRule, pxpk_table

NODE_LABELS = {
    0: "Start",
    1: "Ques. Stated",
    2: "Expl. Presented",
    3: "Explainee Affirmed",
    4: "Explainer Affirmed",
    5: "Arg. Presented",
    6: "Arg. Affirmed",
    7: "node 7 (reconstructed)",
    8: "End",
}

EDGE_LABELS = {
    (0, 1): "Q:begin-question",
    (0, 2): "E:begin-explanation",
    (1, 1): "E:return-question",
    (1, 2): "E:explain/further-explain",
    (2, 3): "Q:affirm",
    (3, 4): "E:affirm",
    (2, 5): "Q:begin-argument",
    (5, 6): "E:affirm-argument",
    (2, 8): "end-explanation",
    (3, 8): "end-explanation",
    (4, 8): "end-explanation",
    (6, 8): "end-argument",
}

MINUS_EDGES = (
    (0, 1), (0, 2), (1, 2), (2, 1), (2, 3), (2, 5), (2, 8), (3, 1), (3, 4), (3, 8),
    (4, 2), (4, 8), (5, 6), (6, 2), (6, 7), (6, 8), (7, 2), (7, 8),
)

LANGUAGE = re.compile(r"0(1|)2(12|312|342|562|5672)*(8|38|348|568|5678)")

START, END = 0, 8


@dataclass(frozen=True)
class MmsvGraph:
    edges: frozenset[tuple[int, int]]

    @property
    def full(self) -> bool:
        return (1, 1) in self.edges

    def successors(self, n: int) -> list[int]:
        return sorted(d for s, d in self.edges if s == n)


def mmsv_graph(full: bool = True) -> MmsvGraph:
    """The dialogue graph; ``full=False`` drops the repeated-question edge (1,1)."""
    edges = set(MINUS_EDGES)
    if full:
        edges.add((1, 1))
    return MmsvGraph(frozenset(edges))


def path_length(path: Sequence[int], measure: str = "edges") -> int:
    if measure == "edges":
        return len(path) - 1
    if measure == "nodes":
        return len(path)
    raise ValueError("measure is 'edges' or 'nodes'")


def enumerate_paths(g: MmsvGraph, max_len: int, *, simple: bool = True,
                    measure: str = "edges") -> list[tuple[int, ...]]:
    """Start→End paths no longer than ``max_len``.

    With ``simple`` a node may only be revisited
    by staying on it through a self-loop; otherwise any walk is allowed.
    """
    if max_len < 2:
        raise ValueError("max_len must be at least 2")
    out: list[tuple[int, ...]] = []

    def go(path: list[int]) -> None:
        if path[-1] == END:
            out.append(tuple(path))
            return
        if path_length(path, measure) >= max_len:
            return
        for d in g.successors(path[-1]):
            if simple and d in path and d != path[-1]:
                continue
            path.append(d)
            go(path)
            path.pop()

    go([START])
    return sorted(out, key=lambda p: (len(p), p))


def path_text(path: Sequence[int]) -> str:
    return "".join(str(n) for n in path)


def matches_mmsv_minus_language(path: Sequence[int]) -> bool:
    if any(not 0 <= n <= 8 for n in path):
        return False
    return LANGUAGE.fullmatch(path_text(path)) is not None


def language_words(max_nodes: int) -> set[tuple[int, ...]]:
    """Words of the path language with at most ``max_nodes`` symbols, built
    by expanding the expression's blocks."""
    heads, blocks, tails = ("02", "012"), ("12", "312", "342", "562", "5672"), (
        "8", "38", "348", "568", "5678")
    words: set[tuple[int, ...]] = set()
    middles = {""}
    frontier = {""}
    while frontier:
        nxt = set()
        for m in frontier:
            for b in blocks:
                w = m + b
                if len(w) + 3 <= max_nodes and w not in middles:
                    nxt.add(w)
        middles |= nxt
        frontier = nxt
    for h in heads:
        for m in middles:
            for t in tails:
                w = h + m + t
                if len(w) <= max_nodes:
                    words.add(tuple(int(c) for c in w))
    return words


# -------------------------------------------------------------- mapping

Q, E = "Q", "E"

# Pieces of the decomposition: (node sequence, sender, allowed tags)
_RESPONSE = (Tag.RATIFY, Tag.REVISE, Tag.REFUTE)
SEGMENTS: dict[tuple[int, ...], tuple[str, tuple[Tag, ...]]] = {
    (0, 1): (Q, (Tag.INIT,)),
    (0, 2): (E, (Tag.INIT,)),
    (1, 2): (E, (Tag.REFUTE,)),
    (2, 1): (Q, (Tag.REFUTE,)),
    (2, 5): (Q, (Tag.REFUTE,)),
    (3, 1): (Q, (Tag.REFUTE,)),
    (2, 3): (Q, _RESPONSE),
    (3, 4): (E, _RESPONSE),
    (5, 6): (E, _RESPONSE),
    (3, 4, 2): (E, (Tag.REFUTE,)),
    (5, 6, 2): (E, (Tag.REFUTE,)),
    (5, 6, 7): (E, (Tag.REFUTE,)),
    (5, 6, 7, 2): (E, (Tag.REFUTE,)),
}
TERMINAL = {(2, 8), (3, 8), (4, 8), (6, 8), (7, 8)}


class UnmappedPath(ValueError):
    """The path has no decomposition into the segment dictionary."""


def decompose(path: Sequence[int], *, allow_repeat_question: bool = False) -> list[tuple[int, ...]]:
    """Split a path into dictionary pieces, longest segment first.

    A segment is only taken if the rest of the path still decomposes, so
    (3,4) followed by (4,8) stays an edge while (3,4,2) becomes a segment.
    """
    path = tuple(path)

    def go(i: int) -> list[tuple[int, ...]] | None:
        if i == len(path) - 1:
            return []
        for size in (4, 3, 2):
            piece = path[i:i + size]
            if len(piece) != size:
                continue
            ok = piece in SEGMENTS or (size == 2 and piece in TERMINAL) or (
                allow_repeat_question and piece == (1, 1))
            if not ok:
                continue
            rest = go(i + size - 1)
            if rest is not None:
                return [piece, *rest]
        return None

    if len(path) < 2 or path[0] != START or path[-1] != END:
        raise UnmappedPath(f"path {path} does not run from Start to End")
    pieces = go(0)
    if pieces is None:
        raise UnmappedPath(f"path {path} has no decomposition into the segment dictionary")
    return pieces


@dataclass(frozen=True)
class PxpSequence:
    messages: tuple[tuple[Tag, str], ...]  # (tag, "E" | "Q")
    rows: tuple[str, ...]  # rows of the sent messages, then 39 for the receipt of Term

    @property
    def tags(self) -> tuple[Tag, ...]:
        return tuple(t for t, _ in self.messages)

    def __len__(self) -> int:
        return len(self.messages)

    def label(self) -> str:
        return ", ".join(f"{t.value}_{s}" for t, s in self.messages)


@dataclass
class PathMapping:
    mmsv_path: tuple[int, ...]
    pieces: list[tuple[int, ...]]
    sequences: list[PxpSequence] = field(default_factory=list)
    collapsed: bool = False

    @property
    def pxp_tags(self) -> list[tuple[tuple[Tag, str], ...]]:
        return [s.messages for s in self.sequences]

    @property
    def pxp_rows(self) -> list[tuple[str, ...]]:
        return [s.rows for s in self.sequences]

    def to_json(self) -> dict[str, Any]:
        return {
            "mmsv_path": list(self.mmsv_path),
            "length": len(self.mmsv_path) - 1,
            "collapsed": self.collapsed,
            "sequences": [{"messages": [f"{t.value}_{s}" for t, s in q.messages],
                           "rows": list(q.rows)} for q in self.sequences],
        }


def _legal_rows(messages: Sequence[tuple[Tag, str]], rules: Sequence[TransitionRule],
                budget: int) -> tuple[str, ...] | None:
    """Rows realising ``messages`` under ``rules``; None if some step has none.

    The opening Init from Q carries '?' (a question), so the reply must come
    from an unknown-handling row.
    """
    used: dict[str, int] = {}
    rows = ["0"]
    question = messages[0][1] == Q
    for i in range(1, len(messages)):
        (prev, ps), (tag, s) = messages[i - 1], messages[i]
        if s == ps:
            if tag is not Tag.TERM:
                return None
            rows.append("40")
            continue
        pool = [r for r in rules if r.received is prev and r.sent is tag
                and not r.row.endswith("'")]
        if prev is Tag.INIT and tag is not Tag.TERM:
            pool = [r for r in pool if (r.unknown is not None) == question]
        if tag is Tag.TERM:
            pool = [r for r in pool if r.guard.base is None]
        chosen = None
        for r in pool:
            if r.budgeted:
                if used.get(r.row, 0) >= budget:
                    continue
                used[r.row] = used.get(r.row, 0) + 1
            chosen = r
            break
        if chosen is None:
            return None
        rows.append(chosen.row)
    if messages[-1][0] is not Tag.TERM:
        return None
    return tuple(rows) + ("39",)


def _merge(messages: list[tuple[Tag, str]]) -> list[tuple[Tag, str]]:
    """Adjacent messages from the same sender collapse into the later one,
    except that a trailing Term stays separate."""
    out: list[tuple[Tag, str]] = []
    for m in messages:
        if out and out[-1][1] == m[1] and m[0] is not Tag.TERM:
            out[-1] = m
        else:
            out.append(m)
    return out


def map_to_pxp(path: Sequence[int], l: int | None = None, *,
               full: bool = False) -> PathMapping:
    """Every compatible PXP(l) message sequence for ``path`` of length ≤ l.

    ``l`` defaults to the path's edge count. With ``full`` a path of the
    complete graph is accepted and each repeated question (1,1) is dropped.
    """
    path = tuple(path)
    if not full and not matches_mmsv_minus_language(path):
        raise UnmappedPath(f"path {path} is not in the MMSV^- language")
    pieces = decompose(path, allow_repeat_question=full)
    length = len(path) - 1
    l = length if l is None else l
    rules = pxpk_table(compatible=True)
    choices: list[list[tuple[Tag, str] | None]] = []
    for p in pieces:
        if p == (1, 1):
            choices.append([None])
        elif p in TERMINAL:
            choices.append([(Tag.TERM, Q), (Tag.TERM, E)])
        else:
            sender, tags = SEGMENTS[p]
            choices.append([(t, sender) for t in tags])
    seen: set[tuple] = set()
    mapping = PathMapping(path, pieces, collapsed=(1, 1) in pieces)
    for combo in itertools.product(*choices):
        msgs = _merge([m for m in combo if m is not None])
        key = tuple(msgs)
        if key in seen or len(msgs) > l:
            continue
        seen.add(key)
        rows = _legal_rows(msgs, rules, l)
        if rows is not None:
            mapping.sequences.append(PxpSequence(key, rows))
    if not mapping.sequences:
        raise UnmappedPath(f"path {path} has no PXP({l}) sequence of length ≤ {l}")
    return mapping


__all__ = [
    "EDGE_LABELS",
    "LANGUAGE",
    "MINUS_EDGES",
    "MmsvGraph",
    "NODE_LABELS",
    "PathMapping",
    "PxpSequence",
    "UnmappedPath",
    "decompose",
    "enumerate_paths",
    "language_words",
    "map_to_pxp",
    "matches_mmsv_minus_language",
    "mmsv_graph",
    "path_length",
]
