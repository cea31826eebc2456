"""The guarded transition relation and its restricted variants."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import GuardRecord, Message, Tag, UNKNOWN


class Update(str, enum.Enum):
    KEEP = "keep"
    LEARN = "learn"


@dataclass(frozen=True)
class Guard:
    """``base`` is one of g1..g4 or None for the trivial guard; ``prime`` is
    the required value of the post-learning check, or None when unused."""

    base: str | None = None
    prime: bool | None = None

    def holds(self, g: GuardRecord) -> bool:
        if self.base is None:
            return True
        if not getattr(g, self.base):
            return False
        if self.prime is None:
            return True
        return g.g_prime is self.prime

    def asserted(self) -> GuardRecord:
        """The guard record a transition with this guard implies."""
        if self.base is None:
            return GuardRecord(source="asserted")
        flags = {name: name == self.base for name in ("g1", "g2", "g3", "g4")}
        return GuardRecord(**flags, g_prime=self.prime, source="asserted")

    def __str__(self) -> str:
        if self.base is None:
            return "T"
        if self.prime is None:
            return self.base
        return f"{self.base} & {'' if self.prime else '!'}g'"


TOP = Guard()


@dataclass(frozen=True)
class TransitionRule:
    row: str
    received: Tag | None  # None: no message received
    update: Update
    guard: Guard
    sent: Tag | None  # None: no message sent
    budgeted: bool = False
    unknown: str | None = None  # '?' pattern of the received Init: "??", "y?", "?e"
    pre_learning_reply: bool = False

    @property
    def is_forbidden_for_compatible(self) -> bool:
        return self.row in FORBIDDEN_ROWS

    @property
    def twin(self) -> str | None:
        """Row that replaces this one once its loop budget is spent."""
        if self.budgeted:
            return self.row.replace("-k", "'")
        return None

    def describe(self) -> str:
        recv = self.received.value if self.received else "no message"
        if self.unknown:
            recv += f" {self.unknown}"
        sent = self.sent.value if self.sent else "no message"
        return f"{self.row}: {recv} / {self.update.value} / {self.guard} -> {sent}"


FORBIDDEN_ROWS = frozenset(str(i) for i in (*range(8, 13), *range(20, 25), *range(25, 30)))
LOOP_ROWS = ("7", "14", "16", "30")

_RESPONSE_PATTERN = [
    # (guard, update, sent) for rows n+0 .. n+5 of each received-tag block
    (Guard("g1"), Update.KEEP, Tag.RATIFY),
    (Guard("g2", False), Update.LEARN, Tag.REFUTE),
    (Guard("g2", True), Update.LEARN, Tag.REVISE),
    (Guard("g3", False), Update.LEARN, Tag.REFUTE),
    (Guard("g3", True), Update.LEARN, Tag.REVISE),
    (Guard("g4"), Update.KEEP, Tag.REJECT),
]


def _full_rows() -> list[TransitionRule]:
    rows = [TransitionRule("0", None, Update.KEEP, TOP, Tag.INIT)]
    blocks = [Tag.INIT, Tag.RATIFY, Tag.REFUTE, Tag.REVISE, Tag.REJECT]
    for b, recv in enumerate(blocks):
        for j, (guard, update, sent) in enumerate(_RESPONSE_PATTERN):
            rows.append(TransitionRule(str(1 + 6 * b + j), recv, update, guard, sent))
    for n, recv in zip(range(31, 36), [Tag.RATIFY, Tag.REFUTE, Tag.REVISE, Tag.REJECT, Tag.INIT]):
        rows.append(TransitionRule(str(n), recv, Update.KEEP, TOP, Tag.TERM))
    for n, pattern in zip(range(36, 39), ["??", "y?", "?e"]):
        rows.append(TransitionRule(str(n), Tag.INIT, Update.KEEP, TOP, Tag.REFUTE, unknown=pattern))
    rows.append(TransitionRule("39", Tag.TERM, Update.LEARN, TOP, None))
    rows.append(TransitionRule("40", None, Update.KEEP, TOP, Tag.TERM))
    return rows


FULL_TABLE: tuple[TransitionRule, ...] = tuple(_full_rows())
RULES_BY_ROW = {r.row: r for r in FULL_TABLE}


def _budgeted_rows() -> list[TransitionRule]:
    out = []
    for row in LOOP_ROWS:
        base = RULES_BY_ROW[row]
        out.append(TransitionRule(f"{row}-k", base.received, base.update, base.guard, base.sent,
                                  budgeted=True))
        out.append(TransitionRule(f"{row}'", base.received, base.update, base.guard, Tag.TERM,
                                  pre_learning_reply=(row == "16")))
    return out


BUDGETED_AND_PRIMED: tuple[TransitionRule, ...] = tuple(_budgeted_rows())
for _r in BUDGETED_AND_PRIMED:
    RULES_BY_ROW[_r.row] = _r


def compatible_table(rules: Iterable[TransitionRule] = FULL_TABLE) -> tuple[TransitionRule, ...]:
    """Drop the rows that cannot fire between compatible agents."""
    return tuple(r for r in rules if r.row not in FORBIDDEN_ROWS)


def pxpk_table(*, compatible: bool = True) -> tuple[TransitionRule, ...]:
    """Replace each self-loop row with its budgeted row and its Term twin."""
    out: list[TransitionRule] = []
    for r in FULL_TABLE:
        if r.row in LOOP_ROWS:
            out.extend(b for b in BUDGETED_AND_PRIMED if b.row in (f"{r.row}-k", f"{r.row}'"))
        else:
            out.append(r)
    return compatible_table(out) if compatible else tuple(out)


def unknown_pattern(msg: Message) -> str | None:
    if msg.y is UNKNOWN and msg.e is UNKNOWN:
        return "??"
    if msg.e is UNKNOWN:
        return "y?"
    if msg.y is UNKNOWN:
        return "?e"
    return None


def rule(row: str) -> TransitionRule:
    try:
        return RULES_BY_ROW[row]
    except KeyError:
        raise KeyError(f"no transition row {row!r}") from None


def table_rows(rules: Sequence[TransitionRule]) -> list[str]:
    return [r.row for r in rules]
