"""Functional agreement between the agents of a session, and forbidden rows."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .model import Transcript, encode_payload
from .pex import PexFunctions
from .table import FORBIDDEN_ROWS


@dataclass(frozen=True)
class Disagreement:
    """``a`` came from the initiator, ``b`` from the responder."""

    a: Any
    b: Any
    initiator_says: bool
    responder_says: bool

    def to_json(self) -> dict[str, Any]:
        return {"a": encode_payload(self.a), "b": encode_payload(self.b),
                "initiator": self.initiator_says, "responder": self.responder_says}


@dataclass(frozen=True)
class ForbiddenFiring:
    step: int
    row: str


@dataclass
class CompatibilityReport:
    y_witnesses: list[Disagreement] = field(default_factory=list)
    e_witnesses: list[Disagreement] = field(default_factory=list)
    forbidden_rows_fired: list[ForbiddenFiring] = field(default_factory=list)

    @property
    def y_agreement(self) -> bool:
        return not self.y_witnesses

    @property
    def e_agreement(self) -> bool:
        return not self.e_witnesses

    @property
    def compatible(self) -> bool:
        return self.y_agreement and self.e_agreement

    def to_json(self) -> dict[str, Any]:
        return {
            "compatible": self.compatible,
            "y_agreement": self.y_agreement,
            "e_agreement": self.e_agreement,
            "y_witnesses": [w.to_json() for w in self.y_witnesses],
            "e_witnesses": [w.to_json() for w in self.e_witnesses],
            "forbidden_rows_fired": [{"step": f.step, "row": f.row}
                                     for f in self.forbidden_rows_fired],
        }


def _sent_values(t: Transcript, who) -> tuple[list[Any], list[Any]]:
    ys: list[Any] = []
    es: list[Any] = []
    for s in t.steps:
        if s.sender != who:
            continue
        if s.message.y not in ys:
            ys.append(s.message.y)
        if s.message.e not in es:
            es.append(s.message.e)
    return ys, es


def check_compatibility(t: Transcript, pa: PexFunctions, pb: PexFunctions) -> CompatibilityReport:
    """Compare both agents' MATCH and AGREE over the values they exchanged.

    ``pa`` belongs to the initiator and ``pb`` to the responder.
    """
    ya, ea = _sent_values(t, t.initiator)
    yb, eb = _sent_values(t, t.responder)
    rep = CompatibilityReport(forbidden_rows_fired=assert_no_forbidden(t))
    for a in ya:
        for b in yb:
            ma, mb = bool(pa.match(a, b)), bool(pb.match(b, a))
            if ma != mb:
                rep.y_witnesses.append(Disagreement(a, b, ma, mb))
    for a in ea:
        for b in eb:
            ga, gb = bool(pa.agree(a, b)), bool(pb.agree(b, a))
            if ga != gb:
                rep.e_witnesses.append(Disagreement(a, b, ga, gb))
    return rep


def assert_no_forbidden(t: Transcript) -> list[ForbiddenFiring]:
    """Every step that fired a row compatible agents can never fire."""
    return [ForbiddenFiring(s.index, s.row) for s in t.steps if s.row in FORBIDDEN_ROWS]


__all__ = [
    "CompatibilityReport",
    "Disagreement",
    "ForbiddenFiring",
    "assert_no_forbidden",
    "check_compatibility",
]
