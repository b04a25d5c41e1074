"""Named pass/fail checks with measured values and tolerances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional


@dataclass(frozen=True)
class Check:
    """One verified statement.

    ``measured`` is compared against ``tolerance`` by the producer; the
    comparison direction is part of the check's meaning, so only the verdict
    is stored.  ``anchor`` names the mathematical statement being tested.
    """

    name: str
    passed: bool
    measured: float
    tolerance: float
    anchor: str
    node: Optional[int] = None
    note: str = ""

    def to_dict(self) -> dict:
        d = {
            "pass": bool(self.passed),
            "measured": _num(self.measured),
            "tolerance": _num(self.tolerance),
            "anchor": self.anchor,
        }
        if self.node is not None:
            d["node"] = int(self.node)
        if self.note:
            d["note"] = self.note
        return d

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        s = f"[{tag}] {self.name}: measured={self.measured:.6g} tol={self.tolerance:.3g}"
        if self.node is not None:
            s += f" node={self.node}"
        return s


def _num(x):
    x = float(x)
    if math.isfinite(x):
        return x
    return None


@dataclass
class VerificationReport:
    entries: list = field(default_factory=list)

    def add(self, name, passed, measured, tolerance, anchor, node=None, note=""):
        self.entries.append(
            Check(name, bool(passed), float(measured), float(tolerance), anchor, node, note)
        )
        return self.entries[-1]

    def extend(self, other: "VerificationReport | Iterable[Check]"):
        items = other.entries if isinstance(other, VerificationReport) else other
        self.entries.extend(items)
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.entries)

    @property
    def failures(self) -> list:
        return [c for c in self.entries if not c.passed]

    def __getitem__(self, name) -> Check:
        for c in self.entries:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name) -> bool:
        return any(c.name == name for c in self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def to_dict(self) -> dict:
        return {c.name: c.to_dict() for c in self.entries}

    def summary(self) -> str:
        return "\n".join(c.line() for c in self.entries)
