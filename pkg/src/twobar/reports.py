"""Condition and validation report types shared across modules.

A :class:`ConditionReport` is a list of named checks, each with a measured
residual.  The convention everywhere is ``passed == (residual <= tol)``; checks
that are one-signed report a signed residual so the same rule applies.
"""

from __future__ import annotations

import dataclasses


@dataclasses.dataclass(frozen=True)
class ConditionEntry:
    """One verified condition.

    Attributes:
        name: short identifier of the condition, stable across runs.
        passed: whether ``residual <= tol`` at check time.
        residual: measured residual (may be signed for one-sided sums).
        witness_times: grid times that realize or violate the condition,
            worst first, at most three.
        note: free-form annotation (e.g. a flagged-but-passing sign).
    """

    name: str
    passed: bool
    residual: float
    witness_times: tuple[float, ...] = ()
    note: str = ""


@dataclasses.dataclass(frozen=True)
class ConditionReport:
    entries: tuple[ConditionEntry, ...]
    tol: float

    @property
    def ok(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, name: str) -> ConditionEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def failures(self) -> tuple[ConditionEntry, ...]:
        return tuple(e for e in self.entries if not e.passed)

    def as_dict(self) -> dict:
        return {
            "tol": self.tol,
            "ok": self.ok,
            "entries": [dataclasses.asdict(e) for e in self.entries],
        }


def entry_from_residual(name, residual, tol, witness_times=(), note=""):
    """Build a ConditionEntry applying the pass rule uniformly."""
    return ConditionEntry(
        name=name,
        passed=bool(residual <= tol),
        residual=float(residual),
        witness_times=tuple(float(t) for t in witness_times),
        note=note,
    )
