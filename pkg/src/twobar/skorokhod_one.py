"""One-sided Skorokhod reflection at a lower or upper regulated barrier.

The lower map keeps ``xi = y + kappa`` at or above ``l`` with the minimal
non-decreasing, right-continuous regulator ``kappa = -inf over s<=t of
((y-l)_s ∧ (y-l)_{s+} ∧ 0)``.  Because the running inf already looks at the
right limit, the push at ``t`` anticipates a violation occurring only at
``t+``.  The upper map is the lattice mirror image.

These maps are the building blocks of the two-barrier solution and are exact
on grids: the regulator is a running lattice scan, and the reflected path is
clamped back onto the barrier so containment holds with tolerance zero.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import DomainError
from .regulated import (
    RegulatedPath,
    merge_times,
    require_valid,
    resample,
    running_guarded_inf,
)
from .reports import ConditionEntry, ConditionReport

__all__ = ["OneSidedSolution", "reflect_lower", "reflect_upper", "check_one_sided"]


@dataclasses.dataclass(frozen=True)
class OneSidedSolution:
    """Reflected path and regulator for a single barrier.

    ``xi = y + kappa`` for the lower side, ``xi = y - kappa`` for the upper;
    in both cases ``kappa`` is non-decreasing, right-continuous and starts
    at 0.  Paths live on the merged grid of the inputs.
    """

    xi: RegulatedPath
    kappa: RegulatedPath
    side: str  # "lower" | "upper"


def _merged(y: RegulatedPath, barrier: RegulatedPath):
    require_valid(y, "input path")
    require_valid(barrier, "barrier")
    grid = merge_times(y, barrier)
    return resample(y, grid), resample(barrier, grid)


def reflect_lower(y: RegulatedPath, l: RegulatedPath) -> OneSidedSolution:
    """Reflect ``y`` upward off the lower barrier ``l``.

    Raises:
        DomainError: if ``y`` starts below the barrier.
    """
    y, l = _merged(y, l)
    if y.values[0] < l.values[0]:
        raise DomainError(
            f"initial value {y.values[0]!r} below the lower barrier {l.values[0]!r}"
        )
    diff = RegulatedPath(y.times, y.values - l.values, y.right_values - l.right_values)
    alpha = running_guarded_inf(diff)
    kappa = RegulatedPath(y.times, -alpha.values, -alpha.right_values)
    xi = RegulatedPath(
        y.times,
        np.maximum(y.values + kappa.values, l.values),
        np.maximum(y.right_values + kappa.right_values, l.right_values),
    )
    return OneSidedSolution(xi=xi, kappa=kappa, side="lower")


def reflect_upper(y: RegulatedPath, u: RegulatedPath) -> OneSidedSolution:
    """Reflect ``y`` downward off the upper barrier ``u``.

    Raises:
        DomainError: if ``y`` starts above the barrier.
    """
    y, u = _merged(y, u)
    if y.values[0] > u.values[0]:
        raise DomainError(
            f"initial value {y.values[0]!r} above the upper barrier {u.values[0]!r}"
        )
    diff = RegulatedPath(y.times, u.values - y.values, u.right_values - y.right_values)
    alpha = running_guarded_inf(diff)
    kappa = RegulatedPath(y.times, -alpha.values, -alpha.right_values)
    xi = RegulatedPath(
        y.times,
        np.minimum(y.values - kappa.values, u.values),
        np.minimum(y.right_values - kappa.right_values, u.right_values),
    )
    return OneSidedSolution(xi=xi, kappa=kappa, side="upper")


def check_one_sided(sol: OneSidedSolution, y: RegulatedPath, barrier: RegulatedPath,
                    tol: float = 1e-9) -> ConditionReport:
    """Verify the three defining conditions of a one-sided solution.

    (i)  identity and barrier bound: xi = y ± kappa and xi on the right side
         of the barrier;
    (ii) regulator shape: kappa_0 = 0, non-decreasing, right-continuous;
    (iii) complementarity: the Stieltjes sum of the contact gap against
          dkappa vanishes.

    All paths must share one grid (resample the originals if needed).
    """
    y = resample(y, sol.xi.times)
    barrier = resample(barrier, sol.xi.times)
    xi, kappa = sol.xi, sol.kappa
    lower = sol.side == "lower"

    if lower:
        ident_v = xi.values - (y.values + kappa.values)
        ident_r = xi.right_values - (y.right_values + kappa.right_values)
        breach_v = barrier.values - xi.values
        breach_r = barrier.right_values - xi.right_values
    else:
        ident_v = xi.values - (y.values - kappa.values)
        ident_r = xi.right_values - (y.right_values - kappa.right_values)
        breach_v = xi.values - barrier.values
        breach_r = xi.right_values - barrier.right_values
    per_point = np.maximum(
        np.maximum(np.abs(ident_v), np.abs(ident_r)),
        np.maximum(np.maximum(breach_v, breach_r), 0.0),
    )
    res1 = float(np.max(per_point))
    wit1 = _worst_times(xi.times, per_point, tol)

    inc_left = kappa.values[1:] - kappa.right_values[:-1]
    inc_right = kappa.right_values - kappa.values
    res2 = float(
        max(
            abs(kappa.values[0]),
            float(np.max(-inc_left, initial=0.0)),
            float(np.max(np.abs(inc_right))),  # right-continuity: Δ⁺kappa = 0
        )
    )
    per_point2 = np.abs(inc_right).copy()
    per_point2[1:] = np.maximum(per_point2[1:], -inc_left)
    per_point2[0] = max(per_point2[0], abs(kappa.values[0]))
    wit2 = _worst_times(kappa.times, per_point2, tol)

    if lower:
        gap_v = xi.values - barrier.values
        gap_r = xi.right_values - barrier.right_values
    else:
        gap_v = barrier.values - xi.values
        gap_r = barrier.right_values - xi.right_values
    contact = np.minimum(gap_v, gap_r)[1:]
    dkappa = kappa.values[1:] - kappa.right_values[:-1]
    terms = contact * dkappa
    res3 = float(abs(np.sum(terms)))
    wit3 = _worst_times(kappa.times[1:], np.abs(terms), tol)

    entries = (
        ConditionEntry("identity and barrier bound", res1 <= tol, res1, wit1),
        ConditionEntry("regulator monotone, zero start, right-continuous",
                       res2 <= tol, res2, wit2),
        ConditionEntry("complementarity", res3 <= tol, res3, wit3),
    )
    return ConditionReport(entries=entries, tol=tol)


def _worst_times(times, magnitudes, tol, cap=3):
    """Times of the largest magnitudes (those above tol, else the single max)."""
    if magnitudes.size == 0:
        return ()
    order = np.argsort(magnitudes)[::-1]
    picked = [i for i in order[:cap] if magnitudes[i] > tol]
    if not picked:
        picked = [int(order[0])] if magnitudes[order[0]] > 0 else []
    return tuple(float(times[i]) for i in picked)
