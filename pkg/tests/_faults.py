"""Injected-fault fixtures for the defining-condition checker.

Each fixture perturbs one piece of a correct solution and records, for the
conditions that must fail, the grid time the checker has to report as a
witness.  The conditions interlock (for example, moving x off the corridor
while leaving the regulator alone also breaks the identity), so each
fixture also lists the collateral failures that are acceptable; anything
else failing — or an expected failure missing — is a checker bug.

Used by the acceptance run; the per-module tests exercise the same shapes
with finer-grained assertions.
"""

import dataclasses

import numpy as np

from twobar.regulated import RegulatedPath
from twobar.skorokhod_two import reflect_recursive


def _bump(path, values=None, right_values=None):
    v = path.values + (values if values is not None else 0.0)
    r = path.right_values + (right_values if right_values is not None else 0.0)
    return RegulatedPath(path.times, v, r)


def fault_fixtures():
    """Returns (label, solution, y, l, u, {must-fail entry: witness},
    {allowed collateral entries})."""
    times = np.array([0.0, 1.0, 2.0])
    y = RegulatedPath(times, np.array([1.0, -2.0, 4.0]),
                      np.array([1.0, -2.0, 4.0]))
    l = RegulatedPath(times, np.zeros(3), np.zeros(3))
    u = RegulatedPath(times, np.full(3, 2.0), np.full(3, 2.0))
    sol = reflect_recursive(y, l, u)

    fixtures = []

    # bump x at t=0 where it is strictly interior and no regulator part
    # moves, so only the identity notices
    shift = np.array([0.005, 0.0, 0.0])
    fixtures.append((
        "x drifts off the identity",
        dataclasses.replace(sol, x=_bump(sol.x, shift, shift)),
        y, l, u, {"(i) identity": 0.0}, set(),
    ))

    # x alone pushed over the top at t=2: the identity breaks with it, and
    # the down-push recorded there now acts away from the (shifted) barrier
    out = np.array([0.0, 0.0, 0.5])
    fixtures.append((
        "x pushed above the corridor",
        dataclasses.replace(sol, x=_bump(sol.x, out, out)),
        y, l, u, {"(ii) containment": 2.0},
        {"(i) identity", "(iv) upper complementarity"},
    ))

    # phi1 dips at t=2; k = phi1 - phi2 moves with it, so the identity and
    # the lower contact sum pick up the same defect
    drop = np.array([0.0, 0.0, -1.0])
    fixtures.append((
        "phi1 loses monotonicity",
        dataclasses.replace(sol, phi1=_bump(sol.phi1, drop, drop)),
        y, l, u, {"(iii) monotone parts from zero": 2.0},
        {"(i) identity", "(iv) lower complementarity"},
    ))

    # matching left-jump bumps cancel in k, so only the lower contact sum
    # sees the push happening away from the barrier
    bump = np.array([0.0, 0.0, 0.01])
    fixtures.append((
        "spurious push away from both barriers",
        dataclasses.replace(sol, phi1=_bump(sol.phi1, bump, bump),
                            phi2=_bump(sol.phi2, bump, bump)),
        y, l, u, {"(iv) lower complementarity": 2.0}, set(),
    ))

    # matching right jumps at t=1 keep k intact but x sits at the lower
    # barrier there, which is the wrong side for both directions
    tail_r = np.array([0.0, 0.01, 0.01])
    tail_v = np.array([0.0, 0.0, 0.01])
    fixtures.append((
        "matching right jumps at a lower-contact time",
        dataclasses.replace(sol, phi1=_bump(sol.phi1, tail_v, tail_r),
                            phi2=_bump(sol.phi2, tail_v, tail_r)),
        y, l, u, {"(v) up jump: x at upper": 1.0,
                  "(v) down jump: x lands on upper": 1.0}, set(),
    ))

    return fixtures
