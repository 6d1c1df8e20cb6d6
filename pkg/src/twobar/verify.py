"""Randomized invariant suites, runnable from the CLI.

Each suite draws seeded random instances and checks one family of
guarantees from the reflection machinery:

* ``routes``      — the three solver routes agree to 1e-12 and every output
                    passes the defining-condition checker.
* ``lipschitz``   — regulator and path respond to input perturbations with
                    factors at most 2 and 3.
* ``composition`` — the two-sided map equals the lower envelope plus the
                    upper correction applied after one-sided reflection.
* ``crossing``    — the crossing decomposition reconstructs the upper
                    correction exactly, with strictly interleaved times.
* ``bv``          — the square-bound gap for bounded-variation paths is
                    never negative, and is zero for continuous ones.
* ``jumps``       — the two regulator parts never move at the same slot.

``run_suite("all", ...)`` runs every suite.  Results are plain data so the
CLI can serialize them.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import DomainError
from .regulated import RegulatedPath, combine, sup_norm_before
from .semimartingale import DriverSpec, JumpLaw, simulate_driver, bv_square_check
from .skorokhod_one import reflect_lower
from .skorokhod_two import (
    _prepare,
    alpha_slots,
    beta_map,
    check_rp_conditions,
    crossing_decomposition,
    reflect_composed,
    reflect_explicit,
    reflect_recursive,
    theta_map,
)

SUITES = ("routes", "lipschitz", "composition", "crossing", "bv", "jumps")


@dataclasses.dataclass(frozen=True)
class SuiteResult:
    """Outcome of one suite: worst residual seen and where it happened."""

    name: str
    trials: int
    passed: bool
    worst: float
    tol: float
    witness_seed: int | None = None
    detail: str = ""

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _random_regulated(rng, times, start=0.0, step_scale=0.5, right_jump_prob=0.3):
    n = times.size
    moves = rng.normal(0.0, step_scale, n)
    moves[0] = 0.0
    jumps = np.where(rng.random(n) < right_jump_prob,
                     rng.normal(0.0, step_scale, n), 0.0)
    jumps[0] = 0.0  # no jump at the origin
    values = start + np.cumsum(moves + np.concatenate(([0.0], jumps[:-1])))
    return RegulatedPath(times, values, values + jumps)


def _random_instance(rng, max_points=60):
    n = int(rng.integers(2, max_points))
    times = np.sort(rng.uniform(0.0, 10.0, n - 1))
    times = np.concatenate(([0.0], times))
    lower = _random_regulated(rng, times, start=-1.0, step_scale=0.3)
    width = 0.1 + rng.gamma(2.0, 1.0, n)
    width_r = np.maximum(0.1, width + rng.normal(0.0, 0.2, n))
    width_r[0] = width[0]  # no jump at the origin
    upper = RegulatedPath(times, lower.values + width,
                          lower.right_values + width_r)
    y0 = float(rng.uniform(lower.values[0], upper.values[0]))
    y = _random_regulated(rng, times, start=y0, step_scale=1.0)
    return y, lower, upper


def _suite_routes(trials, seed, tol):
    worst = 0.0
    witness = None
    check_tol = 1e-9
    for k in range(trials):
        rng = np.random.default_rng(seed + k)
        y, lo, hi = _random_instance(rng)
        sols = {"explicit": reflect_explicit(y, lo, hi),
                "recursive": reflect_recursive(y, lo, hi),
                "composed": reflect_composed(y, lo, hi)}
        horizon = float(y.times[-1]) + 1.0
        gap = 0.0
        names = list(sols)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                gap = max(gap,
                          sup_norm_before(combine(sols[a].x, sols[b].x, "sub"), horizon),
                          sup_norm_before(combine(sols[a].k, sols[b].k, "sub"), horizon))
        for sol in sols.values():
            report = check_rp_conditions(sol, y, lo, hi, tol=check_tol)
            if not report.ok:
                gap = max(gap, max(e.residual for e in report.failures()))
        if gap > worst:
            worst, witness = gap, seed + k
    return SuiteResult("routes", trials, worst <= tol, worst, tol, witness,
                       detail="max pairwise route distance and checker residual")


def _suite_lipschitz(trials, seed, tol):
    worst = 0.0
    witness = None
    for k in range(trials):
        rng = np.random.default_rng(seed + k)
        y, lo, hi = _random_instance(rng)
        scale = 0.05 + rng.random() * 0.2
        y2 = _perturb(rng, y, scale)
        lo2 = _perturb(rng, lo, scale)
        hi_p = _perturb(rng, hi, scale)
        hi2 = RegulatedPath(hi.times,
                            np.maximum(lo2.values + 0.1, hi_p.values),
                            np.maximum(lo2.right_values + 0.1, hi_p.right_values))
        # keep the perturbed instance admissible at the origin
        shift = float(np.clip(y2.values[0], lo2.values[0], hi2.values[0])
                      - y2.values[0])
        if shift != 0.0:
            y2 = RegulatedPath(y2.times, y2.values + shift,
                               y2.right_values + shift)
        a = reflect_recursive(y, lo, hi)
        b = reflect_recursive(y2, lo2, hi2)
        horizon = float(y.times[-1]) + 1.0
        rhs = (sup_norm_before(combine(y, y2, "sub"), horizon)
               + sup_norm_before(combine(lo, lo2, "sub"), horizon)
               + sup_norm_before(combine(hi, hi2, "sub"), horizon))
        lhs_k = sup_norm_before(combine(a.k, b.k, "sub"), horizon)
        lhs_x = sup_norm_before(combine(a.x, b.x, "sub"), horizon)
        if rhs > 0:
            excess = max(lhs_k - 2.0 * rhs, lhs_x - 3.0 * rhs)
            if excess > worst:
                worst, witness = excess, seed + k
    return SuiteResult("lipschitz", trials, worst <= tol, worst, tol, witness,
                       detail="worst excess over the 2x/3x perturbation bounds")


def _perturb(rng, path, scale):
    n = path.times.size
    dv = rng.normal(0.0, scale, n)
    dr = dv + np.where(rng.random(n) < 0.3, rng.normal(0.0, scale, n), 0.0)
    dv[0] = dr[0]
    return RegulatedPath(path.times, path.values + dv, path.right_values + dr)


def _suite_composition(trials, seed, tol):
    worst = 0.0
    witness = None
    for k in range(trials):
        rng = np.random.default_rng(seed + k)
        y, lo, hi = _random_instance(rng)
        _, ys, ls, _ = _prepare(y, lo, hi)
        alpha = alpha_slots(ys, ls)
        beta = beta_map(y, lo, hi)
        xi = reflect_lower(y, lo).xi
        theta = theta_map(xi, lo, hi)
        lhs = np.maximum(alpha, _interleave(beta))
        rhs = alpha + _interleave(theta)
        gap = float(np.max(np.abs(lhs - rhs)))
        if gap > worst:
            worst, witness = gap, seed + k
    return SuiteResult("composition", trials, worst <= tol, worst, tol, witness,
                       detail="sup |alpha OR beta - (alpha + theta)| over slots")


def _interleave(path):
    out = np.empty(2 * path.values.size)
    out[0::2] = path.values
    out[1::2] = path.right_values
    return out


def _suite_crossing(trials, seed, tol):
    worst = 0.0
    witness = None
    for k in range(trials):
        rng = np.random.default_rng(seed + k)
        y, lo, hi = _random_instance(rng, max_points=40)
        xi = reflect_lower(y, lo).xi
        dec = crossing_decomposition(xi, lo, hi)
        theta = theta_map(xi, lo, hi)
        gap = float(np.max(np.abs(_interleave(dec.theta) - _interleave(theta))))
        s, t = dec.s_times, dec.t_times
        finite_s = s[np.isfinite(s)]
        finite_t = t[np.isfinite(t)]
        ordered = (np.all(np.diff(finite_s) > 0) and np.all(np.diff(finite_t) > 0)
                   and all(s[i] <= t[i] for i in range(finite_t.size))
                   and all(t[i] <= s[i + 1] for i in range(finite_t.size)
                           if i + 1 < s.size))
        if not ordered:
            gap = max(gap, 1.0)  # flag an ordering breach as a unit residual
        if gap > worst:
            worst, witness = gap, seed + k
    return SuiteResult("crossing", trials, worst <= tol, worst, tol, witness,
                       detail="reconstruction gap; 1.0 flags an ordering breach")


def _suite_bv(trials, seed, tol):
    worst = 0.0
    witness = None
    for k in range(trials):
        rng = np.random.default_rng(seed + k)
        spec = DriverSpec(horizon=2.0, step=0.25,
                          volatility=float(rng.uniform(0.2, 1.0)),
                          poisson_rate=float(rng.uniform(0.0, 2.0)),
                          poisson_law=JumpLaw("uniform", 0.5),
                          mg_times=(0.5, 1.5),
                          mg_scale=float(rng.uniform(0.0, 0.5)))
        driver = simulate_driver(spec, seed + k)
        total = driver.total_m()
        report = bv_square_check(total)
        residual = report.entry("square inequality").residual
        if residual > worst:
            worst, witness = residual, seed + k
    return SuiteResult("bv", trials, worst <= tol, worst, tol, witness,
                       detail="worst negative part of the square-bound gap")


def _suite_jumps(trials, seed, tol):
    worst = 0.0
    witness = None
    for k in range(trials):
        rng = np.random.default_rng(seed + k)
        y, lo, hi = _random_instance(rng)
        sol = reflect_recursive(y, lo, hi)
        d1 = np.abs(np.diff(_interleave(sol.phi1)))
        d2 = np.abs(np.diff(_interleave(sol.phi2)))
        overlap = float(np.max(np.minimum(d1, d2))) if d1.size else 0.0
        if overlap > worst:
            worst, witness = overlap, seed + k
    return SuiteResult("jumps", trials, worst <= tol, worst, tol, witness,
                       detail="largest simultaneous movement of the two parts")


_RUNNERS = {
    "routes": (_suite_routes, 1e-12),
    "lipschitz": (_suite_lipschitz, 1e-12),
    "composition": (_suite_composition, 1e-12),
    "crossing": (_suite_crossing, 1e-12),
    "bv": (_suite_bv, 0.0),
    "jumps": (_suite_jumps, 1e-12),
}


def run_suite(name: str, trials: int = 200, seed: int = 0,
              tol: float | None = None) -> list[SuiteResult]:
    """Run one named suite (or ``"all"``); returns one result per suite.

    Raises:
        DomainError: unknown suite name.
    """
    if name == "all":
        names = SUITES
    elif name in _RUNNERS:
        names = (name,)
    else:
        raise DomainError(
            f"unknown suite {name!r}; choose from {', '.join(SUITES)} or 'all'")
    out = []
    for suite in names:
        runner, default_tol = _RUNNERS[suite]
        out.append(runner(trials, seed, default_tol if tol is None else tol))
    return out
