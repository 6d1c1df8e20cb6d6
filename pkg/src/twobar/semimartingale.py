"""Discretized optional-semimartingale drivers and their calculus.

A driver is stored in five components on one grid: a continuous martingale
part ``Mc``, a right-continuous martingale part ``Md`` (left jumps only,
e.g. compensated Poisson), a left-continuous martingale part ``Mg`` (right
jumps only, centered), and the analogous bounded-variation parts ``Vr`` and
``Vg``.  The split keeps the continuous / left-jump / right-jump trichotomy
explicit, which the stochastic integral and the reflection checkers rely on.

The integral pairs left limits of the integrand with each component: against
the right-continuous parts it is a Stieltjes sum over grid increments,
against the right-jump parts it is a sum over ``s < t`` of ``H(s-) Δ⁺``,
with the right-limit slot of the result carrying the current jump's mass.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import DomainError, GridError
from .regulated import RegulatedPath
from .reports import ConditionEntry, ConditionReport

__all__ = [
    "JumpLaw",
    "DriverSpec",
    "SemimartingalePath",
    "IntegralResult",
    "simulate_driver",
    "quadratic_variation",
    "total_variation",
    "galchuk_integral",
    "bv_square_check",
]


@dataclasses.dataclass(frozen=True)
class JumpLaw:
    """Bounded jump-size distribution: |size| never exceeds ``scale``.

    Kinds: "fixed" (always +scale, compensated through its mean),
    "uniform" (uniform on [-scale, scale]), "binary" (±scale, fair coin).
    """

    kind: str = "binary"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform", "binary"):
            raise DomainError(f"unknown jump law kind {self.kind!r}")
        if not (math.isfinite(self.scale) and self.scale >= 0.0):
            raise DomainError(f"jump scale must be finite and >= 0, got {self.scale!r}")

    def mean(self) -> float:
        return self.scale if self.kind == "fixed" else 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "fixed":
            return np.full(size, self.scale)
        if self.kind == "uniform":
            return rng.uniform(-self.scale, self.scale, size)
        return (2 * rng.integers(0, 2, size) - 1) * self.scale


def _check_schedule(name, schedule):
    for entry in schedule:
        t, size = entry
        if not (math.isfinite(t) and math.isfinite(size)):
            raise DomainError(f"{name} entry {entry!r} is not finite")


@dataclasses.dataclass(frozen=True)
class DriverSpec:
    """Parameters of a simulated driver.

    The grid has ``round(horizon / step)`` uniform cells ending exactly at
    ``horizon`` (``step`` is a target width).  Scheduled jump times snap to
    the nearest grid point; snapping to the origin is rejected so that paths
    never jump at time 0.

    Fields:
      horizon, step: time range and target cell width.
      volatility: scale of the Brownian increments of ``Mc``.
      poisson_rate, poisson_law: intensity and size law of the compensated
        left-jump martingale ``Md``.
      mg_times, mg_scale: right-jump times of ``Mg``; each jump is ±scale
        with a fair coin (zero mean).
      drift_slope: continuous ramp rate of ``Vr``.
      vr_jumps, vg_jumps: scheduled (time, size) left jumps of ``Vr`` and
        right jumps of ``Vg``.
    """

    horizon: float = 1.0
    step: float = 0.01
    volatility: float = 1.0
    poisson_rate: float = 0.0
    poisson_law: JumpLaw = dataclasses.field(default_factory=JumpLaw)
    mg_times: tuple = ()
    mg_scale: float = 0.0
    drift_slope: float = 0.0
    vr_jumps: tuple = ()
    vg_jumps: tuple = ()

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0.0):
            raise DomainError(f"horizon must be positive, got {self.horizon!r}")
        if not (math.isfinite(self.step) and 0.0 < self.step <= self.horizon):
            raise DomainError(f"step must lie in (0, horizon], got {self.step!r}")
        if not (math.isfinite(self.volatility) and self.volatility >= 0.0):
            raise DomainError(f"volatility must be finite and >= 0, got {self.volatility!r}")
        if not (math.isfinite(self.poisson_rate) and self.poisson_rate >= 0.0):
            raise DomainError(f"poisson rate must be finite and >= 0, got {self.poisson_rate!r}")
        if not (math.isfinite(self.mg_scale) and self.mg_scale >= 0.0):
            raise DomainError(f"mg scale must be finite and >= 0, got {self.mg_scale!r}")
        object.__setattr__(self, "mg_times", tuple(float(t) for t in self.mg_times))
        object.__setattr__(self, "vr_jumps",
                           tuple((float(t), float(s)) for t, s in self.vr_jumps))
        object.__setattr__(self, "vg_jumps",
                           tuple((float(t), float(s)) for t, s in self.vg_jumps))
        _check_schedule("vr_jumps", self.vr_jumps)
        _check_schedule("vg_jumps", self.vg_jumps)
        for t in self.mg_times + tuple(t for t, _ in self.vr_jumps + self.vg_jumps):
            self.snap_index(t)  # raises on out-of-range / origin

    def grid_times(self) -> np.ndarray:
        n = max(1, round(self.horizon / self.step))
        return np.linspace(0.0, self.horizon, n + 1)

    def snap_index(self, t: float) -> int:
        """Nearest grid index for a scheduled jump time.

        Raises:
            DomainError: outside (0, horizon] or snapping to the origin.
        """
        times = self.grid_times()
        if not (math.isfinite(t) and 0.0 < t <= self.horizon):
            raise DomainError(f"jump time {t!r} outside (0, {self.horizon!r}]")
        idx = int(np.argmin(np.abs(times - t)))
        if idx == 0:
            raise DomainError(f"jump time {t!r} snaps to the origin (jumps at 0 are not allowed)")
        return idx


@dataclasses.dataclass(frozen=True)
class SemimartingalePath:
    """Five-component driver on a shared grid.

    Construction enforces the component type constraints exactly: Md and Vr
    carry no right jumps, Mg and Vg no left jumps, and the martingale parts
    start at 0.
    """

    grid: np.ndarray
    Mc: RegulatedPath
    Md: RegulatedPath
    Mg: RegulatedPath
    Vr: RegulatedPath
    Vg: RegulatedPath

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=np.float64))
        for name in ("Mc", "Md", "Mg", "Vr", "Vg"):
            p = getattr(self, name)
            if not np.array_equal(p.times, self.grid):
                raise GridError(f"component {name} is not on the shared grid")
        for name in ("Mc", "Md", "Vr"):
            p = getattr(self, name)
            if np.any(p.right_values != p.values):
                raise GridError(f"component {name} must have no right jumps")
        for name in ("Mg", "Vg"):
            p = getattr(self, name)
            if np.any(p.values[1:] != p.right_values[:-1]):
                raise GridError(f"component {name} must have no left jumps")
        for name in ("Mc", "Md", "Mg"):
            if getattr(self, name).values[0] != 0.0:
                raise GridError(f"martingale component {name} must start at 0")

    @property
    def n(self) -> int:
        return self.grid.size

    def total_m(self) -> RegulatedPath:
        """M = Mc + Md + Mg on the shared grid."""
        return RegulatedPath(
            self.grid,
            self.Mc.values + self.Md.values + self.Mg.values,
            self.Mc.right_values + self.Md.right_values + self.Mg.right_values,
        )

    def total_v(self) -> RegulatedPath:
        """V = Vr + Vg on the shared grid."""
        return RegulatedPath(
            self.grid,
            self.Vr.values + self.Vg.values,
            self.Vr.right_values + self.Vg.right_values,
        )


@dataclasses.dataclass(frozen=True)
class IntegralResult:
    """Stochastic integral and its four component integrals.

    ``path`` is the slot-wise sum of the components; it starts at 0.
    """

    path: RegulatedPath
    against_mr: RegulatedPath
    against_mg: RegulatedPath
    against_vr: RegulatedPath
    against_vg: RegulatedPath


def simulate_driver(spec: DriverSpec, seed: int) -> SemimartingalePath:
    """Simulate one driver path, deterministically per (spec, seed).

    Draws are consumed in a fixed order — Brownian increments, Poisson cell
    counts, Poisson jump sizes, Mg jump signs — so reruns with the same seed
    reproduce the path exactly.
    """
    rng = np.random.default_rng(seed)
    times = spec.grid_times()
    n_cells = times.size - 1
    dt = float(times[1] - times[0])

    d_brownian = rng.normal(0.0, spec.volatility * math.sqrt(dt), n_cells)
    counts = rng.poisson(spec.poisson_rate * dt, n_cells)
    sizes = spec.poisson_law.sample(rng, int(counts.sum()))
    signs = 2.0 * rng.integers(0, 2, len(spec.mg_times)) - 1.0

    mc = np.concatenate(([0.0], np.cumsum(d_brownian)))

    cell_sum = np.zeros(n_cells)
    np.add.at(cell_sum, np.repeat(np.arange(n_cells), counts), sizes)
    compensator = spec.poisson_rate * spec.poisson_law.mean() * dt
    md = np.concatenate(([0.0], np.cumsum(cell_sum - compensator)))

    dp_mg = np.zeros(times.size)
    for t, sign in zip(spec.mg_times, signs):
        dp_mg[spec.snap_index(t)] += sign * spec.mg_scale
    mg_v, mg_r = _right_jump_path(dp_mg)

    d_vr = np.full(n_cells, spec.drift_slope * dt)
    for t, size in spec.vr_jumps:
        d_vr[spec.snap_index(t) - 1] += size
    vr = np.concatenate(([0.0], np.cumsum(d_vr)))

    dp_vg = np.zeros(times.size)
    for t, size in spec.vg_jumps:
        dp_vg[spec.snap_index(t)] += size
    vg_v, vg_r = _right_jump_path(dp_vg)

    return SemimartingalePath(
        grid=times,
        Mc=RegulatedPath(times, mc, mc.copy()),
        Md=RegulatedPath(times, md, md.copy()),
        Mg=RegulatedPath(times, mg_v, mg_r),
        Vr=RegulatedPath(times, vr, vr.copy()),
        Vg=RegulatedPath(times, vg_v, vg_r),
    )


def _right_jump_path(dp: np.ndarray):
    """(values, right_values) of the path accumulating ``dp`` as right jumps.

    Values are taken verbatim from the previous right value so the
    no-left-jump constraint holds bitwise, not just up to rounding.
    """
    r = np.cumsum(dp)
    return np.concatenate(([0.0], r[:-1])), r


def _interleaved_cumsum(left_mass: np.ndarray, right_mass: np.ndarray):
    """Accumulate per-point (left, right) mass in slot order; returns (v, r)."""
    inc = np.empty(2 * left_mass.size)
    inc[0::2] = left_mass
    inc[1::2] = right_mass
    c = np.cumsum(inc)
    return c[0::2], c[1::2]


def quadratic_variation(m: SemimartingalePath) -> RegulatedPath:
    """Discrete bracket [M]: squared grid increments of Mc, squared left
    jumps of Md, and squared right jumps of Mg (the latter on right slots)."""
    left = np.zeros(m.n)
    left[1:] = np.diff(m.Mc.values) ** 2 + np.diff(m.Md.values) ** 2
    right = (m.Mg.right_values - m.Mg.values) ** 2
    v, r = _interleaved_cumsum(left, right)
    return RegulatedPath(m.grid, v, r)


def total_variation(v: SemimartingalePath) -> RegulatedPath:
    """|V|: absolute grid increments of Vr plus absolute right jumps of Vg
    (the latter on right slots)."""
    left = np.zeros(v.n)
    left[1:] = np.abs(np.diff(v.Vr.values))
    right = np.abs(v.Vg.right_values - v.Vg.values)
    vv, rr = _interleaved_cumsum(left, right)
    return RegulatedPath(v.grid, vv, rr)


def galchuk_integral(H: RegulatedPath, X: SemimartingalePath) -> IntegralResult:
    """Four-term stochastic integral of ``H`` against the driver ``X``.

    ``H`` must live on the driver's grid — the integrand is sampled at left
    limits (``H(0-) := H(0)``) and resampling it here would silently change
    which value counts as "previous", so grid mismatches are an error.

    Raises:
        GridError: H's grid differs from the driver's.
    """
    if not np.array_equal(H.times, X.grid):
        raise GridError("integrand grid differs from the driver grid (resample explicitly)")
    n = X.n
    hm = np.empty(n)
    hm[0] = H.values[0]
    hm[1:] = H.right_values[:-1]

    zeros = np.zeros(n)

    left = np.zeros(n)
    left[1:] = hm[1:] * np.diff(X.Mc.values + X.Md.values)
    mr_v, mr_r = _interleaved_cumsum(left, zeros)

    mg_v, mg_r = _interleaved_cumsum(zeros, hm * (X.Mg.right_values - X.Mg.values))

    left = np.zeros(n)
    left[1:] = hm[1:] * np.diff(X.Vr.values)
    vr_v, vr_r = _interleaved_cumsum(left, zeros)

    vg_v, vg_r = _interleaved_cumsum(zeros, hm * (X.Vg.right_values - X.Vg.values))

    path = RegulatedPath(X.grid, mr_v + mg_v + vr_v + vg_v,
                         mr_r + mg_r + vr_r + vg_r)
    return IntegralResult(
        path=path,
        against_mr=RegulatedPath(X.grid, mr_v, mr_r),
        against_mg=RegulatedPath(X.grid, mg_v, mg_r),
        against_vr=RegulatedPath(X.grid, vr_v, vr_r),
        against_vg=RegulatedPath(X.grid, vg_v, vg_r),
    )


def bv_square_check(A: RegulatedPath, tol: float = 1e-9) -> ConditionReport:
    """Square-function inequality for a bounded-variation grid path.

    At every grid time,

        A_t² ≤ A₀² + Σ_{s≤t} (A_s + A_{s⁻}) Δ⁻A_s  [Stieltjes part]
                    + 2 Σ_{s<t} A_s Δ⁺A_s
                    + Σ_{s<t} (Δ⁺A_s)²  folded as below,

    organized so that the slack equals the dropped squared-jump sums
    Σ_{s≤t}(Δ⁻A_s)² + Σ_{s<t}(Δ⁺A_s)², which are non-negative.  The report
    carries one entry for the inequality itself and one for that slack
    identity (an internal consistency check of the expansion).
    """
    v, r = A.values, A.right_values
    dm = np.zeros(A.n)
    dm[1:] = v[1:] - r[:-1]
    dp = r - v

    # exact telescoping gives A_t² = A₀² + Σ_{s≤t}(A_s + A_{s⁻})Δ⁻A_s
    # + Σ_{s<t}(A_s + A_{s⁺})Δ⁺A_s; the inequality's right side replaces
    # A_{s⁻} by A_{s⁺} in the Stieltjes terms, doubles A_{s⁺} in the
    # right-jump terms, and subtracts the cross products Δ⁺Δ⁻ — the
    # difference is exactly the squared-jump sums
    lhs = v**2
    rhs_left = (v + r) * dm - dp * dm
    rhs_right = 2.0 * r * dp
    cum_left = np.cumsum(rhs_left)
    cum_right = np.concatenate(([0.0], np.cumsum(rhs_right)[:-1]))
    rhs = v[0] ** 2 + cum_left + cum_right
    gap = rhs - lhs

    slack = np.cumsum(dm**2) + np.concatenate(([0.0], np.cumsum(dp**2)[:-1]))

    worst = float(np.max(-gap))
    entries = [
        ConditionEntry(
            "square inequality",
            worst <= tol,
            max(worst, 0.0),
            _top_times(A.times, -gap, tol),
        )
    ]
    drift = np.abs(gap - slack)
    entries.append(
        ConditionEntry(
            "slack equals squared jumps",
            float(np.max(drift)) <= tol,
            float(np.max(drift)),
            _top_times(A.times, drift, tol),
        )
    )
    return ConditionReport(entries=tuple(entries), tol=tol)


def _top_times(times, magnitudes, tol, cap=3):
    order = np.argsort(magnitudes)[::-1][:cap]
    return tuple(float(times[i]) for i in order if magnitudes[i] > tol)
