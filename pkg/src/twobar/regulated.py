"""Regulated (làdlàg) paths on a finite grid.

A path is stored as three equal-length arrays: strictly increasing ``times``
starting at 0, the value ``v_i = f(t_i)`` at each grid time, and the right
limit ``r_i = f(t_i+)``.  Between grid points the path is constant:
``f == r_i`` on the open interval ``(t_i, t_{i+1})``, hence the left limit at
``t_{i+1}`` is ``r_i``.  The left limit at 0 is undefined (``None``).  After
the last grid time the path is extended by constancy (``r_N``).

This family is closed under every map in the package: pointwise lattice
operations and running sups/infs over ``{v_i, r_i}`` stay piecewise constant,
so all formulas are exact finite computations, not discretizations.

The "slot" view used throughout the package interleaves values and right
values into one array ``[v_0, r_0, v_1, r_1, ...]`` of length ``2n``: slot
``2i`` is the grid point ``t_i``, slot ``2i+1`` is the open interval
``(t_i, t_{i+1})`` (or ``(t_N, inf)`` for the last).  A sup or inf over
``s <= t`` in time is then an exact scan over slots.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import os

import numpy as np

from .errors import DomainError, FormatError, GridError

__all__ = [
    "RegulatedPath",
    "ValidationOptions",
    "ValidationReport",
    "JumpReport",
    "validate",
    "eval_triplet",
    "combine",
    "sup_norm_before",
    "running_guarded_inf",
    "jumps",
    "read_path_csv",
    "write_path_csv",
]

CSV_HEADER = ("time", "value", "right_value")


@dataclasses.dataclass(frozen=True)
class RegulatedPath:
    """A piecewise-constant làdlàg path on a finite grid.

    Attributes:
        times: strictly increasing grid times, ``times[0] == 0``.
        values: ``f(t_i)`` per grid time.
        right_values: ``f(t_i+)`` per grid time.

    Construction coerces the arrays to float64 and checks shapes only; use
    :func:`validate` for the full invariant check (so that diagnostics can be
    collected on malformed data instead of raising).
    """

    times: np.ndarray
    values: np.ndarray
    right_values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        r = np.asarray(self.right_values, dtype=np.float64)
        if t.ndim != 1:
            raise GridError("times must be one-dimensional")
        if t.size == 0:
            raise GridError("grid must contain at least one time")
        if v.shape != t.shape or r.shape != t.shape:
            raise GridError(
                "values and right_values must match times in length "
                f"(got {v.shape} and {r.shape} for {t.shape})"
            )
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "right_values", r)

    @property
    def n(self) -> int:
        return self.times.size

    def slots(self) -> np.ndarray:
        """Interleaved ``[v_0, r_0, v_1, r_1, ...]`` view (a fresh array)."""
        out = np.empty(2 * self.n)
        out[0::2] = self.values
        out[1::2] = self.right_values
        return out

    @classmethod
    def from_slots(cls, times: np.ndarray, slots: np.ndarray) -> "RegulatedPath":
        return cls(times, slots[0::2], slots[1::2])

    @classmethod
    def constant(cls, times, c: float) -> "RegulatedPath":
        t = np.asarray(times, dtype=np.float64)
        vals = np.full(t.shape, float(c))
        return cls(t, vals, vals.copy())

    def __eq__(self, other):
        if not isinstance(other, RegulatedPath):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.right_values, other.right_values)
        )


@dataclasses.dataclass(frozen=True)
class ValidationOptions:
    """Knobs for :func:`validate`.

    ``require_no_initial_jump`` enforces the convention that paths do not jump
    at 0 (``v_0 == r_0``); it is on by default and every construction in this
    package satisfies it.
    """

    require_no_initial_jump: bool = True


@dataclasses.dataclass
class ValidationReport:
    """Outcome of a validation pass: empty ``errors`` means well-formed.

    ``margin`` is populated by checks that measure one (barrier separation);
    it stays ``None`` for plain path validation.
    """

    errors: list = dataclasses.field(default_factory=list)
    margin: float | None = None

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclasses.dataclass(frozen=True)
class JumpReport:
    """Grid times with a left or right jump above tolerance.

    ``left_jumps[j]`` is Δ⁻f at ``times[j]`` (0 by convention at t=0, where
    the left limit does not exist) and ``right_jumps[j]`` is Δ⁺f.
    """

    times: np.ndarray
    left_jumps: np.ndarray
    right_jumps: np.ndarray

    def __len__(self) -> int:
        return self.times.size


def validate(path: RegulatedPath, opts: ValidationOptions = ValidationOptions()) -> ValidationReport:
    """Check every RegulatedPath invariant, collecting all violations.

    Returns:
        A report whose ``errors`` list is empty iff the path is well-formed.
    """
    report = ValidationReport()
    t, v, r = path.times, path.values, path.right_values
    if not np.all(np.isfinite(t)):
        report.errors.append("times contain non-finite entries")
    if t[0] != 0.0:
        report.errors.append(f"first time must be 0, got {t[0]!r}")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        bad = int(np.flatnonzero(np.diff(t) <= 0)[0]) + 1
        report.errors.append(f"times not strictly increasing at index {bad}")
    if not np.all(np.isfinite(v)):
        report.errors.append("values contain non-finite entries")
    if not np.all(np.isfinite(r)):
        report.errors.append("right_values contain non-finite entries")
    if opts.require_no_initial_jump and v[0] != r[0]:
        report.errors.append(
            f"jump at 0: value {v[0]!r} != right value {r[0]!r} "
            "(paths do not jump at 0)"
        )
    return report


def require_valid(path: RegulatedPath, what: str = "path") -> None:
    """Raise GridError citing the first invariant violation, if any."""
    report = validate(path)
    if not report.ok:
        raise GridError(f"invalid {what}: {report.errors[0]}")


def eval_triplet(path: RegulatedPath, t: float):
    """Evaluate ``(f(t-), f(t), f(t+))`` under piecewise-constant semantics.

    The left limit is ``None`` at ``t == 0``.  At a non-grid time inside an
    interval all three coincide with the interval's constant value.

    Raises:
        DomainError: if ``t`` is outside ``[times[0], times[-1]]``.
    """
    times = path.times
    t = float(t)
    if t < times[0] or t > times[-1]:
        raise DomainError(
            f"time {t!r} outside the grid range [{times[0]!r}, {times[-1]!r}]"
        )
    i = int(np.searchsorted(times, t))
    if i < times.size and times[i] == t:
        left = None if i == 0 else float(path.right_values[i - 1])
        return (left, float(path.values[i]), float(path.right_values[i]))
    # strictly inside (times[i-1], times[i])
    c = float(path.right_values[i - 1])
    return (c, c, c)


def _sample_on(path: RegulatedPath, new_times: np.ndarray):
    """Values and right values of ``path`` at each of ``new_times``.

    ``new_times`` must be sorted with ``new_times[0] == 0``.  Times beyond the
    last grid point use the constant extension ``r_N``.  Returns two arrays.
    """
    idx = np.searchsorted(path.times, new_times, side="right") - 1
    v = path.right_values[idx].copy()
    r = path.right_values[idx].copy()
    exact = path.times[idx] == new_times
    v[exact] = path.values[idx[exact]]
    return v, r


def resample(path: RegulatedPath, new_times: np.ndarray) -> RegulatedPath:
    """Re-grid a path onto ``new_times`` (a superset works losslessly)."""
    v, r = _sample_on(path, np.asarray(new_times, dtype=np.float64))
    return RegulatedPath(new_times, v, r)


def merge_times(*paths: RegulatedPath) -> np.ndarray:
    """Sorted union of the grids of all given paths."""
    ts = [p.times for p in paths]
    out = ts[0]
    for t in ts[1:]:
        if out.shape == t.shape and np.array_equal(out, t):
            continue
        out = np.union1d(out, t)
    return out

_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "min": np.minimum,
    "max": np.maximum,
}


def combine(a: RegulatedPath, b: RegulatedPath, op: str, ca: float = 1.0, cb: float = 1.0) -> RegulatedPath:
    """Pointwise ``op(ca*a, cb*b)`` on the merged grid.

    ``op`` is one of ``add``, ``sub``, ``min``, ``max``.  When the operands
    share a grid no resampling happens and the arithmetic is a single
    deterministic elementwise pass (bit-stable across runs).

    Raises:
        DomainError: for non-finite coefficients.
        GridError: for unknown ``op``.
    """
    if op not in _OPS:
        raise GridError(f"unknown combine op {op!r}; expected one of {sorted(_OPS)}")
    ca = float(ca)
    cb = float(cb)
    if not (np.isfinite(ca) and np.isfinite(cb)):
        raise DomainError(f"non-finite coefficients ca={ca!r}, cb={cb!r}")
    if a.times.shape == b.times.shape and np.array_equal(a.times, b.times):
        grid = a.times
        av, ar = a.values, a.right_values
        bv, br = b.values, b.right_values
    else:
        grid = merge_times(a, b)
        av, ar = _sample_on(a, grid)
        bv, br = _sample_on(b, grid)
    f = _OPS[op]
    if ca == 1.0 and cb == 1.0:
        # skip the scaling multiply entirely so y -> y+z -> (y+z)-z style
        # round trips introduce no extra rounding beyond the op itself
        return RegulatedPath(grid, f(av, bv), f(ar, br))
    return RegulatedPath(grid, f(ca * av, cb * bv), f(ca * ar, cb * br))


def sup_norm_before(path: RegulatedPath, T: float) -> float:
    """Sup of ``|f|`` over ``[0, T)``.

    On the grid this is the max of ``|v_i|`` and ``|r_i|`` over all ``t_i < T``
    (the right value covers the open interval after ``t_i``, truncated or not).

    Raises:
        DomainError: if ``T <= 0``.
    """
    T = float(T)
    if T <= 0.0:
        raise DomainError(f"T must be positive, got {T!r}")
    mask = path.times < T
    if not mask.any():
        raise DomainError(f"no grid time below T={T!r} (grid starts at {path.times[0]!r})")
    return float(
        max(np.max(np.abs(path.values[mask])), np.max(np.abs(path.right_values[mask])))
    )


def running_guarded_inf(a: RegulatedPath) -> RegulatedPath:
    """The map ``t -> inf over s<=t of (a_s ∧ a_{s+} ∧ 0)``.

    The output is non-increasing, non-positive and right-continuous (its value
    and right value coincide at every grid time): the inf at ``t`` already
    includes ``a_{t+}``, so nothing new appears just after ``t``.  Open
    intervals never bind because their constant ``r_i`` is already counted at
    ``t_i``.
    """
    m = np.minimum(np.minimum(a.values, a.right_values), 0.0)
    run = np.minimum.accumulate(m)
    return RegulatedPath(a.times, run, run.copy())


def jumps(path: RegulatedPath, tol: float = 0.0) -> JumpReport:
    """Report grid times where ``|Δ⁻f| > tol`` or ``|Δ⁺f| > tol``.

    Raises:
        DomainError: if ``tol < 0``.
    """
    tol = float(tol)
    if tol < 0.0:
        raise DomainError(f"tol must be non-negative, got {tol!r}")
    v, r = path.values, path.right_values
    dm = np.zeros(path.n)
    dm[1:] = v[1:] - r[:-1]
    dp = r - v
    sel = (np.abs(dm) > tol) | (np.abs(dp) > tol)
    return JumpReport(times=path.times[sel], left_jumps=dm[sel], right_jumps=dp[sel])


# ---------------------------------------------------------------------------
# CSV interchange: header `time,value,right_value`, one row per grid point,
# 17-significant-digit decimal (round-trip exact for float64).


def format_float(x: float) -> str:
    return f"{x:.17g}"


def write_path_csv(path: RegulatedPath, dest) -> None:
    """Write a path to ``dest`` (a filename or text file object).

    Output is byte-deterministic: fixed header, ``%.17g`` floats, ``\\n``
    line endings.
    """
    if hasattr(dest, "write"):
        _write_csv(path, dest)
    else:
        with open(dest, "w", newline="") as fh:
            _write_csv(path, fh)


def _write_csv(path: RegulatedPath, fh) -> None:
    fh.write(",".join(CSV_HEADER) + "\n")
    for t, v, r in zip(path.times, path.values, path.right_values):
        fh.write(f"{format_float(t)},{format_float(v)},{format_float(r)}\n")


def read_path_csv(src) -> RegulatedPath:
    """Read a path from ``src`` (filename or text file object).

    Raises:
        FormatError: with a 1-based line number for any violation — bad
            header, wrong column count, unparseable numbers, or a breach of
            the RegulatedPath invariants (non-increasing times, jump at 0,
            non-finite entries).
    """
    if hasattr(src, "read"):
        return _read_csv(src, name="<stream>")
    if not os.path.exists(src):
        raise FormatError(f"no such file: {src}")
    with open(src, "r", newline="") as fh:
        return _read_csv(fh, name=str(src))


def _read_csv(fh, name: str) -> RegulatedPath:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"{name}: empty file") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise FormatError(
            f"{name}: line 1: expected header {','.join(CSV_HEADER)!r}, "
            f"got {','.join(header)!r}"
        )
    times, values, rights = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise FormatError(f"{name}: line {lineno}: expected 3 columns, got {len(row)}")
        try:
            t, v, r = (float(c) for c in row)
        except ValueError:
            raise FormatError(f"{name}: line {lineno}: unparseable number in {row!r}") from None
        if not (np.isfinite(t) and np.isfinite(v) and np.isfinite(r)):
            raise FormatError(f"{name}: line {lineno}: non-finite entry in {row!r}")
        if times:
            if t <= times[-1]:
                raise FormatError(
                    f"{name}: line {lineno}: time {t!r} not greater than previous {times[-1]!r}"
                )
        else:
            if t != 0.0:
                raise FormatError(f"{name}: line {lineno}: first time must be 0, got {t!r}")
            if v != r:
                raise FormatError(
                    f"{name}: line {lineno}: jump at 0 (value {v!r} != right value {r!r})"
                )
        times.append(t)
        values.append(v)
        rights.append(r)
    if not times:
        raise FormatError(f"{name}: no data rows")
    return RegulatedPath(np.array(times), np.array(values), np.array(rights))


def path_to_csv_bytes(path: RegulatedPath) -> bytes:
    buf = io.StringIO()
    _write_csv(path, buf)
    return buf.getvalue().encode("ascii")
