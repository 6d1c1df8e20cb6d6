"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from twobar.regulated import RegulatedPath


def path(times, values, right_values=None) -> RegulatedPath:
    """Terse RegulatedPath builder; right values default to the values
    (a right-continuous path with no right jumps)."""
    if right_values is None:
        right_values = list(values)
    return RegulatedPath(np.asarray(times, float), np.asarray(values, float),
                         np.asarray(right_values, float))


def const(times, c) -> RegulatedPath:
    return RegulatedPath.constant(np.asarray(times, float), c)


@pytest.fixture
def golden_y():
    """The motivating two-point fixture: value -1 and right value 3 at t=1."""
    return path([0.0, 1.0], [0.0, -1.0], [0.0, 3.0])


@pytest.fixture
def golden_barriers(golden_y):
    l = const(golden_y.times, 0.0)
    u = const(golden_y.times, 2.0)
    return l, u


def random_grid(rng: np.random.Generator, max_points: int = 60) -> np.ndarray:
    n = int(rng.integers(2, max_points + 1))
    steps = rng.uniform(0.05, 1.0, n - 1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def random_regulated(rng: np.random.Generator, times: np.ndarray,
                     start: float = 0.0, step_scale: float = 0.5,
                     right_jump_prob: float = 0.3,
                     right_jump_scale: float = 1.0) -> RegulatedPath:
    """A random walk path with sparse right jumps and no jump at 0."""
    n = times.size
    v = np.empty(n)
    r = np.empty(n)
    v[0] = r[0] = start
    for i in range(1, n):
        v[i] = r[i - 1] + rng.normal(0.0, step_scale)
        if rng.uniform() < right_jump_prob:
            r[i] = v[i] + rng.normal(0.0, right_jump_scale)
        else:
            r[i] = v[i]
    return RegulatedPath(times, v, r)


def random_instance(rng: np.random.Generator, max_points: int = 60):
    """A random (y, l, u) triple with separation at least 0.1.

    The barriers move (both values and right values), y starts midway
    between them, and roughly one instance in eight gets a larger scale.
    """
    times = random_grid(rng, max_points)
    scale = 10.0 if rng.uniform() < 0.125 else 1.0
    l = random_regulated(rng, times, start=float(rng.normal(-1.0, 0.5)) * scale,
                         step_scale=0.2 * scale, right_jump_prob=0.2,
                         right_jump_scale=0.3 * scale)
    gap_walk = random_regulated(rng, times, start=float(rng.uniform(0.0, 2.0)),
                                step_scale=0.2, right_jump_prob=0.2,
                                right_jump_scale=0.3)
    gv = 0.1 * scale + np.abs(gap_walk.values) * scale
    gr = 0.1 * scale + np.abs(gap_walk.right_values) * scale
    u = RegulatedPath(times, l.values + gv, l.right_values + gr)
    y0 = 0.5 * (l.values[0] + u.values[0])
    y = random_regulated(rng, times, start=y0, step_scale=0.8 * scale,
                         right_jump_prob=0.35, right_jump_scale=1.5 * scale)
    return y, l, u
