"""Tests for the one-sided reflection maps."""

import numpy as np
import pytest
from hypothesis import given, settings

from twobar.errors import DomainError
from twobar.regulated import RegulatedPath, resample, sup_norm_before, combine
from twobar.skorokhod_one import check_one_sided, reflect_lower, reflect_upper

from _oracles import rgi_rescan
from conftest import const, path, random_grid, random_regulated
from test_regulated import regulated_paths


def test_lower_untouched_barrier_yields_zero_regulator():
    y = path([0, 1, 2], [1, 2, 0.5], [1, 2.5, 0.5])
    l = const(y.times, 0.0)
    sol = reflect_lower(y, l)
    assert np.all(sol.kappa.values == 0.0) and np.all(sol.kappa.right_values == 0.0)
    assert sol.xi == y
    assert sol.side == "lower"


def test_lower_two_point_drop_example():
    # y falls to -2 at t=1; the regulator must push by exactly 2 and xi
    # lands on the barrier
    y = path([0, 1], [1, -2], [1, -2])
    l = const(y.times, 0.0)
    sol = reflect_lower(y, l)
    alpha = rgi_rescan(combine(y, l, "sub"))
    assert np.array_equal(sol.kappa.values, -alpha.values)
    assert np.array_equal(sol.kappa.values, [0.0, 2.0])
    assert np.array_equal(sol.xi.values, [1.0, 0.0])


def test_lower_complementarity_on_random_walk():
    rng = np.random.default_rng(11)
    times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 0.5, 49))])
    y = random_regulated(rng, times, start=0.5, step_scale=0.6)
    l = const(times, 0.0)
    sol = reflect_lower(y, l)
    report = check_one_sided(sol, y, l, tol=1e-9)
    assert report.ok, report.failures()
    assert report.entry("complementarity").residual < 1e-9


def test_upper_untouched_barrier():
    y = path([0, 1], [0, 0.5], [0, 0.9])
    u = const(y.times, 1.0)
    sol = reflect_upper(y, u)
    assert np.all(sol.kappa.values == 0.0)
    assert sol.xi == y


def test_upper_is_mirror_of_lower():
    rng = np.random.default_rng(5)
    for _ in range(20):
        times = random_grid(rng, 30)
        y = random_regulated(rng, times, start=0.0, step_scale=1.0)
        u = random_regulated(rng, times, start=1.0, step_scale=0.4)
        if y.values[0] > u.values[0]:
            continue
        up = reflect_upper(y, u)
        neg_y = RegulatedPath(times, -y.values, -y.right_values)
        neg_u = RegulatedPath(times, -u.values, -u.right_values)
        lo = reflect_lower(neg_y, neg_u)
        assert np.array_equal(up.kappa.values, lo.kappa.values)
        assert np.array_equal(up.xi.values, -lo.xi.values)
        assert np.array_equal(up.xi.right_values, -lo.xi.right_values)


def test_upper_ramp_overshoot():
    # y ramps linearly to 3 above the constant barrier u = 1: the regulator
    # must end at 2
    y = path([0, 1, 2, 3], [0, 1, 2, 3])
    u = const(y.times, 1.0)
    sol = reflect_upper(y, u)
    assert sol.kappa.values[-1] == 2.0
    assert np.all(sol.xi.values <= 1.0)
    report = check_one_sided(sol, y, u)
    assert report.ok, report.failures()


def test_check_flags_corrupted_regulator():
    y = path([0, 1, 2], [1, -2, 0], [1, -2, 0])
    l = const(y.times, 0.0)
    sol = reflect_lower(y, l)
    # additive corruption at one grid point: identity (and possibly
    # monotonicity) must fail
    bad_kappa = sol.kappa.values.copy()
    bad_kappa[1] += 1.0
    from twobar.skorokhod_one import OneSidedSolution
    bad = OneSidedSolution(
        xi=sol.xi,
        kappa=RegulatedPath(sol.kappa.times, bad_kappa, sol.kappa.right_values.copy()),
        side="lower",
    )
    report = check_one_sided(bad, y, l)
    assert not report.ok
    names = {e.name for e in report.failures()}
    assert names  # at least one named failure with a witness
    assert any(e.witness_times for e in report.failures())


def test_check_flags_artificial_right_jump():
    y = path([0, 1], [1, -2], [1, -2])
    l = const(y.times, 0.0)
    sol = reflect_lower(y, l)
    from twobar.skorokhod_one import OneSidedSolution
    r = sol.kappa.right_values.copy()
    r[1] += 0.5
    bad = OneSidedSolution(
        xi=sol.xi,
        kappa=RegulatedPath(sol.kappa.times, sol.kappa.values.copy(), r),
        side="lower",
    )
    report = check_one_sided(bad, y, l)
    failed = {e.name for e in report.failures()}
    assert "regulator monotone, zero start, right-continuous" in failed


@given(regulated_paths(max_points=10))
@settings(max_examples=60, deadline=None)
def test_idempotence_and_minimality(y):
    l = const(y.times, float(np.min([y.values.min(), y.right_values.min()])) - 1.0)
    sol = reflect_lower(y, l)
    # already-reflected input: regulator is identically zero
    again = reflect_lower(sol.xi, l)
    assert np.all(again.kappa.values == 0.0)
    assert np.all(again.kappa.right_values == 0.0)
    # minimality: kappa equals the full-rescan -alpha exactly
    diff = combine(y, l, "sub")
    assert np.array_equal(sol.kappa.values, -rgi_rescan(diff).values)


def test_one_lipschitz_in_each_argument():
    rng = np.random.default_rng(23)
    worst = 0.0
    for _ in range(60):
        times = random_grid(rng, 40)
        y = random_regulated(rng, times, start=1.0, step_scale=0.7)
        l = random_regulated(rng, times, start=0.0, step_scale=0.3)
        dy = random_regulated(rng, times, start=0.0, step_scale=0.1)
        dl = random_regulated(rng, times, start=0.0, step_scale=0.1)
        yt = RegulatedPath(times, y.values + dy.values, y.right_values + dy.right_values)
        lt = RegulatedPath(times, l.values + dl.values, l.right_values + dl.right_values)
        # keep both problems admissible at 0
        if y.values[0] < l.values[0] or yt.values[0] < lt.values[0]:
            continue
        T = float(times[-1]) + 0.5
        k1 = reflect_lower(y, l).kappa
        k2 = reflect_lower(yt, lt).kappa
        lhs = sup_norm_before(combine(k1, k2, "sub"), T)
        rhs = (sup_norm_before(combine(y, yt, "sub"), T)
               + sup_norm_before(combine(l, lt, "sub"), T))
        assert lhs <= rhs + 1e-12
        worst = max(worst, lhs / rhs if rhs else 0.0)
    assert worst <= 1.0 + 1e-12


def test_domain_errors():
    y = path([0, 1], [0, 1])
    with pytest.raises(DomainError):
        reflect_lower(y, const(y.times, 0.5))
    with pytest.raises(DomainError):
        reflect_upper(y, const(y.times, -0.5))


def test_merged_grids_between_path_and_barrier():
    y = path([0, 1], [1, 0.5])
    l = path([0, 0.4, 2], [0, 0.8, 0.8])
    sol = reflect_lower(y, l)
    assert np.array_equal(sol.xi.times, [0, 0.4, 1, 2])
    lm = resample(l, sol.xi.times)
    assert np.all(sol.xi.values >= lm.values)
    assert np.all(sol.xi.right_values >= lm.right_values)
    report = check_one_sided(sol, y, l)
    assert report.ok, report.failures()
