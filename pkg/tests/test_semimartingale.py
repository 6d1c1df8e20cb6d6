"""Tests for driver simulation, brackets, the stochastic integral, and the
BV square inequality."""

import numpy as np
import pytest

from twobar.errors import DomainError, GridError
from twobar.regulated import RegulatedPath, combine
from twobar.semimartingale import (
    DriverSpec,
    JumpLaw,
    SemimartingalePath,
    bv_square_check,
    galchuk_integral,
    quadratic_variation,
    simulate_driver,
    total_variation,
)

from _oracles import slot_arrays
from conftest import const, path, random_grid, random_regulated


def make_driver(times, mc=None, md=None, mg_dp=None, vr=None, vg_dp=None):
    """Hand-build a driver from per-point data; jump parts from their right
    jumps (no left jumps by construction)."""
    times = np.asarray(times, float)
    n = times.size
    zeros = np.zeros(n)

    def rc(vals):
        vals = zeros if vals is None else np.asarray(vals, float)
        return RegulatedPath(times, vals, vals.copy())

    def lc(dp):
        dp = zeros if dp is None else np.asarray(dp, float)
        r = np.cumsum(dp)
        return RegulatedPath(times, np.concatenate(([0.0], r[:-1])), r)

    return SemimartingalePath(grid=times, Mc=rc(mc), Md=rc(md), Mg=lc(mg_dp),
                              Vr=rc(vr), Vg=lc(vg_dp))


@pytest.fixture
def integer_driver():
    return make_driver(
        [0, 1, 2, 3],
        mc=[0, 1, -1, 2],
        md=[0, 2, 2, -1],
        mg_dp=[0, 3, -2, 1],
        vr=[0, -1, -1, 2],
        vg_dp=[0, -1, 0, 2],
    )


# ---------------------------------------------------------------------------
# simulation


def test_zero_spec_gives_zero_components():
    spec = DriverSpec(horizon=1.0, step=0.25, volatility=0.0)
    d = simulate_driver(spec, seed=5)
    for comp in (d.Mc, d.Md, d.Mg, d.Vr, d.Vg):
        assert np.all(slot_arrays(comp) == 0.0)


def test_same_seed_reproduces_exactly():
    spec = DriverSpec(horizon=2.0, step=0.125, volatility=0.8, poisson_rate=3.0,
                      poisson_law=JumpLaw("uniform", 0.5),
                      mg_times=(0.5, 1.25), mg_scale=0.4,
                      drift_slope=0.3, vr_jumps=((1.0, -0.7),),
                      vg_jumps=((1.5, 0.2),))
    a = simulate_driver(spec, seed=42)
    b = simulate_driver(spec, seed=42)
    for pa, pb in ((a.Mc, b.Mc), (a.Md, b.Md), (a.Mg, b.Mg), (a.Vr, b.Vr),
                   (a.Vg, b.Vg)):
        assert pa == pb
    c = simulate_driver(spec, seed=43)
    assert not np.array_equal(a.Mc.values, c.Mc.values)


def test_simulated_components_satisfy_type_constraints():
    spec = DriverSpec(horizon=1.0, step=0.1, volatility=1.0, poisson_rate=5.0,
                      poisson_law=JumpLaw("binary", 0.3),
                      mg_times=(0.35,), mg_scale=0.6, drift_slope=-0.4,
                      vr_jumps=((0.5, 1.0),), vg_jumps=((0.7, -0.5),))
    d = simulate_driver(spec, seed=0)  # construction re-validates everything
    assert d.Mg.values[0] == 0.0
    # the scheduled jumps actually landed
    assert np.any(d.Mg.right_values != d.Mg.values)
    assert np.any(d.Vg.right_values != d.Vg.values)


def test_brownian_terminal_variance():
    spec = DriverSpec(horizon=1.0, step=0.5, volatility=0.7)
    n = 10_000
    terminals = np.array([simulate_driver(spec, s).Mc.values[-1] for s in range(n)])
    target = 0.7**2 * 1.0
    se = target * np.sqrt(2.0 / (n - 1))
    assert abs(np.var(terminals, ddof=1) - target) <= 3 * se


def test_jump_martingales_are_centered():
    spec = DriverSpec(horizon=1.0, step=0.5, volatility=0.0, poisson_rate=4.0,
                      poisson_law=JumpLaw("fixed", 0.5),
                      mg_times=(0.5, 1.0), mg_scale=0.8)
    n = 10_000
    md = np.empty(n)
    mg = np.empty(n)
    for s in range(n):
        d = simulate_driver(spec, s)
        md[s] = d.Md.values[-1]
        mg[s] = d.Mg.right_values[-1]
    for sample in (md, mg):
        se = np.std(sample, ddof=1) / np.sqrt(n)
        assert abs(np.mean(sample)) <= 4 * se


@pytest.mark.parametrize("bad", [
    dict(horizon=0.0),
    dict(step=0.0),
    dict(step=2.0, horizon=1.0),
    dict(volatility=-1.0),
    dict(poisson_rate=-0.5),
    dict(mg_scale=-0.1),
    dict(mg_times=(0.0,)),          # jump at the origin
    dict(mg_times=(0.01,), step=0.5),  # snaps to the origin
    dict(mg_times=(5.0,), horizon=1.0),
    dict(vr_jumps=((np.inf, 1.0),)),
])
def test_spec_validation(bad):
    kwargs = dict(horizon=1.0, step=0.25)
    kwargs.update(bad)
    with pytest.raises(DomainError):
        DriverSpec(**kwargs)


def test_bad_jump_law():
    with pytest.raises(DomainError):
        JumpLaw("gaussianish", 1.0)
    with pytest.raises(DomainError):
        JumpLaw("binary", -2.0)


def test_jump_time_snapping():
    spec = DriverSpec(horizon=1.0, step=0.25, volatility=0.0,
                      mg_times=(0.249,), mg_scale=1.0)
    d = simulate_driver(spec, seed=1)
    dp = d.Mg.right_values - d.Mg.values
    assert abs(dp[1]) == 1.0  # landed on t=0.25
    assert np.all(dp[[0, 2, 3, 4]] == 0.0)


def test_type_constraint_enforcement():
    times = np.array([0.0, 1.0])
    zero = RegulatedPath(times, np.zeros(2), np.zeros(2))
    with_right = RegulatedPath(times, np.zeros(2), np.array([0.0, 1.0]))
    with_left = RegulatedPath(times, np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    ok = dict(grid=times, Mc=zero, Md=zero, Mg=zero, Vr=zero, Vg=zero)
    SemimartingalePath(**ok)
    with pytest.raises(GridError):
        SemimartingalePath(**{**ok, "Md": with_right})
    with pytest.raises(GridError):
        SemimartingalePath(**{**ok, "Vr": with_right})
    with pytest.raises(GridError):
        SemimartingalePath(**{**ok, "Mg": with_left})
    nonzero = RegulatedPath(times, np.ones(2), np.ones(2))
    with pytest.raises(GridError):
        SemimartingalePath(**{**ok, "Mc": nonzero})  # must start at 0
    other = RegulatedPath(np.array([0.0, 2.0]), np.zeros(2), np.zeros(2))
    with pytest.raises(GridError):
        SemimartingalePath(**{**ok, "Vg": other})


# ---------------------------------------------------------------------------
# brackets


def test_quadratic_variation_zero_driver():
    d = make_driver([0, 1, 2])
    assert np.all(slot_arrays(quadratic_variation(d)) == 0.0)


def test_quadratic_variation_left_jump():
    d = make_driver([0, 1, 2], md=[0, 2, 2])
    qv = quadratic_variation(d)
    assert qv.values.tolist() == [0.0, 4.0, 4.0]
    assert qv.right_values.tolist() == [0.0, 4.0, 4.0]


def test_quadratic_variation_right_jump_mass_on_right_slot():
    d = make_driver([0, 1, 2], mg_dp=[0, 3, 0])
    qv = quadratic_variation(d)
    assert qv.values.tolist() == [0.0, 0.0, 9.0]
    assert qv.right_values.tolist() == [0.0, 9.0, 9.0]


def test_quadratic_variation_counts_all_components(integer_driver):
    qv = quadratic_variation(integer_driver)
    # Mc diffs 1,-2,3; Md diffs 2,0,-3; Mg right jumps 3,-2,1 (mass on the
    # right slot, so the value slot sees jumps from strictly earlier times)
    assert qv.values.tolist() == [0.0, 5.0, 18.0, 40.0]
    assert qv.right_values.tolist() == [0.0, 14.0, 22.0, 41.0]
    assert np.all(np.diff(slot_arrays(qv)) >= 0.0)


def test_total_variation_monotone_vr():
    d = make_driver([0, 1, 2, 3], vr=[0, 1, 3, 4])
    tv = total_variation(d)
    assert tv.values.tolist() == [0.0, 1.0, 3.0, 4.0]


def test_total_variation_sawtooth():
    d = make_driver([0, 1, 2, 3, 4], vr=[0, 1, 0, 1, 0])
    assert total_variation(d).values[-1] == 4.0


def test_total_variation_right_jump():
    d = make_driver([0, 1, 2], vg_dp=[0, -2, 0])
    tv = total_variation(d)
    assert tv.values.tolist() == [0.0, 0.0, 2.0]
    assert tv.right_values.tolist() == [0.0, 2.0, 2.0]


# ---------------------------------------------------------------------------
# the stochastic integral


def test_unit_integrand_telescopes(integer_driver):
    d = integer_driver
    res = galchuk_integral(const(d.grid, 1.0), d)
    total_v = d.Mc.values + d.Md.values + d.Mg.values + d.Vr.values + d.Vg.values
    total_r = (d.Mc.right_values + d.Md.right_values + d.Mg.right_values
               + d.Vr.right_values + d.Vg.right_values)
    assert np.array_equal(res.path.values, total_v)
    assert np.array_equal(res.path.right_values, total_r)


def test_zero_integrand(integer_driver):
    res = galchuk_integral(const(integer_driver.grid, 0.0), integer_driver)
    assert np.all(slot_arrays(res.path) == 0.0)


def test_single_right_jump_driver():
    d = make_driver([0, 1, 2, 3], mg_dp=[0, 3, 0, 0])
    H = path([0, 1, 2, 3], [1, 2, -1, 3], [2, 0, 1, 3])
    res = galchuk_integral(H, d)
    # H(1-) = right value at 0 = 2; the jump contributes from t=1.radius on
    assert res.path.values.tolist() == [0.0, 0.0, 6.0, 6.0]
    assert res.path.right_values.tolist() == [0.0, 6.0, 6.0, 6.0]


def test_integral_starts_at_zero_and_sums_components(integer_driver):
    H = path([0, 1, 2, 3], [1, 2, -1, 3], [2, 0, 1, 3])
    res = galchuk_integral(H, integer_driver)
    assert res.path.values[0] == 0.0
    total = (slot_arrays(res.against_mr) + slot_arrays(res.against_mg)
             + slot_arrays(res.against_vr) + slot_arrays(res.against_vg))
    assert np.array_equal(slot_arrays(res.path), total)
    # the split respects jump types: mr/vr components are right-continuous,
    # mg/vg components have no left jumps
    for p in (res.against_mr, res.against_vr):
        assert np.array_equal(p.values, p.right_values)
    for p in (res.against_mg, res.against_vg):
        assert np.array_equal(p.values[1:], p.right_values[:-1])


def test_integral_linearity_exact_on_integer_fixture(integer_driver):
    H1 = path([0, 1, 2, 3], [1, 2, -1, 3], [2, 0, 1, 3])
    H2 = path([0, 1, 2, 3], [0, -1, 2, 1], [1, 1, -2, 1])
    H = combine(H1, H2, "add", ca=2.0, cb=-3.0)
    lhs = galchuk_integral(H, integer_driver).path
    r1 = galchuk_integral(H1, integer_driver).path
    r2 = galchuk_integral(H2, integer_driver).path
    rhs_v = 2.0 * r1.values - 3.0 * r2.values
    rhs_r = 2.0 * r1.right_values - 3.0 * r2.right_values
    assert np.array_equal(lhs.values, rhs_v)
    assert np.array_equal(lhs.right_values, rhs_r)


def test_jump_transport(integer_driver):
    d = integer_driver
    H = path([0, 1, 2, 3], [1, 2, -1, 3], [2, 0, 1, 3])
    res = galchuk_integral(H, d)
    hm = np.array([1.0, 2.0, 0.0, 1.0])  # left limits of H
    total = combine(d.total_m(), d.total_v(), "add")
    dm_total = total.values[1:] - total.right_values[:-1]
    dp_total = total.right_values - total.values
    dm_res = res.path.values[1:] - res.path.right_values[:-1]
    dp_res = res.path.right_values - res.path.values
    assert np.array_equal(dm_res, hm[1:] * dm_total)
    assert np.array_equal(dp_res, hm * dp_total)


def test_integral_on_random_float_driver_matches_slow_sum():
    rng = np.random.default_rng(3)
    for _ in range(20):
        times = random_grid(rng, max_points=25)
        n = times.size
        spec = DriverSpec(horizon=float(times[-1]), step=float(times[-1]) / 4,
                          volatility=0.5)
        # hand-build on the random grid instead: random rc/lc components
        mc = np.concatenate(([0.0], np.cumsum(rng.normal(0, 0.5, n - 1))))
        mg_dp = rng.normal(0, 0.4, n) * (rng.random(n) < 0.4)
        mg_dp[0] = 0.0
        d = make_driver(times, mc=mc, mg_dp=mg_dp,
                        vr=np.concatenate(([0.0], np.cumsum(rng.normal(0, 0.2, n - 1)))))
        H = random_regulated(rng, times, start=1.0)
        res = galchuk_integral(H, d)
        # slow reference: slot-by-slot accumulation
        hm = np.concatenate(([H.values[0]], H.right_values[:-1]))
        actual_dp = d.Mg.right_values - d.Mg.values
        acc_v, acc_r, run = np.zeros(n), np.zeros(n), 0.0
        for i in range(n):
            if i > 0:
                run += hm[i] * (mc[i] - mc[i - 1])
                run += hm[i] * (d.Vr.values[i] - d.Vr.values[i - 1])
            acc_v[i] = run
            run += hm[i] * actual_dp[i]
            acc_r[i] = run
        assert np.max(np.abs(res.path.values - acc_v)) <= 1e-12
        assert np.max(np.abs(res.path.right_values - acc_r)) <= 1e-12
        assert spec.grid_times()[-1] == times[-1]


def test_grid_mismatch_rejected(integer_driver):
    H = const([0, 1, 2], 1.0)
    with pytest.raises(GridError):
        galchuk_integral(H, integer_driver)


# ---------------------------------------------------------------------------
# square-function inequality


def test_bv_square_constant_path_is_equality():
    report = bv_square_check(const([0, 1, 2], 3.0))
    assert report.ok
    assert report.entry("square inequality").residual == 0.0
    assert report.entry("slack equals squared jumps").residual == 0.0


def test_bv_square_single_left_jump_gap():
    # one left jump of 2: the dropped (Δ⁻A)² term is 4, so the inequality
    # holds with slack exactly 4 from the jump time on
    a = path([0, 1, 2], [1, 3, 3])
    report = bv_square_check(a)
    assert report.ok
    v, r = a.values, a.right_values
    dm = np.concatenate(([0.0], v[1:] - r[:-1]))
    dp = r - v
    rhs = v[0] ** 2 + np.cumsum((v + r) * dm - dp * dm) \
        + np.concatenate(([0.0], np.cumsum(2 * r * dp)[:-1]))
    assert (rhs - v**2).tolist() == [0.0, 4.0, 4.0]


def test_bv_square_random_paths_never_violate():
    rng = np.random.default_rng(29)
    for _ in range(100):
        times = random_grid(rng, max_points=50)
        a = random_regulated(rng, times, start=rng.normal(),
                             right_jump_prob=0.5)
        report = bv_square_check(a, tol=1e-9)
        assert report.ok, report.as_dict()


def test_bv_square_flags_corrupted_expansion():
    # feeding a path whose squares cannot satisfy the identity is impossible
    # by construction, so instead check the witness plumbing on a pass
    report = bv_square_check(path([0, 1], [1, -2], [1, 3]))
    entry = report.entry("square inequality")
    assert entry.passed and entry.witness_times == ()
