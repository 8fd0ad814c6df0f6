import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import brentq

from core.errors import MaxIterExceeded
from core.loop import (
    inner_price_fixed_point,
    mid_wage_fixed_point,
    outer_measure_fixed_point,
    solve_bgp,
    static_equilibrium,
)
from models import SolverConfig
from modules import gravity
from modules.analysis import autarky_growth_closed_form, growth_rate, symmetric_g_of_tau, zero_gravity_excess_demand

from conftest import make_params, random_params


# --- inner loop ---

def test_inner_single_country_matches_bisection():
    p = make_params(1)
    w, M = np.array([1.0]), np.array([1.0])

    def gap(log_P):
        PM = gravity.composite_intermediate_prices(p, M, [np.exp(log_P)])
        return log_P - np.log(gravity.final_price_index(p, w, PM)[0])

    expected = np.exp(brentq(gap, -20.0, 20.0, xtol=1e-14))
    P = inner_price_fixed_point(p, w, M, np.array([1.0]))
    assert P[0] == pytest.approx(expected, rel=1e-11)
    assert P[0] == pytest.approx((p.gamma * p.alpha ** -p.alpha) ** p.eta, rel=1e-11)


def test_inner_symmetric_prices_equal():
    p = make_params(4, tau=1.0)
    P = inner_price_fixed_point(p, np.full(4, 0.25), np.full(4, 0.25), np.ones(4))
    assert_allclose(P, np.full(4, P[0]), rtol=1e-13)


def test_inner_fixed_point_residual():
    rng = np.random.default_rng(21)
    p = random_params(rng, 6)
    w, M = rng.uniform(0.5, 2, 6), rng.uniform(0.1, 1, 6)
    P = inner_price_fixed_point(p, w, M, np.ones(6))
    again = gravity.final_price_index(p, w, gravity.composite_intermediate_prices(p, M, P))
    assert np.max(np.abs(again / P - 1)) < 1e-10


def test_inner_iteration_cap():
    p = make_params(2)
    with pytest.raises(MaxIterExceeded) as err:
        inner_price_fixed_point(p, np.ones(2), np.ones(2), np.ones(2), SolverConfig(max_iter_inner=1))
    assert err.value.trace.converged["inner"] is False


# --- middle loop ---

def test_mid_symmetric_wages():
    p = make_params(3, tau=1.8, L=[2.0, 2.0, 2.0])
    w, P = mid_wage_fixed_point(p, np.full(3, 1 / 3))
    assert_allclose(w, np.full(3, 1 / 6), rtol=1e-10)
    assert np.sum(w * p.L) == pytest.approx(1.0, rel=1e-14)


def test_mid_larger_country_pays_lower_wage():
    p = make_params(2, tau=1.5, L=[1.0, 1.03])
    M = np.array([0.5, 0.5])
    w, _ = mid_wage_fixed_point(p, M)

    def excess(w0):
        wv = np.array([w0, (1.0 - w0 * p.L[0]) / p.L[1]])
        P = inner_price_fixed_point(p, wv, M, np.ones(2))
        sh = gravity.static_shares(p, wv, M, P)
        S, _ = gravity.circular_flow(p, sh)
        return np.log((1 - p.alpha) * S[0] / p.L[0]) - np.log(w0)

    grid = np.linspace(0.3, 0.7, 41)
    values = [excess(x) for x in grid]
    i = next(i for i in range(40) if np.sign(values[i]) != np.sign(values[i + 1]))
    w0 = brentq(excess, grid[i], grid[i + 1], xtol=1e-14)
    assert w[0] == pytest.approx(w0, rel=1e-9)
    assert w[1] <= w[0]


def test_mid_zero_gravity_clears_excess_demand():
    p = make_params(3, tau=1.0, T=[1.0, 1.6, 0.8], L=[1.0, 0.5, 1.5])
    w, _ = mid_wage_fixed_point(p, np.array([0.2, 0.3, 0.5]))
    assert np.max(np.abs(zero_gravity_excess_demand(p, w))) < 1e-8


def test_mid_output_seed_reaches_same_wages():
    p = make_params(3, tau=1.6, T=[1.0, 1.2, 0.9], L=[1.0, 0.7, 1.2])
    M = np.array([0.2, 0.5, 0.3])
    w_default, P_default = mid_wage_fixed_point(p, M)
    for R_guess in (1.0, np.array([0.8, 1.1, 1.3])):
        w, P = mid_wage_fixed_point(p, M, R_guess)
        assert_allclose(w, w_default, rtol=1e-9)
        assert_allclose(P, P_default, rtol=1e-9)


# --- outer loop ---

@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_symmetric_measures_from_random_guess(seed):
    p = make_params(4, tau=2.0)
    eq, trace = solve_bgp(p, SolverConfig(seed=seed))
    assert_allclose(eq.M, np.full(4, 0.25), atol=1e-8)
    assert len(trace.outer) < 500
    assert trace.wall_time < 5.0


def test_single_country():
    p = make_params(1)
    eq, trace = solve_bgp(p)
    assert_allclose(eq.M, [1.0])
    assert eq.mp_sum == pytest.approx(eq.P[0])
    assert eq.g == pytest.approx(symmetric_g_of_tau(p, 1.0), rel=1e-9)
    assert growth_rate(p, eq).euler_rate[0] == pytest.approx(autarky_growth_closed_form(p), rel=1e-9)
    assert trace.converged == {"outer": True, "inner": True, "mid": True}


def test_larger_country_has_more_varieties(two_country):
    _, eq, _ = two_country
    assert eq.M[1] > eq.M[0]


def test_near_autarky_shares_concentrate():
    p = make_params(2, tau=1e14)
    eq, _ = solve_bgp(p)
    assert np.all(np.diag(eq.shares.lambdaF) > 1 - 1e-6)
    assert np.all(np.diag(eq.shares.lambdaM) > 1 - 1e-6)


def test_zero_gravity_equalizes_prices():
    p = make_params(3, tau=1.0, T=[1.0, 1.4, 0.6], L=[1.0, 0.8, 1.3])
    eq, _ = solve_bgp(p)
    assert np.ptp(eq.P) < 1e-8 * eq.P.max()


def test_zero_gravity_measures_follow_labor_income():
    p = make_params(3, tau=1.0, T=[1.0, 1.4, 0.6], L=[1.0, 0.8, 1.3])
    eq, _ = solve_bgp(p)
    assert_allclose(eq.M, eq.w * p.L, rtol=1e-8)
    assert np.ptp(eq.g_s) < 1e-8


def test_normalizations(two_country):
    p, eq, _ = two_country
    assert np.sum(eq.w * p.L) == pytest.approx(1.0, rel=1e-13)
    assert eq.M.sum() == pytest.approx(1.0, rel=1e-13)


def test_growth_rates_equalize(two_country):
    _, eq, _ = two_country
    assert np.ptp(eq.g_s) < 1e-8


@pytest.mark.parametrize("seed", [None, 4])
def test_growth_equalizes_with_asymmetric_fundamentals(seed):
    p = make_params(3, tau=1.6, T=[1.0, 1.2, 0.9], L=[1.0, 0.7, 1.2])
    eq, trace = solve_bgp(p, SolverConfig(seed=seed))
    assert np.ptp(eq.g_s) < 1e-8
    assert_allclose(eq.R_s, eq.R, rtol=1e-9)
    assert eq.g == pytest.approx(p.psi * p.rho * eq.R, rel=1e-9)
    assert trace.outer_R[-1] == pytest.approx(eq.R, rel=1e-12)


def test_tatonnement_reaches_newton_solution(two_country):
    p, eq, _ = two_country
    slow, trace = solve_bgp(p, SolverConfig(outer_method="tatonnement"))
    assert trace.converged["outer"] is True
    assert_allclose(slow.M, eq.M, rtol=1e-7)
    assert slow.g == pytest.approx(eq.g, rel=1e-7)


def test_market_clearing_and_trade_balance(symmetric4, two_country):
    for p, eq, _ in (symmetric4, two_country):
        assert np.max(np.abs(gravity.goods_market_residual(p, eq))) < 1e-8
        assert np.max(np.abs(gravity.trade_balance_residual(p, eq))) < 1e-8
        assert eq.residuals["goods_market"] < 1e-8


def test_seed_independence():
    rng = np.random.default_rng(31)
    p = random_params(rng, 3)
    a, _ = solve_bgp(p, SolverConfig(seed=10))
    b, _ = solve_bgp(p, SolverConfig(seed=99))
    assert_allclose(a.M, b.M, atol=1e-6)
    assert_allclose(a.w, b.w, atol=1e-6)
    assert_allclose(a.shares.lambdaF, b.shares.lambdaF, atol=1e-6)
    assert_allclose(a.shares.lambdaM, b.shares.lambdaM, atol=1e-6)


def test_deterministic_given_seed():
    p = make_params(3, tau=1.6, T=[1.0, 1.2, 0.9], L=[1.0, 0.7, 1.2])
    a, _ = solve_bgp(p, SolverConfig(seed=4))
    b, _ = solve_bgp(p, SolverConfig(seed=4))
    assert np.array_equal(a.M, b.M) and np.array_equal(a.w, b.w)


def test_outer_iteration_cap_carries_trace():
    p = make_params(3, tau=1.6, T=[1.0, 1.2, 0.9], L=[1.0, 0.7, 1.2])
    with pytest.raises(MaxIterExceeded) as err:
        solve_bgp(p, SolverConfig(max_iter_outer=1))
    trace = err.value.trace
    assert len(trace.outer) == 1
    assert trace.converged["outer"] is False
    assert err.value.exit_code == 3


def test_tatonnement_keeps_damping_fixed():
    p = make_params(2, tau=1.5, L=[1.0, 1.5])
    cfg = SolverConfig(outer_method="tatonnement", max_iter_outer=5)
    with pytest.raises(MaxIterExceeded) as err:
        solve_bgp(p, cfg)
    trace = err.value.trace
    assert len(trace.outer) == 5
    assert all(d <= 0.5 for d in trace.outer_damping)


def test_outer_measure_fixed_point_matches_solve(two_country):
    p, eq, _ = two_country
    again = outer_measure_fixed_point(p)
    assert_allclose(again.M, eq.M, rtol=1e-12)
    assert again.g == pytest.approx(eq.g, rel=1e-12)


@pytest.mark.parametrize("c", [0.1, 10.0])
def test_scaling_measures_leaves_static_equilibrium_unchanged(c):
    p = make_params(3, tau=1.6, T=[1.0, 1.2, 0.9], L=[1.0, 0.7, 1.2])
    M = np.array([0.2, 0.5, 0.3])
    base = static_equilibrium(p, M)
    scaled = static_equilibrium(p, c * M)
    assert_allclose(scaled.w, base.w, rtol=1e-8)
    assert_allclose(scaled.shares.lambdaF, base.shares.lambdaF, atol=1e-8)
    assert_allclose(scaled.shares.lambdaM, base.shares.lambdaM, atol=1e-8)
    assert_allclose(scaled.P * c, base.P, rtol=1e-8)
    assert_allclose(scaled.R_s, base.R_s, rtol=1e-8)


@pytest.mark.slow
def test_growth_equalizes_on_random_instances():
    rng = np.random.default_rng(77)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        p = random_params(rng, n)
        eq, _ = solve_bgp(p)
        assert np.ptp(eq.g_s) < 1e-8
        assert eq.residuals["goods_market"] < 1e-6
        assert eq.residuals["trade_balance"] < 1e-6
