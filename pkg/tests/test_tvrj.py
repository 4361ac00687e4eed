import numpy as np
import pytest
from hypothesis import given, strategies as st

from gammadiff import ConvergenceError, InvalidInputError, TimeSeries, finite_difference
from gammadiff.methods import Tvrj, tvrj_diff
from gammadiff.methods.tvrj import (
    collapse_threshold,
    cubic_fit,
    d4,
    d4t,
    gamma_lower_bound,
    identity_threshold,
    jerk_penalty,
    objective,
    penalty_weight,
    solve_window,
    window_starts,
)


def _noisy_sine(m, dt=0.01, sigma=0.05, seed=0):
    t = np.arange(m) * dt
    return np.sin(2 * np.pi * t) + sigma * np.random.default_rng(seed).standard_normal(m)


def test_d4_adjoint(rng):
    x = rng.standard_normal(30)
    z = rng.standard_normal(26)
    assert np.dot(d4(x), z) == pytest.approx(np.dot(x, d4t(z)), rel=1e-12)
    np.testing.assert_allclose(d4(np.arange(30.0) ** 3), 0.0, atol=1e-9)


def test_gamma_zero_is_finite_difference():
    y = _noisy_sine(300)
    est = tvrj_diff(TimeSeries(y, 0.01), Tvrj(0.0))
    np.testing.assert_allclose(est.dxdt_hat, finite_difference(y, 0.01), rtol=0, atol=1e-8)
    np.testing.assert_array_equal(est.x_hat, y)


def test_gamma_zero_windowed_is_finite_difference():
    y = _noisy_sine(2600, dt=0.001)
    est = tvrj_diff(TimeSeries(y, 0.001), Tvrj(0.0))
    np.testing.assert_allclose(est.dxdt_hat, finite_difference(y, 0.001), rtol=0, atol=1e-8)


def test_noiseless_cubic():
    dt = 0.001
    t = 1.0 + np.arange(1000) * dt
    est = tvrj_diff(TimeSeries(t**3, dt), Tvrj(1e-3))
    inner = slice(100, 900)
    truth = 3 * t[inner] ** 2
    rel = np.sqrt(np.mean((est.dxdt_hat[inner] - truth) ** 2)) / np.sqrt(np.mean(truth**2))
    assert rel <= 0.01


def test_huge_gamma_collapses_to_quadratic_derivative():
    y = _noisy_sine(500, sigma=0.2)
    est = tvrj_diff(TimeSeries(y, 0.01), Tvrj(1e6))
    d = est.dxdt_hat[:-1]
    assert np.sum(np.abs(np.diff(np.diff(d, 3)))) / d.size <= 1e-6
    np.testing.assert_allclose(est.x_hat, cubic_fit(y), atol=1e-10)


def test_objective_monotone_each_iteration():
    for seed in range(5):
        y = _noisy_sine(400, seed=seed)
        for g in (1e-4, 1e-3, 1e-2):
            sol = solve_window(y, 0.01, g)
            hist = np.array(sol.objective)
            assert sol.converged
            assert np.all(np.diff(hist) <= 0.0), (seed, g)


def test_solution_optimality_against_perturbations(rng):
    y = _noisy_sine(200)
    dt, g = 0.01, 1e-3
    sol = solve_window(y, dt, g)
    lam = penalty_weight(g, y.size, dt)
    f = objective(y, sol.x, lam)
    for _ in range(50):
        step = 1e-4 * rng.standard_normal(y.size)
        assert objective(y, sol.x + step, lam) >= f - 1e-9


def test_thresholds_bracket_nontrivial_range():
    y = _noisy_sine(300)
    lo, hi = identity_threshold(y, 0.01), collapse_threshold(y, 0.01)
    assert 0 < lo < hi
    x_lo = solve_window(y, 0.01, lo).x
    np.testing.assert_array_equal(x_lo, y)
    x_hi = solve_window(y, 0.01, hi).x
    np.testing.assert_allclose(x_hi, cubic_fit(y), atol=1e-12)
    mid = solve_window(y, 0.01, np.sqrt(lo * hi)).x
    assert not np.allclose(mid, y) and not np.allclose(mid, cubic_fit(y))


def test_thresholds_degenerate():
    t = np.arange(20.0)
    assert identity_threshold(t**3, 1.0) == np.inf
    assert collapse_threshold(2 * t**3 - t, 1.0) == 0.0


def test_windows_cover_series():
    assert window_starts(800) == [0]
    starts = window_starts(2600)
    assert starts[0] == 0 and starts[-1] == 1600
    assert all(b - a <= 500 for a, b in zip(starts, starts[1:]))


def test_lower_bound_matches_windows():
    y = _noisy_sine(2600, dt=0.001)
    s = TimeSeries(y, 0.001)
    g = gamma_lower_bound(s)
    np.testing.assert_allclose(tvrj_diff(s, Tvrj(g)).dxdt_hat, finite_difference(y, 0.001), atol=1e-8)


def test_convergence_error_carries_iterate():
    y = _noisy_sine(300)
    with pytest.raises(ConvergenceError) as info:
        tvrj_diff(TimeSeries(y, 0.01), Tvrj(1e-3), max_iter=2)
    assert info.value.last_iterate is not None
    assert len(info.value.last_iterate) == 300
    assert info.value.residual > 0


def test_too_short():
    with pytest.raises(InvalidInputError):
        tvrj_diff(TimeSeries(np.arange(7.0), 1.0), Tvrj(1.0))


def test_jerk_penalty_zero_for_quadratic_derivative():
    t = np.arange(50) * 0.1
    d = finite_difference(t**3, 0.1)
    assert jerk_penalty(d, 0.1) == pytest.approx(0.0, abs=1e-8)


@given(st.integers(0, 2**32 - 1))
def test_regularization_path_monotone(seed):
    y = _noisy_sine(120, seed=seed)
    values = []
    for g in np.geomspace(1e-6, 1e0, 7):
        d = tvrj_diff(TimeSeries(y, 0.01), Tvrj(g)).dxdt_hat
        values.append(np.sum(np.abs(np.diff(d[:-1], 3))))
    slack = 1e-10 + 1e-6 * values[0]
    assert all(b <= a + slack for a, b in zip(values, values[1:])), values


@given(st.floats(-1e4, 1e4), st.floats(-8, 2))
def test_constant_input_zero_derivative(c, log_g):
    d = tvrj_diff(TimeSeries(np.full(40, c), 0.05), Tvrj(10**log_g)).dxdt_hat
    assert np.max(np.abs(d)) <= 1e-6 * abs(c) + 1e-12


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.floats(-6, -1))
def test_scale_equivariance(seed, c, log_g):
    # the fidelity norm is not squared, so both terms scale with c and the
    # same weight reproduces the scaled solution
    y = _noisy_sine(100, seed=seed)
    g = 10**log_g
    base = tvrj_diff(TimeSeries(y, 0.01), Tvrj(g)).dxdt_hat
    scaled = tvrj_diff(TimeSeries(c * y, 0.01), Tvrj(g)).dxdt_hat
    np.testing.assert_allclose(scaled / c, base, rtol=0, atol=1e-4 * np.max(np.abs(base)))


@given(st.integers(0, 2**32 - 1), st.integers(1, 30))
def test_shift_equivariance_interior(seed, shift):
    dt, n = 0.01, 400
    z = _noisy_sine(n + shift, seed=seed)
    p = Tvrj(1e-3)
    a = tvrj_diff(TimeSeries(z[:n], dt), p).dxdt_hat
    b = tvrj_diff(TimeSeries(z[shift:], dt), p).dxdt_hat
    # the finite record's ends perturb the L1 solution everywhere, decaying
    # with distance (about 1e-3 relative at 120 samples from an end)
    inner = slice(150, 250)
    np.testing.assert_allclose(b[inner], a[150 + shift:250 + shift], rtol=0,
                               atol=5e-3 * np.max(np.abs(a)))
