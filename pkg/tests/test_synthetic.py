import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from gammadiff import InvalidInputError
from gammadiff.core import EvalMetrics, finite_difference
from gammadiff.methods import Butterworth, Kalman, SavGol, Tvrj, differentiate
from gammadiff.methods.tvrj import gamma_lower_bound
from gammadiff.optimize import optimize_params
from gammadiff.synthetic import (
    KINDS,
    LORENZ_X0,
    ProblemConfig,
    SweepRecord,
    TrainingConfig,
    brute_force_grid,
    default_savgol_grid,
    elbow_gamma,
    elbow_index,
    evaluate,
    gamma_sweep,
    generate,
    heuristic_training_sweep,
    lorenz_rhs,
    is_near_front,
    lower_envelope,
    near_front_fraction,
    pareto_front,
    training_cases,
)


@pytest.mark.parametrize("kind", KINDS)
def test_generate_deterministic(kind):
    cfg = ProblemConfig(noise_sigma=0.1, seed=3)
    a, b = generate(kind, cfg), generate(kind, cfg)
    np.testing.assert_array_equal(a.noisy.values, b.noisy.values)
    np.testing.assert_array_equal(a.truth_dxdt, b.truth_dxdt)
    assert len(a.noisy) == 400
    other = generate(kind, ProblemConfig(noise_sigma=0.1, seed=4))
    assert not np.array_equal(a.noisy.values, other.noisy.values)


@pytest.mark.parametrize("kind", KINDS)
def test_noiseless_problem_and_self_evaluation(kind):
    p = generate(kind, ProblemConfig(noise_sigma=0.0))
    np.testing.assert_array_equal(p.noisy.values, p.truth_x)
    m = evaluate(p.truth_dxdt, p)
    assert m.rmse == 0.0
    assert m.degenerate


@pytest.mark.parametrize("kind", KINDS)
def test_truth_derivative_consistent(kind):
    # central differences of x match dx/dt to second order
    p = generate(kind, ProblemConfig(dt=0.001, duration=3.0))
    cd = (p.truth_x[2:] - p.truth_x[:-2]) / (2 * 0.001)
    scale = np.max(np.abs(p.truth_dxdt))
    err = np.abs(cd - p.truth_dxdt[1:-1])
    if kind == "triangle":
        # corners spoil the two samples around each kink
        err = np.sort(err)[:-40]
    assert err.max() <= 1e-3 * scale


def test_noise_fraction_sets_sigma():
    p = generate("sine", ProblemConfig(noise_fraction=0.05, duration=10.0))
    assert p.noise_sigma == pytest.approx(0.05, rel=1e-3)
    resid = p.noisy.values - p.truth_x
    assert np.std(resid) == pytest.approx(0.05, rel=0.1)


def test_lorenz_matches_independent_integration():
    p = generate("lorenz", ProblemConfig(dt=0.01, duration=2.0))
    sol = solve_ivp(lorenz_rhs, (0, p.t[-1]), LORENZ_X0, method="DOP853",
                    t_eval=p.t, rtol=1e-12, atol=1e-12)
    scale = np.max(np.abs(sol.y[0]))
    np.testing.assert_allclose(p.truth_x, sol.y[0], atol=1e-6 * scale)
    resid = p.truth_dxdt - 10.0 * (sol.y[1] - sol.y[0])
    assert np.max(np.abs(resid)) <= 1e-6 * np.max(np.abs(p.truth_dxdt))


def test_generate_errors():
    with pytest.raises(InvalidInputError):
        generate("square")
    with pytest.raises(InvalidInputError):
        generate("sine", ProblemConfig(dt=0.0))
    with pytest.raises(InvalidInputError):
        generate("sine", ProblemConfig(noise_sigma=-1.0))
    with pytest.raises(InvalidInputError):
        generate("sine", ProblemConfig(shape={"bogus": 1}))
    p = generate("sine")
    with pytest.raises(InvalidInputError):
        evaluate(np.zeros(3), p)


LIGHTEST = {
    "savgol": SavGol(3, 2, 1),
    "kalman": Kalman(1e8, 1e-8),
}


@pytest.mark.parametrize("kind", ["sine", "logistic", "lorenz"])
@pytest.mark.parametrize("method", ["butterworth", "savgol", "kalman", "tvrj"])
def test_noiseless_lightest_smoothing(kind, method):
    dt = 0.01
    p = generate(kind, ProblemConfig(dt=dt, duration=4.0))
    if method == "butterworth":
        params = Butterworth(1, 0.9 * p.noisy.nyquist)
    elif method == "tvrj":
        params = Tvrj(gamma_lower_bound(p.noisy))
    else:
        params = LIGHTEST[method]
    est = differentiate(p.noisy, params)
    # forward-difference discretization bound dt/2 * max|x''|
    second = finite_difference(p.truth_dxdt, dt)
    bound = 0.5 * dt * np.max(np.abs(second))
    assert evaluate(est, p).rmse <= 10 * bound


def _noisy_sine(m=400, seed=1):
    return generate("sine", ProblemConfig(duration=m * 0.01, noise_sigma=0.05, seed=seed))


def test_single_point_sweep_matches_direct_call():
    p = _noisy_sine(200)
    (rec,) = gamma_sweep("savgol", p, [0.5])
    res = optimize_params("savgol", p.noisy, 0.5)
    assert rec.params == res.best_params
    assert rec.loss == res.best_loss
    assert rec.metrics == evaluate(res.estimate, p)
    assert rec.gamma == 0.5
    with pytest.raises(InvalidInputError):
        gamma_sweep("savgol", p, [])


@pytest.fixture(scope="module")
def sine_sweep():
    p = _noisy_sine()
    return p, gamma_sweep("savgol", p, np.geomspace(1e-4, 1e4, 9))


def test_sweep_smoothness_decreases(sine_sweep):
    _, recs = sine_sweep
    tv = [r.loss.smoothness for r in recs]
    pairs = list(zip(tv, tv[1:]))
    ok = sum(b <= a * (1 + 1e-9) for a, b in pairs)
    assert ok >= 0.9 * len(pairs)
    assert tv[-1] < tv[0]


def test_sweep_reaches_brute_force_front(sine_sweep):
    p, recs = sine_sweep
    front = pareto_front(brute_force_grid("savgol", p, default_savgol_grid(len(p.noisy))))
    assert near_front_fraction(recs, front) > 0


def test_default_savgol_grid_size():
    assert len(default_savgol_grid(1000)) == 5017
    grid = default_savgol_grid(400)
    assert all(g.polyorder < g.window <= 400 and g.smooth_window <= 400 for g in grid)
    assert len(set(grid)) == len(grid)


def test_brute_force_small_grid_recovers_quadratic():
    dt = 0.01
    t = np.arange(200) * dt
    p = generate("sine", ProblemConfig(dt=dt, duration=2.0))
    p = type(p)(type(p.noisy)(3 * t**2 - t, dt), 3 * t**2 - t, 6 * t - 1, 0.0, 0)
    grid = [SavGol(w, o, 1) for w in (5, 9) for o in (1, 2)]
    grid += [SavGol(9, 2, 3), SavGol(5, 1, 3)]
    recs = brute_force_grid("savgol", p, grid)
    assert len(recs) == 6
    assert min(r.metrics.rmse for r in recs) <= 1e-9
    with pytest.raises(InvalidInputError):
        brute_force_grid("savgol", p, [Butterworth(2, 0.5)])
    # settings invalid for the series are skipped
    assert brute_force_grid("savgol", p, [SavGol(401, 2, 1)]) == []


def _record(corr, err, gamma=1.0, params=None):
    return SweepRecord(params, EvalMetrics(err, corr, False), None, gamma)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(1e-6, 1e3)), min_size=1, max_size=40))
def test_pareto_front_is_nondominated_and_complete(points):
    recs = [_record(c, e) for c, e in points]
    front = pareto_front(recs)
    for f in front:
        assert not any(r.metrics.error_correlation <= f.metrics.error_correlation
                       and r.metrics.rmse < f.metrics.rmse for r in recs)
    for r in recs:
        if r not in front:
            assert any(f.metrics.error_correlation <= r.metrics.error_correlation
                       and f.metrics.rmse <= r.metrics.rmse for f in front)
    corrs = [f.metrics.error_correlation for f in front]
    assert corrs == sorted(corrs)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(1e-6, 1e3)), min_size=1, max_size=40))
def test_lower_envelope_contains_front_and_bounds_cloud(points):
    recs = [_record(c, e) for c, e in points]
    env = lower_envelope(recs)
    assert all(any(f is e for e in env) for f in pareto_front(recs))
    best = min(recs, key=lambda r: r.metrics.rmse)
    assert best.metrics.rmse == min(e.metrics.rmse for e in env)
    # nothing beats an envelope member in RMSE on both sides of it
    for e in env:
        c = e.metrics.error_correlation
        assert not (any(r.metrics.error_correlation <= c and r.metrics.rmse < e.metrics.rmse for r in recs)
                    and any(r.metrics.error_correlation >= c and r.metrics.rmse < e.metrics.rmse
                            for r in recs))


def test_front_members_are_near_front():
    recs = [_record(0.0, 90.0), _record(0.001, 20.0), _record(0.1, 5.0), _record(0.9, 40.0)]
    front = pareto_front(recs)
    assert [r.metrics.rmse for r in front] == [90.0, 20.0, 5.0]
    assert near_front_fraction(front, front) == 1.0
    assert not is_near_front(_record(0.9, 40.0), front)
    assert is_near_front(_record(0.9, 40.0), lower_envelope(recs))
    assert not is_near_front(_record(0.05, 40.0), front, rmse_factor=1.5, window=0.01)
    with pytest.raises(InvalidInputError):
        near_front_fraction([], front)


def test_elbow_on_l_shaped_curve():
    # falls steeply in RMSE, then moves right along the floor
    pts = [(0.0, 10.0), (0.01, 3.0), (0.02, 1.0), (0.05, 0.3), (0.3, 0.25), (0.6, 0.22), (0.9, 0.2)]
    recs = [_record(c, e, g) for (c, e), g in zip(pts, np.geomspace(1e-3, 1e3, 7))]
    assert elbow_index(recs) == 3
    assert elbow_gamma(recs) == pytest.approx(recs[3].gamma)


def test_elbow_gamma_uses_midpoint_of_equal_params():
    pts = [(0.0, 10.0), (0.01, 1.0), (0.05, 0.3), (0.05, 0.3), (0.05, 0.3), (0.6, 0.25), (0.9, 0.2)]
    params = ["a", "b", "c", "c", "c", "d", "e"]
    gammas = np.geomspace(1e-3, 1e3, 7)
    recs = [_record(c, e, g, q) for (c, e), g, q in zip(pts, gammas, params)]
    assert elbow_index(recs) == 2
    assert elbow_gamma(recs) == pytest.approx(gammas[3])


def test_elbow_degenerate_inputs():
    recs = [_record(0.1, 2.0), _record(0.2, 1.0)]
    assert elbow_index(recs) == 1
    flat = [_record(0.1, 1.0, g) for g in (1, 2, 3, 4)]
    assert elbow_index(flat) == 0


def test_training_cases_filter():
    cfg = TrainingConfig()
    cases = training_cases(cfg)
    assert all(f < 0.25 / dt and 1 / f < dur for f, dt, _, dur in cases)
    assert len(cases) == 44


def test_training_sweep_single_case():
    grid = tuple(np.geomspace(1e-4, 1e3, 8))
    cfg = TrainingConfig(freqs=(1.0,), dts=(0.01,), noise_fractions=(0.05,), durations=(4.0,),
                         gamma_grid=grid)
    (obs,) = heuristic_training_sweep(cfg)
    assert grid[0] <= obs.gamma <= grid[-1]
    assert len(obs.sweep) == 8
    assert obs.as_triple() == (1.0, 0.01, obs.gamma)
    with pytest.raises(InvalidInputError):
        heuristic_training_sweep(TrainingConfig(freqs=()))


def test_training_sweep_stable_across_durations():
    grid = tuple(np.geomspace(1e-4, 1e3, 15))
    cfg = TrainingConfig(freqs=(1.0,), dts=(0.01,), noise_fractions=(0.05,),
                         durations=(4.0, 8.0), gamma_grid=grid)
    a, b = heuristic_training_sweep(cfg)
    step = math.log(grid[1] / grid[0])
    assert abs(math.log(a.gamma / b.gamma)) <= step + 1e-12
