import numpy as np
import pytest
from hypothesis import given, strategies as st

from gammadiff import InvalidInputError, TimeSeries, finite_difference, power_spectrum
from gammadiff.methods import Butterworth, butterworth_diff
from gammadiff.methods.butterworth import pad_length


def _sine(freq, dt, m, amp=1.0):
    t = np.arange(m) * dt
    return t, amp * np.sin(2 * np.pi * freq * t)


def test_constant_series_passes_unchanged():
    s = TimeSeries(np.full(50, 3.25), 0.01)
    est = butterworth_diff(s, Butterworth(3, 5.0))
    np.testing.assert_allclose(est.x_hat, 3.25, rtol=0, atol=1e-13)
    np.testing.assert_allclose(est.dxdt_hat, 0.0, atol=1e-10)


def test_sine_derivative_interior():
    dt, m = 0.001, 3000
    t, y = _sine(1.0, dt, m)
    est = butterworth_diff(TimeSeries(y, dt), Butterworth(2, 10.0))
    inner = slice(m // 10, m - m // 10)
    truth = 2 * np.pi * np.cos(2 * np.pi * t)
    err = np.sqrt(np.mean((est.dxdt_hat[inner] - truth[inner]) ** 2))
    assert err <= 0.02 * np.sqrt(np.mean(truth[inner] ** 2))


def test_high_frequency_attenuation():
    dt, m = 0.001, 4000
    t, low = _sine(1.0, dt, m)
    _, high = _sine(40.0, dt, m, 0.1)
    y = low + high
    est = butterworth_diff(TimeSeries(y, dt), Butterworth(2, 5.0))
    spec_in = power_spectrum(TimeSeries(y, dt))
    spec_out = power_spectrum(TimeSeries(est.x_hat, dt))
    k = int(np.argmin(np.abs(spec_in.frequencies - 40.0)))
    amplitude_ratio = np.sqrt(spec_out.power[k] / spec_in.power[k])
    assert amplitude_ratio <= 0.01


def test_derivative_is_finite_difference_of_x_hat():
    t, y = _sine(2.0, 0.01, 200)
    est = butterworth_diff(TimeSeries(y, 0.01), Butterworth(4, 8.0))
    np.testing.assert_array_equal(est.dxdt_hat, finite_difference(est.x_hat, 0.01))


def test_zero_phase():
    dt, m = 0.01, 1000
    _, y = _sine(1.0, dt, m)
    est = butterworth_diff(TimeSeries(y, dt), Butterworth(3, 5.0))
    inner = slice(200, 800)
    a, b = y[inner], est.x_hat[inner]
    lags = range(-10, 11)
    xc = [np.dot(np.roll(a, lag), b) for lag in lags]
    assert list(lags)[int(np.argmax(xc))] == 0


def test_errors():
    y = np.sin(np.arange(100) * 0.1)
    with pytest.raises(InvalidInputError):
        butterworth_diff(TimeSeries(y, 0.01), Butterworth(2, 50.0))
    with pytest.raises(InvalidInputError):
        butterworth_diff(TimeSeries(y[:pad_length(4)], 0.01), Butterworth(4, 5.0))
    assert pad_length(2) == 9


@given(st.integers(0, 2**32 - 1), st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3),
       st.integers(1, 6), st.floats(0.05, 0.9))
def test_linear_in_scale(seed, c, order, frac):
    y = np.random.default_rng(seed).standard_normal(80).cumsum()
    s = TimeSeries(y, 0.1)
    p = Butterworth(order, frac * s.nyquist)
    base = butterworth_diff(s, p).dxdt_hat
    scaled = butterworth_diff(TimeSeries(c * y, 0.1), p).dxdt_hat
    np.testing.assert_allclose(scaled, c * base, rtol=1e-9, atol=1e-9 * abs(c) * np.max(np.abs(base)))


@given(st.floats(-1e4, 1e4), st.integers(1, 8), st.floats(0.01, 0.95))
def test_constant_input_zero_derivative(c, order, frac):
    s = TimeSeries(np.full(60, c), 0.05)
    d = butterworth_diff(s, Butterworth(order, frac * s.nyquist)).dxdt_hat
    assert np.max(np.abs(d)) <= 1e-6 * max(abs(c), 1e-300) + 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_shift_equivariance_interior(seed, shift):
    dt, n = 0.01, 400
    z = np.sin(2 * np.pi * np.arange(n + shift) * dt)
    z += 0.05 * np.random.default_rng(seed).standard_normal(z.size)
    p = Butterworth(2, 3.0)
    a = butterworth_diff(TimeSeries(z[:n], dt), p).dxdt_hat
    b = butterworth_diff(TimeSeries(z[shift:], dt), p).dxdt_hat
    # IIR edge transients decay geometrically; far from both ends they are at rounding level
    inner = slice(150, 250)
    np.testing.assert_allclose(b[inner], a[150 + shift:250 + shift], rtol=0,
                               atol=1e-5 * np.max(np.abs(a)))
