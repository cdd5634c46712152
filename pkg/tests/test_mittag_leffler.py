import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfcx

from fracparabolic.errors import ConvergenceError
from fracparabolic.special import TAU_SWITCH, mittag_leffler, mittag_leffler_deriv


def ml_reference(alpha, t, deriv=False):
    """High-precision power series; the working precision covers the cancellation."""
    alpha = mp.mpf(alpha)
    t = mp.mpf(t)
    big = float(abs(t)) ** (1.0 / float(alpha)) if t != 0 else 0.0
    with mp.workdps(40 + int(big / 2.0)):
        total = mp.mpf(0)
        j = 1 if deriv else 0
        while True:
            if deriv:
                term = j * t ** (j - 1) / mp.gamma(j * alpha + 1)
            else:
                term = t**j / mp.gamma(j * alpha + 1)
            total += term
            if j > 5 and abs(term) < mp.mpf(10) ** (-30) * max(abs(total), mp.mpf(10) ** -30):
                if j * float(alpha) > big + 10:
                    break
            j += 1
        return float(total)


ALPHAS = [0.3, 0.5, 0.7, 0.9]


def _grid(alpha):
    # arguments on both sides of the series/integral switch, X = |t|^(1/alpha) <= 40
    lim = 40.0**alpha
    return np.concatenate([np.linspace(-lim, -0.01, 9), [0.0], np.linspace(0.01, min(lim, 8.0), 5)])


@pytest.mark.parametrize("alpha", ALPHAS)
def test_value_matches_high_precision_series(alpha):
    for t in _grid(alpha):
        ref = ml_reference(alpha, t)
        assert mittag_leffler(alpha, t) == pytest.approx(ref, rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_derivative_matches_high_precision_series(alpha):
    for t in _grid(alpha):
        ref = ml_reference(alpha, t, deriv=True)
        assert mittag_leffler_deriv(alpha, t) == pytest.approx(ref, rel=1e-9, abs=1e-300)


def test_half_order_closed_form():
    # E_{1/2}(-x) = exp(x^2) erfc(x)
    xs = np.linspace(0.0, 12.0, 61)
    got = mittag_leffler(0.5, -xs)
    assert np.allclose(got, erfcx(xs), rtol=1e-11, atol=0.0)
    assert mittag_leffler(0.5, -1.0) == pytest.approx(0.42758357615580700, rel=1e-14)


def test_half_order_positive_axis():
    xs = np.linspace(0.1, 6.0, 12)
    expected = np.exp(xs**2) * (2.0 - np.exp(-(xs**2)) * erfcx(xs))
    assert np.allclose(mittag_leffler(0.5, xs), expected, rtol=1e-11)


def test_order_one_is_exponential():
    t = np.linspace(-5.0, 5.0, 50)
    assert np.allclose(mittag_leffler(1.0, t), np.exp(t), rtol=4e-16, atol=0.0)
    assert np.allclose(mittag_leffler_deriv(1.0, t), np.exp(t), rtol=4e-16, atol=0.0)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_zero_argument_exact(alpha):
    assert mittag_leffler(alpha, 0.0) == 1.0
    assert mittag_leffler_deriv(alpha, 0.0) == 1.0 / math.gamma(alpha + 1.0)


def test_both_branches_accurate_at_switch():
    for alpha in ALPHAS:
        edge = TAU_SWITCH**alpha
        for t in (-edge * (1 - 1e-9), -edge * (1 + 1e-9), edge * (1 - 1e-9), edge * (1 + 1e-9)):
            assert mittag_leffler(alpha, t) == pytest.approx(ml_reference(alpha, t), rel=1e-13)


def test_shape_is_preserved():
    t = np.linspace(-1, 1, 6).reshape(2, 3)
    assert mittag_leffler(0.4, t).shape == (2, 3)
    assert mittag_leffler_deriv(0.4, t).shape == (2, 3)


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.2, float("nan")])
def test_rejects_bad_order(alpha):
    with pytest.raises(ValueError):
        mittag_leffler(alpha, 0.5)


def test_rejects_non_finite_argument():
    with pytest.raises(ValueError):
        mittag_leffler(0.5, float("inf"))


def test_overflow_is_reported():
    with pytest.raises(OverflowError):
        mittag_leffler(0.5, 40.0)


def test_series_cap(monkeypatch):
    import fracparabolic.special as mlmod

    monkeypatch.setattr(mlmod, "SERIES_CAP", 3)
    with pytest.raises(ConvergenceError):
        mlmod.mittag_leffler(0.5, 1.5)


@settings(max_examples=60, deadline=None)
@given(
    alpha=st.floats(0.2, 0.99),
    x=st.floats(0.0, 30.0),
    dx=st.floats(1e-3, 5.0),
)
def test_negative_axis_is_positive_and_decreasing(alpha, x, dx):
    a, b = mittag_leffler(alpha, -x), mittag_leffler(alpha, -(x + dx))
    assert a > 0.0 and b > 0.0
    assert b < a * (1.0 + 1e-12)
    assert mittag_leffler_deriv(alpha, -x) > 0.0


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7, 0.9, 0.99])
def test_positive_on_unit_window(alpha):
    t = np.linspace(-2.0, 2.0, 401)
    assert np.all(mittag_leffler(alpha, t) > 0.0)
    assert np.all(mittag_leffler_deriv(alpha, t) > 0.0)
