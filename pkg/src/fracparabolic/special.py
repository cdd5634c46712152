r"""One-parameter Mittag-Leffler function and its derivative on the real axis.

.. math::

    E_\alpha(t) = \sum_{j \ge 0} \frac{t^j}{\Gamma(j\alpha + 1)}, \qquad 0 < \alpha \le 1.

Small arguments use the power series with a term-ratio stopping rule. Once
:math:`X = |t|^{1/\alpha}` exceeds ``TAU_SWITCH`` the series either cancels
catastrophically (negative axis) or needs far too many terms (positive axis),
so the real-axis integral representations are used instead. With
:math:`c = \cos\alpha\pi`, :math:`s = \sin\alpha\pi` and :math:`p = 1/\alpha`:

.. math::

    E_\alpha(-x) = \frac{s}{\pi\alpha} \int_0^\infty
        \frac{e^{-X v^p}}{v^2 + 2cv + 1}\,dv, \qquad
    E_\alpha(x) = \frac{e^X}{\alpha} - \frac{s}{\pi\alpha} \int_0^\infty
        \frac{e^{-X v^p}}{v^2 - 2cv + 1}\,dv .

The negative-axis branch is the completely monotone one; its integrand peaks
sharply near :math:`v = -c` when :math:`\alpha \to 1`, so the quadrature is
split there.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import ConvergenceError

TAU_SWITCH = 5.0
SERIES_CAP = 400
_QUAD_RTOL = 1e-13


def _check(alpha, t):
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if not math.isfinite(t):
        raise ValueError(f"argument must be finite, got {t!r}")


def _series(alpha, t, deriv):
    # terms t^j / Gamma(j alpha + 1), or j t^(j-1) / Gamma(j alpha + 1)
    if t == 0.0:
        return 1.0 / math.gamma(alpha + 1.0) if deriv else 1.0
    log_t = math.log(abs(t))
    neg = t < 0.0
    terms = []
    running = 0.0
    prev = math.inf
    start = 1 if deriv else 0
    for j in range(start, start + SERIES_CAP):
        power = j - 1 if deriv else j
        mag = power * log_t - math.lgamma(j * alpha + 1.0)
        if deriv:
            mag += math.log(j)
        term = math.exp(mag)
        if neg and power % 2 == 1:
            term = -term
        terms.append(term)
        running += term
        # past the peak and below one ulp of the partial sum
        if abs(term) < prev and abs(term) <= 1e-17 * abs(running):
            return math.fsum(terms)
        prev = abs(term)
    raise ConvergenceError(
        f"Mittag-Leffler series for alpha={alpha}, t={t} did not converge "
        f"within {SERIES_CAP} terms"
    )


def _split_quad(func, breaks):
    total = 0.0
    lo = 0.0
    for hi in sorted(set(b for b in breaks if b > 0.0)) + [math.inf]:
        if hi <= lo:
            continue
        with warnings.catch_warnings():
            # the requested tolerance sits at the roundoff floor
            warnings.simplefilter("ignore", IntegrationWarning)
            val, _ = quad(func, lo, hi, epsabs=0.0, epsrel=_QUAD_RTOL, limit=200)
        total += val
        lo = hi
    return total


def _negative_axis(alpha, x, deriv):
    big_x = x ** (1.0 / alpha)
    c = math.cos(alpha * math.pi)
    s = math.sin(alpha * math.pi)
    p = 1.0 / alpha
    breaks = [min(abs(c), 1.0), big_x ** (-alpha), 1.0]
    if deriv:
        integral = _split_quad(
            lambda v: v**p * math.exp(-big_x * v**p) / (v * v + 2.0 * v * c + 1.0), breaks
        )
        return big_x ** (1.0 - alpha) * s * integral / (math.pi * alpha * alpha)
    integral = _split_quad(
        lambda v: math.exp(-big_x * v**p) / (v * v + 2.0 * v * c + 1.0), breaks
    )
    return s * integral / (math.pi * alpha)


def _positive_axis(alpha, x, deriv):
    big_x = x ** (1.0 / alpha)
    if big_x > 700.0:
        raise OverflowError(f"E_{alpha}({x}) exceeds the double-precision range")
    c = math.cos(alpha * math.pi)
    s = math.sin(alpha * math.pi)
    p = 1.0 / alpha
    if deriv:
        integral = _split_quad(
            lambda v: v**p * math.exp(-big_x * v**p) / (v * v - 2.0 * v * c + 1.0), [1.0]
        )
        return (big_x ** (1.0 - alpha) / alpha) * (
            math.exp(big_x) / alpha + s * integral / (math.pi * alpha)
        )
    integral = _split_quad(
        lambda v: math.exp(-big_x * v**p) / (v * v - 2.0 * v * c + 1.0), [1.0]
    )
    return math.exp(big_x) / alpha - s * integral / (math.pi * alpha)


def _evaluate(alpha, t, deriv):
    t = float(t)
    alpha = float(alpha)
    _check(alpha, t)
    if alpha == 1.0:
        return math.exp(t)
    if abs(t) ** (1.0 / alpha) <= TAU_SWITCH:
        return _series(alpha, t, deriv)
    if t < 0.0:
        return _negative_axis(alpha, -t, deriv)
    return _positive_axis(alpha, t, deriv)


def mittag_leffler(alpha, t):
    """Evaluate ``E_alpha(t)``; arrays are evaluated elementwise."""
    if np.ndim(t):
        return np.array([_evaluate(alpha, v, False) for v in np.ravel(t)]).reshape(np.shape(t))
    return _evaluate(alpha, t, False)


def mittag_leffler_deriv(alpha, t):
    """Evaluate ``E_alpha'(t)``, the termwise derivative of the series."""
    if np.ndim(t):
        return np.array([_evaluate(alpha, v, True) for v in np.ravel(t)]).reshape(np.shape(t))
    return _evaluate(alpha, t, True)
