r"""Caputo derivatives of sampled histories and linear fractional ODEs.

The derivative is the one-sided singular integral

.. math::

    \partial_t^\alpha f(t) = \frac{\alpha}{\Gamma(1-\alpha)}
        \int_{-\infty}^{t} \frac{f(t) - f(s)}{(t-s)^{1+\alpha}}\,ds,

with the past of a history supplied by an explicit extension rule. Sampled
values are interpolated piecewise linearly and the kernel is integrated
exactly against the interpolant (the L1 scheme). With a constant past this is
the classical Caputo derivative started at the first grid point, and the
quadrature reduces to

.. math::

    \frac{\Delta t^{-\alpha}}{\Gamma(2-\alpha)} \sum_{j=1}^{k} b_{k-j}
        (f_j - f_{j-1}), \qquad b_m = (m+1)^{1-\alpha} - m^{1-\alpha}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gamma

from .errors import ConvergenceError, GridMismatchError
from .special import mittag_leffler_deriv


def check_order(alpha):
    """Validate a fractional order and return it as a float."""
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"fractional order must lie in (0, 1], got {alpha}")
    return alpha


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time lattice ``t_k = t_start + k * dt`` for ``k = 0..n_steps``."""

    t_start: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not math.isfinite(self.t_start):
            raise ValueError("t_start must be finite")

    @classmethod
    def spanning(cls, t_start, t_end, n_steps):
        return cls(float(t_start), (float(t_end) - float(t_start)) / n_steps, int(n_steps))

    @property
    def t_end(self):
        return self.t_start + self.n_steps * self.dt

    @property
    def points(self):
        return self.t_start + self.dt * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class ConstantPast:
    """Extend a history below its grid by its first sampled value."""


@dataclass(frozen=True)
class AnalyticTail:
    """Extend a history below its grid by ``fn``, which grows like ``|t|**nu``.

    ``fn`` must accept a numpy array of times. The growth exponent has to stay
    below the derivative order for the tail integral to converge; that is
    checked when a derivative is evaluated.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    nu: float

    def __post_init__(self):
        if not (self.nu >= 0.0):
            raise ValueError(f"growth exponent must be nonnegative, got {self.nu}")


@dataclass(frozen=True, eq=False)
class History:
    """A function of time sampled on a ``TimeGrid`` plus its past-extension rule."""

    grid: TimeGrid
    values: np.ndarray
    past: ConstantPast | AnalyticTail = field(default_factory=ConstantPast)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_steps + 1,):
            raise ValueError(
                f"expected {self.grid.n_steps + 1} samples, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("history values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid, fn, past=None):
        return cls(grid, fn(grid.points), ConstantPast() if past is None else past)

    @property
    def times(self):
        return self.grid.points


@dataclass(frozen=True)
class _Weights:
    alpha: float
    scale: float
    b: np.ndarray


def l1_weights(alpha, n):
    """Return ``b_0..b_n`` of the L1 scheme (``[1, 0, 0, ...]`` when ``alpha == 1``)."""
    if alpha == 1.0:
        b = np.zeros(n + 1)
        b[0] = 1.0
        return b
    m = np.arange(n + 1, dtype=float)
    return (m + 1.0) ** (1.0 - alpha) - m ** (1.0 - alpha)


def _weights(grid, alpha):
    return _Weights(alpha, grid.dt ** (-alpha) / gamma(2.0 - alpha), l1_weights(alpha, grid.n_steps))


# Gauss-Legendre panels on x = log(t_start - s) for analytic pasts.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_PANEL = 0.5
_X_MAX = 600.0
_TAIL_RTOL = 1e-12
_START_LAG = 1e-4


def _tail_integral(past, f0, t0, t_k, alpha, dt):
    r"""Integrate ``alpha/Gamma(1-alpha) * (f0 - fn(s)) / (t_k - s)**(1+alpha)`` over s < t0.

    Only the departure of the analytic past from the constant extension is
    integrated; the constant part is already inside the L1 sum.
    """
    if past.nu >= alpha:
        raise ConvergenceError(
            f"tail growth exponent nu={past.nu} must be below alpha={alpha}"
        )
    gap = t_k - t0
    # Below e_min the departure d(e) = f0 - fn(t0 - e) is fitted by c1 e + c2 e^2
    # and integrated in closed form; panels start there.
    e_min = _START_LAG * dt
    d1, d2 = f0 - np.asarray(past.fn(np.array([t0 - e_min, t0 - 0.5 * e_min])), dtype=float)
    c2 = (d1 - 2.0 * d2) / (0.5 * e_min**2)
    c1 = d1 / e_min - c2 * e_min
    total = 0.0
    for p, c in ((1, c1), (2, c2)):
        if gap <= e_min:
            total += c * e_min ** (p - alpha) / (p - alpha)
        else:
            total += c * e_min ** (p + 1) / ((p + 1) * gap ** (1.0 + alpha))
    x = math.log(e_min)
    decay = math.exp((past.nu - alpha) * _PANEL)
    while x < _X_MAX:
        nodes = x + 0.5 * _PANEL * (_GL_X + 1.0)
        e = np.exp(nodes)
        s = t0 - e
        integrand = (f0 - np.asarray(past.fn(s), dtype=float)) * e / (gap + e) ** (1.0 + alpha)
        if not np.all(np.isfinite(integrand)):
            raise ConvergenceError("analytic past produced non-finite values")
        panel = 0.5 * _PANEL * float(np.dot(_GL_W, integrand))
        total += panel
        x += _PANEL
        # beyond the kernel scale panels shrink geometrically at rate exp((nu-alpha)*width)
        if e[0] > 4.0 * (gap + dt) and abs(panel) / (1.0 - decay) <= _TAIL_RTOL * max(abs(total), 1e-300):
            return alpha / gamma(1.0 - alpha) * total
        if e[0] > 4.0 * (gap + dt) and total == 0.0 and panel == 0.0:
            return 0.0
    raise ConvergenceError(
        f"tail integral did not converge; declared nu={past.nu} is inconsistent with the data"
    )


def _caputo(values, w, k):
    if k == 0:
        return 0.0
    increments = np.diff(values[: k + 1])
    terms = w.b[k - 1 :: -1] * increments
    return w.scale * math.fsum(terms.tolist())


def _validate_index(h, k):
    if int(k) != k or not (0 <= k <= h.grid.n_steps):
        raise IndexError(f"time index {k} outside 0..{h.grid.n_steps}")
    return int(k)


def _evaluate(h, alpha, k, w):
    if alpha == 1.0:
        if k == 0:
            if isinstance(h.past, AnalyticTail):
                prev = float(np.asarray(h.past.fn(np.array([h.grid.t_start - h.grid.dt])))[0])
                return (h.values[0] - prev) / h.grid.dt
            return 0.0
        return (h.values[k] - h.values[k - 1]) / h.grid.dt
    value = _caputo(h.values, w, k)
    if isinstance(h.past, AnalyticTail):
        t_k = h.grid.t_start + k * h.grid.dt
        value += _tail_integral(h.past, h.values[0], h.grid.t_start, t_k, alpha, h.grid.dt)
    return value


def caputo_eval(h, alpha, k):
    """Discrete Caputo derivative of ``h`` at grid index ``k``.

    ``k = 0`` is accepted and evaluates only the past contribution, which is
    zero for a constant past. For ``alpha == 1`` the backward difference
    quotient is returned.
    """
    alpha = check_order(alpha)
    k = _validate_index(h, k)
    return _evaluate(h, alpha, k, _weights(h.grid, alpha))


def caputo_eval_series(h, alpha):
    """``caputo_eval`` at every grid index, bit-identical to the pointwise calls."""
    alpha = check_order(alpha)
    w = _weights(h.grid, alpha)
    return np.array([_evaluate(h, alpha, k, w) for k in range(h.grid.n_steps + 1)])


def caputo_power_exact(t, t0, beta, alpha):
    """Closed-form Caputo derivative of ``(t - t0)**beta`` with a zero past."""
    t = np.asarray(t, dtype=float)
    tau = np.clip(t - t0, 0.0, None)
    if beta == 0:
        return np.zeros_like(tau)
    with np.errstate(divide="ignore"):
        return gamma(beta + 1.0) / gamma(beta + 1.0 - alpha) * tau ** (beta - alpha)


# --------------------------------------------------------------------------
# linear fractional ODE  d^alpha u + C1 u = f,  u(a) = 0

_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)


def _fode_inputs(alpha, c1, f):
    alpha = check_order(alpha)
    c1 = float(c1)
    if not (c1 >= 0.0 and math.isfinite(c1)):
        raise ValueError(f"C1 must be a nonnegative finite number, got {c1}")
    if not isinstance(f.past, ConstantPast):
        raise ValueError("the forcing history must use a constant past")
    return alpha, c1


def _start_index(f, t_start):
    if t_start is None:
        return 0
    pos = (float(t_start) - f.grid.t_start) / f.grid.dt
    idx = int(round(pos))
    if abs(pos - idx) > 1e-9 or not (0 <= idx < f.grid.n_steps):
        raise ValueError(f"t_start={t_start} is not an interior grid point of the forcing")
    return idx


def solve_fode_explicit(alpha, c1, f, t_start=None):
    r"""Solve ``d^alpha u + C1 u = f`` with ``u(a) = 0`` by the explicit convolution.

    .. math::

        u(t) = \alpha \int_a^t (t-s)^{\alpha-1} E_\alpha'(-C_1 (t-s)^\alpha) f(s)\,ds

    ``f`` is interpolated piecewise linearly. Substituting ``w = (t-s)**alpha``
    removes the weak singularity, leaving ``E_alpha'(-C1 w)`` smooth in ``w``,
    which is integrated with 16 Gauss nodes per time step. The weights depend
    only on the lag, so they are computed once.
    """
    alpha, c1 = _fode_inputs(alpha, c1, f)
    start = _start_index(f, t_start)
    grid = f.grid
    n = grid.n_steps - start
    dt = grid.dt
    lags = np.arange(n, dtype=float)
    wa = (lags * dt) ** alpha
    wb = ((lags + 1.0) * dt) ** alpha
    half = 0.5 * (wb - wa)
    nodes = wa[:, None] + half[:, None] * (_GL16_X[None, :] + 1.0)
    theta = nodes ** (1.0 / alpha) / dt - lags[:, None]
    kern = mittag_leffler_deriv(alpha, -c1 * nodes) if c1 > 0 else np.full(
        nodes.shape, 1.0 / gamma(alpha + 1.0)
    )
    weighted = kern * _GL16_W[None, :] * half[:, None]
    near = np.sum(weighted * (1.0 - theta), axis=1)  # multiplies f(t_k - m dt)
    far = np.sum(weighted * theta, axis=1)  # multiplies f(t_k - (m+1) dt)
    fv = f.values[start:]
    u = np.zeros(grid.n_steps + 1)
    for k in range(1, n + 1):
        u[start + k] = np.dot(near[:k], fv[k:0:-1]) + np.dot(far[:k], fv[k - 1 :: -1])
    return History(grid, u)


def correction_exponents(alpha, top=2.0, gap=0.05):
    """Singular exponents ``i*alpha + j`` below ``top`` used to correct the L1 start.

    Exponents within ``gap`` of an integer (which L1 handles well) or of each
    other (which would make the correction system singular) are dropped.
    """
    if alpha == 1.0:
        return []
    found = []
    for i in range(1, int(top / alpha) + 2):
        for j in (0, 1):
            e = i * alpha + j
            if e >= top or abs(e - round(e)) < gap:
                continue
            if all(abs(e - other) >= gap for other in found):
                found.append(e)
    return sorted(found)


def _l1_apply(values, b, scale):
    """L1 derivative at every index 1..n of a sampled function with constant past."""
    n = len(values) - 1
    conv = np.convolve(b[:n], np.diff(values))[:n]
    return scale * conv


def solve_fode_l1(alpha, c1, f, t_start=None, corrected=True):
    r"""Solve ``d^alpha u + C1 u = f`` with ``u(a) = 0`` by implicit L1 stepping.

    Each step solves ``(b_0 dt^{-alpha} / Gamma(2-alpha) + C1) u_k = f_k + history``.
    Solutions behave like ``(t-a)**alpha`` at the start, which limits plain L1
    to first-order-in-``dt**alpha`` accuracy there. With ``corrected=True`` a
    few starting weights are added so that ``(t-a)**e`` is differentiated
    exactly for every exponent from ``correction_exponents``; the first
    ``len(exponents)`` steps are then solved as one small coupled system.
    """
    alpha, c1 = _fode_inputs(alpha, c1, f)
    start = _start_index(f, t_start)
    grid = f.grid
    n = grid.n_steps - start
    dt = grid.dt
    b = l1_weights(alpha, n)
    scale = dt ** (-alpha) / gamma(2.0 - alpha)
    fv = f.values[start:]

    exps = correction_exponents(alpha) if corrected else []
    m = min(len(exps), n)
    exps = exps[:m]
    tau = dt * np.arange(n + 1)
    corr = np.zeros((n + 1, m))
    if m:
        basis = np.array([[(r * dt) ** e for r in range(1, m + 1)] for e in exps])
        resid = np.array(
            [caputo_power_exact(tau[1:], 0.0, e, alpha) - _l1_apply(tau**e, b, scale) for e in exps]
        )
        corr[1:] = np.linalg.solve(basis, resid).T

    u = np.zeros(n + 1)
    if m:
        # steps 1..m couple through the correction terms
        mat = np.zeros((m, m))
        for k in range(1, m + 1):
            for j in range(1, k + 1):
                mat[k - 1, j - 1] += scale * b[k - j]
                if j >= 2:
                    mat[k - 1, j - 2] -= scale * b[k - j]
            mat[k - 1, :] += corr[k]
            mat[k - 1, k - 1] += c1
        u[1 : m + 1] = np.linalg.solve(mat, fv[1 : m + 1])
    lead = scale * b[0] + c1
    for k in range(m + 1, n + 1):
        incr = np.diff(u[:k])  # u_1-u_0 .. u_{k-1}-u_{k-2}
        history = scale * np.dot(b[k - 1 : 0 : -1], incr) if k > 1 else 0.0
        rhs = fv[k] - history + scale * b[0] * u[k - 1] - np.dot(corr[k], u[1 : m + 1])
        u[k] = rhs / lead
    out = np.zeros(grid.n_steps + 1)
    out[start:] = u
    return History(grid, out)


# --------------------------------------------------------------------------
# product rule  d^alpha(eta g) = eta d^alpha g + g~


def smooth_cutoff(t, lo=0.25, hi=0.5):
    """C-infinity step: 0 for ``t <= lo``, 1 for ``t >= hi``."""
    t = np.asarray(t, dtype=float)
    x = np.clip((t - lo) / (hi - lo), 0.0, 1.0)

    def bump(z):
        out = np.zeros_like(z)
        pos = z > 0
        out[pos] = np.exp(-1.0 / z[pos])
        return out

    a = bump(x)
    return a / (a + bump(1.0 - x))


def _fracform_weights(alpha, n):
    """Exact hat-function weights of ``alpha * u**(-1-alpha)`` on panels ``[p, p+1]``.

    Returns ``(left, right)``: the weight of the node at lag ``p`` and lag
    ``p + 1`` respectively, in units where ``dt = 1``. ``left[0]`` is unused.
    """
    p = np.arange(n, dtype=float)
    with np.errstate(divide="ignore"):
        i1 = (p ** (-alpha) - (p + 1.0) ** (-alpha)) / alpha
    i2 = ((p + 1.0) ** (1.0 - alpha) - p ** (1.0 - alpha)) / (1.0 - alpha)
    left = alpha * ((p + 1.0) * i1 - i2)
    right = np.empty(n)
    right[0] = alpha * i2[0]
    right[1:] = alpha * (i2[1:] - p[1:] * i1[1:])
    left[0] = 0.0
    return left, right


def commutator_term(eta, g, alpha):
    r"""Discretized ``alpha/Gamma(1-alpha) * int g(s) (eta(t) - eta(s)) / (t-s)**(1+alpha) ds``.

    Uses the singular-integral form directly: the integrand numerator is
    interpolated piecewise linearly in ``s`` for every output time, the kernel
    is integrated exactly per panel, and the constant past contributes a
    closed-form tail.
    """
    if eta.grid != g.grid:
        raise GridMismatchError("eta and g must share a time grid")
    if not (isinstance(eta.past, ConstantPast) and isinstance(g.past, ConstantPast)):
        raise ValueError("the product split requires constant pasts")
    alpha = check_order(alpha)
    n = g.grid.n_steps
    out = np.zeros(n + 1)
    if alpha == 1.0:
        return out
    dt = g.grid.dt
    left, right = _fracform_weights(alpha, n)
    pref = dt ** (-alpha) / gamma(1.0 - alpha)
    ev, gv = eta.values, g.values
    for k in range(1, n + 1):
        psi = gv[: k + 1] * (ev[k] - ev[: k + 1])  # psi[k] == 0
        lags = np.arange(k)
        interior = math.fsum((left[lags] * psi[k - lags]).tolist() + (right[lags] * psi[k - lags - 1]).tolist())
        tail = gv[0] * (ev[k] - ev[0]) * (k * dt) ** (-alpha) / gamma(1.0 - alpha)
        out[k] = pref * interior + tail
    return out


def caputo_product_split(eta, g, alpha):
    """Both sides of the product rule for the Caputo derivative.

    Returns ``(lhs, rhs)`` with ``lhs = D(eta*g)`` and
    ``rhs = eta * D(g) + commutator_term(eta, g)``.
    """
    if eta.grid != g.grid:
        raise GridMismatchError("eta and g must share a time grid")
    product = History(g.grid, eta.values * g.values)
    lhs = caputo_eval_series(product, alpha)
    rhs = eta.values * caputo_eval_series(g, alpha) + commutator_term(eta, g, alpha)
    return lhs, rhs


# --------------------------------------------------------------------------
# general time kernels  int [f(t) - f(s)] K(t, s) ds


@dataclass(frozen=True, eq=False)
class TimeKernel:
    """A time kernel ``K(t, s)`` comparable to ``(t-s)**(-1-alpha)``.

    Build with :meth:`caputo` or :meth:`general`. The general constructor
    probes ``Lambda**-1 <= K * (t-s)**(1+alpha) <= Lambda`` on a fixed 32x32
    lattice of ``(t, s)`` pairs; passing the probe is necessary, not
    sufficient, for the bound to hold everywhere.
    """

    alpha: float
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    Lambda: float
    kind: str

    @classmethod
    def caputo(cls, alpha):
        alpha = check_order(alpha)
        if alpha == 1.0:
            raise ValueError("the singular kernel is undefined at alpha = 1")
        const = alpha / gamma(1.0 - alpha)
        return cls(alpha, lambda t, s: const * (t - s) ** (-1.0 - alpha), max(const, 1.0 / const), "caputo")

    @classmethod
    def general(cls, fn, alpha, Lambda, t_range=(-1.0, 1.0), gaps=(1e-3, 10.0)):
        alpha = check_order(alpha)
        if alpha == 1.0:
            raise ValueError("the singular kernel is undefined at alpha = 1")
        if not Lambda >= 1.0:
            raise ValueError("Lambda must be at least 1")
        t = np.linspace(*t_range, 32)
        tau = np.geomspace(*gaps, 32)
        tt, gg = np.meshgrid(t, tau, indexing="ij")
        scaled = np.asarray(fn(tt, tt - gg), dtype=float) * gg ** (1.0 + alpha)
        if not np.all(np.isfinite(scaled)) or scaled.min() < 1.0 / Lambda or scaled.max() > Lambda:
            raise ValueError(
                f"kernel violates the two-sided power bound with Lambda={Lambda} on the probe lattice"
            )
        return cls(alpha, fn, float(Lambda), "general")


_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)


def generalized_derivative(h, kernel, k):
    r"""``int_{-inf}^{t_k} [f(t_k) - f(s)] K(t_k, s) ds`` for a constant-past history.

    Each panel is mapped by ``tau = v**(1/(1-alpha))`` so the ``(t-s)**(-alpha)``
    behaviour of the integrand becomes bounded; the past is handled on a
    logarithmic variable.
    """
    if not isinstance(h.past, ConstantPast):
        raise ValueError("generalized_derivative needs a constant past")
    k = _validate_index(h, k)
    alpha = kernel.alpha
    grid = h.grid
    t_k = grid.t_start + k * grid.dt
    fk = h.values[k]
    q = 1.0 / (1.0 - alpha)
    total = 0.0
    for p in range(k):
        va, vb = (p * grid.dt) ** (1.0 - alpha), ((p + 1) * grid.dt) ** (1.0 - alpha)
        v = va + 0.5 * (vb - va) * (_GL8_X + 1.0)
        tau = v**q
        theta = tau / grid.dt - p
        fs = h.values[k - p] * (1.0 - theta) + h.values[k - p - 1] * theta
        jac = q * v ** (q - 1.0)
        vals = (fk - fs) * np.asarray(kernel.fn(np.full_like(tau, t_k), t_k - tau)) * jac
        total += 0.5 * (vb - va) * float(np.dot(_GL8_W, vals))
    if fk != h.values[0]:
        gap = t_k - grid.t_start
        x = math.log(grid.dt) - 36.0
        tail = 0.0
        while x < _X_MAX:
            nodes = x + 0.5 * _PANEL * (_GL_X + 1.0)
            e = np.exp(nodes)
            s = grid.t_start - e
            vals = np.asarray(kernel.fn(np.full_like(s, t_k), s)) * e
            panel = 0.5 * _PANEL * float(np.dot(_GL_W, vals))
            tail += panel
            x += _PANEL
            if e[0] > 4.0 * (gap + grid.dt) and panel <= _TAIL_RTOL * tail:
                break
        else:
            raise ConvergenceError("kernel tail did not converge")
        total += (fk - h.values[0]) * tail
    return total
