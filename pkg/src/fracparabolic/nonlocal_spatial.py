r"""Second differences, Pucci extremal operators and sup-inf operators in one dimension.

For a symmetric kernel coefficient ``a`` the linear operator is

.. math::

    L_a u(x) = \int_{\mathbb{R}} \frac{\delta(u, x, y)\, a(y)}{|y|^{1+2\sigma}}\,dy,
    \qquad \delta(u, x, y) = u(x+y) + u(x-y) - 2u(x),

and the Pucci operators replace ``a * delta`` by ``Lambda delta_+ - lambda delta_-``
(``M+``) or ``lambda delta_+ - Lambda delta_-`` (``M-``).

Quadrature. Second differences are only taken at grid-aligned offsets
``y_m = m dx`` so no interpolation enters the operators. The smooth quotient
``Q(y) = phi(delta(y)) / y**2`` is interpolated piecewise linearly between the
offsets (held constant on ``[0, dx]``, where ``Q`` is flat to second order)
and integrated exactly against ``y**(1 - 2 sigma)``. Every weight is
positive, which keeps the explicit time stepping monotone. Offsets leave the
grid through the exterior rule; beyond the last offset the tail is closed
form for a constant exterior and a log-mapped Gauss rule for an analytic one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError

R_CUT_FACTOR = 10.0
_TAIL_PANEL = 0.125
_TAIL_DECADE = 1e-12
_MAX_PANELS = 20000
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class ConstantExterior:
    """Field equals ``value`` everywhere outside the grid."""

    value: float = 0.0


@dataclass(frozen=True, eq=False)
class AnalyticExterior:
    """Field equals ``fn(x)`` outside the grid, growing at most like ``|x|**nu``.

    ``tail_panel`` is the width, in ``log y``, of the Gauss panels used beyond
    the far-field cutoff. The default suits slowly varying data; oscillatory
    exteriors need a finer value to avoid aliasing.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    nu: float = 0.0
    tail_panel: float = 0.125

    def __post_init__(self):
        if not self.nu >= 0.0:
            raise ValueError("exterior growth exponent must be nonnegative")
        if not self.tail_panel > 0.0:
            raise ValueError("tail_panel must be positive")


@dataclass(frozen=True)
class SpaceGrid:
    x_min: float
    x_max: float
    n_points: int
    exterior: ConstantExterior | AnalyticExterior = ConstantExterior()

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError("n_points must be an integer >= 2")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def points(self):
        return np.linspace(self.x_min, self.x_max, self.n_points)

    def exterior_values(self, x):
        x = np.asarray(x, dtype=float)
        if isinstance(self.exterior, ConstantExterior):
            return np.full(x.shape, float(self.exterior.value))
        return np.asarray(self.exterior.fn(x), dtype=float) * np.ones(x.shape)

    def with_exterior(self, exterior):
        return SpaceGrid(self.x_min, self.x_max, self.n_points, exterior)


@dataclass(frozen=True, eq=False)
class SpatialField:
    grid: SpaceGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(grid.points))


@dataclass(frozen=True)
class Ellipticity:
    lam: float
    Lam: float
    sigma: float

    def __post_init__(self):
        if not (0.0 < self.lam <= self.Lam and math.isfinite(self.Lam)):
            raise ValueError(f"need 0 < lambda <= Lambda, got {self.lam}, {self.Lam}")
        if not (0.0 < self.sigma < 1.0):
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")


Coefficient = float | Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class KernelFamily:
    """Doubly indexed coefficients ``members[i][j]`` bounded by the ellipticity.

    A member is either a constant or a callable ``a(t, x, y)`` that broadcasts
    over numpy arrays. Symmetry in ``y`` and the bounds are probed at
    construction on a fixed set of arguments.
    """

    ell: Ellipticity
    members: Sequence[Sequence[Coefficient]]

    def __post_init__(self):
        rows = [list(r) for r in self.members]
        if not rows or any(not r for r in rows):
            raise ValueError("kernel family must have at least one member per index")
        object.__setattr__(self, "members", tuple(tuple(r) for r in rows))
        ys = np.geomspace(1e-3, 50.0, 24)
        xs = np.linspace(-2.0, 2.0, 9)
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        tol = 1e-12 * self.ell.Lam
        for i, row in enumerate(self.members):
            for j, a in enumerate(row):
                for t in (-1.0, 0.0, 0.5):
                    plus = _coef_values(a, t, xx, yy)
                    minus = _coef_values(a, t, xx, -yy)
                    if not np.allclose(plus, minus, rtol=0.0, atol=tol):
                        raise ValueError(f"member ({i}, {j}) is not symmetric in y")
                    if plus.min() < self.ell.lam - tol or plus.max() > self.ell.Lam + tol:
                        raise ValueError(f"member ({i}, {j}) leaves [lambda, Lambda]")

    @classmethod
    def constant(cls, ell, values):
        return cls(ell, [[float(v) for v in row] for row in values])


def _coef_values(a, t, x, y):
    if callable(a):
        return np.asarray(a(t, x, y), dtype=float) * np.ones(np.broadcast(x, y).shape)
    return np.full(np.broadcast(x, y).shape, float(a))


# --------------------------------------------------------------------------
# quadrature


def _hat_moments(p, m_max):
    """Integrals of ``u**p`` times the left/right halves of unit hat functions.

    ``rise[m] = int_{m-1}^{m} u^p (u - m + 1) du`` and
    ``fall[m] = int_{m}^{m+1} u^p (m + 1 - u) du`` for ``m = 1..m_max``.
    """
    m = np.arange(1, m_max + 2, dtype=float)

    def prim1(u):
        return u ** (p + 1.0) / (p + 1.0)

    def prim2(u):
        return u ** (p + 2.0) / (p + 2.0)

    lo = m - 1.0
    rise = prim2(m) - prim2(lo) - lo * (prim1(m) - prim1(lo))
    hi = m + 1.0
    fall = hi * (prim1(hi) - prim1(m)) - (prim2(hi) - prim2(m))
    return rise[:m_max], fall[:m_max]


class Stencil:
    """Quadrature data for one ``(SpaceGrid, sigma)`` pair.

    ``coef[m-1]`` multiplies ``phi(delta_m)`` for offset ``m * dx``; the tail
    beyond ``y_tail`` is either closed form (constant exterior) or carried by
    ``tail_y`` / ``tail_w`` nodes. Both halves of the real line are included.
    """

    def __init__(self, grid, sigma):
        self.grid = grid
        self.sigma = sigma
        n = grid.n_points
        dx = grid.dx
        analytic = isinstance(grid.exterior, AnalyticExterior)
        if analytic:
            if grid.exterior.nu >= 2.0 * sigma:
                raise ConvergenceError(
                    f"exterior growth nu={grid.exterior.nu} >= 2 sigma={2 * sigma}: divergent tail"
                )
            m_max = int(math.ceil(R_CUT_FACTOR * (grid.x_max - grid.x_min) / dx))
        else:
            m_max = n
        self.m_max = m_max
        self.y_tail = m_max * dx
        p = 1.0 - 2.0 * sigma
        rise, fall = _hat_moments(p, m_max)
        unit = rise.copy()
        unit[:-1] += fall[:-1]
        unit[0] = fall[0] + 1.0 / (p + 1.0)  # flat piece replaces the rise on [0, dx]
        m = np.arange(1, m_max + 1, dtype=float)
        self.coef = 2.0 * dx ** (-2.0 * sigma) * unit / m**2
        self.offsets = m * dx

        pad = m_max
        self.pad = pad
        left = grid.x_min - dx * np.arange(pad, 0, -1)
        right = grid.x_max + dx * np.arange(1, pad + 1)
        self.pad_left = grid.exterior_values(left)
        self.pad_right = grid.exterior_values(right)
        k = np.arange(n)[:, None]
        self.idx_plus = k + pad + np.arange(1, m_max + 1)[None, :]
        self.idx_minus = k + pad - np.arange(1, m_max + 1)[None, :]

        # log-mapped Gauss nodes on [y_tail, inf)
        decay = 2.0 * sigma - (grid.exterior.nu if analytic else 0.0)
        span = math.log(1.0 / _TAIL_DECADE) / decay
        width = grid.exterior.tail_panel if analytic else _TAIL_PANEL
        n_panels = int(math.ceil(span / width))
        if n_panels > _MAX_PANELS:
            raise ConvergenceError("tail rule needs too many panels; growth too close to 2 sigma")
        starts = width * np.arange(n_panels)
        s = (starts[:, None] + 0.5 * width * (_GL_X[None, :] + 1.0)).ravel()
        w = np.tile(0.5 * width * _GL_W, n_panels)
        self.tail_y = self.y_tail * np.exp(s)
        self.tail_w = 2.0 * w * self.y_tail ** (-2.0 * sigma) * np.exp(-2.0 * sigma * s)
        self.tail_closed = 2.0 * self.y_tail ** (-2.0 * sigma) / (2.0 * sigma)
        if analytic:
            x = grid.points[:, None]
            ext = grid.exterior
            self.tail_ext = np.asarray(ext.fn(x + self.tail_y[None, :])) + np.asarray(
                ext.fn(x - self.tail_y[None, :])
            )
        else:
            self.tail_ext = None
        self.analytic = analytic

    @property
    def total_weight(self):
        """Sum of kernel weights (offsets plus tail), i.e. the operator's rate per unit coefficient."""
        return float(self.coef.sum() + self.tail_closed)

    def padded(self, values):
        return np.concatenate([self.pad_left, values, self.pad_right])

    def deltas(self, values, rows=None):
        ext = self.padded(values)
        ip, im = self.idx_plus, self.idx_minus
        u = values
        if rows is not None:
            ip, im, u = ip[rows], im[rows], values[rows]
        return ext[ip] + ext[im] - 2.0 * np.asarray(u)[..., None]

    def tail_deltas(self, values, rows=None):
        u = values if rows is None else values[rows]
        if self.analytic:
            ext = self.tail_ext if rows is None else self.tail_ext[rows]
            return ext - 2.0 * np.asarray(u)[..., None]
        c = float(self.grid.exterior.value)
        return np.broadcast_to((2.0 * c - 2.0 * np.asarray(u))[..., None], np.shape(u) + (1,))


@lru_cache(maxsize=64)
def stencil(grid, sigma):
    return Stencil(grid, float(sigma))


def _rows(u, k):
    if k is None:
        return None
    k = int(k)
    if not (0 <= k < u.grid.n_points):
        raise IndexError(f"grid index {k} outside 0..{u.grid.n_points - 1}")
    return k


def _pucci(u, k, hi, lo, sigma):
    st = stencil(u.grid, sigma)
    rows = _rows(u, k)
    d = st.deltas(u.values, rows)
    body = np.dot(np.where(d > 0, hi * d, lo * d), st.coef)
    td = st.tail_deltas(u.values, rows)
    if st.analytic:
        tail = np.dot(np.where(td > 0, hi * td, lo * td), st.tail_w)
    else:
        tail = np.where(td[..., 0] > 0, hi * td[..., 0], lo * td[..., 0]) * st.tail_closed
    out = body + tail
    if not np.all(np.isfinite(out)):
        raise ArithmeticError("non-finite operator value")
    return float(out) if rows is not None else out


def pucci_plus(u, k, ell):
    """``M+ u`` at node ``k``; ``k=None`` returns every node."""
    return _pucci(u, k, ell.Lam, ell.lam, ell.sigma)


def pucci_minus(u, k, ell):
    """``M- u`` at node ``k``; ``k=None`` returns every node."""
    return _pucci(u, k, ell.lam, ell.Lam, ell.sigma)


def linear_apply(u, k, a, sigma, t=0.0):
    """``L_a u`` for a single coefficient (constant or ``a(t, x, y)``)."""
    st = stencil(u.grid, sigma)
    rows = _rows(u, k)
    d = st.deltas(u.values, rows)
    td = st.tail_deltas(u.values, rows)
    if not callable(a):
        if st.analytic:
            tail = np.dot(td, st.tail_w)
        else:
            tail = td[..., 0] * st.tail_closed
        out = float(a) * (np.dot(d, st.coef) + tail)
    else:
        x = u.grid.points if rows is None else u.grid.points[rows]
        x = np.asarray(x)[..., None]
        coef = _coef_values(a, t, x, st.offsets)
        out = np.sum(coef * d * st.coef, axis=-1)
        tail_coef = _coef_values(a, t, x, st.tail_y)
        out = out + np.sum(tail_coef * td * st.tail_w, axis=-1)
    return float(out) if rows is not None else np.asarray(out)


def isaacs_values(u, k, fam, t=0.0):
    """Per-member values ``L_ij u`` stacked as ``[i][j]`` (arrays when ``k is None``)."""
    return [[linear_apply(u, k, a, fam.ell.sigma, t) for a in row] for row in fam.members]


def _row_minima(u, k, fam, t):
    # rows may differ in length, so reduce each one separately
    vals = isaacs_values(u, k, fam, t)
    mins = np.array([np.min(np.array(row, dtype=float), axis=0) for row in vals])
    return vals, mins


def isaacs_apply(u, k, fam, t=0.0):
    """``sup_i inf_j L_ij u`` at node ``k`` (every node when ``k is None``).

    Ties resolve to the lowest index, which only matters for ``isaacs_argopt``.
    """
    _, mins = _row_minima(u, k, fam, t)
    out = mins.max(axis=0)
    return float(out) if k is not None else out


def isaacs_argopt(u, k, fam, t=0.0):
    """Indices ``(i, j)`` attaining the sup-inf at node ``k`` (lowest index on ties)."""
    if k is None:
        raise ValueError("isaacs_argopt needs a single node index")
    vals, mins = _row_minima(u, k, fam, t)
    i = int(np.argmax(mins))
    return i, int(np.argmin(np.array(vals[i], dtype=float)))


def second_difference(u, k, y):
    """``u(x_k + y) + u(x_k - y) - 2 u(x_k)``.

    Grid-aligned ``y`` reads node (or exterior) values exactly; other offsets
    use 4-point cubic Lagrange interpolation on the grid extended by the
    exterior rule.
    """
    grid = u.grid
    k = _rows(u, k)
    dx = grid.dx
    x0 = grid.x_min + k * dx
    return _interp(u, x0 + y) + _interp(u, x0 - y) - 2.0 * u.values[k]


def _interp(u, x):
    grid = u.grid
    dx = grid.dx
    pos = (x - grid.x_min) / dx
    j = int(round(pos))
    if abs(pos - j) < 1e-12:
        return _node_value(u, j)
    base = int(math.floor(pos)) - 1
    idx = np.arange(base, base + 4)
    vals = np.array([_node_value(u, i) for i in idx])
    nodes = idx.astype(float)
    out = 0.0
    for a in range(4):
        w = 1.0
        for b in range(4):
            if b != a:
                w *= (pos - nodes[b]) / (nodes[a] - nodes[b])
        out += w * vals[a]
    if not math.isfinite(out):
        raise ArithmeticError("non-finite interpolant")
    return out


def _node_value(u, j):
    grid = u.grid
    if 0 <= j < grid.n_points:
        return float(u.values[j])
    return float(grid.exterior_values(np.array([grid.x_min + j * grid.dx]))[0])
