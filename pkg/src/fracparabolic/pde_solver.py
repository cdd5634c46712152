r"""Explicit monotone time stepping for ``D_t^alpha u - I u = f`` in one space dimension.

The Caputo derivative uses the L1 weights of :mod:`fractional_time`, with the
newest level isolated; the spatial operator is evaluated on the previous level.
Writing ``c = dt**-alpha / Gamma(2 - alpha)`` the update reads

.. math::

    u_k = (1 - b_1) u_{k-1} + \sum_{j=1}^{k-2} (b_{k-j-1} - b_{k-j}) u_j
          + b_{k-1} u_0 + (f_k + I u_{k-1} - P_k) / c,

where ``P_k`` is the contribution of an analytic past. All coefficients on
earlier values are nonnegative and ``I`` is nondecreasing in every off-diagonal
value; the diagonal dependence of ``I`` is at worst ``-2 Lambda W`` with ``W``
the total quadrature weight, so the scheme is monotone as long as

.. math::

    2 \Lambda W \, \Gamma(2-\alpha)\, dt^\alpha \le c_{stab} (2 - 2^{1-\alpha}).

For ``alpha = 1`` this is the usual explicit Euler bound.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gamma

from .errors import ConvergenceError, GridMismatchError, NumericalFailure, StabilityError
from .fractional_time import TimeGrid, check_order, l1_weights
from .nonlocal_spatial import (
    ConstantExterior,
    Ellipticity,
    KernelFamily,
    SpaceGrid,
    SpatialField,
    isaacs_apply,
    pucci_minus,
    pucci_plus,
    stencil,
)

C_STAB = 0.9


def operator_rate(space, ell):
    """Lipschitz constant of the spatial operator in the diagonal value, ``2 Lambda W``."""
    return 2.0 * ell.Lam * stencil(space, ell.sigma).total_weight


def _stability_budget(alpha, c_stab):
    return c_stab * (2.0 - 2.0 ** (1.0 - alpha))


def stable_time_step(space, alpha, ell, c_stab=C_STAB):
    """Largest ``dt`` satisfying the monotonicity bound."""
    alpha = check_order(alpha)
    rate = operator_rate(space, ell)
    return (_stability_budget(alpha, c_stab) / (gamma(2.0 - alpha) * rate)) ** (1.0 / alpha)


@dataclass(frozen=True)
class SpaceTimeGrid:
    space: SpaceGrid
    time: TimeGrid
    alpha: float
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_order(self.alpha))
        if not (0.0 < self.sigma < 1.0):
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")

    @classmethod
    def stable(cls, space, t_start, t_end, alpha, ell, c_stab=C_STAB):
        """Grid whose step is the largest stable one that divides ``[t_start, t_end]`` evenly."""
        dt = stable_time_step(space, alpha, ell, c_stab)
        n = max(1, int(math.ceil((t_end - t_start) / dt * (1.0 + 1e-12))))
        return cls(space, TimeGrid.spanning(t_start, t_end, n), alpha, ell.sigma)

    def is_stable(self, ell, c_stab=C_STAB):
        lhs = operator_rate(self.space, ell) * gamma(2.0 - self.alpha) * self.time.dt**self.alpha
        return lhs <= _stability_budget(self.alpha, c_stab) * (1.0 + 1e-12)


@dataclass(frozen=True, eq=False)
class SpaceTimePast:
    """Data ``fn(x, t)`` for times before the grid start, growing like ``|t|**nu``."""

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    nu: float


def _zero(x, t):
    return np.zeros(np.broadcast(x, t).shape)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Data of one initial-exterior value problem.

    ``operator`` is ``"M+"``, ``"M-"`` or a :class:`KernelFamily`. ``initial`` gives
    the solution at the first grid time; ``past`` (optional) prescribes it at
    earlier times, otherwise it is extended constantly. The exterior rule lives
    on the spatial grid.
    """

    ell: Ellipticity
    alpha: float
    operator: str | KernelFamily = "M+"
    forcing: Callable[[np.ndarray, float], np.ndarray] = _zero
    initial: Callable[[np.ndarray], np.ndarray] = field(default=lambda x: np.zeros_like(x))
    past: SpaceTimePast | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_order(self.alpha))
        if isinstance(self.operator, KernelFamily):
            if self.operator.ell != self.ell:
                raise ValueError("kernel family ellipticity differs from the problem's")
        elif self.operator not in ("M+", "M-"):
            raise ValueError(f"operator must be 'M+', 'M-' or a KernelFamily, got {self.operator!r}")
        if self.past is not None and self.past.nu >= self.alpha:
            raise ConvergenceError(f"past growth nu={self.past.nu} must be below alpha={self.alpha}")

    def apply_operator(self, u, t):
        if self.operator == "M+":
            return pucci_plus(u, None, self.ell)
        if self.operator == "M-":
            return pucci_minus(u, None, self.ell)
        return isaacs_apply(u, None, self.operator, t)


@dataclass(frozen=True, eq=False)
class Field:
    """Solution samples ``values[time_index, space_index]``."""

    grid: SpaceTimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        shape = (self.grid.time.n_steps + 1, self.grid.space.n_points)
        if values.shape != shape:
            raise ValueError(f"expected shape {shape}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def slice(self, k):
        return SpatialField(self.grid.space, self.values[k])

    @property
    def x(self):
        return self.grid.space.points

    @property
    def t(self):
        return self.grid.time.points


# Gauss panels in log(t_start - s) for the analytic past.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_PAST_PANEL = 0.5
_PAST_RTOL = 1e-12


class _PastTail:
    r"""``P_k(x) = alpha/Gamma(1-alpha) int_{-inf}^{t0} (u_0(x) - g(x,s)) (t_k - s)^{-1-alpha} ds``.

    The nodes do not depend on ``k``, so ``u_0 - g`` is sampled once and each
    step is a single matrix-vector product.
    """

    def __init__(self, past, x, u0, t0, dt, alpha, horizon):
        lo = math.log(dt) - 36.0
        hi = math.log(horizon + dt) + math.log(1.0 / _PAST_RTOL) / (alpha - past.nu) + 2.0
        n_panels = int(math.ceil((hi - lo) / _PAST_PANEL))
        starts = lo + _PAST_PANEL * np.arange(n_panels)
        nodes = (starts[:, None] + 0.5 * _PAST_PANEL * (_GL_X[None, :] + 1.0)).ravel()
        self.e = np.exp(nodes)
        self.w = np.tile(0.5 * _PAST_PANEL * _GL_W, n_panels) * self.e
        s = t0 - self.e
        g = np.asarray(past.fn(x[:, None], s[None, :]), dtype=float)
        diff = u0[:, None] - g
        if not np.all(np.isfinite(diff)):
            raise ConvergenceError("past data produced non-finite values")
        self.diff = diff
        self.scale = alpha / gamma(1.0 - alpha)
        self.alpha = alpha
        self.dt = dt

    def at(self, k):
        gap = k * self.dt
        kern = self.w / (gap + self.e) ** (1.0 + self.alpha)
        return self.scale * (self.diff @ kern)


class Solver:
    """Owns the solution buffer while stepping; :func:`solve` wraps the loop."""

    def __init__(self, spec, grid, c_stab=C_STAB):
        if abs(spec.alpha - grid.alpha) > 0.0 or abs(spec.ell.sigma - grid.sigma) > 0.0:
            raise GridMismatchError("problem and grid disagree on alpha or sigma")
        if not grid.is_stable(spec.ell, c_stab):
            raise StabilityError(
                f"dt={grid.time.dt:.3e} exceeds the stable step "
                f"{stable_time_step(grid.space, grid.alpha, spec.ell, c_stab):.3e}"
            )
        self.spec = spec
        self.grid = grid
        alpha = grid.alpha
        n = grid.time.n_steps
        x = grid.space.points
        self.x = x
        self.t = grid.time.points
        self.values = np.zeros((n + 1, x.size))
        self.values[0] = np.asarray(spec.initial(x), dtype=float) * np.ones(x.size)
        if not np.all(np.isfinite(self.values[0])):
            node = (0, int(np.argmin(np.isfinite(self.values[0]))))
            raise NumericalFailure("initial data is not finite", node=node)
        dt = grid.time.dt
        self.inv_c = dt if alpha == 1.0 else dt**alpha * gamma(2.0 - alpha)
        b = l1_weights(alpha, n)
        self.b = b
        # lag weights e_m = b_{m-1} - b_m multiply u_{k-m}, m = 1..k-1
        self.lag = np.concatenate([[0.0], b[:-1] - b[1:]])
        self.tail = None
        if spec.past is not None and alpha < 1.0:
            self.tail = _PastTail(
                spec.past, x, self.values[0], grid.time.t_start, dt, alpha, grid.time.t_end - grid.time.t_start
            )
        self.k = 0

    def step(self):
        """Advance one level and return the new slice."""
        k = self.k + 1
        if k > self.grid.time.n_steps:
            raise IndexError("time grid exhausted")
        U = self.values
        prev = SpatialField(self.grid.space, U[k - 1])
        t_prev, t_new = self.t[k - 1], self.t[k]
        rhs = np.asarray(self.spec.forcing(self.x, t_new), dtype=float) * np.ones(self.x.size)
        rhs = rhs + self.spec.apply_operator(prev, t_prev)
        if self.tail is not None:
            rhs = rhs - self.tail.at(k)
        if k == 1 or self.grid.alpha == 1.0:
            new = U[k - 1] + self.inv_c * rhs
        else:
            # m = 1..k-1 against u_{k-1}..u_1, then b_{k-1} u_0
            hist = self.lag[k - 1 : 0 : -1] @ U[1:k]
            new = hist + self.b[k - 1] * U[0] + self.inv_c * rhs
        bad = ~np.isfinite(new)
        if bad.any():
            raise NumericalFailure(f"non-finite value at time index {k}", node=(k, int(np.argmax(bad))))
        U[k] = new
        self.k = k
        return new

    def field(self):
        if self.k != self.grid.time.n_steps:
            raise RuntimeError("solve is incomplete")
        return Field(self.grid, self.values)


def solve(spec, grid, c_stab=C_STAB):
    """March from the first to the last grid time and return the full field."""
    solver = Solver(spec, grid, c_stab)
    for _ in range(grid.time.n_steps):
        solver.step()
    return solver.field()


# --------------------------------------------------------------------------
# checkpoints

_HEADER = struct.Struct("<qq6d")


def save_checkpoint(u, path):
    """Write a field as a little-endian header followed by row-major float64 data."""
    g = u.grid
    header = _HEADER.pack(
        g.time.n_steps + 1,
        g.space.n_points,
        g.space.x_min,
        g.space.x_max,
        g.time.t_start,
        g.time.dt,
        g.alpha,
        g.sigma,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())


def load_checkpoint(path, exterior=None):
    """Read a field written by :func:`save_checkpoint`.

    The exterior rule is not stored; pass it to restore it (default zero).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated checkpoint header")
    n_time, n_space, x_min, x_max, t_start, dt, alpha, sigma = _HEADER.unpack_from(raw)
    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if payload.size != n_time * n_space:
        raise ValueError("checkpoint payload does not match its header")
    space = SpaceGrid(x_min, x_max, n_space, exterior or ConstantExterior(0.0))
    grid = SpaceTimeGrid(space, TimeGrid(t_start, dt, n_time - 1), alpha, sigma)
    return Field(grid, payload.reshape(n_time, n_space).astype(float))
