"""Oscillation decay over parabolic cylinders and Hölder exponent fits.

A cylinder of radius ``r`` centred at ``(x0, t0)`` is the closed ball
``|x - x0| <= r`` times the half-open interval ``(t0 - r**(2 sigma / alpha), t0]``,
so that the space-time scaling matches the equation.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import HypothesisViolation, InsufficientResolution, SweepAborted
from .nonlocal_spatial import AnalyticExterior, ConstantExterior, SpaceGrid
from .pde_solver import C_STAB, SpaceTimeGrid, solve

MIN_NODES = 4
MIN_CYLINDER_NODES = 16
THETA_FLOOR = 1e-3
EPSILON0 = 0.05
NU = 0.3
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class Cylinder:
    x0: float
    t0: float
    r: float

    def __post_init__(self):
        if not self.r > 0.0:
            raise ValueError("cylinder radius must be positive")

    def height(self, sigma, alpha):
        return self.r ** (2.0 * sigma / alpha)

    def shrink(self, factor):
        return replace(self, r=self.r * factor)


def _node_masks(u, c):
    g = u.grid
    h = c.height(g.sigma, g.alpha)
    tol_x = _EDGE_TOL * g.space.dx
    tol_t = _EDGE_TOL * g.time.dt
    xs = np.abs(u.x - c.x0) <= c.r + tol_x
    ts = (u.t > c.t0 - h + tol_t) & (u.t <= c.t0 + tol_t)
    partial = (
        c.x0 - c.r < g.space.x_min - tol_x
        or c.x0 + c.r > g.space.x_max + tol_x
        or c.t0 - h < g.time.t_start - tol_t
        or c.t0 > g.time.t_end + tol_t
    )
    return xs, ts, partial


def cylinder_nodes(u, c):
    """Counts of spatial and temporal nodes inside ``c`` and whether ``c`` leaves the field."""
    xs, ts, partial = _node_masks(u, c)
    return int(xs.sum()), int(ts.sum()), partial


def oscillation(u, c):
    """``max - min`` of the field over the grid nodes inside the cylinder."""
    xs, ts, _ = _node_masks(u, c)
    if not xs.any() or not ts.any():
        raise ValueError("cylinder does not intersect the solved region")
    block = u.values[np.ix_(ts, xs)]
    return float(block.max() - block.min())


def time_oscillation(u, c):
    """Oscillation in time alone at the node nearest ``x0``."""
    _, ts, _ = _node_masks(u, c)
    if not ts.any():
        raise ValueError("cylinder does not intersect the solved time range")
    j = int(np.argmin(np.abs(u.x - c.x0)))
    column = u.values[ts, j]
    return float(column.max() - column.min())


@dataclass
class OscillationReport:
    scales: list
    osc: list
    kappa_fit: float | None
    kappa_time_fit: float | None
    alpha: float
    sigma: float
    theta_measured: list
    flags: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["k", "r^k", "osc", "theta_k"])
        for k, (r, o) in enumerate(zip(self.scales, self.osc)):
            theta = self.theta_measured[k] if k < len(self.theta_measured) else None
            w.writerow([k, repr(r), repr(o), "" if theta is None else repr(theta)])
        return buf.getvalue()


def _slope(x, y):
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def fit_holder(u, center, r, depth=4, ratio=0.25):
    """Fit spatial and temporal Hölder exponents from nested cylinders.

    Scales are ``r * ratio**k`` for ``k = 0..depth``. The spatial exponent is
    the least-squares slope of ``log osc`` against ``log r_k``; the temporal one
    uses oscillation in time alone at ``x0`` against the cylinder height.
    """
    if depth < 3:
        raise ValueError("depth must be at least 3")
    if not (0.0 < ratio < 1.0):
        raise ValueError("ratio must lie in (0, 1)")
    x0, t0 = center
    g = u.grid
    cyls = [Cylinder(x0, t0, r * ratio**k) for k in range(depth + 1)]
    nx, nt, _ = cylinder_nodes(u, cyls[-1])
    if nx < MIN_NODES or nt < MIN_NODES:
        raise InsufficientResolution(
            f"smallest cylinder holds {nx} x {nt} nodes; need {MIN_NODES} x {MIN_NODES}"
        )
    flags = []
    scales = [c.r for c in cyls]
    osc = [oscillation(u, c) for c in cyls]
    t_osc = [time_oscillation(u, c) for c in cyls]
    heights = [c.height(g.sigma, g.alpha) for c in cyls]
    if any(cylinder_nodes(u, c)[2] for c in cyls):
        flags.append("partial")
    if any(b > a * (1.0 + 1e-12) for a, b in zip(osc, osc[1:])):
        flags.append("nonmonotone")
    theta = [1.0 - b / a if a > 0.0 else None for a, b in zip(osc, osc[1:])]

    floor = 1e-13 * max(1.0, float(np.abs(u.values).max()))
    keep = [
        k
        for k, c in enumerate(cyls)
        if osc[k] > floor and math.prod(cylinder_nodes(u, c)[:2]) >= MIN_CYLINDER_NODES
    ]
    kappa = _slope([scales[k] for k in keep], [osc[k] for k in keep]) if len(keep) >= 2 else None
    if osc[0] <= floor:
        flags.append("zero_oscillation")
        kappa = None
    keep_t = [k for k in range(len(cyls)) if t_osc[k] > floor]
    kappa_t = (
        _slope([heights[k] for k in keep_t], [t_osc[k] for k in keep_t]) if len(keep_t) >= 2 else None
    )
    if kappa_t is None:
        flags.append("zero_time_oscillation")
    return OscillationReport(
        scales=scales,
        osc=osc,
        kappa_fit=kappa,
        kappa_time_fit=kappa_t,
        alpha=g.alpha,
        sigma=g.sigma,
        theta_measured=theta,
        flags=flags,
    )


@dataclass
class SweepResult:
    reports: list
    summary: dict

    def to_json(self):
        return json.dumps(
            {"reports": [asdict(r) for r in self.reports], "summary": self.summary}, indent=2
        )


def _summary(reports):
    kappas = [r.kappa_fit for r in reports if r.kappa_fit is not None]
    if not kappas:
        return {"alphas": [r.alpha for r in reports], "kappa_min": None, "kappa_max": None, "spread": None}
    lo, hi = min(kappas), max(kappas)
    return {
        "alphas": [r.alpha for r in reports],
        "kappa_min": lo,
        "kappa_max": hi,
        "spread": hi / lo if lo > 0.0 else None,
    }


def alpha_sweep(spec_template, alphas, grid, center, r, depth=4, ratio=0.25, c_stab=C_STAB):
    """Solve the same data for each order and fit exponents.

    The spatial grid and the time window of ``grid`` are kept; ``dt`` is
    re-derived per order from the stability bound. A failed solve raises
    :class:`SweepAborted` carrying the reports finished so far.
    """
    reports = []
    t0, t1 = grid.time.t_start, grid.time.t_end
    for a in alphas:
        try:
            spec = replace(spec_template, alpha=float(a))
            g = SpaceTimeGrid.stable(grid.space, t0, t1, float(a), spec.ell, c_stab)
            u = solve(spec, g, c_stab)
            reports.append(fit_holder(u, center, r, depth, ratio))
        except Exception as exc:
            raise SweepAborted(f"sweep failed at alpha={a}: {exc}", list(reports), exc) from exc
    return SweepResult(reports, _summary(reports))


# --------------------------------------------------------------------------
# oscillation-decay probe on Q_1 = B_1 x [-1, 0]


def _probe_points():
    mag = np.geomspace(1.0, 1e3, 64)
    return np.concatenate([-mag[::-1], mag])


def check_hypotheses(spec, grid, epsilon0=EPSILON0, nu=NU):
    """Return the list of violated normalization and growth conditions (empty when admissible)."""
    problems = []
    space = grid.space
    x = space.points
    inside = np.abs(x) <= 1.0 + 1e-12
    u0 = np.asarray(spec.initial(x), dtype=float) * np.ones(x.size)
    if np.any(np.abs(u0[inside]) > 1.0 + 1e-12):
        problems.append("|u| <= 1 fails on B_1 at the initial time")
    ext = space.exterior
    xs = _probe_points()
    bound_x = 2.0 * np.abs(4.0 * xs) ** nu - 1.0
    vals = space.exterior_values(xs)
    if np.any(np.abs(vals) > bound_x + 1e-12):
        problems.append("exterior data exceeds 2|4x|^nu - 1")
    if isinstance(ext, AnalyticExterior) and ext.nu > nu + 1e-12:
        problems.append("declared exterior growth exceeds nu")
    if spec.past is not None:
        ts = -np.geomspace(1.0, 1e3, 64)
        bound_t = 2.0 * np.abs(4.0 * ts) ** nu - 1.0
        xx = x[inside][:, None]
        g = np.asarray(spec.past.fn(xx, ts[None, :]), dtype=float)
        if np.any(np.abs(g) > bound_t[None, :] + 1e-12):
            problems.append("past data exceeds 2|4t|^nu - 1")
    ts = grid.time.points
    f = np.array([np.asarray(spec.forcing(x, t), dtype=float) * np.ones(x.size) for t in ts])
    if np.max(np.abs(f)) > epsilon0 / 2.0 + 1e-15:
        problems.append("forcing exceeds epsilon0 / 2")
    return problems


def probe_grid(spec, dx=1.0 / 32.0, exterior=None, c_stab=C_STAB):
    """Stable grid on ``[-1, 1] x [-1, 0]``."""
    n = int(round(2.0 / dx)) + 1
    space = SpaceGrid(-1.0, 1.0, n, exterior or ConstantExterior(0.0))
    return SpaceTimeGrid.stable(space, -1.0, 0.0, spec.alpha, spec.ell, c_stab)


def diminish_oscillation_probe(spec, grid, epsilon0=EPSILON0, nu=NU):
    """Measure ``theta = 1 - osc`` over ``Q_{1/4}`` of the solution on ``Q_1``.

    Raises :class:`HypothesisViolation` without solving when the data is not
    normalized. ``passed`` is ``theta > THETA_FLOOR``.
    """
    problems = check_hypotheses(spec, grid, epsilon0, nu)
    if problems:
        raise HypothesisViolation("; ".join(problems))
    u = solve(spec, grid)
    osc = oscillation(u, Cylinder(0.0, 0.0, 0.25))
    theta = 1.0 - osc
    return theta, bool(theta > THETA_FLOOR)


__all__ = [
    "Cylinder",
    "OscillationReport",
    "SweepResult",
    "alpha_sweep",
    "check_hypotheses",
    "cylinder_nodes",
    "diminish_oscillation_probe",
    "fit_holder",
    "oscillation",
    "probe_grid",
    "time_oscillation",
]
