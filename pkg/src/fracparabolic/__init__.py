"""Numerics for parabolic equations with a Caputo time derivative and nonlocal elliptic operators."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConvergenceError,
    GridMismatchError,
    HypothesisViolation,
    InsufficientResolution,
    NumericalFailure,
    StabilityError,
    SweepAborted,
)
from .fractional_time import (
    AnalyticTail,
    ConstantPast,
    History,
    TimeGrid,
    TimeKernel,
    caputo_eval,
    caputo_eval_series,
    caputo_product_split,
    generalized_derivative,
    solve_fode_explicit,
    solve_fode_l1,
)
from .special import mittag_leffler, mittag_leffler_deriv
from .nonlocal_spatial import (
    AnalyticExterior,
    ConstantExterior,
    Ellipticity,
    KernelFamily,
    SpaceGrid,
    SpatialField,
    isaacs_apply,
    pucci_minus,
    pucci_plus,
    second_difference,
)
from .pde_solver import (
    Field,
    ProblemSpec,
    SpaceTimeGrid,
    SpaceTimePast,
    load_checkpoint,
    save_checkpoint,
    solve,
    stable_time_step,
)
from .regularity import (
    Cylinder,
    OscillationReport,
    alpha_sweep,
    diminish_oscillation_probe,
    fit_holder,
    oscillation,
)
