"""Named initial and exterior data used by the harness and the CLI."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .nonlocal_spatial import AnalyticExterior, ConstantExterior


@dataclass(frozen=True, eq=False)
class Preset:
    name: str
    initial: Callable[[np.ndarray], np.ndarray]
    exterior: ConstantExterior | AnalyticExterior


def constant(value=1.0):
    value = float(value)
    return Preset("constant", lambda x: np.full(np.shape(x), value), ConstantExterior(value))


def bump(amplitude=1.0, width=0.25):
    """Gaussian bump; the zero exterior differs from it by ``exp(-(1/width)**2)`` at ``|x| = 1``."""
    amplitude, width = float(amplitude), float(width)
    return Preset(
        "bump",
        lambda x: amplitude * np.exp(-((np.asarray(x) / width) ** 2)),
        ConstantExterior(0.0),
    )


def half_negative(amplitude=0.9, width=0.5):
    """Odd profile ``amplitude * tanh(x / width)``: nonpositive on half of every centered ball."""
    amplitude, width = float(amplitude), float(width)

    def fn(x):
        return amplitude * np.tanh(np.asarray(x) / width)

    return Preset("half_negative", fn, AnalyticExterior(fn, 0.0))


def planted_exponent(kappa=0.3):
    """``|x|**kappa``, continued outside the grid with declared growth ``kappa``."""
    kappa = float(kappa)

    def fn(x):
        return np.abs(np.asarray(x)) ** kappa

    return Preset("planted_exponent", fn, AnalyticExterior(fn, kappa))


PRESETS = {
    "constant": constant,
    "bump": bump,
    "half_negative": half_negative,
    "planted_exponent": planted_exponent,
}


def get(name, **params):
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(**params)
