import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from fracparabolic.errors import ConvergenceError
from fracparabolic.nonlocal_spatial import (
    AnalyticExterior,
    ConstantExterior,
    Ellipticity,
    KernelFamily,
    SpaceGrid,
    SpatialField,
    isaacs_apply,
    isaacs_argopt,
    linear_apply,
    pucci_minus,
    pucci_plus,
    second_difference,
    stencil,
)


def field(fn, x_min=-1.0, x_max=1.0, n=65, exterior=None):
    grid = SpaceGrid(x_min, x_max, n, exterior if exterior is not None else AnalyticExterior(fn))
    return SpatialField.from_function(grid, fn)


def cos_field(n):
    ext = AnalyticExterior(np.cos, 0.0, tail_panel=1.0 / 64.0)
    return SpatialField.from_function(SpaceGrid(-4.0, 4.0, n, ext), np.cos)


def cos_oracle(sigma, lam=1.0, Lam=1.0):
    # delta(cos, 0, y) = 2 cos y - 2 <= 0 everywhere, so only the lower constant acts
    f = lambda y: (2.0 * math.cos(y) - 2.0) * y ** (-1.0 - 2.0 * sigma)
    total = quad(f, 0.0, 1.0)[0]
    total += sum(quad(f, a, a + 2 * math.pi, limit=200)[0] for a in 1.0 + 2 * math.pi * np.arange(400))
    total += quad(lambda y: -2.0 * y ** (-1.0 - 2.0 * sigma), 1.0 + 800 * math.pi, np.inf)[0]
    return 2.0 * lam * total


# ---------------------------------------------------------------- second differences


def test_second_difference_of_square():
    u = field(lambda x: x**2)
    assert second_difference(u, 32, 0.3) == pytest.approx(0.18, abs=1e-12)
    assert second_difference(u, 32, 0.25) == pytest.approx(0.125, abs=1e-14)


def test_second_difference_of_affine_is_zero():
    u = field(lambda x: 3.0 * x - 1.0)
    for k in (0, 10, 64):
        for y in (0.03125, 0.1, 1.7):
            assert second_difference(u, k, y) == pytest.approx(0.0, abs=1e-12)


def test_second_difference_of_cos():
    u = field(np.cos, -4.0, 4.0, 129)
    assert second_difference(u, 64, math.pi) == pytest.approx(-4.0, abs=1e-5)


def test_second_difference_reads_constant_exterior():
    grid = SpaceGrid(-1.0, 1.0, 9, ConstantExterior(2.0))
    u = SpatialField(grid, np.zeros(9))
    assert second_difference(u, 0, 0.25) == 2.0


# ---------------------------------------------------------------- Pucci operators


@pytest.mark.parametrize("value", [0.0, 1.0, -3.5])
def test_constant_field_gives_zero(value):
    grid = SpaceGrid(-1.0, 1.0, 33, ConstantExterior(value))
    u = SpatialField(grid, np.full(33, value))
    ell = Ellipticity(0.5, 2.0, 0.4)
    assert np.all(pucci_plus(u, None, ell) == 0.0)
    assert np.all(pucci_minus(u, None, ell) == 0.0)


def test_cos_oracle_is_minus_two_pi():
    assert cos_oracle(0.5) == pytest.approx(-2.0 * math.pi, rel=1e-6)


def test_cos_oracle_agreement_and_order():
    ell = Ellipticity(1.0, 1.0, 0.5)
    exact = -2.0 * math.pi
    errs = []
    for n in (33, 65, 129):
        u = cos_field(n)
        errs.append(abs(pucci_plus(u, (n - 1) // 2, ell) - exact))
    assert errs[1] <= 0.01 * abs(exact)
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.0)


def test_cos_oracle_picks_the_right_constant():
    ell = Ellipticity(1.0, 2.0, 0.5)
    u = cos_field(129)
    # every second difference at 0 is nonpositive
    assert pucci_plus(u, 64, ell) == pytest.approx(-2.0 * math.pi, rel=2e-3)
    assert pucci_minus(u, 64, ell) == pytest.approx(-4.0 * math.pi, rel=2e-3)


def test_mirror_identity():
    ell = Ellipticity(0.3, 1.7, 0.6)
    rng = np.random.default_rng(1)
    v = rng.normal(size=41)
    grid = SpaceGrid(-1.0, 1.0, 41, ConstantExterior(0.0))
    u = SpatialField(grid, v)
    neg = SpatialField(grid, -v)
    assert np.allclose(pucci_minus(u, None, ell), -pucci_plus(neg, None, ell), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    values=st.lists(st.floats(-2, 2), min_size=17, max_size=17),
    c=st.floats(0.01, 10.0),
)
def test_positive_homogeneity(values, c):
    ell = Ellipticity(0.5, 1.5, 0.3)
    grid = SpaceGrid(-1.0, 1.0, 17, ConstantExterior(0.0))
    a = pucci_plus(SpatialField(grid, c * np.array(values)), None, ell)
    b = c * pucci_plus(SpatialField(grid, values), None, ell)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(values=st.lists(st.floats(-2, 2), min_size=17, max_size=17), seed=st.integers(0, 2**32 - 1))
def test_sandwich(values, seed):
    ell = Ellipticity(0.5, 1.5, 0.4)
    grid = SpaceGrid(-1.0, 1.0, 17, ConstantExterior(0.3))
    u = SpatialField(grid, values)
    rng = np.random.default_rng(seed)
    freq = rng.uniform(0.5, 4.0)
    members = [
        [rng.uniform(0.5, 1.5), lambda t, x, y: 1.0 + 0.5 * np.cos(freq * y) * np.sin(x)],
        [rng.uniform(0.5, 1.5)],
    ]
    fam = KernelFamily(ell, members)
    mid = isaacs_apply(u, None, fam)
    scale = 1.0 + np.abs(pucci_plus(u, None, ell)).max()
    assert np.all(pucci_minus(u, None, ell) <= mid + 1e-12 * scale)
    assert np.all(mid <= pucci_plus(u, None, ell) + 1e-12 * scale)


@settings(max_examples=30, deadline=None)
@given(
    values=st.lists(st.floats(-2, 2), min_size=17, max_size=17),
    bumps=st.lists(st.floats(0, 1), min_size=17, max_size=17),
    k=st.integers(0, 16),
)
def test_monotone_at_touching_point(values, bumps, k):
    ell = Ellipticity(0.5, 1.5, 0.4)
    grid = SpaceGrid(-1.0, 1.0, 17, ConstantExterior(0.0))
    lo = np.array(values)
    hi = lo + np.array(bumps)
    hi[k] = lo[k]
    u, v = SpatialField(grid, lo), SpatialField(grid, hi)
    assert pucci_plus(u, k, ell) <= pucci_plus(v, k, ell) + 1e-12
    assert pucci_minus(u, k, ell) <= pucci_minus(v, k, ell) + 1e-12
    fam = KernelFamily.constant(ell, [[0.5, 1.5], [1.0]])
    assert isaacs_apply(u, k, fam) <= isaacs_apply(v, k, fam) + 1e-12


def test_translation_invariance():
    ell = Ellipticity(0.5, 1.5, 0.5)
    g = lambda x: np.exp(-4.0 * x**2)
    a = field(g, -2.0, 2.0, 81, ConstantExterior(0.0))
    shift = 0.25
    b = field(lambda x: g(x - shift), -2.0 + shift, 2.0 + shift, 81, ConstantExterior(0.0))
    assert np.allclose(pucci_plus(a, None, ell), pucci_plus(b, None, ell), atol=1e-13)


def test_singleton_unit_kernel_equals_pucci():
    ell = Ellipticity(1.0, 1.0, 0.5)
    u = field(lambda x: np.sin(2 * x) + x**2, n=33, exterior=ConstantExterior(0.5))
    fam = KernelFamily.constant(ell, [[1.0]])
    assert np.allclose(isaacs_apply(u, None, fam), pucci_plus(u, None, ell), atol=1e-12)


def test_extreme_pair_inf_picks_lambda_on_convex_data():
    ell = Ellipticity(0.5, 2.0, 0.5)
    u = field(lambda x: x**2, n=33, exterior=AnalyticExterior(lambda x: x**2, 0.0))
    # every second difference of x^2 is nonnegative, so the inf takes the lower constant
    lam = isaacs_apply(u, 16, KernelFamily.constant(ell, [[0.5, 2.0]]))
    # far field of x^2 grows faster than the kernel decays at sigma=0.5, hence a wide bound
    fam = KernelFamily.constant(ell, [[0.5]])
    assert lam == pytest.approx(isaacs_apply(u, 16, fam), rel=1e-14)
    assert isaacs_argopt(u, 16, KernelFamily.constant(ell, [[2.0, 0.5]])) == (0, 1)


def test_argopt_tie_breaks_to_lowest_index():
    ell = Ellipticity(0.5, 2.0, 0.5)
    grid = SpaceGrid(-1.0, 1.0, 9, ConstantExterior(0.0))
    u = SpatialField(grid, np.zeros(9))
    fam = KernelFamily.constant(ell, [[1.0, 1.0], [1.0]])
    assert isaacs_argopt(u, 4, fam) == (0, 0)


def test_growth_at_order_diverges():
    grid = SpaceGrid(-1.0, 1.0, 17, AnalyticExterior(np.abs, 1.0))
    u = SpatialField.from_function(grid, np.abs)
    with pytest.raises(ConvergenceError):
        pucci_plus(u, 8, Ellipticity(1.0, 1.0, 0.5))


def test_growth_below_order_is_accepted():
    fn = lambda x: np.abs(x) ** 0.3
    grid = SpaceGrid(-1.0, 1.0, 17, AnalyticExterior(fn, 0.3))
    u = SpatialField.from_function(grid, fn)
    assert math.isfinite(pucci_plus(u, 8, Ellipticity(1.0, 1.0, 0.5)))


def test_weights_are_positive():
    for sigma in (0.1, 0.5, 0.9):
        st_ = stencil(SpaceGrid(-1.0, 1.0, 33, AnalyticExterior(np.cos)), sigma)
        assert np.all(st_.coef > 0.0) and np.all(st_.tail_w > 0.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(lam=0.0, Lam=1.0, sigma=0.5),
        dict(lam=2.0, Lam=1.0, sigma=0.5),
        dict(lam=1.0, Lam=1.0, sigma=1.0),
        dict(lam=1.0, Lam=1.0, sigma=0.0),
    ],
)
def test_ellipticity_validation(kwargs):
    with pytest.raises(ValueError):
        Ellipticity(**kwargs)


def test_family_validation():
    ell = Ellipticity(0.5, 1.5, 0.5)
    with pytest.raises(ValueError):
        KernelFamily.constant(ell, [[2.0]])
    with pytest.raises(ValueError):
        KernelFamily(ell, [[lambda t, x, y: 1.0 + 0.4 * np.sin(y)]])
    with pytest.raises(ValueError):
        KernelFamily(ell, [[]])


def test_field_rejects_bad_values():
    grid = SpaceGrid(-1.0, 1.0, 5)
    with pytest.raises(ValueError):
        SpatialField(grid, np.zeros(4))
    with pytest.raises(ValueError):
        SpatialField(grid, [0, 0, np.inf, 0, 0])


@pytest.mark.parametrize("sigma,min_order", [(0.25, 1.5), (0.5, 2.0), (0.75, 1.5)])
def test_refinement_order_on_gaussian(sigma, min_order):
    ell = Ellipticity(1.0, 1.0, sigma)
    g = lambda x: np.exp(-(x**2))
    vals = []
    for n in (41, 81, 161, 321):
        u = field(g, -4.0, 4.0, n, AnalyticExterior(g))
        vals.append(pucci_plus(u, (n - 1) // 2, ell))
    d = np.abs(np.diff(vals))
    orders = np.log2(d[:-1] / d[1:])
    assert np.all(orders >= min_order)
