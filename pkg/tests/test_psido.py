import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zklab.psido import (
    CATALOG,
    CallableSymbol,
    SeparableSymbol,
    XFactor,
    bessel_symbol,
    catalog_symbol,
    class_seminorms,
    commutator_factorize,
    compose_expansion,
    continuity_ratios,
    dense_matrix,
    fit_interpolation_constant,
    interpolation_check,
    product_symbol,
    quantize_apply,
    remainder_curve,
    schwartz_ensemble,
    separated_support_constant,
    weight_symbol,
)
from zklab.spectral import Field, apply_bessel, make_grid
from zklab.weights import CutoffFamily, bracket_power


@pytest.fixture(scope="module")
def grid():
    return make_grid(1, 32.0, 64)


@pytest.fixture(scope="module")
def ensemble():
    return schwartz_ensemble(1, 32.0, size=20, seed=1)


def sample(grid, seed=0):
    return schwartz_ensemble(grid.dim, grid.box_length, size=1, seed=seed)[0](grid)


def test_identity_symbol(grid):
    f = sample(grid)
    np.testing.assert_allclose(quantize_apply(catalog_symbol("identity"), f).values, f.values, atol=1e-14)


@pytest.mark.parametrize("s", [-1.5, 1.0, 2.5])
def test_multiplier_symbol_is_bessel(grid, s):
    f = sample(grid, 3)
    out = quantize_apply(bessel_symbol(s), f)
    np.testing.assert_allclose(out.values, apply_bessel(f, s).values, atol=1e-10)


def test_multiplication_symbol_is_pointwise(grid):
    f = sample(grid, 4)
    out = quantize_apply(weight_symbol(1.5, omega=0.7), f)
    np.testing.assert_allclose(out.values, bracket_power(grid.coords[0] + 0.7, 1.5) * f.values, atol=1e-12)


def test_two_dimensional_multiplication_case():
    grid = make_grid(2, 16.0, 16)
    f = sample(grid, 2)
    sym = weight_symbol(1.0, sigma=(1.0, 0.5), omega=0.2)
    expected = bracket_power(grid.dot((1.0, 0.5)) + 0.2, 1.0) * f.values
    np.testing.assert_allclose(quantize_apply(sym, f).values, expected, atol=1e-12)


def test_grid_mismatch_raises():
    f = sample(make_grid(2, 16.0, 16))
    with pytest.raises(ValueError):
        quantize_apply(bessel_symbol(1.0), f)


def test_linearity(grid):
    a = product_symbol(1.0, 1.0)
    b = catalog_symbol("cutoff-product", m=0.5, q=2.0)
    f = sample(grid, 5)
    lhs = quantize_apply(a.scale(2.0) + b.scale(-0.5), f, True)
    rhs = 2.0 * quantize_apply(a, f, True) - 0.5 * quantize_apply(b, f, True)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(rhs))


@pytest.mark.parametrize("name", CATALOG)
def test_dense_matrix_oracle_16_points(name):
    grid = make_grid(1, 8.0, 16)
    f = Field(grid, np.random.default_rng(1).standard_normal(16))
    sym = catalog_symbol(name, m=1.0, q=1.0, omega=0.3, cutoff=CutoffFamily(0.5, 2.5))
    err = np.max(np.abs(dense_matrix(sym, grid) @ f.values - quantize_apply(sym, f, True)))
    assert err < 1e-10


def test_callable_symbol_matches_catalog(grid):
    fn = lambda x, k: bracket_power(x[0], 1.0) * (1 + k[0] ** 2) ** 0.5
    sym = CallableSymbol.on_grid(fn, grid, 1.0, 1.0)
    f = sample(grid, 6)
    np.testing.assert_allclose(quantize_apply(sym, f).values,
                               quantize_apply(product_symbol(1.0, 1.0), f).values, atol=1e-10)
    # centred differences in x approximate the analytic derivative
    dx = sym.x_derivative((1,)).dense(grid)
    exact = product_symbol(1.0, 1.0).x_derivative((1,)).dense(grid)
    assert np.max(np.abs(dx - exact)) < 0.05 * np.max(np.abs(exact))


def test_seminorms_example_symbol_bounded(grid):
    table = class_seminorms(product_symbol(1.0, 1.0), grid)
    assert not table.diverges
    assert np.isfinite(table.max_constant())
    # flat in xi: the normalised sup varies little over the wavenumber shells
    prof = table.xi_profile
    assert prof.max() <= 1.0 + 1e-12


def test_seminorms_flag_wrong_order(grid):
    wrong = SeparableSymbol(bessel_symbol(2.0).terms, 1.0, 0.0, (1.0,))
    assert class_seminorms(wrong, grid).diverges


def test_seminorms_cutoff_variant_bounded(grid):
    sym = catalog_symbol("cutoff-product", m=1.0, q=1.0, cutoff=CutoffFamily(3.0, 15.0))
    assert not class_seminorms(sym, grid).diverges


def test_seminorm_order_cap(grid):
    with pytest.raises(ValueError):
        class_seminorms(bessel_symbol(1.0), grid, max_order=4)


def test_composition_reduced_cases(grid):
    a, b = bessel_symbol(1.0), weight_symbol(1.0)
    c1 = compose_expansion(b, a, 1)
    np.testing.assert_allclose(c1.dense(grid), b.dense(grid) * a.dense(grid))
    for N in (1, 2, 3, 4):
        cN = compose_expansion(a, a, N)
        np.testing.assert_allclose(cN.dense(grid), bessel_symbol(2.0).dense(grid), atol=1e-12)
    with pytest.raises(ValueError):
        compose_expansion(a, a, 5)


def test_composition_remainder_decreases(grid, ensemble):
    curve = remainder_curve(bessel_symbol(1.0), weight_symbol(1.0), grid, ensemble, (1, 2, 3))
    assert np.all(np.diff(curve) < 0)
    assert np.all(np.diff(np.log(curve)) < 0)


def test_commutator_constant_multiplier(grid, ensemble):
    g = Field(grid, np.full(grid.shape, 2.5))
    rep = commutator_factorize(g, bessel_symbol(1.0), 3, grid, ensemble)
    assert rep.remainder_bound < 1e-12
    nonzero = [c for c in rep.corrections if np.any(c[3].values(grid))]
    assert not nonzero


def test_commutator_cutoff_remainder_decreases(grid, ensemble):
    g = XFactor((1.0,), 0.0, 0.0, CutoffFamily(3.0, 15.0))
    r2 = commutator_factorize(g, bessel_symbol(1.0), 2, grid, ensemble).remainder_bound
    r3 = commutator_factorize(g, bessel_symbol(1.0), 3, grid, ensemble).remainder_bound
    assert r3 < r2


def test_separated_support_constant_stable_in_m(grid):
    g = Field(grid, CutoffFamily(1.0, 5.0).chi(grid.coords[0] - 6.0))
    x = grid.coords[0]
    fields = [Field(grid, np.exp(-0.5 * ((x + c) / w) ** 2)) for c in (2.0, 4.0) for w in (0.8, 1.2)]
    c1 = separated_support_constant(g, 1, grid, fields)
    c2 = separated_support_constant(g, 2, grid, fields)
    unseparated = separated_support_constant(Field(grid, np.ones(grid.shape)), 1, grid, fields)
    assert c1 < 1e-3 * unseparated
    assert c2 < 1e-3 * unseparated


def test_continuity_ratios_stable():
    sym = catalog_symbol("product", m=1.0, q=1.0)
    ens = schwartz_ensemble(1, 32.0, size=10, seed=1)
    r64, r128 = continuity_ratios(sym, 32.0, 1, (64, 128), ens)
    assert abs(r128 - r64) <= 0.2 * r64


def test_interpolation_small_theta_and_log_convexity():
    grid = make_grid(1, 32.0, 128)
    x = grid.coords[0]
    f = Field(grid, np.exp(-0.5 * (x / 0.3) ** 2))
    rep = interpolation_check(f, 1.0, 1.0, 1e-6)
    assert np.isfinite(rep.ratio) and rep.ratio <= 1.0 + 1e-5
    # near the origin <x> is about 1 and the bound is Hoelder for Sobolev norms
    theta, a = 0.5, 2.0
    lhs = apply_bessel(f, (1 - theta) * a).norm()
    assert lhs <= apply_bessel(f, a).norm() ** (1 - theta) * f.norm() ** theta * (1 + 1e-12)
    rep = interpolation_check(f, a, 1.0, theta)
    assert abs(rep.lhs / lhs - 1.0) < 0.1
    with pytest.raises(ValueError):
        interpolation_check(f, a, 1.0, 1.0)


def test_interpolation_held_out_no_violation(grid):
    fit = schwartz_ensemble(1, 32.0, size=100, seed=1)
    held = schwartz_ensemble(1, 32.0, size=100, seed=2)
    C = fit_interpolation_constant(grid, 1.0, 1.0, 0.5, fit)
    ratios = [interpolation_check(s(grid), 1.0, 1.0, 0.5).ratio for s in held]
    assert max(ratios) <= 1.05 * C


@settings(max_examples=20, deadline=None)
@given(m=st.floats(-2, 2), q=st.floats(0, 2), omega=st.floats(-3, 3), seed=st.integers(0, 1000))
def test_separable_apply_matches_dense(m, q, omega, seed):
    grid = make_grid(1, 8.0, 16)
    sym = product_symbol(m, q, omega=omega)
    f = Field(grid, np.random.default_rng(seed).standard_normal(16))
    dense = dense_matrix(sym, grid) @ f.values
    assert np.max(np.abs(dense - quantize_apply(sym, f, True))) < 1e-10 * max(1.0, np.max(np.abs(dense)))
