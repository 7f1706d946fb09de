import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zklab.spectral import ConeVector
from zklab.weights import (
    CutoffFamily,
    ExpWeightFamily,
    PolyWeight,
    bracket_power,
    build_cutoff_family,
    eval_poly_weight,
    exp_weight_family,
    smooth_step,
    truncated_weight,
)
from zklab.lab.experiments import plateau, truncated_weight_sups


@pytest.fixture
def fam():
    return build_cutoff_family(0.1, 0.5)


def test_chi_endpoints(fam):
    assert fam.chi(np.array([0.05]))[0] == 0.0
    assert fam.chi(np.array([0.6]))[0] == 1.0


def test_partition_of_unity_on_sample_grid(fam):
    x = fam.sample_grid(2048)
    assert x.size == 2048
    total = fam.chi(x) + fam.phi(x) + fam.psi(x)
    assert np.max(np.abs(total - 1.0)) < 1e-12


def test_chi_prime_lower_bound_inside(fam):
    x = fam.sample_grid()
    inner = x[(x >= 0.2) & (x <= 0.3)]
    assert np.min(fam.chi(inner, 1)) >= 1.0 / (10 * 0.4)


def test_support_properties(fam):
    eps, tau = fam.eps, fam.tau
    x = fam.sample_grid(4096)
    assert np.all(fam.chi(x, 1) >= 0)
    assert np.all(fam.chi(x[x <= eps]) == 0)
    assert np.all(fam.chi(x[x >= tau]) == 1)
    outside = (x < eps) | (x > tau)
    assert np.all(fam.chi(x[outside], 1) == 0)
    assert np.all(np.abs(fam.phi(x[(x < eps / 4) | (x > tau)])) < 1e-15)
    np.testing.assert_allclose(fam.phi(x[(x >= eps / 2) & (x <= eps)]), 1.0, atol=1e-15)
    assert np.all(fam.psi(x[x > eps / 2]) == 0)


def test_rejects_tau_below_five_eps():
    with pytest.raises(ValueError, match="tau >= 5\\*eps"):
        CutoffFamily(0.1, 0.4)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_chi_derivatives_match_finite_differences(fam, order):
    h = 1e-5
    x = np.linspace(0.11, 0.49, 97)
    fd = (fam.chi(x + h, order - 1) - fam.chi(x - h, order - 1)) / (2 * h)
    scale = np.max(np.abs(fam.chi(x, order)))
    np.testing.assert_allclose(fam.chi(x, order), fd, atol=1e-5 * max(scale, 1.0))


def test_chi_prime_integrates_to_one(fam):
    x = np.linspace(0.0, 0.6, 200001)
    assert abs(np.trapezoid(fam.chi(x, 1), x) - 1.0) < 1e-8


def test_chi_is_continuous(fam):
    x = np.linspace(0.0, 0.6, 60001)
    assert np.max(np.abs(np.diff(fam.chi(x)))) < 1e-4


def test_derivative_support_domination(fam):
    # chi_{eps', tau'} = 1 on supp chi^{(j)} whenever tau' <= eps
    small = CutoffFamily(0.01, 0.1)
    x = np.linspace(-1, 1, 4001)
    for j in (1, 2, 3):
        d = np.abs(fam.chi(x, j))
        C = d.max()
        assert np.all(d <= C * small.chi(x) + 1e-300)


def test_smooth_step_symmetry():
    t = np.linspace(-0.5, 1.5, 501)
    np.testing.assert_allclose(smooth_step(t) + smooth_step(1 - t), 1.0, atol=1e-15)


def test_bracket_power_derivatives():
    z = np.linspace(-3, 3, 61)
    h = 1e-5
    for order in (1, 2, 3):
        fd = (bracket_power(z + h, 1.7, order - 1) - bracket_power(z - h, 1.7, order - 1)) / (2 * h)
        np.testing.assert_allclose(bracket_power(z, 1.7, order), fd, atol=1e-6)


def test_poly_weight_examples(fam):
    cone = ConeVector((1.0, 0.0), nu=1.0, kappa=0.0)
    w0 = PolyWeight(0.0, fam, cone)
    assert eval_poly_weight(w0, (0.3, 0.4), 0.0) == pytest.approx(fam.chi(np.array([0.3]))[0])
    w1 = PolyWeight(1.0, fam, ConeVector((1.0, 0.0), nu=1e-12))
    assert w1((2.0, 5.0), 0.0) == pytest.approx(np.sqrt(5.0))
    assert w1((fam.eps / 2, 1.0), 0.0) == 0.0
    # argument includes nu t + kappa
    w2 = PolyWeight(2.0, fam, ConeVector((1.0, 0.5), nu=2.0, kappa=0.1))
    z = 1.0 + 0.5 * 0.2 + 2.0 * 0.3 + 0.1
    assert w2((1.0, 0.2), 0.3) == pytest.approx((1 + z * z) * fam.chi(np.array([z]))[0])


def test_exp_family_examples():
    x = np.linspace(-5, 5, 11)
    np.testing.assert_array_equal(exp_weight_family(0.7, 0.0).q(x), np.exp(0.7 * x))
    fam = exp_weight_family(1.0, 1.0)
    assert fam.q(0.0) == pytest.approx(2 ** -0.5, abs=1e-15)
    assert fam.rho(0.0) == pytest.approx(0.5, abs=1e-15)
    assert fam.p(0.0) == pytest.approx(0.5, abs=1e-15)


def test_p_prime_identity_at_random_points(rng):
    fam = exp_weight_family(0.5, 1e-3)
    x = rng.uniform(-30, 30, 1000)
    lhs = fam.p(x, 1)
    np.testing.assert_allclose(lhs - 2 * 0.5 * fam.rho(x) ** 2, 0.0, atol=1e-12 * max(1.0, lhs.max()))


def test_exp_family_ordering_and_second_derivative():
    x = np.linspace(-20, 20, 801)
    for eta in (1.0, 1e-2, 1e-5):
        fam = ExpWeightFamily(0.8, eta)
        assert np.all(fam.rho(x) >= 0)
        assert np.all(fam.rho(x) <= fam.q(x) * (1 + 1e-15))
        assert np.all(fam.q(x) <= np.exp(0.8 * x) * (1 + 1e-15))
        assert np.all(np.abs(fam.p(x, 2)) <= 4 * 0.8 ** 2 * fam.rho(x) ** 2 * (1 + 1e-12))


@pytest.mark.parametrize("order", [1, 2, 3])
def test_exp_family_derivatives_finite_differences(order):
    fam = ExpWeightFamily(0.6, 0.05)
    x = np.linspace(-4, 6, 41)
    h = 1e-5
    fd = (fam.p(x + h, order - 1) - fam.p(x - h, order - 1)) / (2 * h)
    np.testing.assert_allclose(fam.p(x, order), fd, rtol=1e-6, atol=1e-8)


def test_exp_family_monotone_convergence():
    x = np.linspace(-5, 5, 101)
    etas = [1.0, 0.1, 1e-2, 1e-4, 1e-8]
    qs = np.array([ExpWeightFamily(0.5, eta).q(x) for eta in etas])
    assert np.all(np.diff(qs, axis=0) >= 0)
    # 1 - q/e^{bx} <= eta e^{2bx} / 2
    gap = 1 - qs[-1] / np.exp(0.5 * x)
    assert np.all(gap <= 0.5 * 1e-8 * np.exp(x) + 1e-15)


def test_truncated_weight_examples():
    w = truncated_weight(4, 1)
    assert w(np.array([2.0]))[0] == pytest.approx(np.sqrt(5.0), abs=1e-14)
    assert w(np.array([20.0]))[0] == 8.0
    assert w(np.array([12.0]))[0] == pytest.approx(8.0, abs=1e-12)


@pytest.mark.parametrize("N", [1, 4, 16])
def test_truncated_weight_shape(N):
    w = truncated_weight(N, 1)
    y = np.linspace(0, 4 * N, 20001)
    vals = w.profile(y)
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.max(np.abs(w.profile(y, 1))) <= 1.0
    assert w.ell <= 2 * N
    np.testing.assert_allclose(vals[y >= 3 * N], 2.0 * N, atol=1e-10)


@pytest.mark.parametrize("alpha", [(1, 0), (0, 1), (2, 0), (1, 1), (3, 0), (1, 2)])
def test_truncated_weight_2d_derivatives(alpha):
    w = truncated_weight(2, 2)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-7, 7, size=(2, 40))
    pts = pts[:, np.hypot(*pts) > 0.3]
    r = 0.5
    h = 1e-4
    axis = 0 if alpha[0] else 1
    lower = list(alpha)
    lower[axis] -= 1
    shift = np.zeros((2, 1))
    shift[axis] = h
    fd = (w.power_derivative(pts + shift, r, lower) - w.power_derivative(pts - shift, r, lower)) / (2 * h)
    np.testing.assert_allclose(w.power_derivative(pts, r, alpha), fd, atol=1e-5)


def test_truncated_weight_plateau():
    sups = truncated_weight_sups(levels=tuple(range(1, 17)), samples=4001)
    for r, table in sups.items():
        assert plateau(table), r


def test_plateau_flags_growth():
    table = np.outer(np.arange(1, 6), np.ones(3))
    assert not plateau(table)


@settings(max_examples=50, deadline=None)
@given(eps=st.floats(0.01, 2.0), ratio=st.floats(5.0, 20.0))
def test_partition_of_unity_any_parameters(eps, ratio):
    fam = CutoffFamily(eps, eps * ratio)
    x = fam.sample_grid(512)
    assert np.max(np.abs(fam.chi(x) + fam.phi(x) + fam.psi(x) - 1)) < 1e-12
    assert np.all(np.diff(fam.chi(x)) >= -1e-15)
    assert fam.lower_bound_iv() >= 0.5 * eps / (fam.tau - 3 * eps)
