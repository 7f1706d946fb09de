from math import ceil, floor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zklab.diagnostics import (
    MovingRegion,
    SeamError,
    band_mass,
    boundedness_verdict,
    cone_check,
    energy_identity_residual,
    exp_smoothing_scan,
    gain_of_regularity_scan,
    linear_weighted_growth_check,
    r_s,
    strip_smoothing_integral,
    sup_over_window,
    weighted_halfspace_norm,
)
from zklab.evolve import SolverConfig, SpectralSolver, Trajectory
from zklab.spectral import ConeVector, Field, cone_condition, linear_propagate, make_grid
from zklab.weights import CutoffFamily, bracket_power


def bump(grid, center=0.0, width=1.5):
    r2 = (grid.coords[0] - center) ** 2 + sum(x ** 2 for x in grid.coords[1:])
    return Field(grid, np.exp(-0.5 * r2 / width ** 2))


def linear_trajectory(u0, t_end, n, model):
    cfg = SolverConfig(model, t_end / n, t_end, snapshot_stride=1)
    traj = Trajectory(u0.grid, cfg)
    for t in np.linspace(0.0, t_end, n + 1):
        traj.append(t, linear_propagate(u0, t, model))
    return traj


# ------------------------------------------------------------------ cone


def test_cone_check_examples():
    ok, lam = cone_check((1.0, 0.0))
    assert ok and lam == pytest.approx(1.0)
    assert not cone_check((1.0, np.sqrt(3) + 0.01))[0]
    ok, lam = cone_check((1.0, 1.0))
    assert ok and lam == pytest.approx(2 - np.sqrt(2), abs=1e-14)
    with pytest.raises(ValueError):
        cone_check((0.0, 0.0))


@settings(max_examples=200, deadline=None)
@given(s1=st.floats(-3, 3), s2=st.floats(-6, 6))
def test_cone_check_agrees_with_condition(s1, s2):
    sigma = (s1, s2)
    if not any(sigma):
        return
    ok, lam = cone_check(sigma)
    if abs(lam) > 1e-9:
        assert ok == cone_condition(sigma)


# ------------------------------------------------------------------ r_s


def test_r_s_examples():
    assert r_s(1, 1) == 0.5
    assert r_s(2.4, 3) == pytest.approx(0.9)
    for r in (0.5, 1.0, 2.7):
        assert r_s(r, 0) == r
    with pytest.raises(ValueError):
        r_s(1.0, 3)
    with pytest.raises(ValueError):
        r_s(0.4, 0)


def test_r_s_formula_on_grid_and_monotone():
    for r in np.linspace(0.5, 4.0, 8):
        k = floor(2 * r)
        s_grid = np.linspace(0, k, 20)
        vals = [r_s(r, s) for s in s_grid]
        assert vals == [max((1 - s / k) * r, r - ceil(s) / 2) for s in s_grid]
        assert np.all(np.diff(vals) <= 0)


# ------------------------------------------------------------------ norms


@pytest.fixture(scope="module")
def grid2():
    return make_grid(2, 40.0, 64)


def test_zero_field_norm(grid2):
    region = MovingRegion(ConeVector((1.0, 0.0)))
    assert weighted_halfspace_norm(Field.zeros(grid2), region, 0.0, ("poly", 2.0)) == 0.0


def test_bump_left_of_threshold(grid2):
    u = bump(grid2, center=-8.0, width=1.0)
    region = MovingRegion(ConeVector((1.0, 0.0), nu=1.0, kappa=2.0), eps=0.5)
    val = weighted_halfspace_norm(u, region, 0.0, ("poly", 1.0))
    assert val < 1e-10 * u.norm() ** 2


def test_whole_box_parseval(grid2):
    u = bump(grid2, 1.0)
    region = MovingRegion(ConeVector((1.0, 0.0), kappa=-1e6))
    val = weighted_halfspace_norm(u, region, 0.0, ("poly", 0.0))
    assert val == pytest.approx(u.spectral_norm() ** 2, rel=1e-12)


def test_region_monotonicity(grid2):
    u = bump(grid2, 0.0, 2.5)
    small = MovingRegion(ConeVector((1.0, 0.3), kappa=1.0))
    large = MovingRegion(ConeVector((1.0, 0.3), kappa=-1.0))
    for w in (("poly", 0.0), ("poly", 2.0), ("exp", 0.5)):
        assert weighted_halfspace_norm(u, large, 0.0, w) >= weighted_halfspace_norm(u, small, 0.0, w)


def test_sharp_smoothed_sandwich(grid2):
    u = bump(grid2, 1.0, 2.0)
    cutoff = CutoffFamily(0.5, 2.5)
    cone = ConeVector((1.0, 0.0), kappa=0.0)
    smooth = weighted_halfspace_norm(u, MovingRegion(cone), 0.0, ("poly", 1.0), smoothed=cutoff)
    sharp = weighted_halfspace_norm(u, MovingRegion(cone, eps=cutoff.eps), 0.0, ("poly", 1.0))
    band = band_mass(u, MovingRegion(cone), 0.0, cutoff, ("poly", 1.0))
    assert smooth <= sharp <= smooth + band


def test_seam_window_refused(grid2):
    u = bump(grid2)
    region = MovingRegion(ConeVector((1.0, 0.0), kappa=19.0))
    with pytest.raises(SeamError):
        weighted_halfspace_norm(u, region, 0.0)
    wide = Field(grid2, np.ones(grid2.shape))
    with pytest.raises(SeamError):
        weighted_halfspace_norm(wide, MovingRegion(ConeVector((1.0, 0.0))), 0.0)


def test_exp_weight_tends_to_unweighted(grid2):
    u = bump(grid2, 2.0)
    region = MovingRegion(ConeVector((1.0, 0.0)))
    base = weighted_halfspace_norm(u, region, 0.0)
    gaps = [abs(weighted_halfspace_norm(u, region, 0.0, ("exp", b)) - base) for b in (0.1, 0.01, 0.001)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-2 * base


# ------------------------------------------------------------------ verdicts


def test_boundedness_verdict():
    assert boundedness_verdict(np.ones(30)).bounded
    assert boundedness_verdict(1 + 0.01 * np.linspace(0, 1, 30)).bounded
    assert not boundedness_verdict(np.exp(np.linspace(0, 1, 30))).bounded
    assert not boundedness_verdict(np.r_[1.0, 6.0, np.ones(10)]).bounded
    wiggle = 1 + 0.2 * np.sin(np.linspace(0, 20, 60))
    assert boundedness_verdict(wiggle).bounded


def test_sup_over_window():
    grid = make_grid(1, 40.0, 64)
    traj = linear_trajectory(bump(grid), 1.0, 32, "kdv")
    sup, stride = sup_over_window(traj, lambda u, t: t, t_min=0.25)
    assert sup == pytest.approx(1.0)
    assert stride >= 1


# ------------------------------------------------------------------ scans


@pytest.fixture(scope="module")
def kdv_traj():
    grid = make_grid(1, 80.0, 256)
    u0 = bump(grid, -4.0, 2.0)
    return SpectralSolver("kdv", 2e-3, 0.4, snapshot_stride=10).fit(grid).evolve(u0)


def test_gain_scan_table(kdv_traj):
    region = MovingRegion(ConeVector((1.0,), nu=5.0), eps=0.5)
    scan = gain_of_regularity_scan(kdv_traj, region, 1.0, (0, 0.5, 1, 1.5, 2), 0.1, CutoffFamily(0.5, 2.5))
    assert set(scan.series) == {f"J^{s:g}|{k}" for s in (0, 0.5, 1, 1.5, 2) for k in ("sharp", "smooth")}
    assert scan.metadata["r_s"]["1"] == 0.5
    assert all(np.all(v >= 0) for v in scan.series.values())
    assert len(scan.rows()) == 10 * scan.times.size
    with pytest.raises(ValueError):
        gain_of_regularity_scan(kdv_traj, region, 1.0, (3,), 0.1, CutoffFamily(0.5, 2.5))


def test_exp_scan_beta_zero_matches_norm(kdv_traj):
    region = MovingRegion(ConeVector((1.0,), nu=5.0), eps=0.5)
    scan = exp_smoothing_scan(kdv_traj, region, 0.5, [(0,), (1,)], 0.1, informational=[(1,)])
    direct = [weighted_halfspace_norm(u, region, t, ("exp", 0.5))
              for t, u in zip(kdv_traj.times, kdv_traj.snapshots) if t >= 0.1 - 1e-12]
    np.testing.assert_allclose(scan.series["d^0"], direct, rtol=1e-14)
    assert scan.metadata["informational"] == ["d^1"]


def test_sup_monotone_in_speed(kdv_traj):
    slow = MovingRegion(ConeVector((1.0,), nu=1.0), eps=0.5)
    fast = MovingRegion(ConeVector((1.0,), nu=10.0), eps=0.5)
    a = exp_smoothing_scan(kdv_traj, slow, 0.3, [(0,)], 0.1).sups["d^0"]
    b = exp_smoothing_scan(kdv_traj, fast, 0.3, [(0,)], 0.1).sups["d^0"]
    assert a <= b


def test_strip_integral():
    grid = make_grid(1, 80.0, 256)
    strip = MovingRegion(ConeVector((1.0,), nu=2.0), kind="strip", eps=0.0, tau=4.0)
    zero = linear_trajectory(Field.zeros(grid), 1.0, 8, "kdv")
    assert strip_smoothing_integral(zero, strip, 1) == 0.0
    u0 = bump(grid, -2.0, 1.5)
    fine = strip_smoothing_integral(linear_trajectory(u0, 1.0, 128, "kdv"), strip, 1)
    coarse = strip_smoothing_integral(linear_trajectory(u0, 1.0, 64, "kdv"), strip, 1)
    assert np.isfinite(fine) and fine > 0
    assert abs(coarse - fine) < 0.02 * fine
    with pytest.raises(ValueError):
        strip_smoothing_integral(zero, strip, 7)


# ------------------------------------------------------------------ linear growth


def test_linear_growth_trivial_cases():
    grid = make_grid(2, 160.0, 256)
    f = bump(grid, 0.0, 3.0)
    fit = linear_weighted_growth_check(f, 1.0, [0.0, 0.5, 1.0])
    wx = bracket_power(np.sqrt(grid.coords[0] ** 2 + grid.coords[1] ** 2), 1.0)
    assert fit.values[0] == pytest.approx((wx * f).norm(), rel=1e-14)
    flat = linear_weighted_growth_check(f, 0.0, np.linspace(1, 4, 6))
    assert abs(flat.slope) < 1e-10


def test_linear_growth_seam_error():
    grid = make_grid(2, 30.0, 64)
    with pytest.raises(SeamError):
        linear_weighted_growth_check(bump(grid, 0.0, 3.0), 1.0, [0.0, 20.0])


# ------------------------------------------------------------------ energy identity


def test_energy_identity_trivial_cases():
    grid = make_grid(2, 40.0, 64)
    cone = ConeVector((1.0, 0.0), nu=1.0)
    zero = SpectralSolver("zk", 1e-3, 5e-3, snapshot_stride=1).fit(grid).evolve(Field.zeros(grid))
    assert energy_identity_residual(zero, cone).max_residual == 0.0
    traj = SpectralSolver("zk", 1e-3, 0.02, snapshot_stride=1).fit(grid).evolve(3.0 * bump(grid, 0.0, 2.0))
    res = energy_identity_residual(traj, cone)
    assert res.max_residual < 1e-8
    with pytest.raises(ValueError):
        energy_identity_residual(traj.subsample(2), cone)
