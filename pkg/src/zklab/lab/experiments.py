"""One pipeline per experiment id: initial data, evolution and diagnostics.

Each pipeline returns an :class:`ExperimentResult`; persistence lives in
:mod:`zklab.lab.runner`.
"""

from dataclasses import dataclass, field
from itertools import product
from math import floor

import numpy as np

from ..diagnostics import (
    MovingRegion,
    boundedness_verdict,
    exp_smoothing_scan,
    gain_of_regularity_scan,
    halfspace_series,
    linear_weighted_growth_check,
    strip_smoothing_integral,
)
from ..evolve import (
    IntegrationError,
    SpectralSolver,
    ground_state,
    kdv_soliton,
    one_sided_data,
)
from ..psido import (
    CATALOG,
    catalog_symbol,
    class_seminorms,
    continuity_ratios,
    dense_matrix,
    fit_interpolation_constant,
    interpolation_check,
    quantize_apply,
    remainder_curve,
    schwartz_ensemble,
)
from ..spectral import ConeVector, Field, linear_propagate, make_grid
from ..weights import CutoffFamily, ExpWeightFamily, truncated_weight

GROWTH_SLACK = 0.1
KDV_SOLITON_TOL = 1e-6
ZK_SOLITON_TOL = 1e-4
DRIFT_TOL = 1e-8
DENSE_TOL = 1e-10
CONTINUITY_TOL = 0.2
INTERPOLATION_SLACK = 1.05


@dataclass
class ExperimentResult:
    """Everything a run produced, before it is written to disk.

    ``series`` maps ``(quantity_id, region_id)`` to ``(times, values)``;
    ``verdicts`` must all hold for the run to pass, ``informational`` verdicts
    are reported only.
    """

    fields: list = field(default_factory=list)          # (t, Field)
    series: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    informational: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    error: str = None


def _evolve(cfg, u0, result):
    s = cfg.solver
    solver = SpectralSolver(model=cfg.model, dt=s["dt"], t_end=s["t_end"],
                            dealias=s.get("dealias", "two-thirds"),
                            integrator=s.get("integrator", "etdrk4"),
                            snapshot_stride=s.get("snapshot_stride", 1)).fit(u0.grid)
    try:
        traj = solver.evolve(u0)
    except IntegrationError as exc:
        traj = exc.trajectory
        result.error = str(exc)
        result.verdicts["integration"] = False
    result.fields = list(zip(traj.times, traj.snapshots))
    result.results["wall_clock_evolve"] = traj.wall_clock
    result.results["l2_drift"] = traj.drift("l2")
    result.series[("l2", "box")] = (traj.times, [inv["l2"] for inv in traj.invariants])
    result.series[("mass", "box")] = (traj.times, [inv["mass"] for inv in traj.invariants])
    result.series[("hamiltonian", "box")] = (traj.times, [inv["hamiltonian"] for inv in traj.invariants])
    return traj


def _cone(cfg):
    w = cfg.weights
    return ConeVector(tuple(w["sigma"]), nu=w["nu"], kappa=w.get("kappa", 0.0))


def _one_sided(cfg, grid):
    data = dict(cfg.data)
    if grid.dim == 1:
        data.pop("transverse_width", None)
    return one_sided_data(grid, sigma=cfg.weights["sigma"], **data)


def poly_decay(cfg):
    """Polynomial weight propagation with a control run and the J^s scan."""
    grid = cfg.make_grid()
    w = cfg.weights
    result = ExperimentResult()
    traj = _evolve(cfg, _one_sided(cfg, grid), result)
    if result.error:
        return result
    cone = _cone(cfg)
    region = MovingRegion(cone, eps=w["eps"])
    r = w["r"]
    for weight_r, name, expect_bounded in ((r, "propagation", True), (2 * r, "control", False)):
        values = halfspace_series(traj, region, ("poly", weight_r))
        verdict = boundedness_verdict(values)
        qid = f"poly_r={weight_r:g}"
        result.series[(qid, "H")] = (traj.times, values)
        result.results[f"{name}_verdict"] = verdict.to_dict()
        result.verdicts[f"{name} r={weight_r:g} {'bounded' if expect_bounded else 'flagged unbounded'}"] = (
            verdict.bounded == expect_bounded)
    s_grid = [0.5 * k for k in range(2 * int(floor(2 * r)) + 1)]
    cutoff = CutoffFamily(w["eps"], w["tau"])
    scan = gain_of_regularity_scan(traj, region, r, s_grid, w["delta"], cutoff)
    for key, values in scan.series.items():
        result.series[(key, "H")] = (scan.times, values)
        target = result.verdicts if key.endswith("sharp") else result.informational
        target[f"gain {key} bounded"] = scan.verdicts[key].bounded
    result.results["gain_sups"] = scan.sups
    result.results["r_s"] = scan.metadata["r_s"]
    strip = MovingRegion(cone, kind="strip", eps=w["eps"], tau=w["tau"])
    order = int(floor(2 * r)) + 1
    integral = strip_smoothing_integral(traj, strip, order, t_min=w["delta"])
    result.results["strip_smoothing_integral"] = integral
    result.verdicts[f"strip J^{order} integral finite"] = bool(np.isfinite(integral))
    return result


def exp_decay(cfg):
    """Exponential weight propagation for derivatives up to order three."""
    grid = cfg.make_grid()
    w = cfg.weights
    result = ExperimentResult()
    traj = _evolve(cfg, _one_sided(cfg, grid), result)
    if result.error:
        return result
    region = MovingRegion(_cone(cfg), eps=w["eps"])
    betas = [b for b in product(range(5), repeat=grid.dim) if sum(b) <= 4]
    info = [b for b in betas if sum(b) == 4]
    scan = exp_smoothing_scan(traj, region, w["b"], betas, w["delta"], informational=info)
    informational = set(scan.metadata["informational"])
    for key, values in scan.series.items():
        result.series[(f"exp_b={w['b']:g}|{key}", "H")] = (scan.times, values)
        target = result.informational if key in informational else result.verdicts
        target[f"exp {key} bounded"] = scan.verdicts[key].bounded
    result.results["exp_sups"] = scan.sups
    return result


def soliton_validate(cfg):
    """Track a travelling wave: the KdV sech^2 soliton or the ZK ground state."""
    grid = cfg.make_grid()
    c = cfg.data.get("c", 1.0)
    result = ExperimentResult()
    t_end = cfg.solver["t_end"]
    if cfg.model == "kdv":
        traj = _evolve(cfg, kdv_soliton(grid, c), result)
        if result.error:
            return result
        error = (traj.final - kdv_soliton(grid, c, t=traj.times[-1])).max_abs()
        result.results["tracking_error"] = error
        result.verdicts["kdv soliton max error < 1e-6"] = error < KDV_SOLITON_TOL
    else:
        gs = ground_state(grid, c)
        result.results["ground_state_residual"] = gs.residual
        traj = _evolve(cfg, gs.Q, result)
        if result.error:
            return result
        exact = gs.translated(c * traj.times[-1])
        error = (traj.final - exact).norm() / exact.norm()
        result.results["tracking_error"] = error
        result.verdicts["zk soliton relative L2 error < 1e-4"] = error < ZK_SOLITON_TOL
    result.verdicts["l2 drift < 1e-8"] = result.results["l2_drift"] < DRIFT_TOL
    result.results["t_end"] = t_end
    return result


def linear_growth(cfg):
    """Growth exponent of ``||<x>^r S(t) f||`` for Gaussian ``f``."""
    grid = cfg.make_grid()
    w, width = cfg.weights, cfg.data.get("width", 4.0)
    f = Field.from_function(grid, lambda *x: np.exp(-sum(xi ** 2 for xi in x) / width ** 2))
    t_grid = np.linspace(w.get("t_start", 1.0), cfg.solver["t_end"], w.get("n_times", 15))
    model = cfg.model or "zk"
    result = ExperimentResult(fields=[(0.0, f), (float(t_grid[-1]), linear_propagate(f, t_grid[-1], model))])
    for r in w["rs"]:
        fit = linear_weighted_growth_check(f, r, t_grid, model)
        result.series[(f"linear_growth_r={r:g}", "R^n")] = (t_grid, fit.values)
        result.results[f"slope_r={r:g}"] = fit.slope
        result.results[f"bracket_constant_r={r:g}"] = fit.bracket_constant
        result.verdicts[f"growth exponent r={r:g} <= r + {GROWTH_SLACK:g}"] = fit.slope <= r + GROWTH_SLACK
    return result


def psido_pairs(cutoff):
    """Nontrivial catalog pairs whose composition expansion is not exact."""
    names = [("bessel", "weight"), ("bessel", "cutoff-product"), ("product", "product"),
             ("product", "cutoff-product")]
    return [(catalog_symbol(a, 1, m=1.0, q=1.0, cutoff=cutoff),
             catalog_symbol(b, 1, m=1.0, q=1.0, cutoff=cutoff), f"{a}*{b}") for a, b in names]


def psido_suite(cfg):
    """Composition remainders, continuity, dense oracle and interpolation."""
    grid = cfg.make_grid()
    p, w = cfg.psido, cfg.weights
    cutoff = CutoffFamily(w["eps"], w["tau"])
    box, size = grid.box_length, p.get("samples", 100)
    ensemble = schwartz_ensemble(1, box, size=size, seed=cfg.seed)
    held_out = schwartz_ensemble(1, box, size=size, seed=cfg.seed + 1)
    result = ExperimentResult()
    orders = tuple(range(1, p.get("order", 3) + 1))
    for a, b, name in psido_pairs(cutoff):
        curve = remainder_curve(a, b, grid, ensemble, orders)
        result.results[f"remainder {name}"] = curve
        result.verdicts[f"remainder {name} strictly decreasing"] = bool(np.all(np.diff(curve) < 0))
    small = make_grid(1, 8.0, 16)
    rng = np.random.default_rng(cfg.seed)
    f = Field(small, rng.standard_normal(small.shape))
    for name in CATALOG:
        sym = catalog_symbol(name, 1, m=p.get("m", 1.0), q=p.get("q", 1.0), omega=0.3,
                             cutoff=CutoffFamily(0.5, 2.5))
        err = float(np.max(np.abs(dense_matrix(sym, small) @ f.values - quantize_apply(sym, f, True))))
        result.results[f"dense oracle {name}"] = err
        result.verdicts[f"dense oracle {name} < 1e-10"] = err < DENSE_TOL
        sym = catalog_symbol(name, 1, m=p.get("m", 1.0), q=p.get("q", 1.0), cutoff=cutoff)
        ratios = continuity_ratios(sym, box, 1, (grid.points, 2 * grid.points), ensemble)
        result.results[f"continuity {name}"] = ratios
        result.verdicts[f"continuity {name} stable within 20%"] = (
            abs(ratios[1] - ratios[0]) <= CONTINUITY_TOL * ratios[0])
        table = class_seminorms(sym, grid)
        result.results[f"seminorms {name}"] = table.max_constant()
        result.verdicts[f"seminorms {name} finite"] = not table.diverges
    for a_s, b_w, theta in ((2.0, 2.0, 0.5), (1.0, 3.0, 0.25), (4.0, 1.0, 0.75)):
        const = fit_interpolation_constant(grid, a_s, b_w, theta, ensemble)
        ratios = [interpolation_check(s(grid), a_s, b_w, theta).ratio for s in held_out]
        violations = int(sum(r > INTERPOLATION_SLACK * const for r in ratios))
        key = f"interpolation a={a_s:g} b={b_w:g} theta={theta:g}"
        result.results[key] = {"constant": const, "violations": violations}
        result.verdicts[f"{key} held-out violations = 0"] = violations == 0
    return result


def weights_suite(cfg):
    """Cutoff partition of unity, exponential surrogates and truncated weights."""
    w = cfg.weights
    result = ExperimentResult()
    cutoff = CutoffFamily(w["eps"], w["tau"])
    x = cutoff.sample_grid()
    pou = float(np.max(np.abs(cutoff.chi(x) + cutoff.phi(x) + cutoff.psi(x) - 1.0)))
    result.results["partition_of_unity_error"] = pou
    result.verdicts["partition of unity < 1e-12"] = pou < 1e-12
    eps, tau = cutoff.eps, cutoff.tau
    inner = x[(x >= 2 * eps) & (x <= tau - 2 * eps)]
    slope_min = float(np.min(cutoff.chi(inner, 1)))
    result.results["chi_prime_min_inner"] = slope_min
    result.verdicts["chi' lower bound on [2 eps, tau - 2 eps]"] = slope_min >= 1.0 / (10 * (tau - eps))
    chi_min = float(np.min(cutoff.chi(x[x > 3 * eps])))
    result.verdicts["chi lower bound beyond 3 eps"] = chi_min >= 0.5 * eps / (tau - 3 * eps)
    xs = np.linspace(-20.0, 20.0, 401)
    worst = 0.0
    for eta in (1.0, 0.1, 1e-3, 1e-6):
        fam = ExpWeightFamily(w["b"], eta)
        worst = max(worst, float(np.max(np.abs(fam.p(xs, 1) - 2 * w["b"] * fam.rho(xs) ** 2)
                                        / np.maximum(1.0, np.abs(fam.p(xs, 1))))))
    result.results["p_prime_identity_error"] = worst
    result.verdicts["p' = 2 b rho^2 < 1e-12"] = worst < 1e-12
    sups = truncated_weight_sups()
    result.results["truncated_weight_sups"] = {f"r={r:g}": v.tolist() for r, v in sups.items()}
    for r, table in sups.items():
        result.verdicts[f"w_N^{r:g} derivatives plateau in N"] = plateau(table)
    return result


TRUNCATION_LEVELS = (1, 2, 4, 8, 16)


def truncated_weight_sups(rs=(0.25, 0.5, 0.75), levels=TRUNCATION_LEVELS, samples=8001):
    """``sup_y |d^k w_N^r|`` for ``k = 1, 2, 3``: rows are ``N``, columns are ``k``."""
    out = {}
    for r in rs:
        rows = []
        for N in levels:
            tw = truncated_weight(N, 1)
            y = np.linspace(0.0, 4.0 * N, samples)
            rows.append([float(np.max(np.abs(tw.power_profile(y, r, k)))) for k in (1, 2, 3)])
        out[r] = np.array(rows)
    return out


def plateau(table, tol=0.05):
    """Sups stay below a fixed multiple of the first level and settle at the last two."""
    bounded = np.all(table <= 2.0 * np.max(table[:2], axis=0) + 1e-12)
    settled = np.all(np.abs(table[-1] - table[-2]) <= tol * np.maximum(table[-1], 1e-12))
    return bool(bounded and settled)


PIPELINES = {
    "poly-decay-zk": poly_decay,
    "poly-decay-kdv": poly_decay,
    "exp-decay-zk": exp_decay,
    "exp-decay-kdv": exp_decay,
    "soliton-validate": soliton_validate,
    "linear-growth": linear_growth,
    "psido-suite": psido_suite,
    "weights-suite": weights_suite,
}
