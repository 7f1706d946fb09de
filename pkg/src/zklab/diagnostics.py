"""Weighted norms over moving regions and the verification harnesses built on them.

Every function consumes snapshots (a :class:`~zklab.evolve.Trajectory` or a
single :class:`~zklab.spectral.Field`); nothing here feeds back into the
integrator.
"""

from dataclasses import dataclass, field
from math import ceil, floor

import numpy as np

from .evolve import _Operators, SolverConfig
from .spectral import (
    ConeVector,
    Field,
    MAX_DERIVATIVE_ORDER,
    apply_bessel,
    apply_derivative,
    cone_condition,
    linear_propagate,
)
from .validation import check_choice, check_multi_index, check_positive
from .weights import _clamped_projection, bracket_power

SEAM_MARGIN = 0.1          # data and windows stay this fraction of L away from the seam
BOUND_FACTOR = 5.0         # "bounded" means max <= 5 x first value ...
GROWTH_THRESHOLD = 0.05    # ... and no monotone rise above 5% on the final third
SEAM_LEAK_TOL = 1e-6       # squared-mass fraction allowed in the seam margin
EXP_WEIGHT_CAP = 1e8       # exponential windows stop where exp(b sigma.x) exceeds this


class SeamError(ValueError):
    """A diagnostic window reaches the periodic seam."""


def cone_matrix(sigma):
    """Matrix with ``3 sigma_1`` in the corner, ``sigma_1`` on the rest of the
    diagonal and ``sigma_j`` coupling the first row and column."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.size
    M = np.eye(n) * sigma[0]
    M[0, 0] = 3.0 * sigma[0]
    M[0, 1:] = sigma[1:]
    M[1:, 0] = sigma[1:]
    return M


def cone_check(sigma):
    """Return ``(verdict, min_eigenvalue)`` for the quadratic form of ``sigma``.

    The verdict is positive definiteness of :func:`cone_matrix`; it agrees
    with ``sigma_1 > 0`` and ``sqrt(3) sigma_1 > |sigma_perp|``.
    """
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if not np.any(sigma):
        raise ValueError("sigma must be nonzero")
    lam = float(np.linalg.eigvalsh(cone_matrix(sigma)).min())
    verdict = lam > 0
    if verdict != cone_condition(sigma) and abs(lam) > 1e-12 * np.abs(sigma).max():
        raise AssertionError(f"eigenvalue test and cone condition disagree for sigma={sigma}")
    return verdict, lam


def r_s(r, s):
    """Decay exponent paired with ``s`` gained derivatives.

    ``max((1 - s / floor(2r)) r, r - ceil(s) / 2)`` for ``0 <= s <= floor(2r)``.
    """
    k = floor(2 * r)
    if k < 1:
        raise ValueError(f"r must be >= 1/2, got {r}")
    if not 0 <= s <= k:
        raise ValueError(f"s must lie in [0, floor(2r)] = [0, {k}], got {s}")
    return max((1 - s / k) * r, r - ceil(s) / 2)


@dataclass(frozen=True)
class MovingRegion:
    """Half-space ``{sigma.x > kappa + eps - nu t}`` or strip
    ``{kappa + eps - nu t < sigma.x < kappa + tau - nu t}``."""

    cone: ConeVector
    kind: str = "half-space"
    eps: float = 0.0
    tau: float = None

    def __post_init__(self):
        check_choice(self.kind, "kind", ("half-space", "strip"))
        if self.kind == "strip":
            if self.tau is None or not self.tau > self.eps:
                raise ValueError("a strip needs tau > eps")

    def bounds(self, t):
        lo = self.cone.kappa + self.eps - self.cone.nu * t
        hi = self.cone.kappa + self.tau - self.cone.nu * t if self.kind == "strip" else np.inf
        return lo, hi

    def mask(self, grid, t):
        """Region at time ``t`` intersected with the seam-safe core of the box."""
        z = self.cone.project(grid)
        lo, hi = self.bounds(t)
        return (z > lo) & (z < hi) & (grid.seam_distance() >= SEAM_MARGIN * grid.box_length)

    def check_seam(self, grid, t, field_values=None, tol=SEAM_LEAK_TOL):
        """Refuse windows that cross the seam margin or carry mass there.

        A finite edge ``sigma.x = threshold`` must meet the core of the box
        (points at least ``SEAM_MARGIN * L`` from the seam).  Half-spaces are
        truncated to the core by :meth:`mask`; the squared mass of the field
        that the truncation drops must stay below ``tol`` of the total.
        """
        margin = SEAM_MARGIN * grid.box_length
        near_seam = grid.seam_distance() < margin
        z = self.cone.project(grid)
        for edge in self.bounds(t):
            if np.isfinite(edge):
                on_edge = np.abs(z - edge) < grid.spacing * np.linalg.norm(self.cone.sigma)
                if np.any(on_edge) and np.all(near_seam[on_edge]):
                    raise SeamError(f"region edge {edge:.3g} lies in the seam margin")
        if field_values is not None:
            lo, hi = self.bounds(t)
            dropped = (z > lo) & (z < hi) & near_seam
            total = np.sum(field_values ** 2)
            if total > 0 and np.sum(field_values[dropped] ** 2) > tol * total:
                frac = np.sum(field_values[dropped] ** 2) / total
                raise SeamError(f"{frac:.2e} of the squared mass lies in the seam margin")


def _weight_values(grid, region, t, weight, running):
    # weights saturate near the seam so wrap-around never sees huge values
    z = _clamped_projection(region.cone, grid, True)
    arg = z + region.cone.nu * t if running else z
    kind, param = weight
    if kind == "poly":
        return bracket_power(arg, param)
    if kind == "exp":
        return np.exp(param * arg)
    raise ValueError(f"weight must be ('poly', r) or ('exp', b), got {weight!r}")


def weighted_halfspace_norm(u, region, t, weight=("poly", 0.0), smoothed=None,
                            running=False, check_seam=True):
    """Weighted square integral of ``u`` over the region at time ``t``.

    Parameters
    ----------
    u : Field
    region : MovingRegion
    t : float
    weight : tuple
        ``("poly", r)`` for ``<sigma.x>^(2r)`` or ``("exp", b)`` for
        ``exp(2 b sigma.x)``; the weight multiplies ``u`` before squaring.
        Exponential windows end where ``exp(b sigma.x)`` passes
        ``EXP_WEIGHT_CAP``: further right, a double-precision sample of size
        ``1e-16 max|u|`` would be amplified past the signal it is meant to
        measure.
    smoothed : CutoffFamily, optional
        Replace the sharp indicator of ``{sigma.x > kappa - nu t}`` by
        ``chi(sigma.x + nu t - kappa)``; ``region.eps`` is then ignored since
        chi vanishes below its own eps.
    running : bool
        Use ``sigma.x + nu t`` as weight argument instead of ``sigma.x``.
    """
    grid = u.grid
    if check_seam:
        region.check_seam(grid, t, u.values)
    w = _weight_values(grid, region, t, weight, running)
    if smoothed is None:
        ind = region.mask(grid, t)
    else:
        z = region.cone.project(grid) + region.cone.nu * t - region.cone.kappa
        ind = smoothed.chi(z)
        if region.kind == "strip":
            ind = ind * (z < region.tau)
    if weight[0] == "exp":
        ind = ind * (region.cone.project(grid) * weight[1] <= np.log(EXP_WEIGHT_CAP))
    return grid.integrate((w * u.values) ** 2 * ind)


def band_mass(u, region, t, cutoff, weight=("poly", 0.0)):
    """Weighted mass of ``u`` in the transition band ``eps < sigma.x + nu t - kappa < tau``."""
    grid = u.grid
    z = region.cone.project(grid) + region.cone.nu * t - region.cone.kappa
    band = (z > cutoff.eps) & (z < cutoff.tau)
    w = _weight_values(grid, region, t, weight, False)
    return grid.integrate((w * u.values) ** 2 * band)


# ------------------------------------------------------------------ verdicts


@dataclass
class Verdict:
    bounded: bool
    ratio: float
    final_third_growth: float
    monotone_growth: bool

    def to_dict(self):
        return {"bounded": bool(self.bounded), "ratio": float(self.ratio),
                "final_third_growth": float(self.final_third_growth),
                "monotone_growth": bool(self.monotone_growth)}


def boundedness_verdict(values, factor=BOUND_FACTOR, growth=GROWTH_THRESHOLD):
    """Bounded iff ``max <= factor * first`` and no monotone growth on the final third.

    Monotone growth means the values never decrease over the final third and
    rise there by more than ``growth`` (relative).
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("no values to judge")
    first = values[0]
    ratio = float(values.max() / first) if first > 0 else (np.inf if values.max() > 0 else 1.0)
    tail = values[int(np.floor(2 * values.size / 3)):]
    rise = float((tail[-1] - tail[0]) / tail[0]) if tail.size > 1 and tail[0] > 0 else 0.0
    monotone = bool(tail.size > 1 and np.all(np.diff(tail) >= 0) and rise > growth)
    return Verdict(bool(ratio <= factor and not monotone), ratio, rise, monotone)


@dataclass
class DiagnosticsReport:
    """Time series of weighted quantities with their verdicts."""

    times: np.ndarray
    series: dict                      # quantity id -> array over times
    verdicts: dict = field(default_factory=dict)
    sups: dict = field(default_factory=dict)
    integrals: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def rows(self, region_id="H"):
        """``(t, quantity_id, region_id, value)`` tuples for CSV output."""
        out = []
        for qid, vals in self.series.items():
            for t, v in zip(self.times, vals):
                out.append((float(t), qid, region_id, float(v)))
        return out

    def all_pass(self, keys=None):
        keys = self.verdicts.keys() if keys is None else keys
        return all(self.verdicts[k].bounded for k in keys)


def sup_over_window(traj, fn, t_min=0.0, tol=0.01, max_halvings=4):
    """Max of ``fn(u, t)`` over snapshots with ``t >= t_min``.

    The snapshot set is refined until halving the spacing changes the max by
    less than ``tol`` (relative); starting from a coarsened copy of ``traj``.
    Returns ``(sup, stride_used)`` where the stride is in units of stored
    snapshots.
    """
    times = np.asarray(traj.times)
    values = {}

    def value(i):
        if i not in values:
            values[i] = fn(traj.snapshots[i], times[i])
        return values[i]

    idx_all = np.flatnonzero(times >= t_min - 1e-12)
    stride = 2 ** max_halvings
    while stride > 1 and idx_all.size // stride < 2:
        stride //= 2
    prev = max(value(i) for i in idx_all[::stride])
    while stride > 1:
        stride //= 2
        cur = max(value(i) for i in idx_all[::stride])
        if prev > 0 and abs(cur - prev) / prev < tol:
            return cur, stride
        prev = cur
    return prev, 1


# ------------------------------------------------------------ theorem scans


def halfspace_series(traj, region, weight, smoothed=None, running=False, derivative=None,
                     bessel=None):
    """Weighted region norm of ``B u`` at every snapshot (``B`` = ``d^beta`` or ``J^s``)."""
    out = []
    for t, u in zip(traj.times, traj.snapshots):
        v = u
        if derivative is not None and any(derivative):
            v = apply_derivative(u, derivative)
        if bessel:
            v = apply_bessel(u, bessel)
        # the region test uses u itself: derivatives of seam-free data are seam-free
        region.check_seam(u.grid, t, u.values)
        out.append(weighted_halfspace_norm(v, region, t, weight, smoothed, running, check_seam=False))
    return np.asarray(out)


def gain_of_regularity_scan(traj, region, r, s_grid, delta, cutoff):
    """Sup over ``[delta, T]`` of weighted ``J^s`` norms with exponent ``r_s``.

    Two columns per ``s``: ``sharp`` integrates ``(J^s u)^2 <sigma.x>^(2 r_s)``
    over the moving half-space, ``smooth`` integrates
    ``(J^s u)^2 <sigma.x + nu t>^(2 r_s) chi^2`` with ``cutoff``.
    """
    check_positive(delta, "delta")
    for s in s_grid:
        r_s(r, s)
    times = np.asarray(traj.times)
    keep = times >= delta - 1e-12
    sub_times = times[keep]
    series, verdicts, sups = {}, {}, {}
    snaps = [u for u, k in zip(traj.snapshots, keep) if k]
    for s in s_grid:
        exponent = r_s(r, s)
        sharp, smooth = [], []
        for t, u in zip(sub_times, snaps):
            region.check_seam(u.grid, t, u.values)
            v = apply_bessel(u, s)
            sharp.append(weighted_halfspace_norm(v, region, t, ("poly", exponent), check_seam=False))
            z = region.cone.project(u.grid) + region.cone.nu * t - region.cone.kappa
            smooth.append(u.grid.integrate(v.values ** 2 * bracket_power(z + region.cone.kappa, 2 * exponent)
                                           * cutoff.chi(z) ** 2))
        for tag, vals in (("sharp", sharp), ("smooth", smooth)):
            key = f"J^{s:g}|{tag}"
            series[key] = np.asarray(vals)
            verdicts[key] = boundedness_verdict(vals)
            sups[key] = float(np.max(vals))
    return DiagnosticsReport(sub_times, series, verdicts, sups,
                             metadata={"r": r, "r_s": {f"{s:g}": r_s(r, s) for s in s_grid},
                                       "delta": delta})


def strip_smoothing_integral(traj, region, order, t_min=0.0, use_bessel=True):
    """Trapezoid-in-time integral of ``int_strip (J^order u)^2 dx``."""
    if region.kind != "strip":
        raise ValueError("strip_smoothing_integral needs a strip region")
    if order > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"order {order} exceeds the derivative cap {MAX_DERIVATIVE_ORDER}")
    times = np.asarray(traj.times)
    keep = times >= t_min - 1e-12
    vals = []
    for t, u in zip(times[keep], [u for u, k in zip(traj.snapshots, keep) if k]):
        region.check_seam(u.grid, t, u.values)
        v = apply_bessel(u, order) if use_bessel else u
        vals.append(weighted_halfspace_norm(v, region, t, ("poly", 0.0), check_seam=False))
    vals = np.asarray(vals)
    if vals.size < 2:
        return 0.0
    return float(np.trapezoid(vals, times[keep]))


def exp_smoothing_scan(traj, region, b, betas, delta, informational=()):
    """Sup over ``[delta, T]`` of ``int_H (exp(b sigma.x) d^beta u)^2`` per ``beta``.

    Multi-indices listed in ``informational`` are computed and reported but
    excluded from :meth:`DiagnosticsReport.all_pass`.
    """
    check_positive(b, "b")
    dim = traj.grid.dim
    betas = [check_multi_index(beta, dim, MAX_DERIVATIVE_ORDER) for beta in betas]
    info = {check_multi_index(beta, dim) for beta in informational}
    times = np.asarray(traj.times)
    keep = times >= delta - 1e-12
    sub = [u for u, k in zip(traj.snapshots, keep) if k]
    series, verdicts, sups = {}, {}, {}
    for beta in betas:
        vals = []
        for t, u in zip(times[keep], sub):
            region.check_seam(u.grid, t, u.values)
            v = apply_derivative(u, beta)
            vals.append(weighted_halfspace_norm(v, region, t, ("exp", b), check_seam=False))
        key = "d^" + "".join(str(k) for k in beta)
        series[key] = np.asarray(vals)
        verdicts[key] = boundedness_verdict(vals)
        sups[key] = float(np.max(vals))
    report = DiagnosticsReport(times[keep], series, verdicts, sups, metadata={"b": b, "delta": delta})
    report.metadata["informational"] = ["d^" + "".join(str(k) for k in beta) for beta in info]
    return report


def scan_pass(report):
    informational = set(report.metadata.get("informational", []))
    return all(v.bounded for k, v in report.verdicts.items() if k not in informational)


@dataclass
class GrowthFit:
    slope: float
    bracket_constant: float
    times: np.ndarray
    values: np.ndarray


def linear_weighted_growth_check(f, r, t_grid, model="zk", tail_fraction=0.5):
    """Fit the growth exponent of ``||<x>^r S(t) f||`` in ``<t>``.

    The slope is the least-squares fit of ``log ||<x>^r S(t) f||`` against
    ``log <t>`` over the last ``tail_fraction`` of ``t_grid``.  The bracket
    constant is ``max_t LHS / (<t>^r (||J^{2r} f|| + ||<x>^r f||))``.
    """
    check_positive(r, "r", strict=False)
    grid = f.grid
    xnorm = np.sqrt(sum(x ** 2 for x in grid.coords))
    wx = bracket_power(xnorm, r)
    margin = SEAM_MARGIN * grid.box_length
    near = grid.seam_distance() < margin
    vals = []
    for t in t_grid:
        v = linear_propagate(f, t, model)
        peak = np.max(np.abs(v.values))
        if np.max(np.abs(v.values[near])) > 1e-6 * peak:
            raise SeamError(f"S(t)f reaches the seam margin at t={t:g}; enlarge the box")
        vals.append((wx * v).norm())
    vals = np.asarray(vals)
    t_grid = np.asarray(t_grid, dtype=float)
    tb = np.sqrt(1.0 + t_grid ** 2)
    n_tail = max(2, int(np.ceil(tail_fraction * t_grid.size)))
    slope = np.polyfit(np.log(tb[-n_tail:]), np.log(vals[-n_tail:]), 1)[0]
    rhs = apply_bessel(f, 2 * r).norm() + (wx * f).norm()
    const = float(np.max(vals / (tb ** r * rhs)))
    return GrowthFit(float(slope), const, t_grid, vals)


# ------------------------------------------------------ energy identity


def running_weight(grid, cone, r, cutoff, t, order_t=0):
    """``chi_r^2 = <z>^(2r) chi(z)^2`` at ``z = sigma.x + nu t + kappa`` or its t-derivative."""
    z = cone.project(grid) + cone.nu * t + cone.kappa
    if cutoff is None:
        w = bracket_power(z, 2 * r)
        return w if order_t == 0 else cone.nu * bracket_power(z, 2 * r, 1)
    chi = cutoff.chi(z)
    if order_t == 0:
        return bracket_power(z, 2 * r) * chi ** 2
    return cone.nu * (bracket_power(z, 2 * r, 1) * chi ** 2
                      + bracket_power(z, 2 * r) * 2 * chi * cutoff.chi(z, 1))


@dataclass
class EnergyResidual:
    times: np.ndarray
    derivative: np.ndarray
    rhs: np.ndarray

    @property
    def residual(self):
        return np.abs(self.derivative - self.rhs)

    @property
    def max_residual(self):
        return float(self.residual.max()) if self.residual.size else 0.0


def energy_identity_residual(traj, cone, r=0.0, cutoff=None, B=("identity",)):
    """Compare ``d/dt int (B u)^2 chi_r^2`` with ``A1 - 2 A2 - 2 A3``.

    ``A1 = int (B u)^2 d_t chi_r^2``, ``A2 = int (d_{x1} Lap B u) B u chi_r^2``
    and ``A3 = int B(u d_{x1} u) B u chi_r^2``, evaluated with the very
    operators the integrator uses (spectral linear part, dealiased
    nonlinearity).  The time derivative is a centred difference over
    consecutive snapshots, so ``traj`` must store every step.

    ``B`` is ``("identity",)``, ``("d", beta)`` or ``("J", s)``.
    ``r = 0`` with ``cutoff=None`` gives the unweighted identity.
    """
    cfg = traj.config
    if cfg.snapshot_stride != 1:
        raise ValueError("energy identity needs consecutive snapshots (snapshot_stride = 1)")
    grid = traj.grid
    ops = _Operators(grid, SolverConfig(cfg.model, cfg.dt, max(cfg.t_end, cfg.dt), cfg.dealias,
                                        "imex-cn", 1))
    kind = B[0]
    if kind == "identity":
        mult = np.ones(grid.shape)
    elif kind == "d":
        from .spectral import derivative_multiplier
        mult = derivative_multiplier(grid, B[1])
    elif kind == "J":
        mult = (1.0 + grid.k2) ** (0.5 * B[1])
    else:
        raise ValueError(f"unknown operator {B!r}")

    def quantities(u, t):
        v = u.spectrum
        Bu = np.fft.ifftn(mult * v).real
        lin = np.fft.ifftn(mult * ops.L * v).real          # = -d1 Lap B u
        nl = np.fft.ifftn(mult * ops.nonlinear(v)).real    # = -B(u d1 u), dealiased
        w = running_weight(grid, cone, r, cutoff, t) if (r or cutoff is not None) else 1.0
        wt = running_weight(grid, cone, r, cutoff, t, 1) if (r or cutoff is not None) else 0.0
        I = grid.integrate(Bu ** 2 * w)
        A1 = grid.integrate(Bu ** 2 * wt)
        A2 = -grid.integrate(lin * Bu * w)
        A3 = -grid.integrate(nl * Bu * w)
        return I, A1 - 2 * A2 - 2 * A3

    times = np.asarray(traj.times)
    vals = [quantities(u, t) for u, t in zip(traj.snapshots, times)]
    I = np.array([v[0] for v in vals])
    rhs = np.array([v[1] for v in vals])
    h = np.diff(times)
    deriv = (I[2:] - I[:-2]) / (h[1:] + h[:-1])
    return EnergyResidual(times[1:-1], deriv, rhs[1:-1])
