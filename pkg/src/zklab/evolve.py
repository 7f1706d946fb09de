"""Time integration of ZK (2D) and KdV (1D), ground states, conserved quantities.

Both equations are written in Fourier variables as

    v' = L v + N(v),   L = i omega(xi),   N(v) = -(i xi_1 / 2) F[u^2],

with ``omega`` from :func:`zklab.spectral.linear_rate`.  The stiff linear
part is diagonal and purely imaginary.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .spectral import (
    Field,
    MODEL_DIM,
    check_model,
    derivative_multiplier,
    linear_rate,
)
from .validation import check_choice, check_field, check_positive

INTEGRATORS = ("etdrk4", "imex-cn")
DEALIAS = ("two-thirds", "none")
CONTOUR_POINTS = 32

# ETDRK4 integrates the linear phase exactly, so it carries no linear step
# restriction.  Crank-Nicolson is unconditionally stable, but a phase advance
# above pi per step folds high modes onto wrong phases; that is the limit.
STABILITY_LIMIT = {"etdrk4": np.inf, "imex-cn": np.pi}


class IntegrationError(RuntimeError):
    """Raised when a step produces NaN or Inf; keeps the last valid state."""

    def __init__(self, message, last_time, trajectory=None):
        super().__init__(f"{message} (last valid time t={last_time:.6g})")
        self.last_time = last_time
        self.trajectory = trajectory


class ConvergenceError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class SolverConfig:
    """Integrator settings; validated on construction."""

    model: str = "zk"
    dt: float = 1e-3
    t_end: float = 1.0
    dealias: str = "two-thirds"
    integrator: str = "etdrk4"
    snapshot_stride: int = 10

    def __post_init__(self):
        object.__setattr__(self, "model", check_model(self.model))
        check_positive(self.dt, "dt")
        check_positive(self.t_end, "t_end", strict=False)
        check_choice(self.dealias, "dealias", DEALIAS)
        check_choice(self.integrator, "integrator", INTEGRATORS)
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ValueError(f"snapshot_stride must be a positive integer, got {self.snapshot_stride}")

    @property
    def n_steps(self):
        return int(np.ceil(self.t_end / self.dt - 1e-9))

    @property
    def step_size(self):
        """Step actually used: ``t_end`` divided into ``n_steps`` equal steps."""
        return self.t_end / self.n_steps if self.n_steps else self.dt

    def check_stability(self, grid):
        rate = float(np.max(np.abs(linear_rate(grid, self.model))))
        limit = STABILITY_LIMIT[self.integrator]
        if self.step_size * rate >= limit:
            raise ValueError(
                f"dt*max|omega| = {self.step_size * rate:.3g} exceeds the {self.integrator} "
                f"limit {limit:.3g}; reduce dt below {limit / rate:.3g}")
        return self.step_size * rate


def dealias_mask(grid, rule="two-thirds"):
    """Boolean mask of retained modes (``|k| < N/3`` per axis for the 2/3 rule)."""
    if rule == "none":
        return np.ones(grid.shape, dtype=bool)
    idx = np.fft.fftfreq(grid.points, d=1.0 / grid.points)
    keep = np.abs(idx) < grid.points / 3.0
    mask = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        shape = [1] * grid.dim
        shape[axis] = grid.points
        mask = mask & keep.reshape(shape)
    return mask


class _Operators:
    """Precomputed spectral arrays shared by the integrators."""

    def __init__(self, grid, cfg):
        self.grid = grid
        self.cfg = cfg
        self.L = 1j * linear_rate(grid, cfg.model)
        mask = dealias_mask(grid, cfg.dealias)
        self.nl = -0.5 * derivative_multiplier(grid, (1,) + (0,) * (grid.dim - 1)) * mask
        h = cfg.step_size
        if cfg.integrator == "etdrk4":
            self._etdrk4_coefficients(h)
        else:
            self.cn_plus = 1.0 + 0.5 * h * self.L
            self.cn_minus_inv = 1.0 / (1.0 - 0.5 * h * self.L)

    def _etdrk4_coefficients(self, h):
        hL = h * self.L
        self.E = np.exp(hL)
        self.E2 = np.exp(0.5 * hL)
        roots = np.exp(1j * np.pi * (np.arange(1, CONTOUR_POINTS + 1) - 0.5) / CONTOUR_POINTS)
        Q = np.zeros_like(hL)
        f1 = np.zeros_like(hL)
        f2 = np.zeros_like(hL)
        f3 = np.zeros_like(hL)
        # accumulate the contour means one root at a time to bound memory
        for r in roots:
            lr = hL + r
            e = np.exp(lr)
            Q += (np.exp(0.5 * lr) - 1.0) / lr
            f1 += (-4.0 - lr + e * (4.0 - 3.0 * lr + lr ** 2)) / lr ** 3
            f2 += (2.0 + lr + e * (lr - 2.0)) / lr ** 3
            f3 += (-4.0 - 3.0 * lr - lr ** 2 + e * (4.0 - lr)) / lr ** 3
        # roots come in conjugate pairs only for real hL, so keep the complex mean
        self.Q = h * Q / CONTOUR_POINTS
        self.f1 = h * f1 / CONTOUR_POINTS
        self.f2 = h * f2 / CONTOUR_POINTS
        self.f3 = h * f3 / CONTOUR_POINTS

    def nonlinear(self, v):
        u = np.fft.ifftn(v).real
        return self.nl * np.fft.fftn(u * u)

    def etdrk4(self, v):
        Nv = self.nonlinear(v)
        a = self.E2 * v + self.Q * Nv
        Na = self.nonlinear(a)
        b = self.E2 * v + self.Q * Na
        Nb = self.nonlinear(b)
        c = self.E2 * a + self.Q * (2.0 * Nb - Nv)
        Nc = self.nonlinear(c)
        return self.E * v + self.f1 * Nv + 2.0 * self.f2 * (Na + Nb) + self.f3 * Nc

    def imex_cn(self, v, n_prev):
        Nv = self.nonlinear(v)
        if n_prev is None:
            n_prev = Nv
        h = self.cfg.step_size
        rhs = self.cn_plus * v + h * (1.5 * Nv - 0.5 * n_prev)
        return self.cn_minus_inv * rhs, Nv


def conserved(u, model):
    """Mass, squared L^2 norm and Hamiltonian of ``u``.

    ``hamiltonian = int (|grad u|^2 / 2 - u^3 / 6)``; for KdV the gradient is
    ``u_x``.
    """
    model = check_model(model, u.grid)
    grid = u.grid
    grad2 = np.zeros(grid.shape)
    for axis in range(grid.dim):
        beta = tuple(1 if i == axis else 0 for i in range(grid.dim))
        du = np.fft.ifftn(u.spectrum * derivative_multiplier(grid, beta)).real
        grad2 += du ** 2
    vals = u.values
    return {
        "mass": grid.integrate(vals),
        "l2": grid.integrate(vals ** 2),
        "hamiltonian": grid.integrate(0.5 * grad2 - vals ** 3 / 6.0),
    }


@dataclass
class Trajectory:
    """Snapshots of a run plus the conserved-quantity series."""

    grid: object
    config: SolverConfig
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    invariants: list = field(default_factory=list)
    wall_clock: float = 0.0

    def append(self, t, u):
        self.times.append(float(t))
        self.snapshots.append(u)
        self.invariants.append(conserved(u, self.config.model))

    @property
    def final(self):
        return self.snapshots[-1]

    @property
    def dt(self):
        """Time between consecutive snapshots."""
        return self.config.step_size * self.config.snapshot_stride

    def drift(self, key="l2"):
        """Max relative deviation of an invariant from its initial value."""
        series = np.array([inv[key] for inv in self.invariants])
        ref = abs(series[0]) if series[0] != 0 else 1.0
        return float(np.max(np.abs(series - series[0])) / ref)

    def subsample(self, every):
        """Keep every ``every``-th snapshot (the stride grows accordingly)."""
        cfg = SolverConfig(self.config.model, self.config.dt, self.config.t_end,
                           self.config.dealias, self.config.integrator,
                           self.config.snapshot_stride * every)
        out = Trajectory(self.grid, cfg)
        out.times = self.times[::every]
        out.snapshots = self.snapshots[::every]
        out.invariants = self.invariants[::every]
        return out

    def __len__(self):
        return len(self.times)


class SpectralSolver(TransformerMixin, BaseEstimator):
    """Pseudo-spectral integrator with an estimator-style interface.

    Parameters
    ----------
    model : {"zk", "kdv"}
    dt : float
        Requested step; ``t_end`` is split into equal steps no larger than it.
    t_end : float
        Final time.
    dealias : {"two-thirds", "none"}
    integrator : {"etdrk4", "imex-cn"}
    snapshot_stride : int
        Steps between stored snapshots.

    Examples
    --------
    >>> solver = SpectralSolver(model="kdv", dt=1e-3, t_end=0.1).fit(grid)
    >>> u_final = solver.transform(u0)
    """

    def __init__(self, model="zk", dt=1e-3, t_end=1.0, dealias="two-thirds",
                 integrator="etdrk4", snapshot_stride=10):
        self.model = model
        self.dt = dt
        self.t_end = t_end
        self.dealias = dealias
        self.integrator = integrator
        self.snapshot_stride = snapshot_stride

    @property
    def config(self):
        return SolverConfig(self.model, self.dt, self.t_end, self.dealias,
                            self.integrator, self.snapshot_stride)

    def fit(self, grid, y=None):
        cfg = self.config
        check_model(cfg.model, grid)
        self.stability_number_ = cfg.check_stability(grid)
        self.grid_ = grid
        self.config_ = cfg
        self.ops_ = _Operators(grid, cfg)
        return self

    def _check_fitted(self, u):
        if not hasattr(self, "ops_"):
            raise RuntimeError("call fit(grid) before integrating")
        check_field(u, MODEL_DIM[self.config_.model])
        if u.grid != self.grid_:
            raise ValueError("initial data lives on a different grid than the solver")

    def step(self, u):
        """Advance ``u`` by one step (the first step of a multistep scheme)."""
        self._check_fitted(u)
        v = u.spectrum
        if self.config_.integrator == "etdrk4":
            v = self.ops_.etdrk4(v)
        else:
            v, _ = self.ops_.imex_cn(v, None)
        if not np.all(np.isfinite(v)):
            raise IntegrationError("non-finite values after one step", 0.0)
        return Field.from_spectrum(self.grid_, v)

    def evolve(self, u0):
        """Integrate from ``u0`` to ``t_end`` and return the :class:`Trajectory`."""
        self._check_fitted(u0)
        cfg = self.config_
        h = cfg.step_size
        traj = Trajectory(self.grid_, cfg)
        traj.append(0.0, u0)
        start = time.perf_counter()
        v = np.array(u0.spectrum)
        n_prev = None
        for n in range(1, cfg.n_steps + 1):
            if cfg.integrator == "etdrk4":
                v_new = self.ops_.etdrk4(v)
            else:
                v_new, n_prev = self.ops_.imex_cn(v, n_prev)
            if not np.all(np.isfinite(v_new)):
                traj.wall_clock = time.perf_counter() - start
                raise IntegrationError("non-finite values in the spectrum", (n - 1) * h, traj)
            v = v_new
            if n % cfg.snapshot_stride == 0:
                traj.append(n * h, Field.from_spectrum(self.grid_, v))
        if cfg.n_steps % cfg.snapshot_stride:
            traj.append(cfg.n_steps * h, Field.from_spectrum(self.grid_, v))
        traj.wall_clock = time.perf_counter() - start
        return traj

    def transform(self, u0):
        return self.evolve(u0).final


def step(u, cfg):
    """One step of ``cfg`` applied to ``u``."""
    params = dict(model=cfg.model, dt=cfg.dt, t_end=max(cfg.dt, cfg.t_end),
                  dealias=cfg.dealias, integrator=cfg.integrator)
    solver = SpectralSolver(**params).fit(u.grid)
    return solver.step(u)


def kdv_soliton(grid, c=1.0, x0=0.0, t=0.0):
    """``3c sech^2(sqrt(c)/2 (x - x0 - c t))`` on a 1D grid."""
    x = grid.coords[0]
    return Field(grid, 3.0 * c / np.cosh(0.5 * np.sqrt(c) * (x - x0 - c * t)) ** 2)


# ------------------------------------------------------------- ground state


@dataclass
class GroundState:
    """Positive radial solution of ``Delta Q - c Q + Q^2/2 = 0``."""

    Q: Field
    c: float
    residual: float
    decay_rate: float
    n_iter: int
    history: list

    def translated(self, shift):
        """``Q(x1 - shift, x2)`` by a spectral phase shift."""
        grid = self.Q.grid
        phase = np.exp(-1j * grid.wavenumbers[0] * shift)
        phase = np.where(grid.nyquist[0], np.cos(grid.wavenumbers[0] * shift), phase)
        return Field.from_spectrum(grid, self.Q.spectrum * phase)


def ground_state_residual(Q, c=1.0):
    """``||Delta Q - c Q + Q^2/2|| / ||Q||`` with a spectral Laplacian."""
    grid = Q.grid
    lap = np.fft.ifftn(-grid.k2 * Q.spectrum).real
    res = Field(grid, lap - c * Q.values + 0.5 * Q.values ** 2)
    return res.norm() / Q.norm()


def fit_decay_rate(Q, window=(1e-8, 1e-2)):
    """Slope of ``-log Q`` against ``|x|`` where ``Q / max Q`` lies in ``window``."""
    grid = Q.grid
    r = np.sqrt(sum(x ** 2 for x in grid.coords)).reshape(-1)
    q = Q.values.reshape(-1) / Q.values.max()
    sel = (q > window[0]) & (q < window[1])
    if sel.sum() < 3:
        raise ValueError("decay window holds fewer than three samples; enlarge the box")
    slope, _ = np.polyfit(r[sel], np.log(q[sel]), 1)
    return float(-slope)


def radial_asymmetry(Q):
    """Largest spread of Q over lattice points sharing the same ``i^2 + j^2``."""
    grid = Q.grid
    n = grid.points
    idx = np.arange(n) - n // 2
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    key = (ii ** 2 + jj ** 2).reshape(-1)
    vals = Q.values.reshape(-1)
    order = np.argsort(key, kind="stable")
    key, vals = key[order], vals[order]
    bounds = np.flatnonzero(np.diff(key)) + 1
    spread = 0.0
    for group in np.split(vals, bounds):
        if group.size > 1:
            spread = max(spread, float(group.max() - group.min()))
    return spread / float(Q.values.max())


class GroundStateSolver(BaseEstimator):
    """Normalised (Petviashvili) fixed-point iteration for the ZK ground state.

    Iterates ``u <- s^2 (c - Delta)^-1 (u^2/2)`` with the stabilising factor
    ``s = <(c - Delta) u, u> / <u^2/2, u>`` until ``|s - 1| < s_tol`` and the
    residual drops below ``tol``.

    Parameters
    ----------
    c : float
        Wave speed.
    tol : float
        Residual target, ``||Delta Q - c Q + Q^2/2|| / ||Q||``.
    s_tol : float
        Target for ``|s - 1|``.
    max_iter : int
        Iteration cap; exceeding it raises :class:`ConvergenceError`.
    method : {"scaled", "direct"}
        ``scaled`` solves the ``c = 1`` problem on a box ``sqrt(c)`` times
        larger and rescales ``Q_c(x) = c Q(sqrt(c) x)``; ``direct`` iterates
        with ``c - Delta`` on the given grid.
    """

    def __init__(self, c=1.0, tol=1e-9, s_tol=1e-12, max_iter=500, method="scaled"):
        self.c = c
        self.tol = tol
        self.s_tol = s_tol
        self.max_iter = max_iter
        self.method = method

    def _iterate(self, grid, c):
        k2 = grid.k2
        r2 = sum(x ** 2 for x in grid.coords)
        u = 3.0 * c * np.exp(-0.25 * c * r2)
        sym = c + k2
        history = []
        for it in range(1, self.max_iter + 1):
            u_hat = np.fft.fftn(u)
            nl_hat = np.fft.fftn(0.5 * u * u)
            s = np.real(np.vdot(u_hat, sym * u_hat)) / np.real(np.vdot(u_hat, nl_hat))
            u = np.fft.ifftn(s ** 2 * nl_hat / sym).real
            res = ground_state_residual(Field(grid, u), c)
            history.append((abs(s - 1.0), res))
            if abs(s - 1.0) < self.s_tol and res < self.tol:
                return u, it, history
        raise ConvergenceError(
            f"ground state did not converge in {self.max_iter} iterations "
            f"(|s-1|={history[-1][0]:.3g}, residual={history[-1][1]:.3g})", history)

    def fit(self, grid, y=None):
        c = check_positive(self.c, "c")
        check_choice(self.method, "method", ("scaled", "direct"))
        if grid.dim != 2:
            raise ValueError("the ground state is computed on 2D grids")
        if np.exp(-0.5 * np.sqrt(c) * grid.box_length) >= 1e-12:
            raise ValueError(
                f"box too small: exp(-sqrt(c) L / 2) = "
                f"{np.exp(-0.5 * np.sqrt(c) * grid.box_length):.2e} must be < 1e-12")
        if self.method == "scaled":
            unit = type(grid)(grid.dim, grid.box_length * np.sqrt(c), grid.points)
            u, n_iter, history = self._iterate(unit, 1.0)
            self.unit_residual_ = ground_state_residual(Field(unit, u), 1.0)
            Q = Field(grid, c * u)
        else:
            u, n_iter, history = self._iterate(grid, c)
            Q = Field(grid, u)
            # residual of the c = 1 profile Q(x / sqrt c) / c, which is the same
            # relative number because the map is an exact rescaling
            self.unit_residual_ = ground_state_residual(Q, c) / c
        self.Q_ = Q
        self.residual_ = self.unit_residual_
        self.decay_rate_ = fit_decay_rate(Q) / np.sqrt(c)
        self.n_iter_ = n_iter
        self.history_ = history
        return self

    def result(self):
        return GroundState(self.Q_, float(self.c), self.residual_, self.decay_rate_,
                           self.n_iter_, self.history_)


def ground_state(grid, c=1.0, **kwargs):
    """Compute ``Q_c`` on a 2D grid; see :class:`GroundStateSolver`."""
    return GroundStateSolver(c=c, **kwargs).fit(grid).result()


# ----------------------------------------------------------- initial data


def one_sided_profile(z, rho=3.5, right="gauss", width=3.0, rate=1.0, tail_amplitude=0.05,
                      tail_scale=6.0, join_width=3.0, taper_at=None, taper_width=2.0):
    """Bump with fast decay on the right plus a polynomial tail on the left.

    ``bump + a (1 + (z/s)^2)^(-rho/2) (1 - h(z))`` where ``h`` is the analytic
    step ``(1 + tanh(z / join_width)) / 2``.  The bump is
    ``exp(-z^2 / (2 width^2))`` (``gauss``) or ``sech(z / width)^(rate width)``
    (``exp``, decaying like ``exp(-rate |z|)``).  Every ingredient is analytic
    in a strip, so the spectrum decays exponentially and little fast
    dispersive radiation is produced.  ``taper_at`` switches the tail off with
    another tanh step before it reaches the periodic seam.
    """
    z = np.asarray(z, dtype=float)
    if right == "gauss":
        bump = np.exp(-0.5 * (z / width) ** 2)
    elif right == "exp":
        bump = np.cosh(z / width) ** (-rate * width)
    else:
        raise ValueError(f"right must be 'gauss' or 'exp', got {right!r}")
    tail = tail_amplitude * (1.0 + (z / tail_scale) ** 2) ** (-0.5 * rho)
    tail = tail * 0.5 * (1.0 - np.tanh(z / join_width))
    if taper_at is not None:
        tail = tail * 0.5 * (1.0 + np.tanh((z - taper_at) / taper_width))
    return bump + tail


def one_sided_data(grid, sigma=None, amplitude=1.0, transverse_width=3.0, center=0.0, **profile):
    """``amplitude * one_sided_profile(sigma.x - center) * G(x_perp)``.

    ``sigma`` is normalised to a unit vector; in 2D ``G`` is a Gaussian of
    width ``transverse_width`` across ``sigma``.  Remaining keywords go to
    :func:`one_sided_profile`.
    """
    if sigma is None:
        sigma = (1.0,) + (0.0,) * (grid.dim - 1)
    sigma = np.asarray(sigma, dtype=float)
    unit = sigma / np.linalg.norm(sigma)
    z = grid.dot(unit) - center
    vals = amplitude * one_sided_profile(z, **profile)
    if grid.dim == 2:
        perp = -unit[1] * grid.coords[0] + unit[0] * grid.coords[1]
        vals = vals * np.exp(-0.5 * (perp / transverse_width) ** 2)
    return Field(grid, vals)
