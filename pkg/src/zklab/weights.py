"""Smooth cutoffs, polynomial and exponential weights, truncated weights.

Every evaluator returns analytic derivatives; finite differences appear only
in the test-suite.  The basic building block is the C-infinity step

    s(t) = 1 / (1 + exp(1/t - 1/(1-t)))   on (0, 1),

which is 0 for t <= 0, 1 for t >= 1 and satisfies s(t) + s(1-t) = 1.
"""

from dataclasses import dataclass, field
from functools import cached_property
from math import comb, factorial

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .spectral import ConeVector
from .validation import check_positive

MAX_CUTOFF_DERIVATIVE = 4
SEAM_CLAMP_FRACTION = 0.45

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def smooth_step(t, order=0):
    """``order``-th derivative of the smooth step ``s`` (order <= 4)."""
    t = np.asarray(t, dtype=float)
    if order == 0:
        out = np.where(t >= 1.0, 1.0, 0.0)
    else:
        out = np.zeros_like(t)
    inside = (t > 0.0) & (t < 1.0)
    if not np.any(inside):
        return out
    u = t[inside]
    a, b = 1.0 / u, 1.0 / (1.0 - u)
    # s = expit(y) with y = 1/(1-t) - 1/t
    y = b - a
    L = expit(y)
    if order == 0:
        out[inside] = L
        return out
    f1 = L * (1.0 - L)
    f = [L, f1, f1 * (1 - 2 * L), f1 * (1 - 6 * L + 6 * L ** 2),
         f1 * (1 - 2 * L) * (1 - 12 * L + 12 * L ** 2)]
    y1 = b ** 2 + a ** 2
    y2 = 2 * b ** 3 - 2 * a ** 3
    y3 = 6 * b ** 4 + 6 * a ** 4
    y4 = 24 * b ** 5 - 24 * a ** 5
    if order == 1:
        val = f[1] * y1
    elif order == 2:
        val = f[2] * y1 ** 2 + f[1] * y2
    elif order == 3:
        val = f[3] * y1 ** 3 + 3 * f[2] * y1 * y2 + f[1] * y3
    elif order == 4:
        val = (f[4] * y1 ** 4 + 6 * f[3] * y1 ** 2 * y2
               + f[2] * (3 * y2 ** 2 + 4 * y1 * y3) + f[1] * y4)
    else:
        raise ValueError(f"smooth_step derivative order must be <= 4, got {order}")
    # f1 underflows to 0 before the polynomial factors overflow
    out[inside] = np.nan_to_num(val, nan=0.0, posinf=0.0, neginf=0.0)
    return out


def smooth_step_integral(t):
    """``A(t) = int_0^t s``; Gauss-Legendre with 64 nodes is exact to rounding."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 0.0, 1.0)
    nodes = 0.5 * tc[..., None] * (_GL_NODES + 1.0)
    vals = smooth_step(nodes)
    out = 0.5 * tc * np.sum(_GL_WEIGHTS * vals, axis=-1)
    return np.where(t >= 1.0, 0.5 + (t - 1.0), out)


def _falling(p, n):
    out = 1.0
    for i in range(n):
        out *= p - i
    return out


def bracket_power(z, r, order=0):
    """``d^order/dz^order <z>^r`` for scalar-argument brackets."""
    z = np.asarray(z, dtype=float)
    w = 1.0 + z ** 2
    p = 0.5 * r
    total = np.zeros_like(z)
    for k in range(order // 2 + 1):
        coef = factorial(order) / (factorial(k) * factorial(order - 2 * k)) * _falling(p, order - k)
        if coef == 0.0:
            continue
        total = total + coef * (2 * z) ** (order - 2 * k) * w ** (p - order + k)
    return total


def bracket_power_nd(vectors, r, beta):
    """``d^beta (1 + |v|^2)^(r/2)`` where ``vectors`` holds one array per axis."""
    vectors = [np.asarray(v, dtype=float) for v in vectors]
    w = 1.0 + sum(v ** 2 for v in vectors)
    # each axis contributes terms coef * (2 v_i)^(n - 2k) and lowers the power by n - k
    terms = [(1.0, 0.5 * r, np.ones_like(w))]
    for v, n in zip(vectors, beta):
        if n == 0:
            continue
        new_terms = []
        for coef, p, mono in terms:
            for k in range(n // 2 + 1):
                c = factorial(n) / (factorial(k) * factorial(n - 2 * k)) * _falling(p, n - k)
                if c == 0.0:
                    continue
                new_terms.append((coef * c, p - n + k, mono * (2 * v) ** (n - 2 * k)))
        terms = new_terms
    total = np.zeros_like(w)
    for coef, p, mono in terms:
        total = total + coef * mono * w ** p
    return total


@dataclass(frozen=True)
class CutoffFamily:
    """The triple ``chi_{eps,tau}``, ``phi_{eps,tau}``, ``psi_eps`` summing to one.

    ``chi'`` is ``c * s((x-eps)/eps) * s((tau-x)/eps)`` with
    ``c = 1/(tau - 2 eps)``, so it is supported in ``[eps, tau]``, constant
    on ``[2 eps, tau - eps]`` and integrates to exactly one.  ``psi`` is a reversed step on
    ``[eps/4, eps/2]`` and ``phi = 1 - chi - psi``.
    """

    eps: float
    tau: float

    def __post_init__(self):
        check_positive(self.eps, "eps")
        if not self.tau >= 5 * self.eps:
            raise ValueError(f"tau >= 5*eps required, got eps={self.eps}, tau={self.tau}")

    @property
    def slope(self):
        return 1.0 / (self.tau - 2.0 * self.eps)

    def chi(self, x, order=0):
        x = np.asarray(x, dtype=float)
        eps, tau, c = self.eps, self.tau, self.slope
        if order > MAX_CUTOFF_DERIVATIVE:
            raise ValueError(f"chi derivatives are available up to order {MAX_CUTOFF_DERIVATIVE}")
        if order == 0:
            out = np.where(x >= tau, 1.0, 0.0)
            left = (x > eps) & (x < 2 * eps)
            mid = (x >= 2 * eps) & (x <= tau - eps)
            right = (x > tau - eps) & (x < tau)
            out[left] = c * eps * smooth_step_integral((x[left] - eps) / eps)
            out[mid] = c * (x[mid] - 1.5 * eps)
            out[right] = 1.0 - c * eps * smooth_step_integral((tau - x[right]) / eps)
            return out
        j = order - 1
        u1 = (x - eps) / eps
        u2 = (tau - x) / eps
        total = np.zeros_like(x)
        for i in range(j + 1):
            total = total + comb(j, i) * smooth_step(u1, i) * smooth_step(u2, j - i) * (-1.0) ** (j - i)
        return c * total / eps ** j

    def psi(self, x, order=0):
        q = 0.25 * self.eps
        x = np.asarray(x, dtype=float)
        if order == 0:
            return 1.0 - smooth_step((x - q) / q)
        return -smooth_step((x - q) / q, order) / q ** order

    def phi(self, x, order=0):
        if order == 0:
            return 1.0 - self.chi(x) - self.psi(x)
        return -self.chi(x, order) - self.psi(x, order)

    def lower_bound_iv(self, x_samples=None):
        """Smallest value of chi on (3 eps, inf), i.e. at 3 eps by monotonicity."""
        return float(self.chi(np.array([3.0 * self.eps]))[0])

    def sample_grid(self, n=2048):
        return np.linspace(-self.tau, 2 * self.tau, n)


def build_cutoff_family(eps, tau):
    return CutoffFamily(float(eps), float(tau))


def _clamped_projection(cone, grid, clamp):
    if not clamp:
        return cone.project(grid)
    bound = SEAM_CLAMP_FRACTION * grid.box_length
    coords = [np.clip(x, -bound, bound) for x in grid.coords]
    return sum(s * x for s, x in zip(cone.sigma, coords))


@dataclass(frozen=True)
class PolyWeight:
    """``<sigma.x + nu t + kappa>^r chi_{eps,tau}(sigma.x + nu t + kappa)``."""

    r: float
    cutoff: CutoffFamily
    cone: ConeVector

    def __post_init__(self):
        check_positive(self.r, "r", strict=False)

    def argument(self, x, t):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(np.dot(self.cone.sigma, x)) + self.cone.nu * t + self.cone.kappa

    def profile(self, z, order=0):
        """``d^order/dz^order`` of ``<z>^r chi(z)`` (Leibniz rule)."""
        z = np.asarray(z, dtype=float)
        total = np.zeros_like(z)
        for i in range(order + 1):
            total = total + comb(order, i) * bracket_power(z, self.r, i) * self.cutoff.chi(z, order - i)
        return total

    def __call__(self, x, t=0.0):
        return float(self.profile(np.array([self.argument(x, t)]))[0])

    def on_grid(self, grid, t=0.0, order=0, clamp=True):
        z = _clamped_projection(self.cone, grid, clamp) + self.cone.nu * t + self.cone.kappa
        return self.profile(z, order)


def eval_poly_weight(w, x, t):
    return w(x, t)


@dataclass(frozen=True)
class ExpWeightFamily:
    """Bounded surrogates of ``exp(b x)``:

    ``q = e^{bx} (1 + eta e^{2bx})^{-1/2}``, ``rho = e^{bx} (1 + eta e^{2bx})^{-1}``,
    ``p = q^2``.  ``eta = 0`` gives the exponential itself.
    """

    b: float
    eta: float = 0.0

    def __post_init__(self):
        check_positive(self.b, "b")
        check_positive(self.eta, "eta", strict=False)

    def _log_one_plus_E(self, x):
        if self.eta == 0:
            return np.zeros_like(x)
        return np.logaddexp(0.0, np.log(self.eta) + 2 * self.b * x)

    def _E_ratio(self, x):
        """``E/(1+E)`` with ``E = eta e^{2bx}``, computed without overflow."""
        if self.eta == 0:
            return np.zeros_like(x)
        return expit(np.log(self.eta) + 2 * self.b * x)

    def q(self, x):
        x = np.asarray(x, dtype=float)
        if self.eta == 0:
            return np.exp(self.b * x)
        return np.exp(self.b * x - 0.5 * self._log_one_plus_E(x))

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        if self.eta == 0:
            return np.exp(self.b * x)
        return np.exp(self.b * x - self._log_one_plus_E(x))

    def p(self, x, order=0):
        x = np.asarray(x, dtype=float)
        b = self.b
        if order == 0:
            return self.q(x) ** 2
        rho2 = self.rho(x) ** 2
        frac = self._E_ratio(x)          # E/(1+E)
        one_minus = 1.0 - 2.0 * frac     # (1-E)/(1+E)
        if order == 1:
            return 2 * b * rho2
        if order == 2:
            return 4 * b ** 2 * rho2 * one_minus
        if order == 3:
            # 8 b^3 rho^2 ((1-E)^2 - 2E) / (1+E)^2
            inv = 1.0 - frac               # 1/(1+E)
            return 8 * b ** 3 * rho2 * (one_minus ** 2 - 2 * frac * inv)
        raise ValueError("p derivatives are available up to order 3")

    def rho_prime(self, x):
        x = np.asarray(x, dtype=float)
        return self.b * self.rho(x) * (1.0 - 2.0 * self._E_ratio(x))


def exp_weight_family(b, eta):
    return ExpWeightFamily(float(b), float(eta))


@dataclass(frozen=True)
class TruncatedWeight:
    """Radial weight equal to ``<x>`` for ``|x| <= N`` and ``2N`` for ``|x| >= 3N``.

    Past ``N`` the slope ``y/<y>`` is switched off by ``1 - s((y-N)/ell)``;
    ``ell <= 2N`` is solved for so the plateau value is exactly ``2N``.
    """

    N: int
    n: int = 1
    ell: float = field(init=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if self.n not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.n}")
        N = float(self.N)
        target = 2 * N - np.sqrt(1 + N * N)

        def gap(ell):
            return self._ramp_integral(N + ell, ell) - target

        object.__setattr__(self, "ell", brentq(gap, 1e-6, 2 * N, xtol=1e-15, rtol=1e-15))

    def _slope(self, y, ell, order=0):
        N = float(self.N)
        y = np.asarray(y, dtype=float)
        t = (y - N) / ell
        lam = [1.0 - smooth_step(t), -smooth_step(t, 1) / ell, -smooth_step(t, 2) / ell ** 2]
        br = 1.0 + y ** 2
        g = [y / np.sqrt(br), br ** -1.5, -3 * y * br ** -2.5]
        if order == 0:
            return g[0] * lam[0]
        if order == 1:
            return g[1] * lam[0] + g[0] * lam[1]
        if order == 2:
            return g[2] * lam[0] + 2 * g[1] * lam[1] + g[0] * lam[2]
        raise ValueError("slope derivatives available up to order 2")

    def _ramp_integral(self, y, ell):
        N = float(self.N)
        y = np.asarray(y, dtype=float)
        h = np.maximum(y - N, 0.0)
        nodes = N + 0.5 * h[..., None] * (_GL_NODES + 1.0)
        return 0.5 * h * np.sum(_GL_WEIGHTS * self._slope(nodes, ell), axis=-1)

    def profile(self, y, order=0):
        """``d^order/dy^order w~_N(y)`` for ``y >= 0`` (order <= 3)."""
        N = float(self.N)
        y = np.abs(np.asarray(y, dtype=float))
        inner = y <= N
        outer = y >= N + self.ell
        if order == 0:
            out = 2 * N + 0.0 * y
            mid = ~inner & ~outer
            out[inner] = np.sqrt(1 + y[inner] ** 2)
            out[mid] = np.sqrt(1 + N * N) + self._ramp_integral(y[mid], self.ell)
            return out
        out = np.zeros_like(y)
        out[inner] = bracket_power(y[inner], 1.0, order)
        mid = ~inner & ~outer
        out[mid] = self._slope(y[mid], self.ell, order - 1)
        return out

    def power_profile(self, y, r, order=0):
        """``d^order/dy^order (w~_N(y))^r`` by Faa di Bruno (order <= 3)."""
        w = [self.profile(y, j) for j in range(order + 1)]
        if order == 0:
            return w[0] ** r
        f = [_falling(r, j) * w[0] ** (r - j) for j in range(order + 1)]
        if order == 1:
            return f[1] * w[1]
        if order == 2:
            return f[2] * w[1] ** 2 + f[1] * w[2]
        if order == 3:
            return f[3] * w[1] ** 3 + 3 * f[2] * w[1] * w[2] + f[1] * w[3]
        raise ValueError("order must be <= 3")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.n == 1:
            return self.profile(x)
        return self.profile(np.sqrt(np.sum(x ** 2, axis=0)))

    def power_derivative(self, coords, r, alpha):
        """Cartesian ``d^alpha (w_N^r)`` at points ``coords`` (one array per axis)."""
        alpha = tuple(int(a) for a in alpha)
        order = sum(alpha)
        if self.n == 1:
            x = np.asarray(coords[0], dtype=float)
            return np.sign(x) ** order * self.power_profile(x, r, order)
        if order > 3:
            raise ValueError("order must be <= 3")
        x = [np.asarray(c, dtype=float) for c in coords]
        rho = np.sqrt(x[0] ** 2 + x[1] ** 2)
        safe = np.where(rho > 0, rho, 1.0)
        e = [xi / safe for xi in x]
        G = [self.power_profile(rho, r, j) for j in range(order + 1)]
        # G'/rho and (G'/rho)' are regular at the origin where w = <x>
        inner = rho <= self.N
        g_over = np.where(inner, r * (1 + rho ** 2) ** (0.5 * r - 1), G[1] / safe) if order >= 2 else None
        dg_over = None
        if order == 3:
            dg_over = np.where(inner, r * (r - 2) * rho * (1 + rho ** 2) ** (0.5 * r - 2),
                               G[2] / safe - G[1] / safe ** 2)
        idx = [i for i, a in enumerate(alpha) for _ in range(a)]
        if order == 0:
            return G[0]
        if order == 1:
            return G[1] * e[idx[0]]
        if order == 2:
            i, j = idx
            delta = 1.0 if i == j else 0.0
            return G[2] * e[i] * e[j] + g_over * (delta - e[i] * e[j])
        i, j, k = idx
        d = lambda a, b: 1.0 if a == b else 0.0
        sym = d(i, k) * e[j] + d(j, k) * e[i] + d(i, j) * e[k] - 3 * e[i] * e[j] * e[k]
        return G[3] * e[i] * e[j] * e[k] + dg_over * sym


def truncated_weight(N, n=1):
    return TruncatedWeight(int(N), int(n))
