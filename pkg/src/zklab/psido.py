"""Pseudo-differential operators with weighted symbols on periodic grids.

Quantization convention
-----------------------
With angular wavenumbers ``xi`` (see :mod:`zklab.spectral`) the
Kohn-Nirenberg operator is discretised as

    Psi_a f(x_j) = (1/N) sum_k a(x_j, xi_k) f_hat(xi_k) exp(i xi_k . x_j).

A symbol written for the ``exp(2 pi i x . zeta)`` convention corresponds to
``a(x, xi) = a_2pi(x, xi / 2pi)``.  In the angular variables the composition
expansion reads

    c_N = sum_{|beta| < N} ((-i)^|beta| / beta!) d_xi^beta a . d_x^beta b,

i.e. the factor ``(2 pi i)^-|beta|`` becomes ``(-i)^|beta|``.  Orders and
class bounds are unaffected because ``<xi>`` and ``<xi/2pi>`` are comparable.

Symbols built from the catalog (``<xi>^m``, ``<sigma.x + omega>^q``,
cutoff-dressed variants and their products) are *separable*: a finite sum of
products of an x-factor and a xi-factor.  They carry analytic derivatives and
are applied with FFTs.  Arbitrary callables fall back to dense evaluation and
centred finite differences.
"""

from dataclasses import dataclass
from math import factorial, prod
from itertools import product as iproduct

import numpy as np

from .spectral import Field, apply_bessel, apply_derivative, make_grid
from .validation import check_multi_index, check_positive
from .weights import CutoffFamily, bracket_power, bracket_power_nd

MAX_COMPOSITION_ORDER = 4
MAX_SEMINORM_ORDER = 3
CATALOG = ("identity", "bessel", "weight", "product", "cutoff-product")


def multi_indices(dim, order):
    """All multi-indices of length ``dim`` with ``|beta| == order``."""
    return [b for b in iproduct(range(order + 1), repeat=dim) if sum(b) == order]


def _beta_factorial(beta):
    return prod(factorial(b) for b in beta)


def _binomial_splits(alpha):
    """Pairs ``(a1, a2)`` with ``a1 + a2 = alpha`` and the multinomial weight."""
    ranges = [range(a + 1) for a in alpha]
    for a1 in iproduct(*ranges):
        a2 = tuple(a - b for a, b in zip(alpha, a1))
        w = prod(factorial(a) // (factorial(b) * factorial(a - b)) for a, b in zip(alpha, a1))
        yield a1, a2, w


# ---------------------------------------------------------------- factors


@dataclass(frozen=True)
class XFactor:
    """``d^order/dz^order [<z>^q chi(z)]`` at ``z = sigma.x + omega``."""

    sigma: tuple
    omega: float = 0.0
    q: float = 0.0
    cutoff: CutoffFamily = None
    order: int = 0

    @property
    def is_zero(self):
        return self.q == 0 and self.cutoff is None and self.order > 0

    def profile(self, z):
        if self.cutoff is None:
            return bracket_power(z, self.q, self.order)
        out = np.zeros_like(z)
        for i in range(self.order + 1):
            c = factorial(self.order) // (factorial(i) * factorial(self.order - i))
            out = out + c * bracket_power(z, self.q, i) * self.cutoff.chi(z, self.order - i)
        return out

    def values(self, grid):
        return self.profile(grid.dot(self.sigma) + self.omega)

    def derivative(self, alpha):
        coef = prod(s ** a for s, a in zip(self.sigma, alpha))
        return coef, XFactor(self.sigma, self.omega, self.q, self.cutoff, self.order + sum(alpha))


@dataclass(frozen=True)
class GridFactor:
    """A sampled multiplier ``g``; derivatives are spectral."""

    field: Field
    alpha: tuple = None

    @property
    def is_zero(self):
        return False

    def values(self, grid):
        if grid != self.field.grid:
            raise ValueError("multiplier and symbol live on different grids")
        if self.alpha is None or not any(self.alpha):
            return self.field.values
        return apply_derivative(self.field, self.alpha).values

    def derivative(self, alpha):
        base = self.alpha or (0,) * len(alpha)
        return 1.0, GridFactor(self.field, tuple(a + b for a, b in zip(base, alpha)))


@dataclass(frozen=True)
class KFactor:
    """``d_xi^beta <xi>^m``; odd derivatives vanish on the Nyquist plane."""

    m: float = 0.0
    beta: tuple = ()

    @property
    def is_zero(self):
        return self.m == 0 and any(self.beta)

    def values(self, grid):
        beta = self.beta or (0,) * grid.dim
        vals = bracket_power_nd(grid.wavenumbers, self.m, beta)
        for nyq, b in zip(grid.nyquist, beta):
            if b % 2:
                vals = np.where(nyq, 0.0, vals)
        return vals

    def derivative(self, beta):
        base = self.beta or (0,) * len(beta)
        return 1.0, KFactor(self.m, tuple(a + b for a, b in zip(base, beta)))


def _derive_product(factors, alpha):
    """Leibniz rule for a tuple of factors; returns a list of ``(coef, factors)``."""
    if not any(alpha):
        return [(1.0, tuple(factors))]
    if len(factors) == 0:
        return []
    if len(factors) == 1:
        c, f = factors[0].derivative(alpha)
        return [] if (c == 0 or f.is_zero) else [(c, (f,))]
    head, rest = factors[0], factors[1:]
    out = []
    for a1, a2, w in _binomial_splits(alpha):
        c, fh = head.derivative(a1) if any(a1) else (1.0, head)
        if c == 0 or fh.is_zero:
            continue
        for cr, fr in _derive_product(rest, a2):
            out.append((w * c * cr, (fh,) + fr))
    return out


@dataclass(frozen=True)
class Term:
    coef: complex
    xfactors: tuple
    kfactors: tuple

    def x_values(self, grid):
        out = np.ones(grid.shape)
        for f in self.xfactors:
            out = out * f.values(grid)
        return out

    def k_values(self, grid):
        out = np.ones(grid.shape)
        for f in self.kfactors:
            out = out * f.values(grid)
        return out


# ---------------------------------------------------------------- symbols


class Symbol:
    """Base class: a symbol ``a(x, xi)`` of declared order ``(m, q)``.

    Parameters
    ----------
    m, q : float
        Declared orders in xi and in the weight variable.
    sigma : tuple
        Direction of the weight ``<sigma.x + omega>``.
    omega : float
        Shift of the weight.
    """

    def __init__(self, m, q, sigma, omega=0.0, name="symbol"):
        self.m = float(m)
        self.q = float(q)
        self.sigma = tuple(float(s) for s in np.atleast_1d(sigma))
        self.omega = float(omega)
        self.name = name

    @property
    def dim(self):
        return len(self.sigma)

    def weight(self, grid, power):
        return bracket_power(grid.dot(self.sigma) + self.omega, power)

    def dense(self, grid):
        """Samples ``a(x_j, xi_k)`` with shape ``grid.shape + grid.shape``."""
        raise NotImplementedError

    def apply(self, values, grid):
        """Apply the quantized operator to complex samples; returns complex samples."""
        a = self.dense(grid)
        spec = np.fft.fftn(values)
        phase = _phase(grid)
        npts = grid.points ** grid.dim
        flat = a.reshape(npts, npts) * phase
        return (flat @ spec.reshape(npts)).reshape(grid.shape) / npts

    def x_derivative(self, alpha):
        raise NotImplementedError

    def xi_derivative(self, beta):
        raise NotImplementedError

    def _check_grid(self, grid):
        if grid.dim != self.dim:
            raise ValueError(f"symbol is {self.dim}D, grid is {grid.dim}D")


def _phase(grid):
    """``exp(i xi_k . x_j)`` relative to the FFT index phase, as a dense matrix."""
    x = np.stack([c.reshape(-1) for c in grid.coords])
    k = np.stack([c.reshape(-1) for c in grid.wavenumbers])
    x0 = -0.5 * grid.box_length
    return np.exp(1j * ((x - x0).T @ k))


class SeparableSymbol(Symbol):
    """Finite sum of ``coef * prod(x-factors) * prod(xi-factors)``."""

    def __init__(self, terms, m, q, sigma, omega=0.0, name="symbol"):
        super().__init__(m, q, sigma, omega, name)
        self.terms = tuple(t for t in terms if t.coef != 0)

    def dense(self, grid):
        self._check_grid(grid)
        out = np.zeros(grid.shape + grid.shape, dtype=complex)
        for t in self.terms:
            out += t.coef * np.multiply.outer(t.x_values(grid), t.k_values(grid))
        return out

    def apply(self, values, grid):
        self._check_grid(grid)
        spec = np.fft.fftn(values)
        out = np.zeros(grid.shape, dtype=complex)
        for t in self.terms:
            out += t.coef * t.x_values(grid) * np.fft.ifftn(spec * t.k_values(grid))
        return out

    def x_derivative(self, alpha):
        alpha = check_multi_index(alpha, self.dim)
        terms = []
        for t in self.terms:
            for c, fs in _derive_product(t.xfactors, alpha):
                terms.append(Term(t.coef * c, fs, t.kfactors))
        return SeparableSymbol(terms, self.m, self.q - sum(alpha), self.sigma, self.omega,
                               f"d_x{alpha} {self.name}")

    def xi_derivative(self, beta):
        beta = check_multi_index(beta, self.dim)
        terms = []
        for t in self.terms:
            for c, fs in _derive_product(t.kfactors, beta):
                terms.append(Term(t.coef * c, t.xfactors, fs))
        return SeparableSymbol(terms, self.m - sum(beta), self.q, self.sigma, self.omega,
                               f"d_xi{beta} {self.name}")

    def __add__(self, other):
        return SeparableSymbol(self.terms + other.terms, max(self.m, other.m),
                               max(self.q, other.q), self.sigma, self.omega,
                               f"({self.name} + {other.name})")

    def scale(self, c):
        return SeparableSymbol([Term(t.coef * c, t.xfactors, t.kfactors) for t in self.terms],
                               self.m, self.q, self.sigma, self.omega, self.name)

    def __mul__(self, other):
        """Pointwise product of two separable symbols."""
        terms = [Term(s.coef * t.coef, s.xfactors + t.xfactors, s.kfactors + t.kfactors)
                 for s in self.terms for t in other.terms]
        return SeparableSymbol(terms, self.m + other.m, self.q + other.q, self.sigma,
                               self.omega, f"{self.name}*{other.name}")


class CallableSymbol(Symbol):
    """User symbol ``fn(x, xi)`` where ``x`` and ``xi`` are tuples of arrays.

    Derivatives are centred differences with step ``h_x`` in x and ``h_xi``
    in xi.  :meth:`on_grid` picks the grid spacing and the wavenumber spacing.
    """

    def __init__(self, fn, m, q, sigma, omega=0.0, name="callable", h_x=None, h_xi=None):
        super().__init__(m, q, sigma, omega, name)
        self.fn = fn
        self.h_x = h_x
        self.h_xi = h_xi

    @classmethod
    def on_grid(cls, fn, grid, m, q, sigma=None, omega=0.0, name="callable"):
        sigma = sigma if sigma is not None else (1.0,) + (0.0,) * (grid.dim - 1)
        return cls(fn, m, q, sigma, omega, name, grid.spacing, 2 * np.pi / grid.box_length)

    def dense(self, grid):
        self._check_grid(grid)
        d = grid.dim
        x = tuple(c.reshape(grid.shape + (1,) * d) for c in grid.coords)
        k = tuple(c.reshape((1,) * d + grid.shape) for c in grid.wavenumbers)
        return np.array(np.broadcast_to(self.fn(x, k), grid.shape + grid.shape), dtype=complex)

    def _differenced(self, index, in_x):
        index = check_multi_index(index, self.dim)
        h = self.h_x if in_x else self.h_xi
        if h is None:
            raise ValueError("finite-difference steps are unset; build the symbol with on_grid")
        fn = self.fn
        for axis, order in enumerate(index):
            for _ in range(order):
                fn = _centred(fn, axis, h, in_x)
        return fn, index

    def x_derivative(self, alpha):
        fn, alpha = self._differenced(alpha, True)
        return CallableSymbol(fn, self.m, self.q - sum(alpha), self.sigma, self.omega,
                              f"d_x{alpha} {self.name}", self.h_x, self.h_xi)

    def xi_derivative(self, beta):
        fn, beta = self._differenced(beta, False)
        return CallableSymbol(fn, self.m - sum(beta), self.q, self.sigma, self.omega,
                              f"d_xi{beta} {self.name}", self.h_x, self.h_xi)

    def __mul__(self, other):
        f, g = self.fn, other.fn
        return CallableSymbol(lambda x, k: f(x, k) * g(x, k), self.m + other.m, self.q + other.q,
                              self.sigma, self.omega, f"{self.name}*{other.name}", self.h_x, self.h_xi)

    def __add__(self, other):
        f, g = self.fn, other.fn
        return CallableSymbol(lambda x, k: f(x, k) + g(x, k), max(self.m, other.m),
                              max(self.q, other.q), self.sigma, self.omega,
                              f"({self.name} + {other.name})", self.h_x, self.h_xi)

    def scale(self, c):
        f = self.fn
        return CallableSymbol(lambda x, k: c * f(x, k), self.m, self.q, self.sigma, self.omega,
                              self.name, self.h_x, self.h_xi)


def _centred(fn, axis, h, in_x):
    def shift(v, s):
        return tuple(c + s if i == axis else c for i, c in enumerate(v))

    if in_x:
        return lambda x, k: (fn(shift(x, h), k) - fn(shift(x, -h), k)) / (2 * h)
    return lambda x, k: (fn(x, shift(k, h)) - fn(x, shift(k, -h))) / (2 * h)


# ---------------------------------------------------------------- catalog


def bessel_symbol(m, sigma=(1.0,), omega=0.0):
    return SeparableSymbol([Term(1.0, (), (KFactor(m),))], m, 0.0, sigma, omega, f"<xi>^{m:g}")


def weight_symbol(q, sigma=(1.0,), omega=0.0, cutoff=None):
    sigma = tuple(float(s) for s in np.atleast_1d(sigma))
    name = f"<z>^{q:g}" + (" chi(z)" if cutoff is not None else "")
    return SeparableSymbol([Term(1.0, (XFactor(sigma, omega, q, cutoff),), ())], 0.0, q,
                           sigma, omega, name)


def product_symbol(m, q, sigma=(1.0,), omega=0.0, cutoff=None):
    return weight_symbol(q, sigma, omega, cutoff) * bessel_symbol(m, sigma, omega)


def catalog_symbol(name, dim=1, m=1.0, q=1.0, omega=0.0, cutoff=None, sigma=None):
    """Build a catalog symbol by id.

    Parameters
    ----------
    name : str
        One of ``identity``, ``bessel``, ``weight``, ``product``,
        ``cutoff-product``.
    dim : int
        Spatial dimension; the default direction is ``e_1``.
    m, q : float
        Orders in xi and in ``<sigma.x + omega>``.
    cutoff : CutoffFamily, optional
        Used by ``cutoff-product``; defaults to ``eps=1, tau=5``.
    """
    if sigma is None:
        sigma = (1.0,) + (0.0,) * (dim - 1)
    if name == "identity":
        return bessel_symbol(0.0, sigma, omega)
    if name == "bessel":
        return bessel_symbol(m, sigma, omega)
    if name == "weight":
        return weight_symbol(q, sigma, omega)
    if name == "product":
        return product_symbol(m, q, sigma, omega)
    if name == "cutoff-product":
        return product_symbol(m, q, sigma, omega, cutoff or CutoffFamily(1.0, 5.0))
    raise ValueError(f"unknown catalog symbol {name!r}; choose from {CATALOG}")


# ---------------------------------------------------------------- operators


def quantize_apply(a, f, return_complex=False):
    """Apply ``Psi_a`` to the field ``f``.

    Returns a real :class:`Field` unless ``return_complex`` is set, in which
    case the raw complex samples are returned.
    """
    if a.dim != f.grid.dim:
        raise ValueError(f"symbol is {a.dim}D but field is {f.grid.dim}D")
    out = a.apply(f.values.astype(complex), f.grid)
    if return_complex:
        return out
    return Field(f.grid, out.real)


def dense_matrix(a, grid):
    """Explicit matrix ``M[j, l] = (1/N) sum_k a(x_j, xi_k) exp(i xi_k (x_j - x_l))``."""
    npts = grid.points ** grid.dim
    x = np.stack([c.reshape(-1) for c in grid.coords])
    k = np.stack([c.reshape(-1) for c in grid.wavenumbers])
    sym = a.dense(grid).reshape(npts, npts)
    ex = np.exp(1j * (x.T @ k))          # e^{i xi_k x_j}
    return (sym * ex) @ ex.conj().T / npts


@dataclass
class SeminormTable:
    """Fitted constants ``c[alpha, beta]`` and the large-xi divergence flag."""

    constants: dict
    diverges: bool
    xi_profile: np.ndarray
    xi_axis: np.ndarray

    def max_constant(self):
        return max(self.constants.values())

    def to_dict(self):
        return {"constants": {f"{a}|{b}": v for (a, b), v in self.constants.items()},
                "diverges": self.diverges}


def _normalised_sup(sym, grid, alpha, beta, m_ref, q_ref):
    """Per-xi profile of ``sup_x |d^alpha_x d^beta_xi a| / weights``."""
    d = sym.x_derivative(alpha) if any(alpha) else sym
    d = d.xi_derivative(beta) if any(beta) else d
    z = grid.dot(sym.sigma) + sym.omega
    wx = bracket_power(z, q_ref - sum(alpha))
    wk = (1.0 + grid.k2) ** (0.5 * (m_ref - sum(beta)))
    if isinstance(d, SeparableSymbol) and len(d.terms) <= 1:
        if not d.terms:
            return np.zeros(grid.shape)
        t = d.terms[0]
        return abs(t.coef) * np.max(np.abs(t.x_values(grid)) / wx) * np.abs(t.k_values(grid)) / wk
    dense = np.abs(d.dense(grid)) / np.multiply.outer(wx, wk)
    return dense.reshape((-1,) + grid.shape).max(axis=0)


def class_seminorms(a, grid, max_order=MAX_SEMINORM_ORDER, growth_factor=1.25):
    """Estimate the class constants of ``a`` on ``grid``.

    For every ``|alpha|, |beta| <= max_order`` the constant is the sup over
    grid points and grid wavenumbers of
    ``|d_x^alpha d_xi^beta a| / (<sigma.x+omega>^(q-|alpha|) <xi>^(m-|beta|))``.
    The symbol is flagged divergent when, for some pair, the sup over x is
    nondecreasing along ``|xi|`` on the outer half of the wavenumber range
    and grows there by more than ``growth_factor``.
    """
    if max_order > MAX_SEMINORM_ORDER:
        raise ValueError(f"max_order must be <= {MAX_SEMINORM_ORDER}")
    consts = {}
    diverges = False
    kmag = np.sqrt(grid.k2).reshape(-1)
    order = np.argsort(kmag, kind="stable")
    shells, inverse = np.unique(np.round(kmag[order], 12), return_inverse=True)
    worst = None
    for na in range(max_order + 1):
        for nb in range(max_order + 1):
            for alpha in multi_indices(grid.dim, na):
                for beta in multi_indices(grid.dim, nb):
                    prof = _normalised_sup(a, grid, alpha, beta, a.m, a.q).reshape(-1)[order]
                    shell_max = np.zeros(shells.size)
                    np.maximum.at(shell_max, inverse, prof)
                    consts[(alpha, beta)] = float(shell_max.max())
                    outer = shell_max[shells >= 0.5 * shells[-1]]
                    if outer[0] > 0 and np.all(np.diff(outer) >= -1e-12 * outer.max()):
                        if outer[-1] > growth_factor * outer[0]:
                            diverges = True
                    if alpha == (0,) * grid.dim and beta == (0,) * grid.dim:
                        worst = shell_max
    return SeminormTable(consts, diverges, worst, shells)


def compose_expansion(a, b, N):
    """Truncated composition symbol ``c_N`` of ``Psi_a Psi_b``."""
    if not 1 <= N <= MAX_COMPOSITION_ORDER:
        raise ValueError(f"N must be in 1..{MAX_COMPOSITION_ORDER}, got {N}")
    total = None
    for order in range(N):
        for beta in multi_indices(a.dim, order):
            c = (-1j) ** order / _beta_factorial(beta)
            da = a.xi_derivative(beta) if order else a
            db = b.x_derivative(beta) if order else b
            term = (da * db).scale(c)
            total = term if total is None else total + term
    total.m, total.q = a.m + b.m, a.q + b.q
    total.name = f"c_{N}[{a.name}, {b.name}]"
    return total


@dataclass(frozen=True)
class GaussianSample:
    """``exp(-|x-c|^2 / 2w^2) cos(k0.x + phase)``."""

    center: tuple
    width: float
    k0: tuple
    phase: float

    def __call__(self, grid):
        x = grid.coords
        r2 = sum((xi - c) ** 2 for xi, c in zip(x, self.center))
        arg = sum(k * xi for k, xi in zip(self.k0, x)) + self.phase
        return Field(grid, np.exp(-0.5 * r2 / self.width ** 2) * np.cos(arg))


def schwartz_ensemble(dim, box_length, size=100, seed=1, width=(1.0, 2.5), k_max=2.0):
    """Seeded Gaussians with random centres, widths and modulations.

    Centres stay within ``box_length/8`` of the origin so every sample is
    negligible at the periodic seam.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(size):
        c = tuple(rng.uniform(-box_length / 8, box_length / 8, dim))
        w = float(rng.uniform(*width))
        k0 = tuple(rng.uniform(-k_max, k_max, dim))
        ph = float(rng.uniform(0, 2 * np.pi))
        out.append(GaussianSample(c, w, k0, ph))
    return out


def _norm(values, grid):
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * grid.cell_volume))


def composition_remainder(a, b, N, grid, ensemble):
    """``max_f ||Psi_a Psi_b f - Psi_{c_N} f|| / ||f||`` over the ensemble."""
    c = compose_expansion(a, b, N)
    worst = 0.0
    for sample in ensemble:
        f = sample(grid)
        lhs = a.apply(b.apply(f.values.astype(complex), grid), grid)
        rhs = c.apply(f.values.astype(complex), grid)
        worst = max(worst, _norm(lhs - rhs, grid) / f.norm())
    return worst


def remainder_curve(a, b, grid, ensemble, orders=(1, 2, 3)):
    return [composition_remainder(a, b, N, grid, ensemble) for N in orders]


def _as_factor(g, grid):
    if isinstance(g, Field):
        return GridFactor(g)
    if isinstance(g, XFactor):
        return g
    raise TypeError("g must be a Field or an XFactor")


@dataclass
class CommutatorReport:
    corrections: list           # (beta, coefficient, symbol d_xi^beta a, multiplier d^beta g)
    remainder_bound: float

    def apply_corrections(self, f):
        grid = f.grid
        out = np.zeros(grid.shape, dtype=complex)
        for beta, coef, sym, gfac in self.corrections:
            out += coef * sym.apply(gfac.values(grid) * f.values, grid)
        return out


def commutator_factorize(g, a, N, grid, ensemble):
    """Factor ``g Psi_a f = Psi_a(g f) + sum_beta c_beta Psi_{d^beta a}(d^beta g f) + K_N f``.

    Corrections run over ``1 <= |beta| < N`` with ``c_beta = i^|beta| / beta!``
    (empty for ``N = 1``).  ``remainder_bound`` is the ensemble max of
    ``||K_N f|| / ||f||``.
    """
    if not 1 <= N <= MAX_COMPOSITION_ORDER:
        raise ValueError(f"N must be in 1..{MAX_COMPOSITION_ORDER}, got {N}")
    gf = _as_factor(g, grid)
    corrections = []
    for order in range(1, N):
        for beta in multi_indices(grid.dim, order):
            coef, dg = gf.derivative(beta)
            if coef == 0 or dg.is_zero:
                continue
            corrections.append((beta, coef * 1j ** order / _beta_factorial(beta),
                                a.xi_derivative(beta), dg))
    report = CommutatorReport(corrections, 0.0)
    gv = gf.values(grid)
    worst = 0.0
    for sample in ensemble:
        f = sample(grid)
        fv = f.values.astype(complex)
        resid = gv * a.apply(fv, grid) - a.apply(gv * fv, grid) - report.apply_corrections(f)
        worst = max(worst, _norm(resid, grid) / f.norm())
    report.remainder_bound = worst
    return report


def separated_support_constant(g, m, grid, ensemble):
    """``max_f ||g J^m f|| / ||f||`` over an ensemble of fields."""
    gv = _as_factor(g, grid).values(grid)
    worst = 0.0
    for f in ensemble:
        if not isinstance(f, Field):
            f = f(grid)
        worst = max(worst, _norm(gv * apply_bessel(f, m).values, grid) / f.norm())
    return worst


@dataclass
class InterpolationReport:
    lhs: float
    rhs: float
    additive_rhs: float

    @property
    def ratio(self):
        return self.lhs / self.rhs

    @property
    def additive_ratio(self):
        return self.lhs / self.additive_rhs


def interpolation_check(f, a, b, theta, sigma=None, omega=0.0):
    """Compare ``||<z>^{theta b} J^{(1-theta) a} f||`` with its interpolation bound.

    ``rhs = ||<z>^b f||^theta ||J^a f||^(1-theta)`` and the additive variant
    ``theta ||<z>^b f|| + (1-theta) ||J^a f||``, where ``z = sigma.x + omega``.
    """
    check_positive(a, "a")
    check_positive(b, "b")
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    grid = f.grid
    sigma = sigma if sigma is not None else (1.0,) + (0.0,) * (grid.dim - 1)
    z = grid.dot(sigma) + omega
    lhs = (bracket_power(z, theta * b) * apply_bessel(f, (1 - theta) * a)).norm()
    wb = (bracket_power(z, b) * f).norm()
    ja = apply_bessel(f, a).norm()
    return InterpolationReport(lhs, wb ** theta * ja ** (1 - theta), theta * wb + (1 - theta) * ja)


def fit_interpolation_constant(grid, a, b, theta, ensemble, sigma=None, omega=0.0):
    return max(interpolation_check(s(grid), a, b, theta, sigma, omega).ratio for s in ensemble)


def continuity_ratio(sym, grid, ensemble):
    """``max_f ||Psi_a f|| / ||<z>^q J^m f||`` over the ensemble."""
    z = grid.dot(sym.sigma) + sym.omega
    worst = 0.0
    for sample in ensemble:
        f = sample(grid)
        num = _norm(sym.apply(f.values.astype(complex), grid), grid)
        den = (bracket_power(z, sym.q) * apply_bessel(f, sym.m)).norm()
        worst = max(worst, num / den)
    return worst


def continuity_ratios(sym, box_length, dim=1, points=(64, 128), ensemble=None):
    """Continuity constants of ``sym`` on successively refined grids of one box."""
    ensemble = ensemble if ensemble is not None else schwartz_ensemble(dim, box_length)
    return [continuity_ratio(sym, make_grid(dim, box_length, n), ensemble) for n in points]
