"""Periodic grids, fields and Fourier multipliers.

The box ``[-L/2, L/2)^n`` stands in for R^n.  Wavenumbers are angular,
``xi = 2 pi k / L``, so the Japanese bracket ``<xi> = (1 + |xi|^2)^(1/2)`` is
the multiplier of ``J = (1 - Laplacian)^(1/2)`` directly.

Sign convention of the linear group.  With ``u = exp(i xi . x)`` the
dispersive term ``d_{x1} Laplacian u`` equals ``-i xi_1 |xi|^2 u``, so
``u_t + d_{x1} Laplacian u = 0`` becomes ``u_hat' = i xi_1 |xi|^2 u_hat`` and

    S(t) u_hat(xi) = exp(i t xi_1 |xi|^2) u_hat(xi)          (ZK, n = 2)
    S(t) u_hat(xi) = exp(i t xi^3) u_hat(xi)                 (KdV, n = 1)

The phase rate is set to zero on the x1-Nyquist modes so real fields stay
real.
"""

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .validation import check_finite, check_multi_index

MAX_DERIVATIVE_ORDER = 6
MODELS = ("zk", "kdv")
MODEL_DIM = {"zk": 2, "kdv": 1}

_SNAPSHOT_HEADER = struct.Struct("<4sIIId8x")
SNAPSHOT_MAGIC = b"DDL1"


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L/2, L/2)^dim`` with equal axes."""

    dim: int
    box_length: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.points < 8 or self.points % 2:
            raise ValueError(f"points per axis must be even and >= 8, got {self.points}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")

    @property
    def spacing(self):
        return self.box_length / self.points

    @property
    def shape(self):
        return (self.points,) * self.dim

    @property
    def cell_volume(self):
        return self.spacing ** self.dim

    @cached_property
    def axis(self):
        return -0.5 * self.box_length + self.spacing * np.arange(self.points)

    @cached_property
    def axis_wavenumbers(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    @cached_property
    def coords(self):
        """Tuple of coordinate arrays, one per axis, broadcast to ``shape``."""
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self):
        return tuple(np.meshgrid(*([self.axis_wavenumbers] * self.dim), indexing="ij"))

    @cached_property
    def k2(self):
        return sum(k ** 2 for k in self.wavenumbers)

    @property
    def max_wavenumber(self):
        return np.pi * self.points / self.box_length

    @cached_property
    def nyquist(self):
        """Boolean masks (one per axis) selecting the Nyquist modes."""
        return tuple(np.abs(k) >= self.max_wavenumber * (1 - 1e-12) for k in self.wavenumbers)

    def dot(self, direction):
        """Return ``sigma . x`` on the grid."""
        direction = np.asarray(direction, dtype=float).reshape(-1)
        if direction.size != self.dim:
            raise ValueError(f"direction has {direction.size} components, grid is {self.dim}D")
        return sum(s * x for s, x in zip(direction, self.coords))

    def integrate(self, values):
        return float(np.sum(values) * self.cell_volume)

    def seam_distance(self):
        """Distance from each grid point to the periodic seam (max-norm)."""
        half = 0.5 * self.box_length
        return np.min([half - np.abs(x) for x in self.coords], axis=0)


def make_grid(dim, box_length, points):
    """Build a :class:`Grid`; rejects odd or tiny point counts."""
    return Grid(int(dim), float(box_length), int(points))


class Field:
    """Real samples on a :class:`Grid` with a lazily cached spectrum.

    Fields are treated as immutable values: the sample array is marked
    read-only and every operation returns a new ``Field``.
    """

    __slots__ = ("grid", "values", "_spectrum")
    __array_ufunc__ = None  # make ``ndarray * Field`` defer to Field.__rmul__

    def __init__(self, grid, values, spectrum=None):
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values of shape {values.shape} do not fit grid {grid.shape}")
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self._spectrum = spectrum

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(*grid.coords))

    @classmethod
    def from_spectrum(cls, grid, spectrum):
        values = np.fft.ifftn(spectrum).real
        return cls(grid, values)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @property
    def spectrum(self):
        if self._spectrum is None:
            spec = np.fft.fftn(self.values)
            spec.setflags(write=False)
            self._spectrum = spec
        return self._spectrum

    def norm(self):
        """Physical L^2 norm."""
        return float(np.sqrt(np.sum(self.values ** 2) * self.grid.cell_volume))

    def spectral_norm(self):
        """L^2 norm computed from the spectrum (Parseval)."""
        n_total = self.grid.points ** self.grid.dim
        return float(np.sqrt(np.sum(np.abs(self.spectrum) ** 2) * self.grid.cell_volume / n_total))

    def inner(self, other):
        return self.grid.integrate(self.values * other.values)

    def integral(self):
        return self.grid.integrate(self.values)

    def max_abs(self):
        return float(np.max(np.abs(self.values)))

    def _coerce(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return Field(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def __repr__(self):
        return f"Field(dim={self.grid.dim}, points={self.grid.points}, L={self.grid.box_length:g})"


@dataclass(frozen=True)
class ConeVector:
    """Direction ``sigma`` obeying the cone condition, with speed and offset."""

    sigma: tuple
    nu: float = 1.0
    kappa: float = 0.0

    def __post_init__(self):
        sigma = tuple(float(s) for s in np.atleast_1d(self.sigma))
        object.__setattr__(self, "sigma", sigma)
        if not any(sigma):
            raise ValueError("sigma must be nonzero")
        if not cone_condition(sigma):
            raise ValueError(f"sigma={sigma} violates sigma_1 > 0, sqrt(3) sigma_1 > |sigma_perp|")
        if not self.nu > 0:
            raise ValueError(f"speed nu must be > 0, got {self.nu}")

    @property
    def dim(self):
        return len(self.sigma)

    def project(self, grid):
        return grid.dot(self.sigma)


def cone_condition(sigma):
    sigma = np.asarray(sigma, dtype=float)
    return bool(sigma[0] > 0 and np.sqrt(3.0) * sigma[0] > np.linalg.norm(sigma[1:]))


def _multiply(f, multiplier):
    return Field.from_spectrum(f.grid, f.spectrum * multiplier)


def bessel_multiplier(grid, s):
    return (1.0 + grid.k2) ** (0.5 * s)


def apply_bessel(f, s):
    """Return ``J^s f`` with ``J^s = (1 - Laplacian)^(s/2)``."""
    check_finite(f.values, "field")
    if s == 0:
        return Field(f.grid, f.values)
    return _multiply(f, bessel_multiplier(f.grid, s))


def derivative_multiplier(grid, beta):
    beta = check_multi_index(beta, grid.dim, MAX_DERIVATIVE_ORDER)
    mult = np.ones(grid.shape, dtype=complex)
    for k, nyq, order in zip(grid.wavenumbers, grid.nyquist, beta):
        if order == 0:
            continue
        factor = (1j * k) ** order
        if order % 2:
            factor = np.where(nyq, 0.0, factor)
        mult = mult * factor
    return mult


def apply_derivative(f, beta):
    """Spectral ``d^beta f``; exact for band-limited fields."""
    beta = check_multi_index(beta, f.grid.dim, MAX_DERIVATIVE_ORDER)
    if not any(beta):
        return Field(f.grid, f.values)
    return _multiply(f, derivative_multiplier(f.grid, beta))


def check_model(model, grid=None):
    model = str(model).lower()
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    if grid is not None and grid.dim != MODEL_DIM[model]:
        raise ValueError(f"model {model!r} needs a {MODEL_DIM[model]}D grid, got {grid.dim}D")
    return model


def linear_rate(grid, model):
    """Phase rate ``omega(xi)`` with ``u_hat' = i omega u_hat`` for the linear flow."""
    model = check_model(model, grid)
    k1 = grid.wavenumbers[0]
    omega = k1 * grid.k2 if model == "zk" else k1 ** 3
    return np.where(grid.nyquist[0], 0.0, omega)


def linear_propagate(f, t, model):
    """Apply the exact linear group ``S(t)`` of ZK (2D) or KdV (1D)."""
    if t == 0:
        return Field(f.grid, f.values)
    return _multiply(f, np.exp(1j * t * linear_rate(f.grid, model)))


def write_snapshot(path, field):
    """Write ``field`` as a DDL1 binary snapshot."""
    grid = field.grid
    n1 = grid.points if grid.dim == 2 else 1
    header = _SNAPSHOT_HEADER.pack(SNAPSHOT_MAGIC, grid.dim, grid.points, n1, grid.box_length)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C"))


def read_snapshot(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _SNAPSHOT_HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, dim, n0, n1, box = _SNAPSHOT_HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    grid = make_grid(dim, box, n0)
    if dim == 2 and n1 != n0:
        raise ValueError(f"{path}: anisotropic grids are not supported")
    data = np.frombuffer(raw, dtype="<f8", offset=_SNAPSHOT_HEADER.size)
    if data.size != n0 ** dim:
        raise ValueError(f"{path}: expected {n0 ** dim} samples, found {data.size}")
    return Field(grid, data.reshape(grid.shape))
