"""Input validation helpers shared by the estimators and functional API."""

import numbers

import numpy as np


def check_finite(values, name="values"):
    arr = np.asarray(values)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_choice(value, name, choices):
    if value not in choices:
        raise ValueError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value


def check_multi_index(beta, dim, max_order=None):
    """Normalise ``beta`` to a tuple of ``dim`` nonnegative ints."""
    if isinstance(beta, numbers.Integral):
        beta = (int(beta),) + (0,) * (dim - 1)
    beta = tuple(int(b) for b in beta)
    if len(beta) != dim:
        raise ValueError(f"multi-index {beta} does not match dimension {dim}")
    if any(b < 0 for b in beta):
        raise ValueError(f"multi-index entries must be >= 0, got {beta}")
    if max_order is not None and sum(beta) > max_order:
        raise ValueError(f"|beta| = {sum(beta)} exceeds the derivative cap {max_order}")
    return beta


def check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def check_field(u, dim=None):
    from .spectral import Field

    if not isinstance(u, Field):
        raise TypeError(f"expected a Field, got {type(u).__name__}")
    if dim is not None and u.grid.dim != dim:
        raise ValueError(f"expected a {dim}D field, got {u.grid.dim}D")
    return u
