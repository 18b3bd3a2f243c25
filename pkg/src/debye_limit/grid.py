"""Periodic spectral grid, field container and Fourier calculus.

Everything downstream (Poisson solves, flow integration, norms and
diagnostics) is built on the operations here: FFT differentiation,
trapezoid quadrature (exact for the periodic grid), Parseval-based
Sobolev norms and 2/3-rule dealiasing.

Conventions
-----------
* The domain is the periodic interval ``[0, length)`` sampled at
  ``x_i = i * length / n_points``.
* Forward FFTs are unnormalized; the inverse carries the ``1/n`` factor
  (the numpy default).
* Wavenumbers are ``k_j = 2*pi*j/length`` for ``j in {-n/2, ..., n/2-1}``
  stored in FFT order.
* ``integrate`` is the trapezoid rule, which on a uniform periodic grid
  is just ``mean(values) * length`` and integrates every resolved
  Fourier mode exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .io_utils import atomic_write_text, fmt

__all__ = [
    "MAX_DERIVATIVE_ORDER",
    "MAX_SOBOLEV_ORDER",
    "Grid",
    "Field",
    "derivative",
    "integrate",
    "l2_norm",
    "hs_norm",
    "max_abs",
    "dealias",
    "write_field_csv",
    "read_field_csv",
]

# Sobolev orders above this are meaningless at the resolutions we run;
# derivative orders are capped at twice this value.
MAX_SOBOLEV_ORDER = 8
MAX_DERIVATIVE_ORDER = 2 * MAX_SOBOLEV_ORDER


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[0, length)``.

    Parameters
    ----------
    n_points : int
        Number of collocation points. Must be a power of two and at
        least 32 so the 2/3 dealiasing rule leaves usable bandwidth.
    length : float
        Domain length. The solvers are written for the unit torus, so
        this defaults to 1.0.
    """

    n_points: int
    length: float = 1.0
    x: np.ndarray = field(init=False, repr=False, compare=False)
    wavenumbers: np.ndarray = field(init=False, repr=False, compare=False)
    dealias_keep: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)):
            raise ValueError(f"n_points must be an integer, got {n!r}")
        n = int(n)
        if n < 32 or (n & (n - 1)) != 0:
            raise ValueError(
                f"n_points must be a power of two >= 32, got {n}"
            )
        if not (float(self.length) > 0.0):
            raise ValueError(f"length must be positive, got {self.length}")
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "length", float(self.length))
        dx = self.length / n
        object.__setattr__(self, "x", np.arange(n) * dx)
        # fftfreq(n, d=dx) yields j/length in FFT order, j = -n/2..n/2-1
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
        object.__setattr__(self, "wavenumbers", k)
        modes = np.rint(np.fft.fftfreq(n) * n).astype(int)
        object.__setattr__(self, "dealias_keep", np.abs(modes) <= n / 3.0)
        self.x.flags.writeable = False
        self.wavenumbers.flags.writeable = False
        self.dealias_keep.flags.writeable = False

    @property
    def dx(self) -> float:
        return self.length / self.n_points


@dataclass(frozen=True, eq=False)
class Field:
    """Immutable real-valued function sampled on a :class:`Grid`.

    Values are copied on construction and frozen, so operations always
    return new Fields rather than mutating in place.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != (self.grid.n_points,):
            raise ValueError(
                f"field has shape {vals.shape}, grid expects "
                f"({self.grid.n_points},)"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        return cls(grid, fn(grid.x))


def _derivative_values(grid: Grid, values: np.ndarray, order: int) -> np.ndarray:
    if order == 0:
        return np.asarray(values, dtype=np.float64).copy()
    fhat = np.fft.fft(values)
    sym = (1j * grid.wavenumbers) ** order
    if order % 2 == 1:
        # the Nyquist mode has no signed partner; odd derivatives drop it
        sym = sym.copy()
        sym[grid.n_points // 2] = 0.0
    return np.fft.ifft(sym * fhat).real


def _dealias_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    fhat = np.fft.fft(values)
    fhat[~grid.dealias_keep] = 0.0
    return np.fft.ifft(fhat).real


def _check_order(order: int, cap: int, what: str):
    if not isinstance(order, (int, np.integer)) or order < 0:
        raise ValueError(f"{what} must be a nonnegative integer, got {order!r}")
    if order > cap:
        raise ValueError(f"{what} {order} exceeds the supported cap {cap}")


def derivative(f: Field, order: int = 1) -> Field:
    """Spectral derivative of the given order.

    Differentiation multiplies Fourier coefficients by ``(i k)^order``,
    so the result of any order >= 1 has exactly zero mean.
    """
    _check_order(order, MAX_DERIVATIVE_ORDER, "derivative order")
    return Field(f.grid, _derivative_values(f.grid, f.values, order))


def integrate(f: Field) -> float:
    """Trapezoid quadrature over the periodic domain (= mean * length)."""
    return float(np.mean(f.values) * f.grid.length)


def l2_norm(f: Field) -> float:
    """sqrt of the integral of f^2."""
    return float(np.sqrt(np.mean(f.values * f.values) * f.grid.length))


def max_abs(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def _hs_norm_values(grid: Grid, values: np.ndarray, s: int) -> float:
    fhat = np.fft.fft(values)
    power = (fhat.real**2 + fhat.imag**2) / grid.n_points**2
    k2 = grid.wavenumbers**2
    nyq = grid.n_points // 2
    weight = np.zeros_like(k2)
    k2a = np.ones_like(k2)
    for a in range(s + 1):
        if a % 2 == 1:
            contrib = k2a.copy()
            contrib[nyq] = 0.0  # mirrors the odd-derivative Nyquist drop
            weight += contrib
        else:
            weight += k2a
        k2a = k2a * k2
    return float(np.sqrt(np.sum(weight * power) * grid.length))


def hs_norm(f: Field, s: int) -> float:
    """Sobolev H^s norm via Parseval.

    Equals ``sqrt(sum_{a=0}^{s} l2_norm(derivative(f, a))^2)``; computed
    directly from one FFT so it is cheap enough for per-step monitors.
    """
    _check_order(s, MAX_SOBOLEV_ORDER, "Sobolev order")
    return _hs_norm_values(f.grid, f.values, s)


def dealias(f: Field) -> Field:
    """Zero all modes with ``|j| > n_points/3`` (2/3-rule). Idempotent."""
    return Field(f.grid, _dealias_values(f.grid, f.values))


def write_field_csv(f: Field, path) -> None:
    """Serialize a field as ``x,value`` rows with 17 significant digits."""
    buf = io.StringIO()
    buf.write("x,value\n")
    for xi, vi in zip(f.grid.x, f.values):
        buf.write(f"{fmt(float(xi))},{fmt(float(vi))}\n")
    atomic_write_text(path, buf.getvalue())


def read_field_csv(path, grid: Grid | None = None) -> Field:
    """Read a field written by :func:`write_field_csv`.

    If ``grid`` is omitted one is reconstructed from the row count; the
    stored abscissae are checked against it either way.
    """
    with open(path) as handle:
        header = handle.readline().strip()
        if header != "x,value":
            raise ValueError(f"unexpected field CSV header {header!r}")
        xs, vs = [], []
        for line in handle:
            line = line.strip()
            if not line:
                continue
            sx, sv = line.split(",")
            xs.append(float(sx))
            vs.append(float(sv))
    if grid is None:
        grid = Grid(len(vs))
    if len(vs) != grid.n_points:
        raise ValueError(
            f"CSV has {len(vs)} rows, grid expects {grid.n_points}"
        )
    if not np.allclose(xs, grid.x, rtol=0.0, atol=1e-15):
        raise ValueError("CSV abscissae do not match the grid")
    return Field(grid, np.asarray(vs))
