"""Periodic grid, Fourier-space calculus, and the free Schrodinger propagator.

All fields live on a uniform periodic box of length L sampled at n points,
x_j = -L/2 + j*dx.  The dual lattice follows the standard FFT ordering
k = (2*pi/L) * {0, 1, ..., n/2-1, -n/2, ..., -1}.  The free propagator acts
as the Fourier multiplier exp(-i*r*k^2), which is exact on band-limited data.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from .errors import FieldError, GridError

PHYSICAL = "physical"
FOURIER = "fourier"

# Mass fraction in the outer 10% of the box above which x-weighted
# quantities are no longer trusted.
BOUNDARY_MASS_WARN = 1e-10

_SNAPSHOT_HEADER = struct.Struct("<Qdd")  # n, length, t


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic spatial grid with its dual wavenumber lattice."""

    n: int
    length: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 8 or not _is_power_of_two(int(self.n)):
            raise GridError(f"point count must be a power of two >= 8, got {self.n}")
        if not np.isfinite(self.length) or self.length <= 0:
            raise GridError(f"domain length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        """Sample coordinates centered at the box midpoint."""
        return (np.arange(self.n) - self.n // 2) * self.dx

    @cached_property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def k2(self) -> np.ndarray:
        return self.k ** 2


def make_grid(n: int, length: float) -> Grid1D:
    return Grid1D(int(n), float(length))


@dataclass
class Field:
    """Complex samples of one profile on a Grid1D, in physical or Fourier space."""

    grid: Grid1D
    values: np.ndarray
    space: str = PHYSICAL

    def __post_init__(self):
        if self.space not in (PHYSICAL, FOURIER):
            raise FieldError(f"unknown representation {self.space!r}")
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        if v.shape != (self.grid.n,):
            raise FieldError(f"values shape {v.shape} does not match grid n={self.grid.n}")
        self.values = v

    def physical(self) -> np.ndarray:
        if self.space == PHYSICAL:
            return self.values
        return np.fft.ifft(self.values)

    def fourier(self) -> np.ndarray:
        if self.space == FOURIER:
            return self.values
        return np.fft.fft(self.values)

    def to_physical(self) -> "Field":
        if self.space == PHYSICAL:
            return self
        return Field(self.grid, self.physical(), PHYSICAL)

    def to_fourier(self) -> "Field":
        if self.space == FOURIER:
            return self
        return Field(self.grid, self.fourier(), FOURIER)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.space)


def field(grid: Grid1D, values, space: str = PHYSICAL) -> Field:
    return Field(grid, np.asarray(values, dtype=np.complex128), space)


def _require_finite(f: Field, op: str) -> None:
    if not np.all(np.isfinite(f.values.view(np.float64))):
        raise FieldError(f"{op}: input field contains NaN/Inf")


# Propagator phase tables are cached per (n, length, r); the cache is shared
# across threads behind a lock.
_PHASE_CACHE: dict[tuple[int, float, float], np.ndarray] = {}
_PHASE_LOCK = threading.Lock()
_PHASE_CACHE_MAX = 128


def _propagator_phase(grid: Grid1D, r: float) -> np.ndarray:
    key = (grid.n, grid.length, float(r))
    with _PHASE_LOCK:
        phase = _PHASE_CACHE.get(key)
    if phase is None:
        phase = np.exp(-1j * r * grid.k2)
        with _PHASE_LOCK:
            if len(_PHASE_CACHE) >= _PHASE_CACHE_MAX:
                _PHASE_CACHE.clear()
            _PHASE_CACHE[key] = phase
    return phase


def propagate(f: Field, r: float) -> Field:
    """Apply the free propagator for a (signed) duration r.

    Multiplies Fourier coefficients by exp(-i*r*k^2); unitary in the discrete
    L2 norm and a group in r.
    """
    _require_finite(f, "propagate")
    if r == 0.0:
        return f.copy()
    phase = _propagator_phase(f.grid, r)
    if f.space == FOURIER:
        return Field(f.grid, f.values * phase, FOURIER)
    out = np.fft.ifft(np.fft.fft(f.values) * phase)
    return Field(f.grid, out, PHYSICAL)


def mass(f: Field) -> float:
    """Squared L2 norm, dx * sum |u_j|^2."""
    if f.space == FOURIER:
        return float(f.grid.dx / f.grid.n * np.sum(np.abs(f.values) ** 2))
    return float(f.grid.dx * np.sum(np.abs(f.values) ** 2))


def grad_norm_sq(f: Field) -> float:
    """Squared L2 norm of the spectral derivative, sum k^2 |f_k|^2 (Parseval-normalized)."""
    fk = f.fourier()
    return float(f.grid.dx / f.grid.n * np.sum(f.grid.k2 * np.abs(fk) ** 2))


def derivative(f: Field) -> Field:
    """Spectral x-derivative, returned in the input's representation."""
    fk = f.fourier() * (1j * f.grid.k)
    if f.space == FOURIER:
        return Field(f.grid, fk, FOURIER)
    return Field(f.grid, np.fft.ifft(fk), PHYSICAL)


def lp_norm(f: Field, q: float) -> float:
    """Discrete L^q norm (dx * sum |u_j|^q)^(1/q) for q >= 1."""
    if q < 1:
        raise FieldError(f"lp_norm requires q >= 1, got {q}")
    u = f.physical()
    return float((f.grid.dx * np.sum(np.abs(u) ** q)) ** (1.0 / q))


def inner(f: Field, g: Field) -> complex:
    """Discrete L2 pairing dx * sum f_j * conj(g_j)."""
    if f.grid != g.grid:
        raise FieldError("inner: fields live on different grids")
    return complex(f.grid.dx * np.sum(f.physical() * np.conj(g.physical())))


def l2_distance(f: Field, g: Field) -> float:
    if f.grid != g.grid:
        raise FieldError("l2_distance: fields live on different grids")
    return float(np.sqrt(f.grid.dx * np.sum(np.abs(f.physical() - g.physical()) ** 2)))


def boundary_mass_fraction(f: Field) -> float:
    """Fraction of the mass sitting in the outer 10% of the box (|x| >= 0.45 L)."""
    u = f.physical()
    total = np.sum(np.abs(u) ** 2)
    if total == 0.0:
        return 0.0
    outer = np.abs(f.grid.x) >= 0.45 * f.grid.length
    return float(np.sum(np.abs(u[outer]) ** 2) / total)


def write_snapshot(path, f: Field, t: float = 0.0) -> None:
    """Write a field snapshot: little-endian (n: u64, L: f64, t: f64) then n (re, im) f64 pairs."""
    u = f.physical()
    buf = np.empty(2 * f.grid.n, dtype="<f8")
    buf[0::2] = u.real
    buf[1::2] = u.imag
    with open(path, "wb") as fh:
        fh.write(_SNAPSHOT_HEADER.pack(f.grid.n, f.grid.length, t))
        fh.write(buf.tobytes())


def read_snapshot(path) -> tuple[Field, float]:
    with open(path, "rb") as fh:
        header = fh.read(_SNAPSHOT_HEADER.size)
        n, length, t = _SNAPSHOT_HEADER.unpack(header)
        raw = np.frombuffer(fh.read(16 * n), dtype="<f8")
    if raw.size != 2 * n:
        raise FieldError(f"snapshot {path} truncated: expected {2*n} floats, got {raw.size}")
    values = raw[0::2] + 1j * raw[1::2]
    return Field(make_grid(n, length), values, PHYSICAL), t
