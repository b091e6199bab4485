"""Periodic grids and sampled fields.

The torus ``prod_j [-L_j/2, L_j/2)`` stands in for R^d. Sample points are
``x_j = -L/2 + j L/N`` and the frequency lattice is ``xi_k = 2 pi k / L``
for ``k in [-N/2, N/2)`` (stored in FFT order).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridMismatchError, InvalidDimensionError

_MAGIC = b"MLFLD001"


@dataclass(frozen=True)
class GridSpec:
    d: int
    n_points: tuple
    period: tuple

    def __post_init__(self):
        n = tuple(int(v) for v in np.broadcast_to(self.n_points, (self.d,)))
        L = tuple(float(v) for v in np.broadcast_to(self.period, (self.d,)))
        if self.d < 1 or self.d > 3:
            raise InvalidDimensionError(f"grid dimension must be 1..3, got {self.d}")
        for v in n:
            if v < 8 or v & (v - 1):
                raise ValueError(f"n_points must be a power of two >= 8, got {v}")
        if any(v <= 0 for v in L):
            raise ValueError("period must be positive")
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "period", L)

    @classmethod
    def square(cls, n, d=2, period=2 * np.pi):
        return cls(d, (n,) * d, (period,) * d)

    @property
    def shape(self):
        return self.n_points

    @property
    def size(self):
        return int(np.prod(self.n_points))

    @property
    def cell_volume(self):
        return float(np.prod([L / n for L, n in zip(self.period, self.n_points)]))

    @property
    def volume(self):
        return float(np.prod(self.period))

    def axis(self, j):
        n, L = self.n_points[j], self.period[j]
        return -L / 2 + L * np.arange(n) / n

    def freq_axis(self, j):
        n, L = self.n_points[j], self.period[j]
        return 2 * np.pi * np.fft.fftfreq(n, d=L / n)

    @cached_property
    def coords(self):
        """Sample positions, shape ``n_points + (d,)``."""
        return np.stack(np.meshgrid(*[self.axis(j) for j in range(self.d)], indexing="ij"), axis=-1)

    @cached_property
    def freqs(self):
        """Frequency lattice in FFT order, shape ``n_points + (d,)``."""
        return np.stack(np.meshgrid(*[self.freq_axis(j) for j in range(self.d)], indexing="ij"), axis=-1)

    @cached_property
    def freq_norm(self):
        return np.linalg.norm(self.freqs, axis=-1)

    @property
    def nyquist(self):
        """Smallest per-axis Nyquist frequency."""
        return min(np.pi * n / L for n, L in zip(self.n_points, self.period))

    def refined(self, factor=2):
        return GridSpec(self.d, tuple(n * factor for n in self.n_points), self.period)

    def with_points(self, n):
        return GridSpec(self.d, (n,) * self.d if np.isscalar(n) else tuple(n), self.period)

    def subgrid(self, axes):
        """Grid over a subset of axes (e.g. the spatial slice of spacetime)."""
        axes = list(axes)
        return GridSpec(len(axes), tuple(self.n_points[a] for a in axes), tuple(self.period[a] for a in axes))

    def to_dict(self):
        return {"d": self.d, "n_points": list(self.n_points), "period": list(self.period)}


def fft(values):
    """Forward transform normalized so that ``u = sum_k u_hat(k) e^{i x xi_k}``."""
    return np.fft.fftn(values) / values.size


def ifft(spectrum):
    return np.fft.ifftn(spectrum) * spectrum.size


class Field:
    """Complex samples on a :class:`GridSpec` with a cached spectrum."""

    __slots__ = ("grid", "values", "_spectrum")

    def __init__(self, grid: GridSpec, values, spectrum=None):
        values = np.asarray(values, dtype=complex)
        if values.shape != grid.shape:
            if values.size != grid.size:
                raise GridMismatchError(f"values of size {values.size} do not fit grid {grid.shape}")
            values = values.reshape(grid.shape)
        self.grid = grid
        self.values = values
        self._spectrum = spectrum

    @classmethod
    def from_function(cls, grid: GridSpec, func):
        return cls(grid, func(grid.coords))

    @classmethod
    def from_spectrum(cls, grid: GridSpec, spectrum):
        spectrum = np.asarray(spectrum, dtype=complex)
        return cls(grid, ifft(spectrum), spectrum)

    @property
    def spectrum(self):
        if self._spectrum is None:
            self._spectrum = fft(self.values)
        return self._spectrum

    def _check(self, other):
        if self.grid != other.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c):
        if isinstance(c, Field):
            self._check(c)
            return Field(self.grid, self.values * c.values)
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def conj(self):
        return Field(self.grid, np.conj(self.values))

    def inner(self, other) -> complex:
        """``<u, v> = int u conj(v)`` (linear in the first slot)."""
        self._check(other)
        return complex(np.vdot(other.values, self.values) * self.grid.cell_volume)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))

    def spectral_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.spectrum) ** 2) * self.grid.volume))

    def copy(self):
        return Field(self.grid, self.values.copy())

    def __repr__(self):
        return f"Field(grid={self.grid.shape}, norm={self.norm():.6g})"


# ---------------------------------------------------------------------------
# binary export: header + interleaved re/im float64, row-major, plus JSON sidecar


def save_field(field: Field, path, metadata=None):
    """Write ``path`` (binary) and ``path.json`` (sidecar metadata)."""
    path = Path(path)
    g = field.grid
    header = _MAGIC + struct.pack("<I", g.d)
    header += struct.pack(f"<{g.d}I", *g.n_points)
    header += struct.pack(f"<{g.d}d", *g.period)
    data = np.empty(field.values.size * 2, dtype="<f8")
    flat = field.values.reshape(-1)
    data[0::2] = flat.real
    data[1::2] = flat.imag
    path.write_bytes(header + data.tobytes())
    side = {"grid": g.to_dict(), "order": "row-major", "dtype": "complex128-interleaved-le"}
    side.update(metadata or {})
    Path(str(path) + ".json").write_text(json.dumps(side, indent=2, sort_keys=True))


def load_field(path) -> Field:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise ValueError(f"{path}: not a field file")
    off = 8
    (d,) = struct.unpack_from("<I", raw, off)
    off += 4
    n = struct.unpack_from(f"<{d}I", raw, off)
    off += 4 * d
    L = struct.unpack_from(f"<{d}d", raw, off)
    off += 8 * d
    data = np.frombuffer(raw, dtype="<f8", offset=off)
    grid = GridSpec(d, n, L)
    vals = (data[0::2] + 1j * data[1::2]).reshape(grid.shape)
    return Field(grid, vals)
