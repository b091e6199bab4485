"""Exact solutions of the wave equation on the spatial torus.

Spacetime grids put time on axis 0. Solutions are evolved spectrally
(d'Alembert's formula mode by mode) and then multiplied by a smooth time
window so that the spacetime transform sees compactly supported data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cutoffs
from .errors import AliasingError
from .grid import Field, GridSpec, fft, ifft
from .probes import rng_for

ALIAS_TOL = 1e-12
HS_ETA = 0.01


def _check_band(spec, grid: GridSpec):
    scale = np.max(np.abs(spec)) if spec.size else 0.0
    if scale == 0:
        return
    outside = grid.freq_norm > grid.nyquist / 2
    if np.any(np.abs(spec[outside]) > ALIAS_TOL * scale):
        raise AliasingError("initial data is not band-limited below Nyquist/2")


def solve_box(u0: Field, u1: Field, times):
    """Values ``u(t, x)`` for ``t`` in ``times``; shape ``(len(times),) + space shape``.

    ``u_hat(t,k) = cos(|k|t) u0_hat + sin(|k|t)/|k| u1_hat``, and
    ``u0_hat + t u1_hat`` on the zero mode.
    """
    grid = u0.grid
    if u1.grid != grid:
        raise ValueError("u0 and u1 live on different grids")
    h0, h1 = u0.spectrum, u1.spectrum
    _check_band(h0, grid)
    _check_band(h1, grid)
    k = grid.freq_norm
    kk = np.where(k > 0, k, 1.0)
    out = np.empty((len(times),) + grid.shape, dtype=complex)
    for i, t in enumerate(times):
        c = np.cos(k * t)
        s = np.where(k > 0, np.sin(k * t) / kk, t)
        out[i] = ifft(c * h0 + s * h1)
    return out


def solve_box_spectra(u0: Field, u1: Field, times):
    """Spectra ``(u_hat, d_t u_hat)`` at each time (for energy checks)."""
    grid = u0.grid
    h0, h1 = u0.spectrum, u1.spectrum
    k = grid.freq_norm
    kk = np.where(k > 0, k, 1.0)
    U, V = [], []
    for t in times:
        U.append(np.cos(k * t) * h0 + np.where(k > 0, np.sin(k * t) / kk, t) * h1)
        V.append(-k * np.sin(k * t) * h0 + np.cos(k * t) * h1)
    return np.array(U), np.array(V)


def energy(u_hat, ut_hat, grid: GridSpec):
    """``sum_k |d_t u_hat|^2 + |k|^2 |u_hat|^2`` (times the torus volume)."""
    return float(np.sum(np.abs(ut_hat) ** 2 + grid.freq_norm**2 * np.abs(u_hat) ** 2) * grid.volume)


def time_window(grid: GridSpec, support=0.6, plateau=0.4):
    """Smooth window in ``x_0``: 1 on the middle ``plateau`` fraction, 0 outside the middle ``support``."""
    L = grid.period[0]
    t = np.abs(grid.axis(0)) / L
    w = 1.0 - cutoffs.smooth_step((t - plateau / 2) / ((support - plateau) / 2))
    shape = (grid.n_points[0],) + (1,) * (grid.d - 1)
    return np.broadcast_to(w.reshape(shape), grid.shape)


def plateau_mask(grid: GridSpec, plateau=0.4):
    L = grid.period[0]
    t = np.abs(grid.axis(0)) / L
    shape = (grid.n_points[0],) + (1,) * (grid.d - 1)
    return np.broadcast_to((t <= plateau / 2).reshape(shape), grid.shape)


def spacetime_solution(grid: GridSpec, u0: Field, u1: Field, window=True) -> Field:
    space = grid.subgrid(range(1, grid.d))
    if u0.grid != space:
        raise ValueError("initial data must live on the spatial slice of the spacetime grid")
    vals = solve_box(u0, u1, grid.axis(0))
    if window:
        vals = vals * time_window(grid)
    return Field(grid, vals)


def traveling_delta(grid: GridSpec, band_limit: float, offset: float = 0.0, window=False) -> Field:
    """``(1/L) sum_{|xi_k| <= band_limit} exp(i xi_k (x_1 + offset - x_0))``.

    Band-limited ``delta(x_0 - x_1 - offset)``; every mode is null, so the
    field solves the wave equation exactly.
    """
    if grid.d < 2:
        raise ValueError("spacetime grid must have d >= 2")
    if band_limit > grid.nyquist / 2:
        raise AliasingError(f"band limit {band_limit:g} exceeds Nyquist/2 = {grid.nyquist / 2:g}")
    L = grid.period[1]
    if abs(grid.period[0] - L) > 1e-12:
        raise ValueError("time and x_1 periods must agree for an exact traveling wave")
    x = grid.coords
    theta = x[..., 1] + offset - x[..., 0]
    nmax = int(np.floor(band_limit * L / (2 * np.pi) + 1e-9))
    vals = np.ones(grid.shape) / L
    for n in range(1, nmax + 1):
        vals = vals + 2.0 * np.cos(2 * np.pi * n / L * theta) / L
    if window:
        vals = vals * time_window(grid)
    return Field(grid, vals)


def plane_wave(grid: GridSpec, xi, window=True) -> Field:
    """``exp(i xi . x)`` for a null lattice frequency ``xi`` (e.g. ``k (1, -1)``)."""
    xi = np.asarray(xi, float)
    if abs(xi[0] ** 2 - np.sum(xi[1:] ** 2)) > 1e-9 * max(1.0, xi @ xi):
        raise ValueError("plane wave frequency is not null")
    vals = np.exp(1j * (grid.coords @ xi))
    if window:
        vals = vals * time_window(grid)
    return Field(grid, vals)


def random_hs_data(space: GridSpec, s: float, seed: int, band_limit=None, eta=HS_ETA):
    """Right- and left-moving amplitudes ``<k>^{-s-n/2-eta}`` with uniform random phases."""
    n = space.d
    lam = space.nyquist / 2 if band_limit is None else band_limit
    rng = rng_for(seed, 4401)
    k = space.freq_norm
    amp = (1.0 + k**2) ** (-0.5 * (s + n / 2 + eta)) * (k <= lam)
    ph1 = np.exp(2j * np.pi * rng.random(space.shape))
    ph2 = np.exp(2j * np.pi * rng.random(space.shape))
    alpha = amp * ph1 / np.sqrt(2)
    beta = amp * ph2 / np.sqrt(2)
    h0 = alpha + beta
    h1 = 1j * k * (alpha - beta)
    return Field.from_spectrum(space, h0), Field.from_spectrum(space, h1)


def random_hs_field(grid: GridSpec, s: float, seed: int, band_limit=None, window=True) -> Field:
    """Solution whose data lie in ``H^sigma`` exactly for ``sigma < s + eta``."""
    space = grid.subgrid(range(1, grid.d))
    u0, u1 = random_hs_data(space, s, seed, band_limit)
    return spacetime_solution(grid, u0, u1, window)


def packet_data(space: GridSpec, center, width, k0, band_limit=None):
    """Gaussian packet moving along its carrier: ``u1 = i|D| u0``."""
    lam = space.nyquist / 2 if band_limit is None else band_limit
    xi = space.freqs
    c = np.asarray(center, float).reshape(-1)
    k0 = np.asarray(k0, float).reshape(-1)
    h0 = np.exp(-0.5 * width**2 * np.sum((xi - k0) ** 2, axis=-1))
    h0 = h0 * np.exp(-1j * (xi @ (c + np.array(space.period) / 2))) * (space.freq_norm <= lam)
    h0 = h0 / np.max(np.abs(h0))
    h1 = 1j * space.freq_norm * h0
    return Field.from_spectrum(space, h0), Field.from_spectrum(space, h1)


def packet_field(grid: GridSpec, center, width, k0, band_limit=None, window=True) -> Field:
    space = grid.subgrid(range(1, grid.d))
    u0, u1 = packet_data(space, center, width, k0, band_limit)
    return spacetime_solution(grid, u0, u1, window)


@dataclass
class SolutionFamily:
    """A named generator of windowed spacetime solutions.

    ``kind`` is ``traveling-delta`` (params: offset), ``random-hs`` (s) or
    ``plane-wave-packet`` (center, width, k0). A packet may give
    ``k0_frac`` instead of ``k0``: the carrier is then ``k0_frac * band_limit``
    along the first spatial axis, so one family scales across resolutions.
    """

    kind: str
    band_limit: float
    params: dict = field(default_factory=dict)
    seed: int = 0

    KINDS = ("traveling-delta", "random-hs", "plane-wave-packet")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown solution family {self.kind!r}; expected one of {self.KINDS}")

    @property
    def id(self):
        p = ",".join(f"{k}={self.params[k]}" for k in sorted(self.params))
        return f"{self.kind}[L={self.band_limit:g};{p};seed={self.seed}]"

    def field(self, grid: GridSpec, window=True) -> Field:
        if self.kind == "traveling-delta":
            return traveling_delta(grid, self.band_limit, self.params.get("offset", 0.0), window)
        if self.kind == "random-hs":
            return random_hs_field(grid, self.params["s"], self.seed, self.band_limit, window)
        p = self.params
        k0 = p.get("k0", [0.0] * (grid.d - 1))
        if "k0_frac" in p:
            k0 = [p["k0_frac"] * self.band_limit] + [0.0] * (grid.d - 2)
        return packet_field(grid, p.get("center", [0.0] * (grid.d - 1)), p.get("width", 0.3),
                            k0, self.band_limit, window)

    def at(self, band_limit) -> "SolutionFamily":
        """Same family at another band limit."""
        return SolutionFamily(self.kind, float(band_limit), dict(self.params), self.seed)

    def to_dict(self):
        return {"kind": self.kind, "band_limit": self.band_limit, "params": dict(self.params), "seed": self.seed}
