"""Randomized band-limited probes and operator-norm estimates.

Every random stream is derived from one integer seed and a tuple of
integer keys through ``numpy.random.SeedSequence``, so results do not
depend on evaluation order.
"""

from __future__ import annotations

import numpy as np

from .errors import AliasingError
from .grid import GridSpec

DEFAULT_PROBES = 16
DEFAULT_POWER_ITERS = 3


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, keys)``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


def band_mask(grid: GridSpec, lam: float):
    """Frequencies with ``lam/sqrt(2) <= |xi| < sqrt(2) lam``."""
    rho = grid.freq_norm
    return (rho >= lam / np.sqrt(2.0)) & (rho < np.sqrt(2.0) * lam)


def check_band(grid: GridSpec, lam: float):
    if np.sqrt(2.0) * lam > grid.nyquist:
        raise AliasingError(f"band {lam:g} exceeds the grid's Nyquist frequency {grid.nyquist:g}")


def band_probes(grid: GridSpec, lam: float, n: int, rng: np.random.Generator):
    """``n`` random fields with spectra supported in band ``lam``, unit L^2 norm."""
    check_band(grid, lam)
    mask = band_mask(grid, lam)
    spec = (rng.standard_normal((n,) + grid.shape) + 1j * rng.standard_normal((n,) + grid.shape)) * mask
    vals = np.fft.ifftn(spec, axes=tuple(range(1, grid.d + 1)))
    return _normalize(vals, grid), mask


def _normalize(vals, grid):
    norms = np.sqrt(np.sum(np.abs(vals) ** 2, axis=tuple(range(1, grid.d + 1))) * grid.cell_volume)
    norms = np.where(norms > 0, norms, 1.0)
    return vals / norms.reshape((-1,) + (1,) * grid.d)


def _project(vals, mask, d):
    axes = tuple(range(1, d + 1))
    return np.fft.ifftn(np.fft.fftn(vals, axes=axes) * mask, axes=axes)


def _orthonormalize(vals, grid):
    n = vals.shape[0]
    q, _ = np.linalg.qr(vals.reshape(n, -1).T)
    return (q.T / np.sqrt(grid.cell_volume)).reshape((q.shape[1],) + grid.shape)


def band_norm(op, grid: GridSpec, lam: float, rng, n_probes=DEFAULT_PROBES,
              n_iter=DEFAULT_POWER_ITERS, reference=None):
    """Estimate ``||R P_lam||`` (L^2 -> L^2) by block power iteration.

    Returns ``(norm, reference_norm)`` where the second entry is the same
    estimate for ``reference`` on the final probe block (or ``nan``).
    """
    vals, mask = band_probes(grid, lam, n_probes, rng)
    for _ in range(n_iter):
        w = op.rmatvec(op.matvec(vals))
        w = _project(w, mask, grid.d)
        if not np.any(np.abs(w) > 0):
            break
        vals = _orthonormalize(w, grid)
    vals = _orthonormalize(vals, grid)
    out = op.matvec(vals).reshape(vals.shape[0], -1) * np.sqrt(grid.cell_volume)
    norm = float(np.linalg.norm(out, 2)) if out.size else 0.0
    ref = float("nan")
    if reference is not None:
        r = reference.matvec(vals).reshape(vals.shape[0], -1) * np.sqrt(grid.cell_volume)
        ref = float(np.linalg.norm(r, 2))
    return norm, ref


def packet_spectrum(grid: GridSpec, center, k0, width, k_max):
    """Spectrum of a Gaussian wave packet truncated to ``|k| <= k_max``.

    The packet is defined by its Fourier coefficients, so sampling it on
    any grid that resolves ``k_max`` gives the same trigonometric polynomial.
    """
    xi = grid.freqs
    c = np.asarray(center, float)
    k0 = np.asarray(k0, float)
    amp = np.exp(-0.5 * width**2 * np.sum((xi - k0) ** 2, axis=-1)) * np.exp(-1j * (xi @ (c + np.array(grid.period) / 2)))
    return np.where(grid.freq_norm <= k_max, amp, 0.0)


def packet_corpus(n: int, seed: int, k_max: float, d: int = 2, spread=1.0):
    """Deterministic list of packet parameter dicts (center, k0, width)."""
    rng = rng_for(seed, 7001)
    out = []
    for i in range(n):
        center = rng.uniform(-spread, spread, d)
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        k0 = direction * rng.uniform(0.0, 0.75 * k_max)
        width = rng.uniform(0.25, 0.6)
        out.append({"id": f"packet-{i:02d}", "center": center, "k0": k0, "width": width, "k_max": k_max})
    return out
