"""Smooth compactly supported profiles and their derivatives.

Everything here is C-infinity and vectorized over numpy arrays. The
profiles are the building blocks for x-cutoffs, conic cutoffs, time
windows and the escape-function pieces.
"""

import numpy as np

__all__ = [
    "smooth_step",
    "smooth_step_deriv",
    "plateau",
    "plateau_deriv",
    "gauss_bump",
    "gauss_bump_deriv",
    "highpass",
    "highpass_deriv",
]


def _edge(s):
    # exp(-1/s) for s > 0, else 0
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _edge_deriv(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    out[pos] = np.exp(-1.0 / sp) / sp**2
    return out


def smooth_step(s):
    """Smooth transition equal to 0 for ``s <= 0`` and 1 for ``s >= 1``."""
    s = np.asarray(s, dtype=float)
    f0 = _edge(s)
    f1 = _edge(1.0 - s)
    return f0 / (f0 + f1)


def smooth_step_deriv(s):
    s = np.asarray(s, dtype=float)
    f0, f1 = _edge(s), _edge(1.0 - s)
    d0, d1 = _edge_deriv(s), _edge_deriv(1.0 - s)
    return (d0 * f1 + f0 * d1) / (f0 + f1) ** 2


def plateau(r, inner=0.5):
    """Radial profile: 1 on ``r <= inner``, 0 on ``r >= 1``.

    ``r`` is a nonnegative normalized radius.
    """
    r = np.asarray(r, dtype=float)
    return 1.0 - smooth_step((r - inner) / (1.0 - inner))


def plateau_deriv(r, inner=0.5):
    r = np.asarray(r, dtype=float)
    return -smooth_step_deriv((r - inner) / (1.0 - inner)) / (1.0 - inner)


def gauss_bump(r, sharpness=8.0):
    """``exp(-a r^2 / (1 - r^2))`` on ``|r| < 1`` and 0 outside.

    Compactly supported and smooth, with a Gaussian core of width about
    ``1/sqrt(2a)``; the core gives it fast pre-asymptotic Fourier decay.
    """
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    r2 = r[inside] ** 2
    out[inside] = np.exp(-sharpness * r2 / (1.0 - r2))
    return out


def gauss_bump_deriv(r, sharpness=8.0):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    ri = r[inside]
    q = 1.0 - ri**2
    out[inside] = np.exp(-sharpness * ri**2 / q) * (-2.0 * sharpness * ri / q**2)
    return out


def highpass(rho, lo=0.5, hi=1.0):
    """Smooth radial high-pass: 0 for ``rho <= lo``, 1 for ``rho >= hi``."""
    return smooth_step((np.asarray(rho, dtype=float) - lo) / (hi - lo))


def highpass_deriv(rho, lo=0.5, hi=1.0):
    return smooth_step_deriv((np.asarray(rho, dtype=float) - lo) / (hi - lo)) / (hi - lo)
