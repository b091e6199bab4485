"""Escape functions for the d'Alembertian.

Along the ray through the target ``(x, xi_hat)`` the symbol

    a(z, zeta) = phi(t) chi(y, zeta_hat) (1 - chi_0(|zeta|)) <zeta>^{k - 1/2},
    t = (z_0 - x_0) / zeta_hat_0,   y_j = z_j + zeta_hat_j t,

is a product of a profile in the flow parameter ``t`` and flow invariants,
so ``H_P a = 2 |zeta| phi'(t) chi w``. The factor ``1 - chi_0`` removes the
origin, where ``zeta_hat`` is undefined; it is annihilated by ``H_P``.
With ``orientation = -1`` the profile is ``phi(-t)`` and every statement
refers to the flow of ``-P``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import cutoffs
from . import symbols as S
from .errors import ConstructionError, DecompositionError
from .hamilton import CHAR_TOL, in_characteristic_set
from .probes import rng_for
from .reports import write_csv
from .symbols import PhaseDirection

ZETA0_GUARD = 1e-6


@dataclass(frozen=True)
class EscapeSpec:
    """Parameters of the escape construction.

    ``y_radius``/``angle_radius`` size the support of ``chi_1`` (a tensor
    product of plateau bumps); ``inner`` is the plateau fraction;
    ``low_cut`` is the radius of the removed frequency ball.
    """

    target: PhaseDirection
    t0: float = 1.0
    delta: float = 0.25
    gamma: float = 1.0
    k: float = 0.0
    y_radius: float = 0.3
    angle_radius: float = 0.15
    inner: float = 0.5
    low_cut: float = 1.0
    orientation: int = 1

    def __post_init__(self):
        if self.t0 <= 0 or self.delta <= 0 or self.gamma <= 0:
            raise ConstructionError("t0, delta and gamma must be positive")
        if self.orientation not in (1, -1):
            raise ConstructionError("orientation must be +1 or -1")
        if not in_characteristic_set(self.target.xi_hat, CHAR_TOL):
            raise ConstructionError("target direction is not in the characteristic set")

    @property
    def support(self):
        """Open t-interval of supp phi."""
        return (-self.t0 - self.delta, self.delta)

    @property
    def K(self):
        return (-self.t0 - self.delta, -self.t0)

    def to_dict(self):
        return {"x": self.target.x.tolist(), "xi_hat": self.target.xi_hat.tolist(), "t0": self.t0,
                "delta": self.delta, "gamma": self.gamma, "k": self.k, "y_radius": self.y_radius,
                "angle_radius": self.angle_radius, "inner": self.inner, "low_cut": self.low_cut,
                "orientation": self.orientation}


def phi(t, spec: EscapeSpec):
    """``exp(-gamma t + 1/(t - delta) - 1/(t + t0 + delta))`` on ``(-t0-delta, delta)``, else 0."""
    t = np.asarray(t, dtype=float)
    lo, hi = spec.support
    out = np.zeros_like(t)
    m = (t > lo) & (t < hi)
    tm = t[m]
    out[m] = np.exp(-spec.gamma * tm + 1.0 / (tm - spec.delta) - 1.0 / (tm + spec.t0 + spec.delta))
    return out


def phi_log_derivative(t, spec: EscapeSpec):
    """``phi'/phi = -gamma - (t - delta)^-2 + (t + t0 + delta)^-2`` (inside the support)."""
    t = np.asarray(t, dtype=float)
    return -spec.gamma - (t - spec.delta) ** -2 + (t + spec.t0 + spec.delta) ** -2


def phi_prime(t, spec: EscapeSpec):
    t = np.asarray(t, dtype=float)
    lo, hi = spec.support
    inside = (t > lo) & (t < hi)
    safe = np.where(inside, t, 0.5 * (lo + hi))
    return np.where(inside, phi(t, spec) * phi_log_derivative(safe, spec), 0.0)


def min_gamma_for_containment(t0: float, delta: float) -> float:
    """Smallest ``gamma`` for which ``{2 phi' + gamma phi > 0}`` lies in ``[-t0-delta, -t0]``.

    ``2 phi'/phi + gamma = 2 h(t) - gamma`` with ``h(t) = (t+t0+delta)^-2 - (t-delta)^-2``
    strictly decreasing, so the negativity set is ``t < t*`` with ``h(t*) = gamma/2``.
    """
    return 2.0 * (delta**-2 - (t0 + delta) ** -2)


def negativity_threshold(spec: EscapeSpec) -> float:
    """The ``t*`` above: the commutator symbol is negative exactly for ``-t0-delta < t < t*``."""
    lo, hi = spec.support
    span = hi - lo

    def f(t):
        return (t + spec.t0 + spec.delta) ** -2 - (t - spec.delta) ** -2 - 0.5 * spec.gamma

    return float(brentq(f, lo + 1e-9 * span, hi - 1e-9 * span, xtol=1e-14, rtol=1e-14))


# ---------------------------------------------------------------------------
# geometry


def _angles(zhat, axis):
    return np.arccos(np.clip(zhat @ axis, -1.0, 1.0))


@dataclass
class EscapeBundle:
    spec: EscapeSpec
    a: S.SymbolHandle
    K: dict
    verification: dict = field(default_factory=dict)

    def flow_coords(self, z, zeta):
        return flow_coordinates(self.spec, z, zeta)

    def phi(self, t):
        return phi(t, self.spec)


def flow_coordinates(spec: EscapeSpec, z, zeta):
    """``(s, y, zeta_hat, |zeta|, chi, w)`` where ``s = orientation * t``."""
    z = np.asarray(z, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    z, zeta = np.broadcast_arrays(z, zeta)
    rho = np.linalg.norm(zeta, axis=-1)
    zhat = zeta / np.where(rho > 0, rho, 1.0)[..., None]
    ang = _angles(zhat, spec.target.xi_hat)
    chi_ang = cutoffs.plateau(ang / spec.angle_radius, spec.inner)
    z0 = zhat[..., 0]
    ok = (np.abs(z0) >= ZETA0_GUARD) & (rho > 0)
    t = np.where(ok, (z[..., 0] - spec.target.x[0]) / np.where(ok, z0, 1.0), 0.0)
    y = z[..., 1:] + zhat[..., 1:] * t[..., None]
    ry = np.linalg.norm(y - spec.target.x[1:], axis=-1)
    chi1 = cutoffs.plateau(ry / spec.y_radius, spec.inner) * chi_ang * ok
    w = (1.0 - cutoffs.plateau(rho / spec.low_cut, 0.5)) * S.bracket(zeta, spec.k - 0.5)
    return spec.orientation * t, y, zhat, rho, chi1**2, w


def _support_box(spec: EscapeSpec, n=21):
    d = spec.target.dim
    ts = np.linspace(*spec.support, 4 * n)
    axis = spec.target.xi_hat
    if d == 2:
        angs = np.linspace(-spec.angle_radius, spec.angle_radius, n)
        rot = np.stack([np.cos(angs), np.sin(angs)], -1)
        dirs = np.stack([rot[:, 0] * axis[0] - rot[:, 1] * axis[1], rot[:, 1] * axis[0] + rot[:, 0] * axis[1]], -1)
    else:
        basis = S.tangent_basis(axis)
        offs = np.linspace(-spec.angle_radius, spec.angle_radius, 7)
        dirs = [axis]
        for b in basis:
            for o in offs:
                dirs.append(np.cos(o) * axis + np.sin(o) * b)
        dirs = np.array(dirs)
    pts = []
    ys = S.neighborhood_offsets(d - 1, spec.y_radius, 5)
    for v in dirs:
        for yo in ys:
            y = spec.target.x[1:] + yo
            t = ts / spec.orientation
            z0 = spec.target.x[0] + v[0] * t
            zj = y[None, :] - v[None, 1:] * t[:, None]
            pts.append(np.column_stack([z0, zj]))
    pts = np.concatenate(pts)
    pad = 0.05
    return pts.min(axis=0) - pad, pts.max(axis=0) + pad


def build_escape(spec: EscapeSpec, g: S.SymbolHandle = None, e: S.SymbolHandle = None, check=True) -> EscapeBundle:
    """Construct ``a`` and, when ``g``/``e`` are given, sample the pad conditions.

    Condition (ellip g): every point of supp a lies in ellip(g).
    Condition (ellip e): every point of supp a with ``t`` in K lies in ellip(e).
    """
    axis = spec.target.xi_hat
    theta_to_time = np.arccos(min(1.0, abs(axis[0])))
    if theta_to_time + spec.angle_radius >= np.pi / 2 - 1e-3:
        raise ConstructionError("zeta_hat_0 vanishes on the support of chi")

    def func(z, zeta):
        s, _, _, _, chi, w = flow_coordinates(spec, z, zeta)
        return phi(s, spec) * chi * w

    lo, hi = _support_box(spec)
    a = S.SymbolHandle(spec.k - 0.5, spec.target.dim, func, None, None, (lo, hi),
                       f"escape[t0={spec.t0:g},delta={spec.delta:g},gamma={spec.gamma:g}]")
    bundle = EscapeBundle(spec, a, {"t_interval": list(spec.K), "description": "{-t0-delta <= t <= -t0} x supp chi"})
    if check:
        bundle.verification["pads"] = check_pads(bundle, g, e)
        if g is not None and not bundle.verification["pads"]["g_ok"]:
            raise ConstructionError("supp a is not contained in ellip(g) on the sampled pad")
        if e is not None and not bundle.verification["pads"]["e_ok"]:
            raise ConstructionError("the K part of supp a is not contained in ellip(e)")
    return bundle


def support_samples(spec: EscapeSpec, n_t=25, n_y=3, n_ang=3, t_range=None, widen=1.0):
    """Phase-space points ``(z, zeta_hat)`` on a grid in flow coordinates."""
    d = spec.target.dim
    t_lo, t_hi = t_range if t_range is not None else spec.support
    ts = np.linspace(t_lo, t_hi, n_t) / spec.orientation
    axis = spec.target.xi_hat
    basis = S.tangent_basis(axis)
    angs = np.linspace(-widen * spec.angle_radius, widen * spec.angle_radius, n_ang)
    dirs = [np.cos(a) * axis + np.sin(a) * b for b in basis for a in angs]
    ys = S.neighborhood_offsets(d - 1, widen * spec.y_radius, n_y)
    Z, V = [], []
    for v in dirs:
        for yo in ys:
            y = spec.target.x[1:] + yo
            z0 = spec.target.x[0] + v[0] * ts
            zj = y[None, :] - v[None, 1:] * ts[:, None]
            Z.append(np.column_stack([z0, zj]))
            V.append(np.broadcast_to(v, (len(ts), d)))
    return np.concatenate(Z), np.concatenate(V)


def check_pads(bundle: EscapeBundle, g=None, e=None, C=16.0, eps=0.1):
    spec = bundle.spec
    out = {"g_ok": True, "e_ok": True}
    if g is not None:
        Z, V = support_samples(spec)
        out["g_ok"] = bool(np.all(S.elliptic_mask(g, Z, V, C, eps)))
    if e is not None:
        Z, V = support_samples(spec, n_t=9, t_range=spec.K)
        out["e_ok"] = bool(np.all(S.elliptic_mask(e, Z, V, C, eps)))
    return out


def a_hamilton_a(bundle: EscapeBundle) -> S.SymbolHandle:
    """Closed form ``a H a = 2 |zeta| phi' phi chi^2 (1-chi_0)^2 <zeta>^{2k-1}``."""
    spec = bundle.spec

    def func(z, zeta):
        s, _, _, rho, chi, w = flow_coordinates(spec, z, zeta)
        return 2.0 * rho * phi_prime(s, spec) * phi(s, spec) * chi**2 * w**2

    return S.SymbolHandle(2 * spec.k, spec.target.dim, func, None, None, bundle.a.x_support, "aH_P(a)")


def hamilton_of_square_fd(bundle: EscapeBundle, z, zeta, h=1e-5):
    """``(1/2) H a^2`` by a central difference of step ``h`` along the ray (cross-check)."""
    z = np.asarray(z, float)
    zeta = np.asarray(zeta, float)
    d = z.shape[-1]
    vel = 2.0 * bundle.spec.orientation * np.array([1.0] + [-1.0] * (d - 1)) * zeta
    speed = np.linalg.norm(vel, axis=-1, keepdims=True)
    unit = vel / np.where(speed > 0, speed, 1.0)

    def a2(zz):
        return np.abs(bundle.a.eval(zz, zeta)) ** 2

    deriv = (a2(z + h * unit) - a2(z - h * unit)) / (2 * h)
    return 0.5 * deriv * speed[..., 0]


def principal_commutator_symbol(bundle: EscapeBundle, z, zeta):
    """``-(2 phi' + gamma phi) phi chi^2 <zeta>^{2k}``."""
    spec = bundle.spec
    s, _, _, _, chi, _ = flow_coordinates(spec, z, zeta)
    return -(2.0 * phi_prime(s, spec) + spec.gamma * phi(s, spec)) * phi(s, spec) * chi**2 * S.bracket(zeta, 2 * spec.k)


def full_expression(bundle: EscapeBundle, z, zeta, gamma=None):
    """``-a H a - gamma <zeta> a^2`` evaluated exactly."""
    spec = bundle.spec
    gamma = spec.gamma if gamma is None else gamma
    s, _, _, rho, chi, w = flow_coordinates(spec, z, zeta)
    p = phi(s, spec)
    return -chi**2 * w**2 * p * (2.0 * rho * phi_prime(s, spec) + gamma * S.bracket(zeta, 1.0) * p)


# ---------------------------------------------------------------------------
# sign condition


@dataclass
class SignReport:
    n_samples: int
    n_negative: int
    n_negative_outside_K: int
    negative_t_range: tuple
    containment: bool
    e_elliptic_on_K: bool
    c_min: float
    c_finite: bool
    verdict: bool
    negativity_threshold: float
    min_gamma_for_containment: float
    rows: list = field(default_factory=list, repr=False)

    def summary(self):
        return {k: v for k, v in self.__dict__.items() if k != "rows"}

    def write_csv(self, path):
        d = (len(self.rows[0]) - 3) // 2 if self.rows else 2
        header = ["t"] + [f"z{j}" for j in range(d)] + [f"zeta{j}" for j in range(d)] + ["commutator_symbol", "in_K"]
        return write_csv(path, header, self.rows)


def sample_phase_space(spec: EscapeSpec, n: int, seed=0, widen=1.2, lam_range=(2.0, 2048.0)):
    """Random ``(z, zeta)``: flow coordinates drawn around supp a, frequencies log-uniform."""
    rng = rng_for(seed, 3301)
    d = spec.target.dim
    lo, hi = spec.support
    pad = 0.1 * (hi - lo)
    s = rng.uniform(lo - pad, hi + pad, n)
    t = s / spec.orientation
    axis = spec.target.xi_hat
    basis = S.tangent_basis(axis)
    coef = rng.uniform(-widen * spec.angle_radius, widen * spec.angle_radius, (n, d - 1))
    v = axis[None, :] + coef @ basis
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    yo = rng.uniform(-widen * spec.y_radius, widen * spec.y_radius, (n, d - 1))
    y = spec.target.x[1:] + yo
    z = np.column_stack([spec.target.x[0] + v[:, 0] * t, y - v[:, 1:] * t[:, None]])
    lam = np.exp(rng.uniform(np.log(lam_range[0]), np.log(lam_range[1]), n))
    return z, lam[:, None] * v


def verify_sign_condition(bundle: EscapeBundle, e: S.SymbolHandle, gamma=None, n_samples=100_000, seed=0,
                          C=16.0, eps=0.1, keep_rows=False) -> SignReport:
    """Sample the commutator symbol, locate its negative part and the smallest ``C`` with ``C e^2 + Q >= 0``."""
    spec = bundle.spec
    if gamma is not None and gamma != spec.gamma:
        spec = replace(spec, gamma=float(gamma))
        bundle = build_escape(spec, check=False)
    z, zeta = sample_phase_space(spec, n_samples, seed)
    s, _, zhat, _, chi, _ = flow_coordinates(spec, z, zeta)
    val = principal_commutator_symbol(bundle, z, zeta)
    scale = np.max(np.abs(val)) if val.size else 1.0
    neg = val < -1e-14 * scale
    lo_k, hi_k = spec.K
    in_K = (s >= lo_k) & (s <= hi_k) & (chi > 0)
    outside = neg & ~in_K
    containment = not np.any(outside)
    kneg = neg & in_K
    e_ok = True
    if np.any(kneg):
        e_ok = bool(np.all(S.elliptic_mask(e, z[kneg], zhat[kneg], C, eps)))
    Q = full_expression(bundle, z, zeta)
    ev = np.abs(e.eval(z, zeta)) ** 2
    qneg = Q < 0
    c_min = 0.0
    if np.any(qneg):
        if np.any(qneg & (ev == 0)):
            c_min = float("inf")
        else:
            c_min = float(np.max(-Q[qneg] / ev[qneg]))
    t_range = (float(s[neg].min()), float(s[neg].max())) if np.any(neg) else (float("nan"), float("nan"))
    rows = []
    if keep_rows:
        rows = [[float(si)] + zi.tolist() + zt.tolist() + [float(v), bool(k)]
                for si, zi, zt, v, k in zip(s, z, zeta, val, in_K)]
    finite = bool(np.isfinite(c_min))
    return SignReport(int(n_samples), int(neg.sum()), int(outside.sum()), t_range, bool(containment), e_ok,
                      c_min, finite, bool(containment and e_ok and finite), negativity_threshold(spec),
                      min_gamma_for_containment(spec.t0, spec.delta), rows)


# ---------------------------------------------------------------------------
# sum of squares


def default_psi(bundle: EscapeBundle, margin=0.05, ramp=0.2) -> S.SymbolHandle:
    """``psi(s)``: 0 on the negativity interval (and on K), 1 from ``margin + ramp`` past it."""
    spec = bundle.spec
    s_a = max(-spec.t0, negativity_threshold(spec)) + margin

    def func(z, zeta):
        s = flow_coordinates(spec, z, zeta)[0]
        return cutoffs.smooth_step((s - s_a) / ramp)

    return S.SymbolHandle(0.0, spec.target.dim, func, None, None, None, f"psi[s>{s_a:.3g}]")


@dataclass
class SOSPair:
    a1: S.SymbolHandle
    a2: S.SymbolHandle
    C: float
    gamma: float

    def target(self, bundle, e, z, zeta):
        return self.C * np.abs(e.eval(z, zeta)) ** 2 + full_expression(bundle, z, zeta, self.gamma)


def sos_decomposition(bundle: EscapeBundle, e: S.SymbolHandle, psi: S.SymbolHandle, C: float, gamma=None,
                      check_samples=10_000, seed=1) -> SOSPair:
    """``C e^2 - a H a - gamma <zeta> a^2 = a1^2 + a2^2``.

    ``a2 = psi chi w sqrt(phi (-2|zeta| phi' - gamma <zeta> phi))`` and
    ``a1 = sqrt(C e^2 + (1 - psi^2) Q)`` where ``Q`` is the full left side
    without ``C e^2``. Radicands are checked on random samples; a negative
    one raises ``DecompositionError``.
    """
    spec = bundle.spec
    gamma = spec.gamma if gamma is None else float(gamma)

    def radicand2(z, zeta):
        s, _, _, rho, chi, w = flow_coordinates(spec, z, zeta)
        p = phi(s, spec)
        return p * (-2.0 * rho * phi_prime(s, spec) - gamma * S.bracket(zeta, 1.0) * p), chi, w

    def a2f(z, zeta):
        r, chi, w = radicand2(z, zeta)
        ps = np.real(psi.eval(z, zeta))
        r = np.where(ps != 0, r, 0.0)
        if np.any(r < 0):
            i = np.unravel_index(int(np.argmin(r)), r.shape)
            raise DecompositionError("negative radicand in a2", {"z": np.asarray(z)[i].tolist(), "value": float(r[i])})
        return ps * chi * w * np.sqrt(r)

    def rad1(z, zeta):
        ps = np.real(psi.eval(z, zeta))
        return C * np.abs(e.eval(z, zeta)) ** 2 + (1.0 - ps**2) * full_expression(bundle, z, zeta, gamma)

    def a1f(z, zeta):
        r = rad1(z, zeta)
        scale = C * np.abs(e.eval(z, zeta)) ** 2 + np.abs(full_expression(bundle, z, zeta, gamma))
        bad = r < -1e-12 * np.maximum(scale, 1e-300)
        if np.any(bad):
            i = np.unravel_index(int(np.argmax(bad)), r.shape)
            raise DecompositionError("negative radicand in a1", {"z": np.asarray(z)[i].tolist(), "value": float(r[i])})
        return np.sqrt(np.maximum(r, 0.0))

    order = spec.k
    a1 = S.SymbolHandle(order, spec.target.dim, a1f, None, None, None, "a1")
    a2 = S.SymbolHandle(order, spec.target.dim, a2f, None, None, bundle.a.x_support, "a2")
    z, zeta = sample_phase_space(spec, check_samples, seed)
    a1f(z, zeta)
    a2f(z, zeta)
    return SOSPair(a1, a2, float(C), gamma)


def sos_identity_residual(pair: SOSPair, bundle, e, n=10_000, seed=2):
    """Max relative residual of ``a1^2 + a2^2`` against the target expression."""
    z, zeta = sample_phase_space(bundle.spec, n, seed)
    lhs = np.abs(pair.a1.eval(z, zeta)) ** 2 + np.abs(pair.a2.eval(z, zeta)) ** 2
    rhs = pair.target(bundle, e, z, zeta)
    scale = pair.C * np.abs(e.eval(z, zeta)) ** 2 + np.abs(full_expression(bundle, z, zeta, pair.gamma))
    live = scale > 0
    if not np.any(live):
        return 0.0
    return float(np.max(np.abs(lhs - rhs)[live] / scale[live]))
