"""Hamilton flow of the d'Alembertian and the control relation.

For ``p(xi) = xi_0^2 - sum xi_j^2`` the Hamilton field is
``(2 xi_0, -2 xi_1, ..., -2 xi_n; 0)``: bicharacteristics are straight
lines with frozen frequency. Rays are parametrized on the unit sphere as
``t -> (x_0 + s t xi_0, x_j - s t xi_j, xi)`` with orientation ``s = +-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import symbols as S
from .errors import DomainError, NormalizationError
from .reports import write_csv
from .symbols import PhaseDirection

SAMPLES_PER_UNIT = 64
CHAR_TOL = 1e-9


def _signature(d):
    return np.array([1.0] + [-1.0] * (d - 1))


def hamilton_field(x, xi):
    """``(dx/dt, dxi/dt)`` of the d'Alembertian's principal symbol."""
    xi = np.asarray(xi, dtype=float)
    return 2.0 * _signature(xi.shape[-1]) * xi, np.zeros_like(xi)


def apply_hamilton(a: S.SymbolHandle, x, xi):
    """``H_P a = 2 xi_0 d_{x0} a - 2 sum xi_j d_{xj} a`` (no xi-derivatives)."""
    xdot, _ = hamilton_field(x, xi)
    return np.sum(xdot * a.gradient_x(x, xi), axis=-1)


def _unit(xi_hat, atol=1e-12):
    v = np.asarray(xi_hat, dtype=float)
    n = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(n - 1.0) > atol):
        raise NormalizationError("direction is not a unit vector")
    return v


def null_form(xi_hat):
    v = np.asarray(xi_hat, dtype=float)
    return np.sum(_signature(v.shape[-1]) * v * v, axis=-1)


def in_characteristic_set(xi_hat, tol=CHAR_TOL):
    """``|xi_0^2 - sum xi_j^2| <= tol`` for a unit direction (vectorized)."""
    v = _unit(xi_hat)
    out = np.abs(null_form(v)) <= tol
    return bool(out) if np.ndim(out) == 0 else out


def ray_velocity(xi_hat, orientation=1):
    return float(orientation) * _signature(len(xi_hat)) * np.asarray(xi_hat, float)


def flow(p: PhaseDirection, t: float, orientation=1, tol=CHAR_TOL) -> PhaseDirection:
    """Point at parameter ``t`` on the ray through ``p`` (``p`` must be characteristic)."""
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    if not in_characteristic_set(p.xi_hat, tol):
        raise DomainError(f"{p!r} is not in the characteristic set")
    return PhaseDirection(p.x + t * ray_velocity(p.xi_hat, orientation), p.xi_hat)


@dataclass(frozen=True)
class LightRay:
    base: PhaseDirection
    orientation: int = 1
    t_range: tuple = (0.0, 1.0)

    def __post_init__(self):
        if not in_characteristic_set(self.base.xi_hat):
            raise DomainError("light rays are only defined on the characteristic set")

    def at(self, t):
        t = np.asarray(t, dtype=float)
        return self.base.x + t[..., None] * ray_velocity(self.base.xi_hat, self.orientation)

    def samples(self, per_unit=SAMPLES_PER_UNIT):
        t0, t1 = self.t_range
        n = max(2, int(np.ceil(abs(t1 - t0) * per_unit)) + 1)
        t = np.linspace(t0, t1, n)
        return t, self.at(t)


# ---------------------------------------------------------------------------
# control certificates


@dataclass
class NetSpec:
    """Sampling of phase space for control checks.

    Positions: ``n_x`` points per axis over ``box`` (defaults to b's
    x-support). Directions: ``n_dirs`` on the circle plus, if ``extra_dirs``
    is given, those exact directions (e.g. the conormal of interest).
    """

    n_x: int = 7
    n_dirs: int = 32
    box: tuple = None
    extra_dirs: tuple = ()
    t_max: float = 3.0
    per_unit: int = SAMPLES_PER_UNIT
    char_tol: float = 0.02
    C: float = 16.0
    eps: float = 0.1
    noncharacteristic: str = "elliptic-P"

    def points(self, b: S.SymbolHandle):
        box = self.box if self.box is not None else b.x_support
        if box is None:
            raise ValueError("b must be compactly x-supported (or give net.box)")
        lo, hi = (np.asarray(v, float) for v in box)
        axes = [np.linspace(l, h, self.n_x) for l, h in zip(lo, hi)]
        xs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, b.dim)
        dirs = S.sphere_directions(b.dim, self.n_dirs)
        if len(self.extra_dirs):
            extra = np.asarray(self.extra_dirs, float).reshape(-1, b.dim)
            extra = extra / np.linalg.norm(extra, axis=-1, keepdims=True)
            dirs = np.concatenate([dirs, extra, -extra])
        X = np.repeat(xs, len(dirs), axis=0)
        V = np.tile(dirs, (len(xs), 1))
        return X, V


@dataclass
class ControlSample:
    x: list
    xi_hat: list
    characteristic: bool
    ok: bool
    orientation: int = 0
    t_end: float = float("nan")
    endpoint: list = None
    g_flags: list = field(default_factory=list, repr=False)
    reason: str = ""


@dataclass
class ControlCertificate:
    samples: list
    verdict: bool
    n_net: int
    n_active: int
    policy: str

    @property
    def failures(self):
        return [s for s in self.samples if not s.ok]

    def ray_rows(self, per_unit=SAMPLES_PER_UNIT):
        rows = []
        for i, s in enumerate(self.samples):
            if not s.ok or not s.characteristic or s.orientation == 0:
                continue
            n = len(s.g_flags)
            ts = np.linspace(0.0, s.t_end, n) if n > 1 else np.zeros(1)
            v = ray_velocity(np.asarray(s.xi_hat), s.orientation)
            for t, flag in zip(ts, s.g_flags):
                pos = np.asarray(s.x) + t * v
                rows.append([i, float(t)] + [float(c) for c in pos] + [bool(flag)])
        return rows

    def write_csv(self, path):
        d = len(self.samples[0].x) if self.samples else 2
        header = ["sample", "t"] + [f"x{j}" for j in range(d)] + ["in_ellip_g"]
        return write_csv(path, header, self.ray_rows())

    def summary(self):
        return {"verdict": self.verdict, "n_net": self.n_net, "n_active": self.n_active,
                "n_failed": len(self.failures), "policy": self.policy}


def _search_ray(x, v, g, e, net: NetSpec):
    """Best witness ray from ``(x, v)``; returns a ControlSample."""
    n = int(np.ceil(net.t_max * net.per_unit)) + 1
    ts = np.linspace(0.0, net.t_max, n)
    best = None
    for orient in (1, -1):
        pts = x[None, :] + ts[:, None] * ray_velocity(v, orient)[None, :]
        dirs = np.broadcast_to(v, pts.shape)
        g_ok = S.elliptic_mask(g, pts, dirs, net.C, net.eps)
        if not g_ok[0]:
            continue
        stop = n if np.all(g_ok) else int(np.argmin(g_ok))
        e_ok = S.elliptic_mask(e, pts[:stop], dirs[:stop], net.C, net.eps)
        if np.any(e_ok):
            j = int(np.argmax(e_ok))
            cand = ControlSample(x.tolist(), v.tolist(), True, True, orient, float(ts[j]),
                                 pts[j].tolist(), g_ok[:j + 1].tolist())
            if best is None or cand.t_end < best.t_end:
                best = cand
    if best is None:
        return ControlSample(x.tolist(), v.tolist(), True, False, reason="no ray in ellip(g) reaches ellip(e)")
    return best


def check_control(b: S.SymbolHandle, e: S.SymbolHandle, g: S.SymbolHandle, net: NetSpec = None) -> ControlCertificate:
    """Sampled check that ``b`` is controlled by ``e`` through ``g``.

    Characteristic net points need a ray (either orientation, possibly of
    length zero) lying in ellip(g) and reaching ellip(e). Away from the
    characteristic set the policy ``"elliptic-P"`` accepts points of
    ellip(g), where the elliptic estimate for ``GP`` controls ``Bu``;
    ``"strict"`` runs the same ray search along the Hamilton field.
    """
    net = net or NetSpec()
    X, V = net.points(b)
    active = ~S.excluded_mask(b, X, V)
    samples = []
    for x, v in zip(X[active], V[active]):
        char = abs(null_form(v)) <= net.char_tol
        if char or net.noncharacteristic == "strict":
            s = _search_ray(x, v, g, e, net)
            s.characteristic = bool(char)
        else:
            ok = bool(S.elliptic_mask(g, x[None], v[None], net.C, net.eps)[0])
            s = ControlSample(x.tolist(), v.tolist(), False, ok,
                              reason="" if ok else "non-characteristic point outside ellip(g)")
        samples.append(s)
    verdict = all(s.ok for s in samples)
    return ControlCertificate(samples, verdict, int(len(X)), int(active.sum()), net.noncharacteristic)
