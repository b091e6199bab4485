"""Kohn-Nirenberg symbols as order-tagged evaluators.

A :class:`SymbolHandle` wraps a vectorized function ``a(x, xi)`` where
``x`` and ``xi`` are arrays whose last axis has length ``d`` and whose
leading axes broadcast. Symbols that are finite sums of products
``f(x) g(xi)`` also carry that separable representation in ``terms``;
the quantizer uses it for an exact two-transform fast path.

The sampled predicates (:func:`esssupp_excludes`, :func:`is_elliptic_at`)
are empirical surrogates for the asymptotic definitions: they look at a
small phase-space neighborhood and at dyadic frequencies 2^4..2^10.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import cutoffs
from .errors import DimensionMismatchError, InvalidDimensionError, NormalizationError

DEFAULT_LAMBDAS = tuple(2.0**j for j in range(4, 11))
DEFAULT_X_RADIUS = 0.1
DEFAULT_ANGULAR_RADIUS = 0.05
FD_REL_STEP = 1e-5


def bracket(xi, m=1.0):
    """Japanese bracket ``<xi>^m = (1 + |xi|^2)^(m/2)`` over the last axis."""
    xi = np.asarray(xi, dtype=float)
    return (1.0 + np.sum(xi * xi, axis=-1)) ** (0.5 * m)


def _fd_gradient(func, v, rel=True):
    """Central-difference gradient over the last axis of ``v``."""
    v = np.asarray(v, dtype=float)
    if rel:
        h = FD_REL_STEP * (1.0 + np.linalg.norm(v, axis=-1, keepdims=True))
    else:
        h = np.full(v.shape[:-1] + (1,), FD_REL_STEP)
    out = []
    for j in range(v.shape[-1]):
        e = np.zeros(v.shape[-1])
        e[j] = 1.0
        fp = func(v + h * e)
        fm = func(v - h * e)
        out.append((fp - fm) / (2.0 * h[..., 0]))
    return np.stack(out, axis=-1)


@dataclass(frozen=True, eq=False)
class Factor:
    """A function of one variable group (``x`` or ``xi``) with optional gradient."""

    func: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""
    relative_step: bool = False

    def __call__(self, v):
        return self.func(np.asarray(v, dtype=float))

    def gradient(self, v):
        v = np.asarray(v, dtype=float)
        if self.grad is not None:
            return self.grad(v)
        return _fd_gradient(self.func, v, rel=self.relative_step)

    def __mul__(self, other: "Factor") -> "Factor":
        f, g = self, other

        def func(v):
            return f(v) * g(v)

        def grad(v):
            return f.gradient(v) * g(v)[..., None] + f(v)[..., None] * g.gradient(v)

        return Factor(func, grad, f"{f.label}*{g.label}", self.relative_step or other.relative_step)

    def conj(self) -> "Factor":
        f = self
        return Factor(
            lambda v: np.conj(f(v)),
            lambda v: np.conj(f.gradient(v)),
            f"conj({f.label})",
            f.relative_step,
        )

    def scaled(self, c) -> "Factor":
        f = self
        return Factor(lambda v: c * f(v), lambda v: c * f.gradient(v), f"{c}*{f.label}", f.relative_step)


def one_factor(label="1"):
    return Factor(
        lambda v: np.ones(np.shape(v)[:-1]),
        lambda v: np.zeros(np.shape(v)),
        label,
    )


@dataclass(frozen=True, eq=False)
class SymbolHandle:
    """An element of S^m given by evaluation, optionally with gradients."""

    order: float
    dim: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_x: Optional[Callable] = None
    grad_xi: Optional[Callable] = None
    x_support: Optional[tuple] = None
    label: str = ""
    terms: Optional[tuple] = field(default=None, repr=False)

    def eval(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        val = np.asarray(self.func(x, xi), dtype=complex)
        if self.x_support is not None:
            mask = self.support_mask(x)
            val = np.where(mask, val, 0.0)
        return val

    __call__ = eval

    def support_mask(self, x):
        if self.x_support is None:
            return np.ones(np.shape(x)[:-1], dtype=bool)
        lo, hi = (np.asarray(b, dtype=float) for b in self.x_support)
        x = np.asarray(x, dtype=float)
        return np.all((x >= lo) & (x <= hi), axis=-1)

    @property
    def separable(self) -> bool:
        return self.terms is not None

    @property
    def has_gradients(self) -> bool:
        return self.grad_x is not None and self.grad_xi is not None

    def gradient_x(self, x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        if self.grad_x is not None:
            return np.asarray(self.grad_x(x, xi), dtype=complex)
        return _fd_gradient(lambda v: self.eval(v, xi), x, rel=False)

    def gradient_xi(self, x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        if self.grad_xi is not None:
            return np.asarray(self.grad_xi(x, xi), dtype=complex)
        return _fd_gradient(lambda v: self.eval(x, v), xi, rel=True)

    def with_label(self, label):
        return SymbolHandle(self.order, self.dim, self.func, self.grad_x, self.grad_xi,
                            self.x_support, label, self.terms)


def from_terms(order, dim, terms, label="", x_support=None) -> SymbolHandle:
    """Build a separable symbol ``sum_r f_r(x) g_r(xi)``."""
    terms = tuple(terms)

    def func(x, xi):
        return sum(fx(x) * gx(xi) for fx, gx in terms)

    def grad_x(x, xi):
        return sum(fx.gradient(x) * gx(xi)[..., None] for fx, gx in terms)

    def grad_xi(x, xi):
        return sum(fx(x)[..., None] * gx.gradient(xi) for fx, gx in terms)

    return SymbolHandle(order, dim, func, grad_x, grad_xi, x_support, label, terms)


# ---------------------------------------------------------------------------
# phase-space points


@dataclass(frozen=True, eq=False)
class PhaseDirection:
    """A position ``x`` together with a unit frequency direction ``xi_hat``."""

    x: np.ndarray
    xi_hat: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        xh = np.asarray(self.xi_hat, dtype=float).reshape(-1)
        if x.shape != xh.shape:
            raise DimensionMismatchError("x and xi_hat must have the same dimension")
        if abs(np.linalg.norm(xh) - 1.0) > 1e-12:
            raise NormalizationError(f"|xi_hat| = {np.linalg.norm(xh)!r}, expected 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi_hat", xh)

    @classmethod
    def normalized(cls, x, xi):
        xi = np.asarray(xi, dtype=float)
        return cls(x, xi / np.linalg.norm(xi))

    @classmethod
    def from_angle(cls, x, theta):
        return cls(x, np.array([np.cos(theta), np.sin(theta)]))

    @property
    def dim(self):
        return self.x.size

    def __repr__(self):
        return f"PhaseDirection(x={self.x.tolist()}, xi_hat={self.xi_hat.tolist()})"


# ---------------------------------------------------------------------------
# builders


def _check_dim(d):
    if int(d) != d or d < 1:
        raise InvalidDimensionError(f"invalid dimension {d!r}")
    return int(d)


def make_box_symbol(d: int) -> SymbolHandle:
    """Principal symbol of the d'Alembertian, ``xi_0^2 - sum_{j>=1} xi_j^2``."""
    if int(d) != d or d < 2:
        raise InvalidDimensionError(f"box symbol needs d >= 2, got {d!r}")
    d = int(d)
    signs = np.array([1.0] + [-1.0] * (d - 1))

    def p(xi):
        return np.sum(signs * xi * xi, axis=-1)

    def dp(xi):
        return 2.0 * signs * xi

    return from_terms(2.0, d, [(one_factor(), Factor(p, dp, "box"))], label="box")


def bracket_factor(m: float) -> Factor:
    def f(xi):
        return bracket(xi, m)

    def df(xi):
        return m * xi * bracket(xi, m - 2.0)[..., None]

    return Factor(f, df, f"<xi>^{m:g}")


def make_bracket_symbol(m: float, d: int = 2) -> SymbolHandle:
    """``<xi>^m`` as a symbol of order ``m``."""
    d = _check_dim(d)
    return from_terms(float(m), d, [(one_factor(), bracket_factor(m))], label=f"bracket:{m:g}")


def constant_symbol(c, d: int = 2) -> SymbolHandle:
    d = _check_dim(d)
    const = Factor(lambda v: np.full(np.shape(v)[:-1], complex(c)), lambda v: np.zeros(np.shape(v)), f"{c}")
    return from_terms(0.0, d, [(one_factor(), const)], label=f"const:{c}")


def x_symbol(fx: Factor, d: int, label="", x_support=None) -> SymbolHandle:
    """A symbol depending on ``x`` only (a multiplication operator)."""
    return from_terms(0.0, _check_dim(d), [(fx, one_factor())], label=label or fx.label, x_support=x_support)


def xi_symbol(gx: Factor, order: float, d: int, label="") -> SymbolHandle:
    """A Fourier multiplier."""
    return from_terms(float(order), _check_dim(d), [(one_factor(), gx)], label=label or gx.label)


def linear_xi_symbol(j: int, d: int = 2) -> SymbolHandle:
    """The coordinate symbol ``xi_j`` (the operator ``D_j = -i d/dx_j``)."""
    e = np.zeros(d)
    e[j] = 1.0
    g = Factor(lambda xi: xi[..., j] + 0.0, lambda xi: np.broadcast_to(e, np.shape(xi)).copy(), f"xi_{j}")
    return xi_symbol(g, 1.0, d, label=f"xi_{j}")


# x cutoffs ------------------------------------------------------------------


def _radial(profile, inner):
    """``(f, f')`` of a radial profile: ``"plateau"`` (flat top) or ``"gauss"`` (Gaussian core)."""
    if profile == "plateau":
        return (lambda r: cutoffs.plateau(r, inner)), (lambda r: cutoffs.plateau_deriv(r, inner))
    if profile == "gauss":
        # faster spectral decay than a flat top of the same radius
        return (lambda r: cutoffs.gauss_bump(r, GAUSS_SHARPNESS)), (lambda r: cutoffs.gauss_bump_deriv(r, GAUSS_SHARPNESS))
    raise ValueError(f"unknown radial profile {profile!r}")


GAUSS_SHARPNESS = 4.0


def bump_factor(center, radius, inner=0.5, profile="plateau") -> Factor:
    """Radial bump of ``|x - center|/radius``; 0 beyond ``radius``.

    The default plateau profile is 1 within ``inner*radius``.
    """
    c = np.asarray(center, dtype=float)
    prof, dprof = _radial(profile, inner)

    def f(x):
        r = np.linalg.norm(x - c, axis=-1) / radius
        return prof(r)

    def df(x):
        diff = x - c
        dist = np.linalg.norm(diff, axis=-1)
        safe = np.where(dist > 0, dist, 1.0)
        dr = dprof(dist / radius) / radius
        return (dr / safe)[..., None] * diff

    return Factor(f, df, f"bump({c.tolist()},{radius:g})")


def tube_factor(start, end, radius, inner=0.5, profile="plateau") -> Factor:
    """Radial bump of the distance to the segment ``[start, end]``."""
    prof, dprof = _radial(profile, inner)
    p0 = np.asarray(start, dtype=float)
    p1 = np.asarray(end, dtype=float)
    seg = p1 - p0
    seg2 = float(seg @ seg)

    def _diff(x):
        s = np.clip(((x - p0) @ seg) / seg2, 0.0, 1.0) if seg2 > 0 else np.zeros(np.shape(x)[:-1])
        proj = p0 + s[..., None] * seg
        return x - proj

    def f(x):
        dist = np.linalg.norm(_diff(x), axis=-1)
        return prof(dist / radius)

    def df(x):
        diff = _diff(x)
        dist = np.linalg.norm(diff, axis=-1)
        safe = np.where(dist > 0, dist, 1.0)
        dr = dprof(dist / radius) / radius
        return (dr / safe)[..., None] * diff

    return Factor(f, df, f"tube({p0.tolist()}->{p1.tolist()},{radius:g})")


def raised_cosine_factor(center, power=8, period=2 * np.pi) -> Factor:
    """``prod_j ((1 + cos(2 pi (x_j - c_j)/L)) / 2)^p``: a localized trigonometric polynomial.

    Its spectrum is confined to ``|k_j| <= p``, so grid products with it are
    alias-free whenever the other factor leaves ``p`` modes of headroom.
    """
    c = np.asarray(center, dtype=float)
    w = 2 * np.pi / period

    def f(x):
        return np.prod((0.5 * (1.0 + np.cos(w * (x - c)))) ** power, axis=-1)

    def df(x):
        base = 0.5 * (1.0 + np.cos(w * (x - c)))
        val = base**power
        dval = power * base ** (power - 1) * (-0.5 * w * np.sin(w * (x - c)))
        out = []
        for j in range(c.size):
            others = np.prod(np.delete(val, j, axis=-1), axis=-1)
            out.append(dval[..., j] * others)
        return np.stack(out, axis=-1)

    return Factor(f, df, f"cos^{2 * power}({c.tolist()})")


def bump_support(center, radius):
    c = np.asarray(center, dtype=float)
    return (c - radius, c + radius)


def tube_support(start, end, radius):
    p = np.stack([np.asarray(start, float), np.asarray(end, float)])
    return (p.min(axis=0) - radius, p.max(axis=0) + radius)


# frequency cutoffs -----------------------------------------------------------


def _angle_to(xi, axis):
    norm = np.linalg.norm(xi, axis=-1)
    safe = np.where(norm > 0, norm, 1.0)
    cos = np.clip((xi @ axis) / safe, -1.0, 1.0)
    return np.arccos(cos), cos, safe


def cone_factor(axis, half_angle, inner=0.5, symmetric=False, low=0.5, high=1.0) -> Factor:
    """Conic cutoff around ``axis`` (a unit vector) times a smooth high-pass.

    Equal to 1 on the cone of half-angle ``inner*half_angle`` for ``|xi| >= high``
    and 0 outside the cone of half-angle ``half_angle``. With ``symmetric`` the
    cutoff also covers ``-axis``.
    """
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)

    def one_side(xi, a):
        theta, cos, norm = _angle_to(xi, a)
        return cutoffs.plateau(theta / half_angle, inner)

    def f(xi):
        hp = cutoffs.highpass(np.linalg.norm(xi, axis=-1), low, high)
        val = one_side(xi, ax)
        if symmetric:
            val = val + one_side(xi, -ax)
        return val * hp

    def one_side_grad(xi, a):
        theta, cos, norm = _angle_to(xi, a)
        sin = np.sqrt(np.maximum(1.0 - cos**2, 0.0))
        safe_sin = np.where(sin > 1e-300, sin, 1.0)
        dcos = a / norm[..., None] - cos[..., None] * xi / norm[..., None] ** 2
        dtheta = -dcos / safe_sin[..., None]
        dp = cutoffs.plateau_deriv(theta / half_angle, inner) / half_angle
        return dp[..., None] * dtheta

    def df(xi):
        rho = np.linalg.norm(xi, axis=-1)
        safe = np.where(rho > 0, rho, 1.0)
        hp = cutoffs.highpass(rho, low, high)
        dhp = (cutoffs.highpass_deriv(rho, low, high) / safe)[..., None] * xi
        val = one_side(xi, ax)
        grad = one_side_grad(xi, ax)
        if symmetric:
            val = val + one_side(xi, -ax)
            grad = grad + one_side_grad(xi, -ax)
        return grad * hp[..., None] + val[..., None] * dhp

    return Factor(f, df, f"cone({ax.round(4).tolist()},{half_angle:g})", relative_step=True)


def lowpass_factor(radius, inner=0.5) -> Factor:
    """``chi_C(xi)``: identically 1 on ``|xi| <= inner*radius``, 0 beyond ``radius``."""
    f = bump_factor(np.zeros(1), radius, inner)
    return Factor(f.func, f.grad, f"lowpass({radius:g})")


def cone_cutoff_symbol(center, radius, axis, half_angle, order=0.0, d=None,
                       inner=0.5, symmetric=False, low=0.5, high=1.0, label="", profile="plateau") -> SymbolHandle:
    """``bump(x) * cone(xi) * <xi>^order``: the standard microlocalizer."""
    center = np.asarray(center, dtype=float)
    d = d or center.size
    fx = bump_factor(center, radius, inner, profile)
    gx = cone_factor(axis, half_angle, inner, symmetric, low, high) * bracket_factor(order)
    return from_terms(float(order), d, [(fx, gx)], label=label or "cone-cutoff",
                      x_support=bump_support(center, radius))


def tube_cone_symbol(start, end, radius, axis, half_angle, order=0.0,
                     inner=0.5, symmetric=False, low=0.5, high=1.0, label="", profile="plateau") -> SymbolHandle:
    start = np.asarray(start, dtype=float)
    fx = tube_factor(start, end, radius, inner, profile)
    gx = cone_factor(axis, half_angle, inner, symmetric, low, high) * bracket_factor(order)
    return from_terms(float(order), start.size, [(fx, gx)], label=label or "tube-cone",
                      x_support=tube_support(start, end, radius))


# ---------------------------------------------------------------------------
# algebra


def _same_dim(a1, a2):
    if a1.dim != a2.dim:
        raise DimensionMismatchError(f"symbol dimensions differ: {a1.dim} vs {a2.dim}")


def _support_intersection(s1, s2):
    if s1 is None:
        return s2
    if s2 is None:
        return s1
    lo = np.maximum(np.asarray(s1[0], float), np.asarray(s2[0], float))
    hi = np.minimum(np.asarray(s1[1], float), np.asarray(s2[1], float))
    return (lo, np.maximum(hi, lo))


def _support_union(s1, s2):
    if s1 is None or s2 is None:
        return None
    return (np.minimum(np.asarray(s1[0], float), np.asarray(s2[0], float)),
            np.maximum(np.asarray(s1[1], float), np.asarray(s2[1], float)))


def symbol_product(a1: SymbolHandle, a2: SymbolHandle, label="") -> SymbolHandle:
    _same_dim(a1, a2)
    label = label or f"({a1.label})*({a2.label})"
    support = _support_intersection(a1.x_support, a2.x_support)
    if a1.separable and a2.separable:
        terms = [(f1 * f2, g1 * g2) for (f1, g1), (f2, g2) in itertools.product(a1.terms, a2.terms)]
        return from_terms(a1.order + a2.order, a1.dim, terms, label, support)

    def func(x, xi):
        return a1.eval(x, xi) * a2.eval(x, xi)

    gx = gxi = None
    if a1.has_gradients and a2.has_gradients:
        def gx(x, xi):
            return a1.gradient_x(x, xi) * a2.eval(x, xi)[..., None] + a1.eval(x, xi)[..., None] * a2.gradient_x(x, xi)

        def gxi(x, xi):
            return a1.gradient_xi(x, xi) * a2.eval(x, xi)[..., None] + a1.eval(x, xi)[..., None] * a2.gradient_xi(x, xi)
    return SymbolHandle(a1.order + a2.order, a1.dim, func, gx, gxi, support, label)


def symbol_sum(a1: SymbolHandle, a2: SymbolHandle, label="") -> SymbolHandle:
    _same_dim(a1, a2)
    label = label or f"({a1.label})+({a2.label})"
    support = _support_union(a1.x_support, a2.x_support)
    order = max(a1.order, a2.order)
    if a1.separable and a2.separable:
        return from_terms(order, a1.dim, a1.terms + a2.terms, label, support)

    def func(x, xi):
        return a1.eval(x, xi) + a2.eval(x, xi)

    gx = gxi = None
    if a1.has_gradients and a2.has_gradients:
        def gx(x, xi):
            return a1.gradient_x(x, xi) + a2.gradient_x(x, xi)

        def gxi(x, xi):
            return a1.gradient_xi(x, xi) + a2.gradient_xi(x, xi)
    return SymbolHandle(order, a1.dim, func, gx, gxi, support, label)


def symbol_scale(a: SymbolHandle, c, label="") -> SymbolHandle:
    label = label or f"{c}*({a.label})"
    if a.separable:
        return from_terms(a.order, a.dim, [(f, g.scaled(c)) for f, g in a.terms], label, a.x_support)
    gx = gxi = None
    if a.has_gradients:
        def gx(x, xi):
            return c * a.gradient_x(x, xi)

        def gxi(x, xi):
            return c * a.gradient_xi(x, xi)
    return SymbolHandle(a.order, a.dim, lambda x, xi: c * a.eval(x, xi), gx, gxi, a.x_support, label)


def symbol_negate(a: SymbolHandle) -> SymbolHandle:
    return symbol_scale(a, -1.0, label=f"-({a.label})")


def symbol_difference(a1, a2, label=""):
    return symbol_sum(a1, symbol_negate(a2), label=label or f"({a1.label})-({a2.label})")


def symbol_conjugate(a: SymbolHandle) -> SymbolHandle:
    label = f"conj({a.label})"
    if a.separable:
        return from_terms(a.order, a.dim, [(f.conj(), g.conj()) for f, g in a.terms], label, a.x_support)
    gx = gxi = None
    if a.has_gradients:
        def gx(x, xi):
            return np.conj(a.gradient_x(x, xi))

        def gxi(x, xi):
            return np.conj(a.gradient_xi(x, xi))
    return SymbolHandle(a.order, a.dim, lambda x, xi: np.conj(a.eval(x, xi)), gx, gxi, a.x_support, label)


def with_order(a: SymbolHandle, order: float) -> SymbolHandle:
    """Re-tag a symbol's declared order (e.g. when it lies in a smaller class)."""
    return SymbolHandle(float(order), a.dim, a.func, a.grad_x, a.grad_xi, a.x_support, a.label, a.terms)


def times_bracket(a: SymbolHandle, m: float) -> SymbolHandle:
    """``<xi>^m a``, order raised by ``m``."""
    return symbol_product(a, make_bracket_symbol(m, a.dim), label=f"<xi>^{m:g}*({a.label})")


def first_order_correction(a1: SymbolHandle, a2: SymbolHandle) -> SymbolHandle:
    """``(1/i) d_xi a1 . d_x a2``, the first correction term of the composition formula."""
    _same_dim(a1, a2)
    d = a1.dim
    label = f"(1/i)dxi({a1.label}).dx({a2.label})"
    if a1.separable and a2.separable:
        terms = []
        for (f1, g1), (f2, g2) in itertools.product(a1.terms, a2.terms):
            for j in range(d):
                fx = Factor(
                    (lambda j, f1, f2: lambda x: f1(x) * f2.gradient(x)[..., j])(j, f1, f2),
                    None,
                    f"{f1.label}*d{j}{f2.label}",
                )
                gx = Factor(
                    (lambda j, g1, g2: lambda xi: -1j * g1.gradient(xi)[..., j] * g2(xi))(j, g1, g2),
                    None,
                    f"d{j}{g1.label}*{g2.label}",
                    relative_step=True,
                )
                terms.append((fx, gx))
        return from_terms(a1.order + a2.order - 1.0, d, terms, label,
                          _support_intersection(a1.x_support, a2.x_support))

    def func(x, xi):
        return -1j * np.sum(a1.gradient_xi(x, xi) * a2.gradient_x(x, xi), axis=-1)

    return SymbolHandle(a1.order + a2.order - 1.0, d, func, None, None,
                        _support_intersection(a1.x_support, a2.x_support), label)


def poisson_bracket(a1: SymbolHandle, a2: SymbolHandle) -> SymbolHandle:
    """``H_{a1} a2 = d_xi a1 . d_x a2 - d_xi a2 . d_x a1`` (order m1 + m2 - 1)."""
    c12 = first_order_correction(a1, a2)
    c21 = first_order_correction(a2, a1)
    # first_order_correction carries the 1/i factor; undo it
    diff = symbol_difference(c12, c21)
    return symbol_scale(diff, 1j, label=f"H_{{{a1.label}}}({a2.label})")


# ---------------------------------------------------------------------------
# numerical checks


@dataclass
class OrderEntry:
    alpha: tuple
    beta: tuple
    exponent: float
    target: float
    passed: bool
    sups: list


@dataclass
class OrderReport:
    label: str
    order: float
    slack: float
    annuli: list
    entries: list

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, alpha, beta) -> OrderEntry:
        for e in self.entries:
            if e.alpha == tuple(alpha) and e.beta == tuple(beta):
                return e
        raise KeyError((alpha, beta))


def sphere_directions(d, n, offset=0.1234):
    """Roughly uniform unit vectors in R^d (deterministic)."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        th = offset + 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    th = np.pi * (1 + 5**0.5) * i + offset
    v = np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=-1)
    if d == 3:
        return v
    raise ValueError("directions implemented for d <= 3")


def _mixed_derivative(a: SymbolHandle, alpha, beta, x, xi):
    """Nested central differences for ``d_x^alpha d_xi^beta a``."""
    n = sum(alpha) + sum(beta)
    if n == 0:
        return a.eval(x, xi)
    base = np.finfo(float).eps ** (1.0 / (n + 2))
    if n == 1 and a.has_gradients:
        if sum(alpha) == 1:
            return a.gradient_x(x, xi)[..., list(alpha).index(1)]
        return a.gradient_xi(x, xi)[..., list(beta).index(1)]
    alpha = list(alpha)
    beta = list(beta)
    d = len(alpha)
    for j in range(d):
        if alpha[j]:
            alpha[j] -= 1
            h = base
            e = np.zeros(d)
            e[j] = h
            return (_mixed_derivative(a, alpha, beta, x + e, xi) - _mixed_derivative(a, alpha, beta, x - e, xi)) / (2 * h)
    for j in range(d):
        if beta[j]:
            beta[j] -= 1
            h = base * (1.0 + np.linalg.norm(xi, axis=-1, keepdims=True))
            e = np.zeros(d)
            e[j] = 1.0
            return (_mixed_derivative(a, alpha, beta, x, xi + h * e)
                    - _mixed_derivative(a, alpha, beta, x, xi - h * e)) / (2 * h[..., 0])
    raise AssertionError


def multi_indices(d, max_total):
    for total in range(max_total + 1):
        for combo in itertools.product(range(total + 1), repeat=2 * d):
            if sum(combo) == total:
                yield tuple(combo[:d]), tuple(combo[d:])


def _sample_x(a: SymbolHandle, n_per_axis=5):
    if a.x_support is not None:
        lo, hi = (np.asarray(b, float) for b in a.x_support)
    else:
        lo, hi = -np.ones(a.dim), np.ones(a.dim)
    axes = [np.linspace(l, h, n_per_axis) for l, h in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, a.dim)


def fit_exponent(scales, values, floor=1e-300):
    """Least-squares slope of ``log(values)`` against ``log(scales)``.

    Returns ``-inf`` when fewer than two values exceed ``floor`` (decay too
    fast to resolve).
    """
    scales = np.asarray(scales, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > floor
    if keep.sum() < 2:
        return float("-inf")
    slope, _ = np.polyfit(np.log(scales[keep]), np.log(values[keep]), 1)
    return float(slope)


def dyadic_annuli(j0=2, j1=9):
    return [(2.0**j, 2.0 ** (j + 1)) for j in range(j0, j1 + 1)]


def check_symbol_order(a: SymbolHandle, max_deriv: int = 2, annuli: Optional[Sequence] = None,
                       slack: float = 0.2, n_dirs: int = 16, n_radii: int = 4,
                       x_samples: Optional[np.ndarray] = None) -> OrderReport:
    """Fit the growth exponent of every derivative up to ``max_deriv`` over dyadic annuli."""
    annuli = list(annuli) if annuli is not None else dyadic_annuli()
    if not annuli:
        raise ValueError("annuli must be nonempty")
    xs = _sample_x(a) if x_samples is None else np.asarray(x_samples, float)
    dirs = sphere_directions(a.dim, n_dirs)
    entries = []
    centers = [np.sqrt(lo * hi) for lo, hi in annuli]
    for alpha, beta in multi_indices(a.dim, max_deriv):
        sups = []
        for lo, hi in annuli:
            radii = np.geomspace(lo, hi, n_radii)
            xi = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, a.dim)
            X = np.broadcast_to(xs[:, None, :], (xs.shape[0], xi.shape[0], a.dim))
            XI = np.broadcast_to(xi[None, :, :], X.shape)
            vals = np.abs(_mixed_derivative(a, alpha, beta, X, XI))
            sups.append(float(np.max(vals)))
        scale = max(sups) if sups else 0.0
        expo = fit_exponent(centers, sups, floor=max(1e-300, 1e-11 * scale))
        target = a.order - sum(beta)
        entries.append(OrderEntry(alpha, beta, expo, target, expo <= target + slack, sups))
    return OrderReport(a.label, a.order, slack, annuli, entries)


def tangent_basis(v):
    """Orthonormal basis of the orthogonal complement of unit vector ``v``."""
    v = np.asarray(v, float)
    d = v.size
    basis = []
    for e in np.eye(d):
        w = e - (e @ v) * v
        for b in basis:
            w = w - (w @ b) * b
        n = np.linalg.norm(w)
        if n > 1e-8:
            basis.append(w / n)
        if len(basis) == d - 1:
            break
    return np.array(basis)


def neighborhood_offsets(d, x_radius=DEFAULT_X_RADIUS, n=3):
    """Grid of position offsets in the cube of half-width ``x_radius``."""
    ticks = np.linspace(-x_radius, x_radius, n)
    return np.stack(np.meshgrid(*([ticks] * d), indexing="ij"), axis=-1).reshape(-1, d)


def neighborhood_directions(xi_hat, angular_radius=DEFAULT_ANGULAR_RADIUS, n=3):
    xi_hat = np.asarray(xi_hat, float)
    ticks = np.linspace(-angular_radius, angular_radius, n)
    dirs = [xi_hat]
    for t in tangent_basis(xi_hat):
        for th in ticks:
            if th == 0:
                continue
            dirs.append(np.cos(th) * xi_hat + np.sin(th) * t)
    return np.array(dirs)


def _neighborhood_samples(xs, dirs, x_radius, angular_radius):
    """For base points ``xs (P,d)`` and directions ``dirs (P,d)`` return
    sample positions ``(P,S,d)`` and unit directions ``(P,S,d)``."""
    xs = np.atleast_2d(np.asarray(xs, float))
    dirs = np.atleast_2d(np.asarray(dirs, float))
    d = xs.shape[-1]
    offs = neighborhood_offsets(d, x_radius)
    out_x, out_dir = [], []
    for x0, v in zip(xs, dirs):
        nd = neighborhood_directions(v, angular_radius)
        X = (x0 + offs)[:, None, :] + 0.0 * nd[None, :, :]
        V = np.broadcast_to(nd[None, :, :], X.shape)
        out_x.append(X.reshape(-1, d))
        out_dir.append(V.reshape(-1, d))
    return np.stack(out_x), np.stack(out_dir)


def elliptic_mask(a: SymbolHandle, xs, dirs, C=16.0, eps=0.1, lambdas=DEFAULT_LAMBDAS,
                  x_radius=DEFAULT_X_RADIUS, angular_radius=DEFAULT_ANGULAR_RADIUS):
    """Vectorized :func:`is_elliptic_at` over base points ``xs``/``dirs``."""
    lams = np.array([l for l in lambdas if l >= C] or [C, 2 * C, 4 * C])
    X, V = _neighborhood_samples(xs, dirs, x_radius, angular_radius)
    XI = lams[None, None, :, None] * V[:, :, None, :]
    Xb = np.broadcast_to(X[:, :, None, :], XI.shape)
    vals = np.abs(a.eval(Xb, XI))
    lower = eps * bracket(XI, a.order)
    return np.all(vals >= lower, axis=(1, 2))


def excluded_mask(a: SymbolHandle, xs, dirs, decay_orders=(1, 2, 4, 8), lambdas=DEFAULT_LAMBDAS,
                  x_radius=DEFAULT_X_RADIUS, angular_radius=DEFAULT_ANGULAR_RADIUS):
    """Vectorized :func:`esssupp_excludes`."""
    lams = np.asarray(lambdas, dtype=float)
    X, V = _neighborhood_samples(xs, dirs, x_radius, angular_radius)
    XI = lams[None, None, :, None] * V[:, :, None, :]
    Xb = np.broadcast_to(X[:, :, None, :], XI.shape)
    M = np.max(np.abs(a.eval(Xb, XI)), axis=1)  # (P, L)
    tail = len(lams) // 2
    ok = np.ones(M.shape[0], dtype=bool)
    for N in decay_orders:
        v = M * lams[None, :] ** N
        vt = v[:, tail:]
        nonincreasing = np.all(vt[:, 1:] <= vt[:, :-1] * (1 + 1e-9) + 1e-300, axis=1)
        ok &= nonincreasing
    return ok


def esssupp_excludes(a: SymbolHandle, p: PhaseDirection, decay_orders=(1, 2, 4, 8), **kw) -> bool:
    """True if ``a`` decays rapidly (empirically) near ``p``: ``p`` is not in esssupp(a)."""
    return bool(excluded_mask(a, p.x[None], p.xi_hat[None], decay_orders, **kw)[0])


def is_elliptic_at(a: SymbolHandle, p: PhaseDirection, C: float = 16.0, eps: float = 0.1, **kw) -> bool:
    """True if ``|a| >= eps <xi>^m`` on a sampled neighborhood of ``p`` for ``|xi| >= C``."""
    if C <= 0 or eps <= 0:
        raise ValueError("C and eps must be positive")
    return bool(elliptic_mask(a, p.x[None], p.xi_hat[None], C, eps, **kw)[0])
