"""Numerical checks of the symbol calculus.

Residual operators such as ``A1 A2 - Op(a1 a2 + (1/i) d_xi a1 . d_x a2)``
are never formed as matrices; their norm on each dyadic band is estimated
with random band-limited probes (:mod:`microlocal.probes`) and the decay
rate in the band scale is fitted by least squares.
"""

from __future__ import annotations

import numpy as np

from . import symbols as S
from .errors import EllipticityError, HypothesisError
from .grid import Field, GridSpec
from .probes import band_norm, packet_corpus, packet_spectrum, rng_for
from .quantize import GridOperator, commutator, quantize, sobolev_norm
from .reports import ResidualReport, make_constant_report

DEFAULT_BANDS = (8.0, 16.0, 32.0, 64.0)
DEFAULT_SLACK = 0.3
ROUNDOFF_FLOOR = 1e-10


def _uses_fd(a: S.SymbolHandle) -> bool:
    if a.separable:
        return any(f.grad is None or g.grad is None for f, g in a.terms)
    return not a.has_gradients


def residual_report(label, residual: GridOperator, reference: GridOperator, grid: GridSpec,
                    bands=DEFAULT_BANDS, target=0.0, slack=DEFAULT_SLACK, seed=0,
                    n_probes=16, n_iter=3, fd_fallback=False) -> ResidualReport:
    """Band norms of ``residual`` and the fitted decay exponent.

    ``reference`` (typically the composed operator itself) sets the
    roundoff floor: a band whose residual is below ``1e-10`` times the
    reference norm counts as exactly zero.
    """
    bands = [float(b) for b in bands]
    norms, refs = [], []
    for i, lam in enumerate(bands):
        r, ref = band_norm(residual, grid, lam, rng_for(seed, 101, i), n_probes, n_iter, reference)
        norms.append(r)
        refs.append(ref)
    floor = [ROUNDOFF_FLOOR * max(ref, 1.0) for ref in refs]
    exact = all(r <= f for r, f in zip(norms, floor))
    if exact:
        expo = float("-inf")
    else:
        keep = [i for i, (r, f) in enumerate(zip(norms, floor)) if r > f]
        expo = S.fit_exponent([bands[i] for i in keep], [norms[i] for i in keep], floor=0.0)
        if len(keep) < 2:
            expo = float("-inf")
    verdict = bool(exact or expo <= target + slack)
    return ResidualReport(label, bands, norms, refs, float(expo), float(target), float(slack),
                          verdict, bool(exact), bool(fd_fallback), int(seed))


def composition_residual(a1: S.SymbolHandle, a2: S.SymbolHandle, grid: GridSpec, bands=DEFAULT_BANDS,
                         slack=DEFAULT_SLACK, seed=0, first_order=True, **kw) -> ResidualReport:
    """``A1 A2 - Op(a1 a2 + (1/i) d_xi a1 . d_x a2)`` decays like ``lambda^(m1+m2-2)``.

    With ``first_order=False`` the correction is dropped and the target is
    ``m1+m2-1`` (multiplicativity of principal symbols).
    """
    A1, A2 = quantize(a1, grid), quantize(a2, grid)
    approx = S.symbol_product(a1, a2)
    if first_order:
        approx = S.symbol_sum(approx, S.first_order_correction(a1, a2))
    R = (A1 @ A2) - quantize(approx, grid)
    target = a1.order + a2.order - (2.0 if first_order else 1.0)
    label = f"composition[{a1.label};{a2.label}]" + ("" if first_order else "-principal")
    return residual_report(label, R, A1 @ A2, grid, bands, target, slack, seed,
                           fd_fallback=_uses_fd(a1) or _uses_fd(a2), **kw)


def adjoint_residual(a: S.SymbolHandle, grid: GridSpec, bands=DEFAULT_BANDS, slack=DEFAULT_SLACK,
                     seed=0, **kw) -> ResidualReport:
    """``A* - Op(conj a)`` against target ``m - 1``."""
    A = quantize(a, grid)
    R = A.adjoint() - quantize(S.symbol_conjugate(a), grid)
    return residual_report(f"adjoint[{a.label}]", R, A.adjoint(), grid, bands, a.order - 1.0, slack, seed,
                           fd_fallback=_uses_fd(a), **kw)


def commutator_symbol(a1: S.SymbolHandle, a2: S.SymbolHandle) -> S.SymbolHandle:
    """``(1/i) H_{a1} a2``."""
    return S.symbol_difference(S.first_order_correction(a1, a2), S.first_order_correction(a2, a1),
                               label=f"(1/i)H_{{{a1.label}}}({a2.label})")


def commutator_principal_check(a1: S.SymbolHandle, a2: S.SymbolHandle, grid: GridSpec,
                               bands=DEFAULT_BANDS, slack=DEFAULT_SLACK, seed=0, **kw) -> ResidualReport:
    """``[A1, A2] - Op((1/i) H_{a1} a2)`` against target ``m1 + m2 - 2``."""
    A1, A2 = quantize(a1, grid), quantize(a2, grid)
    C = commutator(A1, A2)
    R = C - quantize(commutator_symbol(a1, a2), grid)
    return residual_report(f"commutator[{a1.label};{a2.label}]", R, A1 @ A2, grid, bands,
                           a1.order + a2.order - 2.0, slack, seed,
                           fd_fallback=_uses_fd(a1) or _uses_fd(a2), **kw)


# ---------------------------------------------------------------------------
# test corpora


def packet_field(params):
    """Field factory for a packet defined by its Fourier coefficients."""
    def make(grid: GridSpec) -> Field:
        spec = packet_spectrum(grid, params["center"], params["k0"], params["width"], params["k_max"])
        return Field.from_spectrum(grid, spec)
    make.id = params.get("id", "packet")
    return make


def _field_id(f, i):
    return getattr(f, "id", f"field-{i:02d}")


# ---------------------------------------------------------------------------
# elliptic estimate


def phase_net(a: S.SymbolHandle, n_x=5, n_dirs=24, box=None):
    """Positions in the x-support box of ``a`` crossed with unit directions."""
    if box is None:
        box = a.x_support if a.x_support is not None else (-np.ones(a.dim), np.ones(a.dim))
    lo, hi = (np.asarray(b, float) for b in box)
    axes = [np.linspace(l, h, n_x) for l, h in zip(lo, hi)]
    xs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, a.dim)
    dirs = S.sphere_directions(a.dim, n_dirs)
    X = np.repeat(xs, len(dirs), axis=0)
    V = np.tile(dirs, (len(xs), 1))
    return X, V


def check_inclusion(a: S.SymbolHandle, a_prime: S.SymbolHandle, net=None, C=16.0, eps=0.1):
    """Sampled ``esssupp(a) subset ellip(a')``; returns ``(ok, failing points)``."""
    X, V = net if net is not None else phase_net(a)
    active = ~S.excluded_mask(a, X, V)
    if not np.any(active):
        return True, []
    ell = S.elliptic_mask(a_prime, X[active], V[active], C, eps)
    bad = [(x.tolist(), v.tolist()) for x, v, ok in zip(X[active], V[active], ell) if not ok]
    return not bad, bad


def elliptic_estimate_experiment(a: S.SymbolHandle, a_prime: S.SymbolHandle, k: float, N: float,
                                 resolutions, test_fields, period=2 * np.pi, net=None, tolerance=2.0):
    """Constant in ``||Au||_{H^k} <= C (||A'u||_{H^{k+m-m'}} + ||u||_{H^{-N}})``.

    Refuses (``HypothesisError``) unless the sampled inclusion
    ``esssupp(a) subset ellip(a')`` holds.
    """
    ok, bad = check_inclusion(a, a_prime, net)
    if not ok:
        raise HypothesisError("esssupp(a) is not contained in ellip(a') on the sampled net",
                              {"failing_points": bad[:50], "n_failing": len(bad)})
    s_prime = k + a.order - a_prime.order
    rows = []
    for n in resolutions:
        grid = GridSpec.square(int(n), a.dim, period)
        A, Ap = quantize(a, grid), quantize(a_prime, grid)
        for i, make in enumerate(test_fields):
            u = make(grid)
            lhs = sobolev_norm(A(u), k)
            t1 = sobolev_norm(Ap(u), s_prime)
            t2 = sobolev_norm(u, -N)
            rows.append([_field_id(make, i), int(n), lhs, t1, t2, lhs / (t1 + t2)])
    cols = ["field", "resolution", "lhs", "a_prime_term", "h_minus_n_term", "ratio"]
    return make_constant_report("elliptic-estimate", cols, rows, "resolution", "ratio", tolerance,
                                {"k": k, "N": N, "a": a.label, "a_prime": a_prime.label})


def parametrix_factor(a: S.SymbolHandle, a_prime: S.SymbolHandle, C: float, psi: S.SymbolHandle,
                      chi_C=None, threshold=1e-6, net=None) -> S.SymbolHandle:
    """``g = (1 - chi_C(xi)) psi a / a'``, so that ``g a' = (1 - chi_C) psi a``.

    ``chi_C`` defaults to a low-pass equal to 1 on ``|xi| <= C/2`` and 0 for
    ``|xi| >= C``. Raises ``EllipticityError`` if ``|a'|`` drops below
    ``threshold <xi>^{m'}`` where the numerator weight is nonzero.
    """
    S._same_dim(a, a_prime)
    chi = chi_C if chi_C is not None else S.lowpass_factor(C)
    mp = a_prime.order

    def weight(x, xi):
        return (1.0 - chi(np.linalg.norm(xi, axis=-1)[..., None])) * psi.eval(x, xi)

    def func(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        w = weight(x, xi)
        den = a_prime.eval(x, xi)
        live = np.abs(w) > 0
        small = np.abs(den) < threshold * S.bracket(xi, mp)
        if np.any(live & small):
            raise EllipticityError("a' is not elliptic where (1 - chi_C) psi is nonzero")
        safe = np.where(live, den, 1.0)
        return np.where(live, w * a.eval(x, xi) / safe, 0.0)

    support = S._support_intersection(a.x_support, psi.x_support)
    g = S.SymbolHandle(a.order - a_prime.order, a.dim, func, None, None, support,
                       f"parametrix[{a.label}/{a_prime.label}]")
    X, V = net if net is not None else phase_net(psi)
    lams = np.array([C, 2 * C, 4 * C, 16 * C, 64 * C])
    XI = lams[None, :, None] * V[:, None, :]
    Xb = np.broadcast_to(X[:, None, :], XI.shape)
    func(Xb, XI)
    return g


# ---------------------------------------------------------------------------
# Garding


def principal_nonnegative(a: S.SymbolHandle, radius=32.0, tol=1e-3, n_x=7, n_dirs=48,
                          lambdas=(32.0, 64.0, 128.0, 256.0, 512.0, 1024.0)):
    """Sampled ``Re a >= -tol <xi>^m`` for ``|xi| >= radius``."""
    X, V = phase_net(a, n_x, n_dirs)
    lams = np.array([l for l in lambdas if l >= radius])
    XI = lams[None, :, None] * V[:, None, :]
    Xb = np.broadcast_to(X[:, None, :], XI.shape)
    vals = np.real(a.eval(Xb, XI)) / S.bracket(XI, a.order)
    return bool(np.min(vals) >= -tol), float(np.min(vals))


def garding_experiment(a, b_loc, resolutions, test_fields, N=2.0, order=None, period=2 * np.pi,
                       check=True, tolerance=2.0, nonneg_radius=32.0):
    """Smallest ``C`` with ``Re<Au,u> >= -C rhs(u)`` over the corpus, per resolution.

    ``rhs`` is ``||B u||^2_{H^{(m-1)/2}} + ||u||^2_{H^{-N}}`` when ``b_loc`` is
    given (microlocalized form) and ``||u||^2_{H^{(m-1)/2}}`` otherwise.
    ``a`` is a symbol or a callable ``grid -> GridOperator`` (then ``order``
    is required and the symbol preconditions are skipped).
    """
    is_symbol = isinstance(a, S.SymbolHandle)
    m = a.order if is_symbol else float(order)
    if check and is_symbol:
        ok, worst = principal_nonnegative(a, nonneg_radius)
        if not ok:
            raise HypothesisError("principal symbol is negative at sampled large frequencies",
                                  {"min_normalized": worst})
        if b_loc is not None:
            ok, bad = check_inclusion(a, b_loc)
            if not ok:
                raise HypothesisError("esssupp(a) is not contained in ellip(b_loc)",
                                      {"failing_points": bad[:50], "n_failing": len(bad)})
    s = 0.5 * (m - 1.0)
    rows = []
    for n in resolutions:
        grid = GridSpec.square(int(n), 2 if not is_symbol else a.dim, period)
        A = quantize(a, grid) if is_symbol else a(grid)
        B = quantize(b_loc, grid) if b_loc is not None else None
        for i, make in enumerate(test_fields):
            u = make(grid)
            pairing = A(u).inner(u).real
            if B is not None:
                rhs = sobolev_norm(B(u), s) ** 2 + sobolev_norm(u, -N) ** 2
            else:
                rhs = sobolev_norm(u, s) ** 2
            rows.append([_field_id(make, i), int(n), pairing, rhs, max(0.0, -pairing / rhs)])
    cols = ["field", "resolution", "re_pairing", "rhs", "c_needed"]
    label = "garding-microlocal" if b_loc is not None else "garding"
    return make_constant_report(label, cols, rows, "resolution", "c_needed", tolerance,
                                {"order": m, "N": N, "b_loc": getattr(b_loc, "label", None)})


def garding_documented_case(bubble=10.0, bubble_radius=8.0, n_packets=12, seed=0, k_max=16.0):
    """Sum-of-squares symbol with a low-frequency hole, its localizer and packet corpus.

    ``a = chi^2 (<xi> - bubble * lowpass(bubble_radius))`` with ``chi`` a unit
    plateau bump: ``chi^2 <xi>`` is the square of ``chi <xi>^{1/2}``, and the
    bubble makes ``Re<Au,u>`` negative for packets with low carriers, so the
    constant is exercised. Packets are spectral (``|k| <= k_max``), hence
    the same trigonometric polynomial on every grid that resolves them.
    """
    chi2 = S.bump_factor([0.0, 0.0], 1.0) * S.bump_factor([0.0, 0.0], 1.0)
    a = S.from_terms(1.0, 2, [(chi2, S.bracket_factor(1.0)),
                              (chi2.scaled(-bubble), S.lowpass_factor(bubble_radius))],
                     label=f"chi^2(<xi>-{bubble:g}lowpass)", x_support=S.bump_support([0.0, 0.0], 1.0))
    b_loc = S.x_symbol(S.bump_factor([0.0, 0.0], 1.5), 2, label="b_loc", x_support=S.bump_support([0.0, 0.0], 1.5))
    fields = [packet_field(p) for p in packet_corpus(n_packets, seed, k_max, spread=0.5)]
    return a, b_loc, fields


def documented_pair(power=8):
    """Test symbols for the residual-order checks.

    Returns ``(a1, a2, a3)`` with ``a1 = xi_1 chi``, ``a2 = chi~ <xi>`` and
    ``a3 = chi <xi>``. The x-factors are raised-cosine bumps: periodic, so
    products stay exactly resolved (compact plateau bumps alias at the
    band scales the fit uses).
    """
    chi = S.raised_cosine_factor([0.2, -0.1], power)
    chit = S.raised_cosine_factor([-0.1, 0.2], power)
    xi1 = S.linear_xi_symbol(1).terms[0][1]
    a1 = S.from_terms(1.0, 2, [(chi, xi1)], "xi1*chi")
    a2 = S.from_terms(1.0, 2, [(chit, S.bracket_factor(1.0))], "chit<xi>")
    a3 = S.from_terms(1.0, 2, [(chi, S.bracket_factor(1.0))], "chi<xi>")
    return a1, a2, a3
