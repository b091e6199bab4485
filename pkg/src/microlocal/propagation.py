"""Propagation-of-singularities estimates measured on discrete solutions.

The central quantity is the ratio

    r(u) = ||Bu|| / (||Eu|| + ||GPu|| + ||u||_{H^-N})

over time-windowed solutions of the wave equation. A constant
"independent of u" is read as the sup over a corpus, which must be stable
(factor <= 2) under grid refinement. Every estimate refuses to run unless
the sampled control certificate for ``(b, e, g)`` passes.

Resolutions are band limits ``Lambda``; the grid has ``grid_factor * Lambda``
points per axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import symbols as S
from .errors import HypothesisError, OrderPatternError
from .escape import EscapeBundle, SignReport
from .grid import Field, GridSpec, fft, ifft
from .hamilton import ControlCertificate, NetSpec, check_control
from .quantize import apply_dalembertian, box_weights, quantize, reg_factor, sobolev_norm
from .reports import ConstantReport, make_constant_report, write_csv
from .waves import SolutionFamily

GRID_FACTOR = 4
STABILITY_TOL = 2.0
NULL_AXIS = np.array([1.0, -1.0]) / np.sqrt(2)


@dataclass
class TripleSpec:
    """``b in S^k, e in S^k, g in S^{k-1}`` with the ``H^{-N}`` order.

    ``g_shrink`` maps a factor in (0, 1) to a symbol with smaller support
    and is used by the order ladder to build ``g1``.
    """

    b: S.SymbolHandle
    e: S.SymbolHandle
    g: S.SymbolHandle
    k: float = 0.0
    N: float = 2.0
    net: NetSpec = field(default_factory=NetSpec)
    g_shrink: Optional[Callable[[float], S.SymbolHandle]] = None
    label: str = ""
    certificate: Optional[ControlCertificate] = field(default=None, repr=False)

    def __post_init__(self):
        check_order_pattern(self.b.order, self.e.order, self.g.order, self.k)

    def certify(self) -> ControlCertificate:
        if self.certificate is None:
            self.certificate = check_control(self.b, self.e, self.g, self.net)
        return self.certificate

    def require_control(self):
        cert = self.certify()
        if not cert.verdict:
            raise HypothesisError("b is not controlled by e through g on the sampled net "
                                  "(every point of esssupp b needs a ray in ellip g reaching ellip e)",
                                  cert.summary())
        return cert

    def config(self):
        return {"label": self.label, "b": self.b.label, "e": self.e.label, "g": self.g.label,
                "k": self.k, "N": self.N}


def check_order_pattern(ob, oe, og, k, tol=1e-12):
    if abs(ob - k) > tol or abs(oe - k) > tol or abs(og - (k - 1)) > tol:
        raise OrderPatternError(f"orders (b, e, g) = ({ob:g}, {oe:g}, {og:g}) break the pattern "
                                f"b in S^k, e in S^k, g in S^(k-1) with k = {k:g}")


# ---------------------------------------------------------------------------
# builtin triples


def flagship_triple(profile="plateau", N=2.0, e_center=(-0.7, -0.7), e_radius=1.0, net=None) -> TripleSpec:
    """Microlocalizers along the null line ``x0 = x1`` with conormal ``(1, -1)``.

    ``b`` sits downstream at ``(0.5, 0.5)``, ``e`` upstream at ``e_center``,
    ``g`` is a tube joining the two. Cones are two-sided (both signs of the
    conormal). Moving ``e_center`` off the line breaks control. The tube
    is wide enough that a shrunken copy (scale about 0.65) still covers
    esssupp b while staying inside ellip g, as the order ladder needs.
    """
    kw = dict(symmetric=True, low=4, high=8, profile=profile)
    b = S.cone_cutoff_symbol([0.5, 0.5], 0.3, NULL_AXIS, 0.3, label="b", **kw)
    e = S.cone_cutoff_symbol(list(e_center), e_radius, NULL_AXIS, 0.8, label="e", **kw)

    def g_of(scale=1.0):
        return S.tube_cone_symbol([-0.7, -0.7], [0.5, 0.5], 1.1 * scale, NULL_AXIS, 0.8 * scale, order=-1.0,
                                  label=f"g[x{scale:g}]" if scale != 1.0 else "g", **kw)

    net = net or NetSpec(extra_dirs=(tuple(NULL_AXIS),))
    return TripleSpec(b, e, g_of(1.0), 0.0, N, net, g_of, label=f"flagship[{profile}]")


def violating_triple(profile="plateau", N=2.0) -> TripleSpec:
    """Flagship with ``e`` moved off the backward ray; control fails."""
    t = flagship_triple(profile, N, e_center=(-1.0, 0.2), e_radius=0.5)
    t.label = f"violating[{profile}]"
    return t


def regularization_triple(N=2.0) -> TripleSpec:
    """Wide Gaussian-core triple used for the regularization family.

    A narrow ``b`` leaks a small low-frequency part of ``Bu`` which
    ``<eps xi>^{-r}`` promotes at ``eps = 1``; the wide profiles keep that
    leakage below the band of the corpus.
    """
    kw = dict(symmetric=True, low=4, high=8, profile="gauss")
    b = S.cone_cutoff_symbol([0.5, 0.5], 0.5, NULL_AXIS, 0.3, label="b", **kw)
    e = S.cone_cutoff_symbol([-0.5, -0.5], 1.4, NULL_AXIS, 0.8, label="e", **kw)

    def g_of(scale=1.0):
        return S.tube_cone_symbol([-0.5, -0.5], [0.5, 0.5], 1.4 * scale, NULL_AXIS, 0.8 * scale, order=-1.0,
                                  label="g", **kw)

    return TripleSpec(b, e, g_of(1.0), 0.0, N, NetSpec(extra_dirs=(tuple(NULL_AXIS),)), g_of,
                      label="regularization")


def default_corpus(kind="theorem"):
    """Solution families for each experiment (band limits are set per resolution)."""
    delta = SolutionFamily("traveling-delta", 16.0)
    if kind == "theorem":
        return [delta]
    if kind == "lemma":
        return [SolutionFamily("random-hs", 16.0, {"s": 1.5}, 0),
                SolutionFamily("random-hs", 16.0, {"s": 2.0}, 1),
                SolutionFamily("plane-wave-packet", 16.0, {"width": 0.6, "k0_frac": -0.25})]
    if kind == "ladder":
        return [delta, SolutionFamily("random-hs", 16.0, {"s": 1.5}, 0),
                SolutionFamily("plane-wave-packet", 16.0, {"width": 0.6, "k0_frac": -0.25})]
    if kind == "regularization":
        return [delta, SolutionFamily("plane-wave-packet", 16.0, {"width": 0.6, "k0_frac": -0.5}),
                SolutionFamily("plane-wave-packet", 16.0, {"width": 0.6, "k0_frac": -0.75})]
    raise ValueError(f"unknown corpus {kind!r}")


# ---------------------------------------------------------------------------
# norm terms


def _grid_for(band_limit, grid_factor=GRID_FACTOR, period=2 * np.pi, d=2):
    return GridSpec.square(int(round(grid_factor * band_limit)), d, period)


def _terms(triple: TripleSpec, ops, u: Field):
    B, E, G = ops
    Gu = G.apply(u)
    return {"Bu": B.apply(u), "Eu": E.apply(u), "Gu": Gu, "GPu": G.apply(apply_dalembertian(u))}


def _h1_class(fam: SolutionFamily, k):
    if fam.kind == "traveling-delta":
        return False
    if fam.kind == "random-hs":
        return fam.params["s"] > k + 1
    return True


def _sweep(triple: TripleSpec, solutions, resolutions, grid_factor, period, row_fn):
    rows = []
    for lam in resolutions:
        grid = _grid_for(lam, grid_factor, period, triple.b.dim)
        ops = tuple(quantize(s, grid) for s in (triple.b, triple.e, triple.g))
        for fam in solutions:
            f = fam.at(lam)
            u = f.field(grid)
            rows.extend(row_fn(f.id, float(lam), grid.n_points[0], _terms(triple, ops, u), u))
    return rows


def run_theorem_estimate(triple: TripleSpec, solutions, resolutions, grid_factor=GRID_FACTOR,
                         period=2 * np.pi, tolerance=STABILITY_TOL, check=True) -> ConstantReport:
    """Ratio ``||Bu|| / (||Eu|| + ||GPu|| + ||u||_{H^-N})`` per solution and band limit.

    Raises
    ------
    HypothesisError
        If ``check`` and the control certificate fails.
    """
    cert = triple.require_control() if check else None
    N = triple.N

    def row(sid, lam, n, t, u):
        nb, ne, ng = t["Bu"].norm(), t["Eu"].norm(), t["GPu"].norm()
        nn = sobolev_norm(u, -N)
        return [[sid, lam, n, nb, ne, ng, nn, nb / (ne + ng + nn)]]

    rows = _sweep(triple, solutions, resolutions, grid_factor, period, row)
    cols = ["solution", "band_limit", "n", "norm_Bu", "norm_Eu", "norm_GPu", "norm_u_H-N", "ratio"]
    cfg = triple.config() | {"resolutions": list(resolutions), "grid_factor": grid_factor,
                             "control": cert.summary() if cert else None}
    return make_constant_report("theorem-estimate", cols, rows, "band_limit", "ratio", tolerance, cfg)


@dataclass
class NecessityReport:
    """Ratio growth for a triple whose control certificate fails."""

    report: ConstantReport
    exponent: float
    control_verdict: bool
    threshold: float
    verdict: bool


def fit_growth(band_limits, values):
    """Least-squares exponent of ``values ~ Lambda^p``."""
    return float(np.polyfit(np.log(np.asarray(band_limits, float)), np.log(np.asarray(values, float)), 1)[0])


def hypothesis_necessity_sweep(triple: TripleSpec, solutions, resolutions, threshold=0.5,
                               grid_factor=GRID_FACTOR, period=2 * np.pi) -> NecessityReport:
    """Run the estimate without the refusal and fit the growth of the sup in ``Lambda``."""
    cert = triple.certify()
    rep = run_theorem_estimate(triple, solutions, resolutions, grid_factor, period, check=False)
    rep.config["control"] = cert.summary()
    lams = sorted(rep.per_resolution)
    p = fit_growth(lams, [rep.per_resolution[l] for l in lams])
    return NecessityReport(rep, p, cert.verdict, threshold, bool(p >= threshold and not cert.verdict))


def run_lemma_estimate(triple: TripleSpec, solutions, resolutions, grid_factor=GRID_FACTOR,
                       period=2 * np.pi, tolerance=STABILITY_TOL, check=True) -> ConstantReport:
    """Theorem ratio with ``||Lambda_{1-k} Gu||_{H^{k-1/2}}`` added to the right side.

    Only ``H^{k+1}``-class families are admitted; the traveling delta and
    rough random fields raise ``ValueError``.
    """
    bad = [f.id for f in solutions if not _h1_class(f, triple.k)]
    if bad:
        raise ValueError(f"the lemma needs H^(k+1) solutions; rejected {bad}")
    return _ladder_level(triple, solutions, resolutions, 1, grid_factor, period, tolerance, check,
                         label="lemma-estimate")


def _ladder_level(triple, solutions, resolutions, m, grid_factor, period, tolerance, check, label=None):
    cert = triple.require_control() if check else None
    k, N = triple.k, triple.N
    s_g = (1.0 - k) + (k - m / 2)

    def row(sid, lam, n, t, u):
        nb, ne, ng = t["Bu"].norm(), t["Eu"].norm(), t["GPu"].norm()
        nl = sobolev_norm(t["Gu"], s_g)
        nn = sobolev_norm(u, -N)
        return [[sid, lam, n, m, nb, nl, ne, ng, nn, nb / (nl + ne + ng + nn), nl / nn]]

    rows = _sweep(triple, solutions, resolutions, grid_factor, period, row)
    cols = ["solution", "band_limit", "n", "m", "norm_Bu", "norm_LGu", "norm_Eu", "norm_GPu", "norm_u_H-N",
            "ratio", "absorption"]
    cfg = triple.config() | {"m": m, "resolutions": list(resolutions), "grid_factor": grid_factor,
                             "control": cert.summary() if cert else None}
    return make_constant_report(label or f"ladder-m{m}", cols, rows, "band_limit", "ratio", tolerance, cfg)


# ---------------------------------------------------------------------------
# order ladder


@dataclass
class LadderReport:
    levels: list
    g1_scale: float
    g1_certificates: dict
    absorption: ConstantReport
    growth: list
    growth_factor: float
    verdict: bool

    def summary(self):
        return {"levels": [{"m": r.config["m"], "sup": r.sup, "stability": r.stability, "verdict": r.verdict}
                           for r in self.levels],
                "g1_scale": self.g1_scale, "g1_certificates": self.g1_certificates,
                "absorption_sup": self.absorption.sup, "absorption_stability": self.absorption.stability,
                "growth": self.growth, "growth_factor": self.growth_factor, "verdict": self.verdict}


def _g1_conditions(triple: TripleSpec, g1, m, net, cache=None):
    # condition 1 does not depend on m
    key = g1.label
    if cache is not None and key in cache:
        c1 = cache[key]
    else:
        c1 = check_control(triple.b, triple.e, g1, triple.net)
        if cache is not None:
            cache[key] = c1
    c2 = check_control(S.times_bracket(g1, 1.0 - m / 2), S.times_bracket(triple.e, -m / 2),
                       S.times_bracket(triple.g, -m / 2), net)
    return c1, c2


def shrink_g(triple: TripleSpec, m, g1=None, scales=(0.7, 0.65, 0.6), net=None, cache=None):
    """Find ``g1`` meeting both ladder conditions at level ``m``.

    Returns ``(g1, scale, (cert1, cert2))``; raises ``HypothesisError`` with
    the tried scales when none certifies.
    """
    net = net or NetSpec(n_x=5, n_dirs=16, extra_dirs=triple.net.extra_dirs)
    if g1 is not None:
        c1, c2 = _g1_conditions(triple, g1, m, net, cache)
        if c1.verdict and c2.verdict:
            return g1, float("nan"), (c1, c2)
        raise HypothesisError("supplied g1 fails a ladder control condition",
                              {"m": m, "cond1": c1.summary(), "cond2": c2.summary()})
    if triple.g_shrink is None:
        raise HypothesisError("no g1 supplied and the triple has no shrink rule", {"m": m})
    tried = []
    for sc in scales:
        cand = triple.g_shrink(sc)
        c1, c2 = _g1_conditions(triple, cand, m, net, cache)
        tried.append({"scale": sc, "cond1": c1.summary(), "cond2": c2.summary()})
        if c1.verdict and c2.verdict:
            return cand, sc, (c1, c2)
    raise HypothesisError("auto-shrink could not certify both ladder conditions", {"m": m, "tried": tried})


def run_order_ladder(triple: TripleSpec, solutions, resolutions, m_max=None, g1=None, growth_factor=2.0,
                     grid_factor=GRID_FACTOR, period=2 * np.pi, tolerance=STABILITY_TOL) -> LadderReport:
    """Levels ``m = 1..m_max`` (default ``2N + 2k``) and the final absorption.

    Level ``m`` bounds ``||Bu||`` by ``||Lambda_{1-k} Gu||_{H^{k-m/2}}`` plus the
    theorem's terms; successive sups may grow by at most ``growth_factor``.
    Absorption is ``||Lambda_{1-k} Gu||_{H^{k-m/2}} / ||u||_{H^-N}`` at ``m_max``.
    """
    triple.require_control()
    m_max = int(m_max if m_max is not None else round(2 * triple.N + 2 * triple.k))
    certs, scale, cache = {}, float("nan"), {}
    levels = []
    for m in range(1, m_max + 1):
        _, sc, (c1, c2) = shrink_g(triple, m, g1, cache=cache)
        scale = sc
        certs[m] = {"cond1": c1.summary(), "cond2": c2.summary()}
        levels.append(_ladder_level(triple, solutions, resolutions, m, grid_factor, period, tolerance, False))
    last = levels[-1]
    cols = last.columns
    absorption = make_constant_report("absorption", cols, last.rows, "band_limit", "absorption", tolerance,
                                      last.config)
    sups = [r.sup for r in levels]
    growth = [b / a for a, b in zip(sups, sups[1:])]
    ok_growth = all(1.0 - 1e-12 <= g <= growth_factor for g in growth)
    verdict = all(r.verdict for r in levels) and absorption.verdict and ok_growth
    return LadderReport(levels, scale, certs, absorption, growth, growth_factor, bool(verdict))


# ---------------------------------------------------------------------------
# positive-commutator pairing


@dataclass
class IdentityReport:
    """The three expressions of the pairing identity and their relative gaps."""

    im_pairing: float
    commutator_form: float
    bracket_form: float
    scale: float
    differences: dict
    tolerance: float
    verdict: bool


def pairing_identity_check(a, u: Field, tolerance=1e-8) -> IdentityReport:
    """``Im<Au, APu> = (1/2i)(<PA*Au, u> - <A*APu, u>) = <(1/2i)[P, A*A]u, u>``.

    ``a`` is a symbol or an already quantized operator. Differences are
    relative to the largest of the three magnitudes, or to
    ``||Au|| ||APu||`` when all three vanish.
    """
    A = quantize(a, u.grid) if isinstance(a, S.SymbolHandle) else a
    As = A.adjoint()
    P = apply_dalembertian
    Au = A.apply(u)
    APu = A.apply(P(u))
    AsAu = As.apply(Au)
    AsAPu = As.apply(APu)
    t1 = float(np.imag(Au.inner(APu)))
    t2c = (P(AsAu).inner(u) - AsAPu.inner(u)) / 2j
    comm = (P(AsAu) - As.apply(A.apply(P(u)))) * (1 / 2j)
    t3c = comm.inner(u)
    vals = [t1, float(np.real(t2c)), float(np.real(t3c))]
    imag_parts = max(abs(np.imag(t2c)), abs(np.imag(t3c)))
    scale = max(abs(v) for v in vals)
    cs = Au.norm() * APu.norm()
    if scale <= 1e-13 * max(cs, 1e-300):
        scale = max(cs, 1e-300)
    diffs = {"im_vs_pairing": abs(vals[0] - vals[1]) / scale, "im_vs_commutator": abs(vals[0] - vals[2]) / scale,
             "pairing_vs_commutator": abs(vals[1] - vals[2]) / scale, "imaginary_residue": imag_parts / scale}
    return IdentityReport(vals[0], vals[1], vals[2], float(scale), diffs, tolerance,
                          bool(max(diffs.values()) <= tolerance))


def plane_wave_pairing(a: S.SymbolHandle, grid: GridSpec, xi) -> dict:
    """One-mode oracle: for ``u = exp(i xi.x)`` and x-independent ``a`` the pairing is
    ``Im(|a(xi)|^2 p(xi)) |T| = 0`` because ``p`` is real."""
    u = Field(grid, np.exp(1j * (grid.coords @ np.asarray(xi, float))))
    val = a.eval(np.zeros(grid.d), np.asarray(xi, float))
    p = float(np.asarray(xi) @ (np.array([1.0] + [-1.0] * (grid.d - 1)) * np.asarray(xi)))
    closed = float(np.imag(np.abs(val) ** 2 * p)) * grid.volume
    return {"closed_form": closed, "report": pairing_identity_check(a, u)}


@dataclass
class CommutatorReport:
    cauchy_schwarz_residual: float
    fitted: ConstantReport
    combined_ok: bool
    eps: float
    gamma: float
    verdict: bool


def escape_e():
    """Cutoff elliptic on the K part of the default escape bundle."""
    return S.cone_cutoff_symbol([-0.8, -0.8], 0.9, NULL_AXIS, 0.6, symmetric=True, label="e")


def escape_setup(gamma=32.0, n_samples=100_000, seed=0):
    """Escape bundle at the origin along ``(1, -1)/sqrt(2)`` with its pads and sign report.

    The default ``gamma`` clears the containment threshold for
    ``t0 = 1, delta = 0.25``. ``e`` keeps the default low-frequency cone edge
    so that it is nonzero wherever ``a`` is.
    """
    from .escape import EscapeSpec, build_escape, verify_sign_condition

    e = escape_e()
    g = S.tube_cone_symbol([-1.1, -1.1], [0.3, 0.3], 0.7, NULL_AXIS, 0.6, order=-1.0, symmetric=True,
                           low=4, high=8, label="g")
    spec = EscapeSpec(S.PhaseDirection(np.zeros(2), NULL_AXIS), gamma=float(gamma))
    bundle = build_escape(spec, g, e)
    report = verify_sign_condition(bundle, e, n_samples=n_samples, seed=seed)
    bundle.verification["sign"] = report.summary()
    return bundle, e, g, report


def commutator_bound_experiment(bundle: EscapeBundle, e: S.SymbolHandle, g: S.SymbolHandle, solutions,
                                resolutions, sign_report: SignReport, eps=None, gamma=None, N=2.0,
                                grid_factor=GRID_FACTOR, period=2 * np.pi, tolerance=STABILITY_TOL,
                                cs_tol=1e-10) -> CommutatorReport:
    """Lower bound by Cauchy-Schwarz, fitted upper-bound constant, and their combination.

    With ``X = ||Lambda_{-1/2} APu||^2``, ``Y = ||Lambda_{1/2} Au||^2`` and
    ``D = ||Eu||^2 + ||Lambda_{1-k} Gu||^2_{H^{k-1/2}} + ||u||^2_{H^-N}``:
    the lower bound ``Im<Au,APu> >= -X/(4 eps) - eps Y`` must hold to
    ``cs_tol`` (relative), the fitted constant is the least ``C`` with
    ``Im<Au,APu> <= C D - gamma Y`` and, at ``eps = gamma/2``, the two give
    ``Y <= (2/gamma)(C D + X/(2 gamma))``.
    """
    if sign_report is None or not sign_report.verdict:
        raise HypothesisError("the escape bundle has not passed the sign condition",
                              sign_report.summary() if sign_report is not None else None)
    k = bundle.spec.k
    gamma = float(bundle.spec.gamma if gamma is None else gamma)
    eps = gamma / 2 if eps is None else float(eps)
    rows, cs_worst, combined = [], 0.0, []
    for lam in resolutions:
        grid = _grid_for(lam, grid_factor, period, bundle.a.dim)
        A, E, G = (quantize(s, grid) for s in (bundle.a, e, g))
        for fam in solutions:
            f = fam.at(lam)
            u = f.field(grid)
            Au = A.apply(u)
            APu = A.apply(apply_dalembertian(u))
            im = float(np.imag(Au.inner(APu)))
            X = sobolev_norm(APu, -0.5) ** 2
            Y = sobolev_norm(Au, 0.5) ** 2
            D = E.apply(u).norm() ** 2 + sobolev_norm(G.apply(u), 0.5) ** 2 + sobolev_norm(u, -N) ** 2
            lower = -X / (4 * eps) - eps * Y
            scale = max(abs(im), X / (4 * eps) + eps * Y, 1e-300)
            cs_worst = max(cs_worst, max(0.0, lower - im) / scale)
            c_need = max(0.0, (im + gamma * Y) / D)
            rows.append([f.id, float(lam), grid.n_points[0], im, X, Y, D, c_need])
    cols = ["solution", "band_limit", "n", "im_pairing", "X", "Y", "D", "c_needed"]
    rep = make_constant_report("commutator-bound", cols, rows, "band_limit", "c_needed", tolerance,
                               {"gamma": gamma, "eps": eps, "k": k, "N": N, "a": bundle.a.label})
    C = rep.sup
    for r in rows:
        X, Y, D = r[4], r[5], r[6]
        combined.append(Y <= (2 / gamma) * (C * D + X / (2 * gamma)) * (1 + 1e-12))
    ok = all(combined)
    return CommutatorReport(cs_worst, rep, ok, eps, gamma, bool(cs_worst <= cs_tol and ok and rep.verdict))


# ---------------------------------------------------------------------------
# regularization


@dataclass
class RegReport:
    r: float
    eps_list: list
    commutation_residual: float
    rows: list
    columns: list
    constants: list
    uniformity: float
    monotone: bool
    certificates: list
    tolerance: float
    verdict: bool

    def write_csv(self, path):
        return write_csv(path, self.columns, self.rows)

    def summary(self):
        return {"r": self.r, "eps_list": self.eps_list, "commutation_residual": self.commutation_residual,
                "constants": self.constants, "uniformity": self.uniformity, "monotone": self.monotone,
                "certificates": self.certificates, "tolerance": self.tolerance, "verdict": self.verdict}


def conjugated(a: S.SymbolHandle, eps, r) -> S.SymbolHandle:
    """Symbol ``<eps xi>^{-r} a <eps xi>^{r}`` (order of ``a``)."""
    from .quantize import lambda_reg_symbol
    d = a.dim
    inner = S.symbol_product(a, lambda_reg_symbol(eps, -r, d))
    return S.with_order(S.symbol_product(lambda_reg_symbol(eps, r, d), inner,
                                         label=f"conj[{eps:g}]({a.label})"), a.order)


def commutation_residual(grid: GridSpec, eps, r):
    """Relative ``||[Lambda_{eps,r}, P] v||`` on a random field (both are multipliers)."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    w = reg_factor(eps, -r)(grid.freqs)
    p = box_weights(grid)
    lp = ifft(w * fft(ifft(p * fft(v))))
    pl = ifft(p * fft(ifft(w * fft(v))))
    return float(np.linalg.norm(lp - pl) / max(np.linalg.norm(lp), 1e-300))


def regularization_experiment(triple: TripleSpec, solutions, band_limit, r=None,
                              eps_list=tuple(2.0 ** -j for j in range(7)), s_mono=0.0, grid_factor=GRID_FACTOR,
                              period=2 * np.pi, tolerance=STABILITY_TOL, certify_each=True, reg_net=None,
                              comm_tol=1e-10) -> RegReport:
    """Conjugated estimate at each ``eps`` with ``r = N + k + 1``.

    ``C_eps`` is the sup of ``||L Bu|| / (||L Eu|| + ||L GPu|| + ||L u||_{H^-N})``
    over the corpus, ``L = Lambda_{eps,-r}``; uniformity is max/min of ``C_eps``.
    Monotonicity covers ``||L Bu||`` and ``||L u||_{H^s_mono}`` as ``eps`` decreases.
    """
    eps_list = [float(e) for e in eps_list]
    if any(not 0 < e <= 1 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing in (0, 1]")
    triple.require_control()
    r = float(triple.N + triple.k + 1 if r is None else r)
    grid = _grid_for(band_limit, grid_factor, period, triple.b.dim)
    comm = max(commutation_residual(grid, e, r) for e in eps_list)
    certs = []
    if certify_each:
        net = reg_net or NetSpec(n_x=5, n_dirs=16, extra_dirs=triple.net.extra_dirs)
        for e in eps_list:
            c = check_control(conjugated(triple.b, e, r), conjugated(triple.e, e, r), conjugated(triple.g, e, r), net)
            certs.append({"eps": e} | c.summary())
    B, E, G = (quantize(s, grid) for s in (triple.b, triple.e, triple.g))
    data = []
    for fam in solutions:
        f = fam.at(band_limit)
        u = f.field(grid)
        data.append((f.id, u, B.apply(u), E.apply(u), G.apply(apply_dalembertian(u))))
    rows, consts = [], []
    prev = {}
    monotone = True
    for e in eps_list:
        w = reg_factor(e, r)(grid.freqs)

        def L(v):
            return Field(grid, ifft(w * fft(v.values)))

        best = 0.0
        for sid, u, Bu, Eu, GPu in data:
            Lu = L(u)
            nb, ne, ng, nn = L(Bu).norm(), L(Eu).norm(), L(GPu).norm(), sobolev_norm(Lu, -triple.N)
            ns = sobolev_norm(Lu, s_mono)
            ratio = nb / (ne + ng + nn)
            best = max(best, ratio)
            if sid in prev:
                pb, ps = prev[sid]
                monotone &= nb >= pb * (1 - 1e-12) and ns >= ps * (1 - 1e-12)
            prev[sid] = (nb, ns)
            rows.append([sid, e, nb, ne, ng, nn, ns, ratio])
        consts.append(best)
    lo = min(consts)
    unif = max(consts) / lo if lo > 0 else float("inf")
    cols = ["solution", "eps", "norm_LBu", "norm_LEu", "norm_LGPu", "norm_Lu_H-N", "norm_Lu_Hs", "ratio"]
    verdict = comm <= comm_tol and monotone and unif <= tolerance and all(c["verdict"] for c in certs)
    return RegReport(r, eps_list, comm, rows, cols, consts, float(unif), bool(monotone), certs, tolerance,
                     bool(verdict))
