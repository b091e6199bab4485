import numpy as np
import pytest

from microlocal import calculus as C
from microlocal import symbols as S
from microlocal.errors import EllipticityError, HypothesisError
from microlocal.grid import GridSpec
from microlocal.probes import packet_corpus

BANDS = [4.0, 8.0, 16.0]


@pytest.fixture(scope="module")
def pair():
    return C.documented_pair()


def test_linear_symbol_composition_is_exact(pair):
    a1, a2, _ = pair
    rep = C.composition_residual(a1, a2, GridSpec.square(64), BANDS)
    assert rep.exact and rep.verdict


def test_adjoint_residual_decays(pair):
    _, _, a3 = pair
    rep = C.adjoint_residual(a3, GridSpec.square(64), BANDS)
    assert rep.verdict
    assert rep.target_exponent == 0.0


def test_first_order_correction_helps(pair):
    _, a2, a3 = pair
    g = GridSpec.square(64)
    full = C.composition_residual(a3, a2, g, BANDS)
    principal = C.composition_residual(a3, a2, g, BANDS, first_order=False)
    assert principal.target_exponent == 1.0
    assert full.fitted_exponent < principal.fitted_exponent - 0.5
    assert all(f < p for f, p in zip(full.residual_norms, principal.residual_norms))


def test_residual_report_is_seeded(pair):
    _, _, a3 = pair
    g = GridSpec.square(32)
    r1 = C.adjoint_residual(a3, g, [4.0, 8.0], seed=5)
    r2 = C.adjoint_residual(a3, g, [4.0, 8.0], seed=5)
    assert r1.residual_norms == r2.residual_norms


def test_elliptic_estimate_refuses_without_inclusion():
    a = S.x_symbol(S.bump_factor([0.0, 0.0], 1.0), 2, x_support=S.bump_support([0.0, 0.0], 1.0))
    ap = S.x_symbol(S.bump_factor([2.0, 2.0], 0.5), 2, x_support=S.bump_support([2.0, 2.0], 0.5))
    fields = [C.packet_field(p) for p in packet_corpus(2, 0, 8.0)]
    with pytest.raises(HypothesisError):
        C.elliptic_estimate_experiment(a, ap, 0.0, 2.0, [32], fields)


def test_elliptic_estimate_runs_with_inclusion():
    a = S.x_symbol(S.bump_factor([0.0, 0.0], 0.8), 2, x_support=S.bump_support([0.0, 0.0], 0.8))
    ap = S.x_symbol(S.bump_factor([0.0, 0.0], 1.6), 2, x_support=S.bump_support([0.0, 0.0], 1.6))
    fields = [C.packet_field(p) for p in packet_corpus(4, 0, 8.0, spread=0.5)]
    rep = C.elliptic_estimate_experiment(a, ap, 0.0, 2.0, [32, 64], fields)
    assert rep.verdict
    assert np.all(np.isfinite([r[-1] for r in rep.rows]))


def test_parametrix_refuses_non_elliptic_denominator():
    a = S.make_bracket_symbol(1.0)
    ap = S.x_symbol(S.bump_factor([0.0, 0.0], 0.5), 2, x_support=S.bump_support([0.0, 0.0], 0.5))
    psi = S.x_symbol(S.bump_factor([0.0, 0.0], 1.5), 2, x_support=S.bump_support([0.0, 0.0], 1.5))
    with pytest.raises(EllipticityError):
        C.parametrix_factor(a, ap, 8.0, psi)


def test_garding_refuses_negative_principal_symbol():
    a = S.symbol_scale(S.make_bracket_symbol(1.0), -1.0)
    fields = [C.packet_field(p) for p in packet_corpus(2, 0, 8.0)]
    with pytest.raises(HypothesisError):
        C.garding_experiment(a, None, [32], fields)


def test_garding_constant_positive_on_documented_case():
    a, b_loc, fields = C.garding_documented_case(n_packets=4)
    rep = C.garding_experiment(a, b_loc, [64], fields)
    assert rep.sup > 0
