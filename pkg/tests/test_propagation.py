import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from microlocal import propagation as PR
from microlocal import symbols as S
from microlocal.errors import HypothesisError, OrderPatternError
from microlocal.escape import EscapeSpec, build_escape
from microlocal.grid import GridSpec
from microlocal.quantize import quantize, sobolev_norm
from microlocal.waves import SolutionFamily, traveling_delta


@pytest.fixture(scope="module")
def flagship():
    t = PR.flagship_triple()
    t.certify()
    return t


def _ratio(triple, ops, u):
    t = PR._terms(triple, ops, u)
    return t["Bu"].norm() / (t["Eu"].norm() + t["GPu"].norm() + sobolev_norm(u, -triple.N))


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-3, 1e3), st.sampled_from([1.0, -1.0, 1j]))
def test_ratio_is_scale_invariant(c, phase):
    t = PR.flagship_triple()
    g = GridSpec.square(32)
    ops = tuple(quantize(s, g) for s in (t.b, t.e, t.g))
    u = traveling_delta(g, 8, window=True)
    assert _ratio(t, ops, u * (c * phase)) == pytest.approx(_ratio(t, ops, u), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-2, 2))
def test_order_pattern(ob, oe, og, k):
    ok = abs(ob - k) < 1e-12 and abs(oe - k) < 1e-12 and abs(og - (k - 1)) < 1e-12
    if ok:
        PR.check_order_pattern(ob, oe, og, k)
    else:
        with pytest.raises(OrderPatternError, match="pattern"):
            PR.check_order_pattern(ob, oe, og, k)


def test_triple_rejects_misordered_symbols():
    b = S.constant_symbol(1.0)
    with pytest.raises(OrderPatternError):
        PR.TripleSpec(b, b, b)


def test_uncontrolled_triple_refuses():
    with pytest.raises(HypothesisError) as info:
        PR.run_theorem_estimate(PR.violating_triple(), PR.default_corpus(), [16])
    assert info.value.diagnostic["verdict"] is False


def test_lemma_rejects_rough_families(flagship):
    with pytest.raises(ValueError):
        PR.run_lemma_estimate(flagship, [SolutionFamily("traveling-delta", 16.0)], [16])


def test_theorem_estimate_is_deterministic(flagship):
    r1 = PR.run_theorem_estimate(flagship, PR.default_corpus(), [16])
    r2 = PR.run_theorem_estimate(flagship, PR.default_corpus(), [16])
    assert r1.rows == r2.rows
    assert r1.columns[-1] == "ratio"
    assert 0 < r1.sup < 1


def test_pairing_identity_small_grid():
    bundle = build_escape(EscapeSpec(S.PhaseDirection(np.zeros(2), PR.NULL_AXIS)), check=False)
    u = traveling_delta(GridSpec.square(64), 16, window=True)
    rep = PR.pairing_identity_check(bundle.a, u)
    assert rep.verdict, rep.differences


def test_plane_wave_oracle():
    a = S.make_bracket_symbol(1.0)
    out = PR.plane_wave_pairing(a, GridSpec.square(32), [3.0, 2.0])
    assert out["closed_form"] == 0.0
    assert abs(out["report"].im_pairing) <= 1e-10 * out["report"].scale


@settings(max_examples=15, deadline=None)
@given(st.floats(2.0 ** -8, 1.0), st.floats(0.5, 6.0))
def test_regularizer_commutes_with_box(eps, r):
    assert PR.commutation_residual(GridSpec.square(32), eps, r) < 1e-12


def test_conjugation_keeps_order():
    a = S.make_bracket_symbol(1.0)
    c = PR.conjugated(a, 0.5, 3.0)
    assert c.order == a.order
    x = np.zeros((2, 2))
    xi = np.array([[1.0, 2.0], [30.0, -4.0]])
    # multipliers commute: conjugating a multiplier gives it back
    np.testing.assert_allclose(c.eval(x, xi), a.eval(x, xi), rtol=1e-12)


def test_commutator_bound_refuses_failing_sign_report():
    bundle, e, g, sign = PR.escape_setup(gamma=1.0, n_samples=5000)
    assert not sign.verdict
    with pytest.raises(HypothesisError):
        PR.commutator_bound_experiment(bundle, e, g, PR.default_corpus(), [16], sign)
    with pytest.raises(HypothesisError):
        PR.commutator_bound_experiment(bundle, e, g, PR.default_corpus(), [16], None)


def test_growth_fit():
    lams = [16, 32, 64]
    assert PR.fit_growth(lams, [l ** 0.75 for l in lams]) == pytest.approx(0.75)
