import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from microlocal import escape as X
from microlocal.errors import ConstructionError
from microlocal.propagation import NULL_AXIS, escape_e
from microlocal.symbols import PhaseDirection

TARGET = PhaseDirection(np.zeros(2), NULL_AXIS)


def _spec(**kw):
    return X.EscapeSpec(TARGET, **kw)


@pytest.mark.parametrize("kw", [{"t0": 0.0}, {"delta": -1.0}, {"gamma": 0.0}, {"orientation": 2}])
def test_spec_validation(kw):
    with pytest.raises(ConstructionError):
        _spec(**kw)


def test_non_characteristic_target_rejected():
    with pytest.raises(ConstructionError):
        X.EscapeSpec(PhaseDirection(np.zeros(2), np.array([1.0, 0.0])))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.05, 0.5), st.floats(0.1, 80.0))
def test_phi_vanishes_outside_support(t0, delta, gamma):
    spec = _spec(t0=t0, delta=delta, gamma=gamma)
    lo, hi = spec.support
    t = np.array([lo - 0.1, lo, hi, hi + 0.1])
    assert np.all(X.phi(t, spec) == 0)
    inside = np.linspace(lo, hi, 9)[1:-1]
    assert np.all(X.phi(inside, spec) > 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.05, 0.5), st.floats(0.5, 2.0))
def test_containment_threshold(t0, delta, factor):
    """Negativity of 2 phi' + gamma phi sits inside K exactly when gamma clears the threshold."""
    g_min = X.min_gamma_for_containment(t0, delta)
    spec = _spec(t0=t0, delta=delta, gamma=factor * g_min)
    t_star = X.negativity_threshold(spec)
    if factor > 1.0 + 1e-9:
        assert t_star <= -t0 + 1e-9
    elif factor < 1.0 - 1e-9:
        assert t_star > -t0


def test_phi_prime_matches_finite_difference():
    spec = _spec(gamma=3.0)
    t = np.linspace(-1.1, 0.1, 7)
    h = 1e-6
    fd = (X.phi(t + h, spec) - X.phi(t - h, spec)) / (2 * h)
    np.testing.assert_allclose(X.phi_prime(t, spec), fd, rtol=1e-5, atol=1e-12)


def test_default_threshold_value():
    assert X.min_gamma_for_containment(1.0, 0.25) == pytest.approx(30.72)


def test_sign_condition_seeded_and_reproducible():
    b = X.build_escape(_spec(gamma=32.0), check=False)
    r1 = X.verify_sign_condition(b, escape_e(), n_samples=5000, seed=3)
    r2 = X.verify_sign_condition(b, escape_e(), n_samples=5000, seed=3)
    assert r1.summary() == r2.summary()
    assert r1.containment and r1.verdict


def test_default_gamma_leaks_outside_K():
    b = X.build_escape(_spec(), check=False)
    r = X.verify_sign_condition(b, escape_e(), n_samples=20000, seed=0)
    assert not r.containment
    assert r.n_negative_outside_K > 0


def test_hamilton_of_square_matches_fd():
    b = X.build_escape(_spec(gamma=2.0), check=False)
    z, zeta = X.sample_phase_space(b.spec, 200, seed=1)
    exact = np.real(X.a_hamilton_a(b).eval(z, zeta))
    fd = X.hamilton_of_square_fd(b, z, zeta)
    np.testing.assert_allclose(exact, fd, rtol=1e-4, atol=1e-8 * np.max(np.abs(fd)))


def test_sos_identity():
    b = X.build_escape(_spec(gamma=32.0), check=False)
    e = escape_e()
    r = X.verify_sign_condition(b, e, n_samples=5000, seed=0)
    pair = X.sos_decomposition(b, e, X.default_psi(b), 1.05 * r.c_min, check_samples=2000)
    assert X.sos_identity_residual(pair, b, e, n=2000) < 1e-8
