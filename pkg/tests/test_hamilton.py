import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from microlocal import symbols as S
from microlocal.errors import DomainError
from microlocal.hamilton import LightRay, NetSpec, apply_hamilton, check_control, flow, hamilton_field, in_characteristic_set
from microlocal.propagation import NULL_AXIS, flagship_triple, violating_triple

angles = st.floats(0, 2 * np.pi)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.sampled_from([1.0, -1.0]), st.floats(-2, 2))
def test_flow_keeps_frequency_and_moves_on_lines(x0, x1, sgn, t):
    p = S.PhaseDirection.normalized([x0, x1], [1.0, sgn])
    q = flow(p, t)
    np.testing.assert_allclose(q.xi_hat, p.xi_hat)
    d = q.x - p.x
    # displacement is null: |dx_0| = |dx_1|
    assert abs(abs(d[0]) - abs(d[1])) < 1e-12


@settings(max_examples=40, deadline=None)
@given(angles, st.floats(0.5, 50))
def test_box_symbol_is_invariant_under_its_flow(theta, r):
    xi = np.array([[np.cos(theta), np.sin(theta)]]) * r
    x = np.zeros((1, 2))
    val = apply_hamilton(S.make_box_symbol(2), x, xi)
    assert np.all(np.abs(val) < 1e-9 * r**3)


def test_hamilton_derivative_of_x_symbol():
    chi = S.x_symbol(S.raised_cosine_factor([0.0, 0.0], 4), 2)
    x = np.array([[0.3, -0.4]])
    xi = np.array([[2.0, 1.0]])
    dx, _ = hamilton_field(x, xi)
    h = 1e-6
    fd = (chi.eval(x + h * dx, xi) - chi.eval(x - h * dx, xi)) / (2 * h)
    np.testing.assert_allclose(apply_hamilton(chi, x, xi), fd, rtol=1e-6)


def test_characteristic_set():
    assert in_characteristic_set(NULL_AXIS)
    assert not in_characteristic_set(np.array([1.0, 0.0]))


def test_ray_requires_characteristic_direction():
    with pytest.raises(DomainError):
        LightRay(S.PhaseDirection([0.0, 0.0], [1.0, 0.0]))


def test_flagship_is_controlled():
    t = flagship_triple()
    cert = check_control(t.b, t.e, t.g, NetSpec(n_x=5, n_dirs=16, extra_dirs=(tuple(NULL_AXIS),)))
    assert cert.verdict, cert.summary()


def test_violating_variant_fails_control():
    t = violating_triple()
    cert = check_control(t.b, t.e, t.g, NetSpec(n_x=5, n_dirs=16, extra_dirs=(tuple(NULL_AXIS),)))
    assert not cert.verdict
    assert cert.failures
