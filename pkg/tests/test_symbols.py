import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from microlocal import symbols as S
from microlocal.errors import InvalidDimensionError


def test_bracket_matches_definition():
    xi = np.array([[3.0, 4.0], [0.0, 0.0]])
    np.testing.assert_allclose(S.bracket(xi), [np.sqrt(26.0), 1.0])
    np.testing.assert_allclose(S.bracket(xi, 2.0), [26.0, 1.0])


def test_box_symbol_vanishes_on_light_cone():
    p = S.make_box_symbol(2)
    x = np.zeros((3, 2))
    xi = np.array([[1.0, 1.0], [5.0, -5.0], [2.0, 1.0]])
    vals = p.eval(x, xi)
    assert vals[0] == 0 and vals[1] == 0
    assert vals[2] != 0
    assert p.order == 2


def test_invalid_dimension_rejected():
    with pytest.raises(InvalidDimensionError):
        S.make_box_symbol(1)


@pytest.mark.parametrize("m", [-1.0, 0.0, 1.0, 2.0])
def test_bracket_symbol_order_is_certified(m):
    rep = S.check_symbol_order(S.make_bracket_symbol(m), max_deriv=2)
    assert rep.passed


def test_phase_direction_normalizes():
    p = S.PhaseDirection.normalized([0.0, 0.0], [3.0, -4.0])
    np.testing.assert_allclose(np.linalg.norm(p.xi_hat), 1.0)


def test_elliptic_and_esssupp_of_cutoff():
    ax = np.array([1.0, -1.0]) / np.sqrt(2)
    a = S.cone_cutoff_symbol([0.0, 0.0], 0.5, ax, 0.3)
    assert S.is_elliptic_at(a, S.PhaseDirection([0.0, 0.0], ax))
    # far outside the x-support: rapid decay
    assert S.esssupp_excludes(a, S.PhaseDirection([2.0, 2.0], ax))
    # orthogonal cone direction is excluded too
    assert S.esssupp_excludes(a, S.PhaseDirection([0.0, 0.0], np.array([1.0, 1.0]) / np.sqrt(2)))


def test_poisson_bracket_of_x_and_xi():
    # {xi_1, x-bump} = d_xi xi_1 . d_x chi = d_x1 chi
    chi = S.x_symbol(S.raised_cosine_factor([0.0, 0.0], 4), 2)
    pb = S.poisson_bracket(S.linear_xi_symbol(1), chi)
    x = np.array([[0.3, -0.2]])
    xi = np.array([[1.0, 2.0]])
    h = 1e-6
    fd = (chi.eval(x + [0, h], xi) - chi.eval(x - [0, h], xi)) / (2 * h)
    np.testing.assert_allclose(pb.eval(x, xi), fd, rtol=1e-5, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(0.1, 3))
def test_symbol_scale_is_linear(c, m):
    a = S.make_bracket_symbol(m)
    x = np.zeros((4, 2))
    xi = np.array([[0.0, 1.0], [10.0, 0.0], [3.0, -7.0], [100.0, 1.0]])
    np.testing.assert_allclose(S.symbol_scale(a, c).eval(x, xi), c * a.eval(x, xi), rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.floats(0, 6.2))
def test_sphere_directions_are_unit(n, offset):
    dirs = S.sphere_directions(2, n, offset)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=-1), 1.0)
