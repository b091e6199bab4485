import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from microlocal import symbols as S
from microlocal.errors import GridMismatchError
from microlocal.grid import Field, GridSpec
from microlocal.quantize import (apply_dalembertian, commutator, exactness_report, lambda_operator, lambda_reg,
                                 quantize, sobolev_norm)


def _random_field(grid, seed):
    r = np.random.default_rng(seed)
    return Field(grid, r.standard_normal(grid.shape) + 1j * r.standard_normal(grid.shape))


def test_exactness_small_grid(grid32):
    rep = exactness_report(grid32)
    assert rep["verdict"]
    assert max(v for k, v in rep.items() if k not in ("tolerance", "verdict")) < 1e-12


def test_grid_mismatch(grid32):
    A = quantize(S.make_bracket_symbol(1.0), grid32)
    with pytest.raises(GridMismatchError):
        A(_random_field(GridSpec.square(16), 0))


def test_adjoint_pairing(grid32):
    a = S.cone_cutoff_symbol([0.1, 0.0], 0.6, [1.0, -1.0], 0.4, order=1.0)
    A = quantize(a, grid32)
    u, v = _random_field(grid32, 1), _random_field(grid32, 2)
    lhs = np.vdot(v.values, A(u).values)
    rhs = np.vdot(A.adjoint()(v).values, u.values)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_lambda_operators_are_inverse(grid32):
    u = _random_field(grid32, 3)
    w = lambda_operator(1.5, grid32)(lambda_operator(-1.5, grid32)(u))
    np.testing.assert_allclose(w.values, u.values, atol=1e-12)


def test_regularizer_commutes_with_box(grid32):
    u = _random_field(grid32, 4)
    L = lambda_reg(0.25, 3.0, grid32)
    lhs = apply_dalembertian(L(u)).values
    rhs = L(apply_dalembertian(u)).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(lhs))


def test_commutator_of_multipliers_vanishes(grid32):
    A = quantize(S.make_bracket_symbol(1.0), grid32)
    B = quantize(S.make_bracket_symbol(-2.0), grid32)
    u = _random_field(grid32, 5)
    assert np.max(np.abs(commutator(A, B)(u).values)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 100.0))
def test_sobolev_norm_is_homogeneous(s, c):
    grid = GridSpec.square(16)
    u = _random_field(grid, 6)
    assert sobolev_norm(u * c, s) == pytest.approx(c * sobolev_norm(u, s), rel=1e-12)
