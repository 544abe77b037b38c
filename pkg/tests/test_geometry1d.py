import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swave_opt.errors import ParameterError
from swave_opt.geometry1d import (build_map_1d, div_w_1d, map_derivative, map_derivative_eta_derivative,
                                  map_eta_derivative, map_eval, map_inverse)
from swave_opt.grid import Grid1D, trapezoid_integral

L = 60.0
etas = st.floats(0.05 * L, 0.95 * L)


def test_centred_eta_is_identity():
    m = build_map_1d(L / 2, L)
    a, b, c, d = m.coefficients
    assert (a, b, c, d) == (0.0, 1.0, 0.0, -1.0)
    y = np.linspace(0, L, 101)
    np.testing.assert_allclose(map_eval(m, y), y, atol=1e-12)
    np.testing.assert_allclose(map_inverse(m, y), y, atol=1e-12)


@given(etas)
def test_interpolation_conditions(eta):
    m = build_map_1d(eta, L)
    assert map_eval(m, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert map_eval(m, L) == pytest.approx(L, abs=1e-10)
    assert map_eval(m, L / 2) == pytest.approx(eta, abs=1e-10)
    slope = 4 * eta * (L - eta) / L**2
    left = map_derivative(m, L / 2)
    right = map_derivative(m, np.nextafter(L / 2, L))
    assert left == pytest.approx(slope, rel=1e-12)
    assert right == pytest.approx(slope, rel=1e-9)
    assert m.slope_at_centre() == pytest.approx(slope, rel=1e-14)


def test_rejects_eta_outside():
    with pytest.raises(ParameterError):
        build_map_1d(0.0, L)
    with pytest.raises(ParameterError):
        build_map_1d(L, L)


def test_monotone_dense_sampling_default_eta():
    m = build_map_1d(30.4, L)
    y = np.linspace(0, L, 10_000)
    assert np.all(map_derivative(m, y) > 0)


@settings(max_examples=30)
@given(etas)
def test_monotone_property(eta):
    m = build_map_1d(eta, L)
    assert np.all(map_derivative(m, np.linspace(0, L, 2001)) > 0)


@given(etas, st.floats(0.5, 59.5))
def test_map_derivative_matches_fd(eta, y):
    m = build_map_1d(eta, L)
    h = 1e-5
    if abs(y - L / 2) < 2 * h:
        return
    fd = (map_eval(m, y + h) - map_eval(m, y - h)) / (2 * h)
    assert fd == pytest.approx(map_derivative(m, y), abs=1e-8)


@given(etas, st.floats(0.0, L))
def test_eta_derivatives_match_fd(eta, y):
    h = 1e-6
    mp, mm, m = build_map_1d(eta + h, L), build_map_1d(eta - h, L), build_map_1d(eta, L)
    fd = (map_eval(mp, y) - map_eval(mm, y)) / (2 * h)
    assert fd == pytest.approx(map_eta_derivative(m, y), abs=1e-7)
    fd2 = (map_derivative(mp, y) - map_derivative(mm, y)) / (2 * h)
    assert fd2 == pytest.approx(map_derivative_eta_derivative(m, y), abs=1e-7)


def test_inverse_at_eta():
    m = build_map_1d(30.4, L)
    assert map_inverse(m, 30.4) == pytest.approx(L / 2, abs=1e-12)


@settings(max_examples=30)
@given(etas)
def test_round_trip(eta):
    m = build_map_1d(eta, L)
    y = np.linspace(0, L, 1001)
    assert np.max(np.abs(map_inverse(m, map_eval(m, y)) - y)) <= 1e-12
    assert np.max(np.abs(map_eval(m, map_inverse(m, y)) - y)) <= 1e-12


@settings(max_examples=20)
@given(etas, st.floats(0.1, 59.9))
def test_formuladiv_identity(eta, y):
    # div w (X(y)) = d/d eta log X'(y)
    m = build_map_1d(eta, L)
    h = 1e-5
    fd = (np.log(map_derivative(build_map_1d(eta + h, L), y))
          - np.log(map_derivative(build_map_1d(eta - h, L), y))) / (2 * h)
    assert div_w_1d(m, map_eval(m, y)) == pytest.approx(fd, abs=1e-6)


@pytest.mark.parametrize("eta", [12.0, 30.0, 30.4, 47.0])
def test_div_w_integrates_to_zero(eta):
    # int div w dx = int d/d eta X'(y) dy = d/d eta (X(L) - X(0)) = 0;
    # integrated in the reference variable so the rule is exact on each branch
    m = build_map_1d(eta, L)
    g = Grid1D(L, 301)
    integrand = div_w_1d(m, map_eval(m, g.x)) * map_derivative(m, g.x)
    assert abs(trapezoid_integral(integrand, g)) <= 1e-10


def test_div_w_identity_map_symbolic():
    # at eta = L/2: X' = 1; left (da, db) = (-4/L^2, 4/L), right (dc, dd) = (4/L^2, 0),
    # and both branches give dX'/d eta = 4 (L - 2y) / L^2
    m = build_map_1d(L / 2, L)
    x = np.array([5.0, 20.0, 40.0, 55.0])
    expected = 4 * (L - 2 * x) / L**2
    np.testing.assert_allclose(div_w_1d(m, x), expected, atol=1e-14)


@settings(max_examples=20)
@given(etas, st.floats(0.5, 59.5))
def test_chain_rule_form_of_divcof(eta, y):
    # in 1D cof = 1: K'(X(y)) = (1 / X'(y)) d/dy K(X(y))
    m = build_map_1d(eta, L)
    h = 1e-5
    if abs(y - L / 2) < 2 * h:
        return
    K, dK = np.sin, np.cos
    lhs = dK(map_eval(m, y))
    rhs = (K(map_eval(m, y + h)) - K(map_eval(m, y - h))) / (2 * h) / map_derivative(m, y)
    assert lhs == pytest.approx(rhs, abs=1e-7)
