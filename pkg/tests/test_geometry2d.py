import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swave_opt.errors import GeometryError, ParameterError
from swave_opt.geometry2d import (CurvatureParam, CurveFrame, TubularNeighborhood, build_map_2d, cofactor,
                                  curvature, curvature_partial, frame_apply, immersed_quadrature,
                                  interpolation_gradient, inverse_map_on_grid, locate_inverse_on_grid,
                                  tube_lattice, write_curve_csv)
from swave_opt.grid import Grid2D

REF_AMPS = (0.011, -0.00012, 0.00095, -0.00053)
ELL = 15.0
amps_st = st.tuples(*[st.floats(-0.03, 0.03)] * 4)


def make_map(amps=REF_AMPS, n_s=200, offset=0.0):
    return build_map_2d(CurvatureParam(amps, ELL, offset=offset), TubularNeighborhood(ell=ELL, n_s=n_s))


def tube_samples(m, n=7):
    y1, y2, _ = tube_lattice(m.tube, n)
    return y1[1:-1].ravel(), y2[1:-1].ravel()


def test_zero_amplitudes_zero_curvature():
    assert np.all(curvature(np.linspace(0, ELL, 50), CurvatureParam()) == 0.0)


def test_reference_coefficients_are_invertible():
    m = make_map()
    assert m.invertibility() < 1.0


def test_default_frequency_is_curve_length():
    assert CurvatureParam().frequency == ELL


@settings(max_examples=20)
@given(amps_st, st.floats(0.0, ELL), st.integers(1, 4))
def test_curvature_partial_matches_fd(amps, s, r):
    p = CurvatureParam(amps, ELL)
    h = 1e-4
    ap, am = list(amps), list(amps)
    ap[r - 1] += h
    am[r - 1] -= h
    fd = (curvature(s, p.with_amplitudes(ap)) - curvature(s, p.with_amplitudes(am))) / (2 * h)
    assert fd == pytest.approx(curvature_partial(s, r, p), abs=1e-10)


def test_curvature_partial_rejects_bad_mode():
    with pytest.raises(ParameterError):
        curvature_partial(0.0, 5, CurvatureParam())


def test_straight_reference_is_identity():
    m = make_map((0.0,) * 4)
    y1, y2 = tube_samples(m)
    np.testing.assert_allclose(m.evaluate(y1, y2), [y1, y2], atol=1e-13)
    g = m.gradient(y1, y2)
    np.testing.assert_allclose(g[0, 0], 1.0, atol=1e-15)
    np.testing.assert_allclose(g[0, 1], 0.0, atol=1e-15)
    np.testing.assert_allclose(g[1, 1], 1.0, atol=1e-15)


@settings(max_examples=15)
@given(amps_st)
def test_determinant_closed_form(amps):
    m = make_map(amps)
    y1, y2 = tube_samples(m)
    g = m.gradient(y1, y2)
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    closed = 1.0 - y2 * curvature(y1, m.param)
    assert np.max(np.abs(det - closed)) <= 1e-10
    np.testing.assert_allclose(m.determinant(y1, y2), closed, atol=1e-15)


def test_gradient_matches_fd():
    m = make_map(n_s=4000)
    y1, y2 = tube_samples(m)
    h = 1e-5
    fd1 = (m.evaluate(y1 + h, y2) - m.evaluate(y1 - h, y2)) / (2 * h)
    fd2 = (m.evaluate(y1, y2 + h) - m.evaluate(y1, y2 - h)) / (2 * h)
    g = m.gradient(y1, y2)
    # the y1-derivative is read off the arc-length tables, hence O(ds) agreement
    assert np.max(np.abs(fd1 - g[:, 0])) <= 1e-5
    assert np.max(np.abs(fd2 - g[:, 1])) <= 1e-10
    assert np.max(np.abs(np.linalg.det(np.moveaxis(g, (0, 1), (-2, -1))) - m.determinant(y1, y2))) <= 1e-6


def test_constant_curvature_gives_circular_arc():
    k0 = 0.05
    m = make_map((0.0,) * 4, n_s=2000, offset=k0)
    end = m.evaluate(ELL, 0.0)
    chord = np.hypot(*end)
    assert chord == pytest.approx(2.0 / k0 * np.sin(k0 * ELL / 2.0), rel=1e-6)
    # every curve point lies on the circle of radius 1/k0 centred at (0, 1/k0)
    pts = m.evaluate(m.s, np.zeros_like(m.s))
    r = np.hypot(pts[0], pts[1] - 1.0 / k0)
    assert np.max(np.abs(r - 1.0 / k0)) <= 1e-5


def test_cofactor_normal_has_unit_length():
    m = make_map()
    s = m.s
    g = m.gradient(s, np.zeros_like(s))
    n = cofactor(g)[:, 1]
    assert np.max(np.abs(np.hypot(n[0], n[1]) - 1.0)) <= 1e-10


def test_non_invertible_map_rejected():
    with pytest.raises(GeometryError):
        build_map_2d(CurvatureParam((2.0, 0, 0, 0), ELL))


@settings(max_examples=10)
@given(amps_st, st.integers(1, 4))
def test_eta_derivatives_match_fd(amps, r):
    m = make_map(amps)
    y1, y2 = tube_samples(m)
    h = 1e-5
    ap, am = list(amps), list(amps)
    ap[r - 1] += h
    am[r - 1] -= h
    mp, mm = make_map(tuple(ap)), make_map(tuple(am))
    dX, ddet, dgrad = m.eta_derivatives(y1, y2, r)
    np.testing.assert_allclose((mp.evaluate(y1, y2) - mm.evaluate(y1, y2)) / (2 * h), dX, atol=1e-6)
    np.testing.assert_allclose((mp.determinant(y1, y2) - mm.determinant(y1, y2)) / (2 * h), ddet, atol=1e-6)
    np.testing.assert_allclose((mp.gradient(y1, y2) - mm.gradient(y1, y2)) / (2 * h), dgrad, atol=1e-6)


def test_det_derivative_vanishes_on_curve():
    m = make_map()
    for r in range(1, 5):
        assert np.all(m.eta_derivatives(m.s, np.zeros_like(m.s), r)[1] == 0.0)


def test_eta_derivatives_straight_configuration_symbolic():
    # with gamma = 0: d alpha/d a_r = sin(k s)/k, d gradX/d a_r = [[-y2 dgam, -da], [da, 0]]
    m = make_map((0.0,) * 4, n_s=20000)
    y1, y2 = tube_samples(m)
    for r in range(1, 5):
        k = 2 * np.pi * r / ELL
        da = np.sin(k * y1) / k
        dgam = np.cos(k * y1)
        _, _, dgrad = m.eta_derivatives(y1, y2, r)
        np.testing.assert_allclose(dgrad[0, 0], -y2 * dgam, atol=1e-6)
        np.testing.assert_allclose(dgrad[0, 1], -da, atol=1e-6)
        np.testing.assert_allclose(dgrad[1, 0], da, atol=1e-6)
        np.testing.assert_allclose(dgrad[1, 1], 0.0, atol=1e-12)


def test_frame_apply_identity_and_rotation():
    m = make_map()
    y1, y2 = tube_samples(m)
    x, _, det = frame_apply(CurveFrame(anchor=(0.0, 0.0), angle=0.0), m, y1, y2)
    np.testing.assert_allclose(x, m.evaluate(y1, y2), atol=0)
    frame = CurveFrame(anchor=(3.0, -2.0), angle=0.7)
    _, grad, det_r = frame_apply(frame, m, y1, y2)
    det_g = grad[0, 0] * grad[1, 1] - grad[0, 1] * grad[1, 0]
    np.testing.assert_allclose(det_g, det_r, atol=1e-12)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-np.pi, np.pi))
def test_frame_round_trip(a, b, angle):
    frame = CurveFrame(anchor=(1.5, 4.0), angle=angle)
    y = np.array([a, b])
    assert np.max(np.abs(frame.to_local(frame.to_global(y)) - y)) <= 1e-12


def test_tube_area():
    m = make_map()
    area = immersed_quadrature(lambda y1, y2: np.ones_like(y1), m.tube, m, CurveFrame())
    assert area == pytest.approx(m.tube.area(), rel=0.01)
    # |S0| = int 2 eps ds = 2 * 0.1 * pi ell^2 / 8
    assert m.tube.area() == pytest.approx(2 * 0.1 * np.pi * ELL**2 / 8)
    assert immersed_quadrature(lambda y1, y2: np.zeros_like(y1), m.tube, m, CurveFrame()) == 0.0


def test_volume_preservation():
    m = make_map()
    vol = immersed_quadrature(lambda y1, y2: m.determinant(y1, y2), m.tube, m, CurveFrame())
    area = immersed_quadrature(lambda y1, y2: np.ones_like(y1), m.tube, m, CurveFrame())
    assert vol == pytest.approx(area, rel=1e-12)


def test_immersed_quadrature_affine_grid_field():
    # f(x) = 2 + 0.1 x1 - 0.05 x2 on a straight tube placed at the frame anchor
    grid = Grid2D(40, 40, 81, 81)
    frame = CurveFrame(anchor=(12.5, 20.0))
    m = make_map((0.0,) * 4)
    xx, yy = grid.mesh()
    f = 2 + 0.1 * xx - 0.05 * yy
    # bilinear interpolation reproduces affine fields, so both integrands agree to round-off
    exact = immersed_quadrature(lambda y1, y2: 2 + 0.1 * (12.5 + y1) - 0.05 * (20.0 + y2), m.tube, m, frame)
    approx = immersed_quadrature(f, m.tube, m, frame, grid)
    assert approx == pytest.approx(exact, rel=1e-12)


def test_divcof_lemma():
    # div(K) o X = (1 / det grad X) div_y((K o X) cof grad X), both sides by central FD
    m = make_map(tuple(10 * a for a in REF_AMPS), n_s=20000)
    y1, y2 = tube_samples(m, 5)
    keep = (y1 > 0.5) & (y1 < ELL - 0.5)
    y1, y2 = y1[keep], y2[keep]

    def K(x):
        return np.array([[np.sin(x[0]) * np.cos(x[1]), x[0] * x[1] ** 2],
                         [np.exp(0.1 * x[0]), np.cos(x[1])]])

    def G(a, b):
        return np.einsum("ij...,jk...->ik...", K(m.evaluate(a, b)), cofactor(m.gradient(a, b)))

    h = 1e-4
    x = m.evaluate(y1, y2)
    lhs = np.array([
        (K(x + [[h], [0]])[i, 0] - K(x - [[h], [0]])[i, 0]) / (2 * h)
        + (K(x + [[0], [h]])[i, 1] - K(x - [[0], [h]])[i, 1]) / (2 * h)
        for i in range(2)
    ])
    div_g = ((G(y1 + h, y2) - G(y1 - h, y2))[:, 0] + (G(y1, y2 + h) - G(y1, y2 - h))[:, 1]) / (2 * h)
    rhs = div_g / m.determinant(y1, y2)
    assert np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs)) <= 1e-4


def test_interpolation_gradient_affine():
    grid = Grid2D(10, 10, 11, 11)
    xx, yy = grid.mesh()
    g = interpolation_gradient(grid, 3 * xx - 2 * yy, np.array([1.3, 7.7]), np.array([4.1, 9.9]))
    np.testing.assert_allclose(g, [[3, 3], [-2, -2]], atol=1e-12)


def test_locate_inverse_identity():
    grid = Grid2D(40, 40, 51, 51)
    frame = CurveFrame(anchor=(12.5, 20.0))
    m = make_map((0.0,) * 4)
    x = np.array([grid.x[25], grid.y[25]])
    np.testing.assert_allclose(locate_inverse_on_grid(m, frame, m.tube, grid, x), x)
    assert locate_inverse_on_grid(m, frame, m.tube, grid, np.array([2.0, 2.0])) is None


def test_locate_inverse_round_trip():
    grid = Grid2D(40, 40, 51, 51)
    frame = CurveFrame(anchor=(12.5, 20.0))
    m = make_map(tuple(10 * a for a in REF_AMPS))
    diag = np.hypot(grid.dx, grid.dy)
    for s in np.linspace(1.0, ELL - 1.0, 9):
        target = frame.to_global(m.evaluate(s, 0.0))
        y = locate_inverse_on_grid(m, frame, m.tube, grid, target)
        assert y is not None
        loc = frame.to_local(y)
        inside = 0 <= loc[0] <= ELL and abs(loc[1]) <= m.tube.envelope(loc[0])
        image = frame.to_global(m.evaluate(loc[0], loc[1])) if inside else y
        assert np.hypot(*(image - target)) <= diag


def test_inverse_map_on_grid_marks_only_nearby_nodes():
    grid = Grid2D(40, 40, 51, 51)
    frame = CurveFrame(anchor=(12.5, 20.0))
    m = make_map((0.0,) * 4)
    found, y1, y2 = inverse_map_on_grid(m, frame, m.tube, grid)
    xx, yy = grid.mesh()
    # straight reference: every found node pulls back to itself
    np.testing.assert_allclose(y1[found], xx[found] - 12.5, atol=1e-12)
    np.testing.assert_allclose(y2[found], yy[found] - 20.0, atol=1e-12)
    assert not found[0, 0]


def test_curve_csv(tmp_path):
    m = make_map()
    path = tmp_path / "curve.csv"
    write_curve_csv(path, m, CurveFrame())
    lines = path.read_text().splitlines()
    assert lines[0] == "s,x1,x2"
    assert len(lines) == 1 + m.s.size
