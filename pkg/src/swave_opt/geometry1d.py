"""Piecewise-quadratic change of variables X[eta] on (0, L) with X(L/2) = eta."""

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, ParameterError


@dataclass(frozen=True)
class PiecewiseQuadraticMap:
    """X(y) = a y^2 + b y for y <= L/2 and (L - y)(c y + d) + L beyond.

    The coefficients make X(0) = 0, X(L) = L, X(L/2) = eta with a
    continuous derivative at L/2.
    """

    eta: float
    length: float

    def __post_init__(self):
        if not 0.0 < self.eta < self.length:
            raise ParameterError(f"eta must lie strictly inside (0, {self.length}), got {self.eta}")

    @property
    def coefficients(self):
        e, L = self.eta, self.length
        a = 4 * e * (L - 2 * e) / L**3
        b = 4 * e**2 / L**2
        c = 4 * (L - e) * (2 * e - L) / L**3
        d = 4 * e * (e - L) / L**2
        return a, b, c, d

    @property
    def coefficient_derivatives(self):
        """d(a, b, c, d)/d eta."""
        e, L = self.eta, self.length
        return (
            4 * (L - 4 * e) / L**3,
            8 * e / L**2,
            4 * (3 * L - 4 * e) / L**3,
            4 * (2 * e - L) / L**2,
        )

    def slope_at_centre(self) -> float:
        e, L = self.eta, self.length
        return 4 * e * (L - e) / L**2

    def __call__(self, y):
        return map_eval(self, y)


def build_map_1d(eta, length) -> PiecewiseQuadraticMap:
    m = PiecewiseQuadraticMap(float(eta), float(length))
    L = m.length
    tol = 1e-10 * L
    if abs(map_eval(m, 0.0)) > tol or abs(map_eval(m, L) - L) > tol or abs(map_eval(m, L / 2) - m.eta) > tol:
        raise GeometryError("map does not satisfy its interpolation conditions")
    if m.slope_at_centre() >= min(4 * m.eta / L, 4 * (L - m.eta) / L):
        raise GeometryError("map slope condition violated")
    return m


def _branches(m, y):
    y = np.asarray(y, dtype=float)
    return y, y <= 0.5 * m.length


def map_eval(m, y):
    a, b, c, d = m.coefficients
    y, left = _branches(m, y)
    out = np.where(left, a * y * y + b * y, (m.length - y) * (c * y + d) + m.length)
    return out if out.ndim else float(out)


def map_derivative(m, y):
    a, b, c, d = m.coefficients
    y, left = _branches(m, y)
    out = np.where(left, 2 * a * y + b, -(c * y + d) + c * (m.length - y))
    return out if out.ndim else float(out)


def map_eta_derivative(m, y):
    """dX/d eta at fixed y."""
    da, db, dc, dd = m.coefficient_derivatives
    y, left = _branches(m, y)
    out = np.where(left, da * y * y + db * y, (m.length - y) * (dc * y + dd))
    return out if out.ndim else float(out)


def map_derivative_eta_derivative(m, y):
    """d/d eta of X'(y)."""
    da, db, dc, dd = m.coefficient_derivatives
    y, left = _branches(m, y)
    out = np.where(left, 2 * da * y + db, -(dc * y + dd) + dc * (m.length - y))
    return out if out.ndim else float(out)


def map_inverse(m, x):
    """Closed-form inverse, choosing the branch by comparing x with eta."""
    a, b, c, d = m.coefficients
    L = m.length
    x = np.asarray(x, dtype=float)
    left = x <= m.eta
    # left: a y^2 + b y - x = 0, root in [0, L/2]
    disc_l = b * b + 4 * a * x
    # right: -c y^2 + (c L - d) y + d L + L - x = 0, root in [L/2, L]
    A = -c
    B = c * L - d
    C = d * L + L - x
    disc_r = B * B - 4 * A * C
    disc = np.where(left, disc_l, disc_r)
    if np.any(disc < -1e-12 * max(1.0, L * L)):
        raise GeometryError("negative discriminant while inverting the 1D map")
    disc = np.sqrt(np.maximum(disc, 0.0))
    # numerically stable roots: the wanted root is the one with the + sign on sqrt
    # for left (2x / (b + sqrt)), and for the right branch the root lying in [L/2, L]
    y_left = 2 * x / (b + np.sqrt(np.maximum(disc_l, 0.0)))
    y_right = _right_root(A, B, C, disc, L)
    y = np.where(left, y_left, y_right)
    return y if y.ndim else float(y)


def _right_root(A, B, C, sq, L):
    # roots of A y^2 + B y + C; with A -> 0 this degenerates to -C / B
    with np.errstate(divide="ignore", invalid="ignore"):
        qq = -0.5 * (B + np.copysign(sq, B))
        r1 = qq / A
        r2 = C / qq
    r1 = np.where(np.isfinite(r1), r1, np.nan)
    in1 = (r1 >= 0.5 * L - 1e-9 * L) & (r1 <= L + 1e-9 * L)
    return np.where(in1, r1, r2)


def div_w_1d(m, x):
    """Divergence of the Eulerian velocity w = dX/d eta o Y at physical points x."""
    y = map_inverse(m, x)
    return map_derivative_eta_derivative(m, y) / map_derivative(m, y)
