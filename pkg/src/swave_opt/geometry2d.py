"""Curvature-driven deformation of a straight segment and its tubular neighbourhood.

Local (reference) coordinates are ``y = (y1, y2)`` with ``y1`` the arc length
along the reference segment and ``y2`` the signed normal offset.  The map

    X(y) = P(y1) + y2 (-sin A(y1), cos A(y1)),   A' = gamma,  P' = (cos A, sin A)

bends the segment into a curve of curvature gamma.  A frame (anchor and
rotation) places the reference segment in the physical domain.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ParameterError

N_MODES = 4


@dataclass(frozen=True)
class CurvatureParam:
    """gamma(s) = offset + sum_r a_r cos(2 pi r s / frequency), r = 1..4.

    ``offset`` is a fixed background curvature, not an optimisation variable.
    """

    amplitudes: tuple = (0.0, 0.0, 0.0, 0.0)
    ell: float = 15.0
    frequency: float = None
    offset: float = 0.0

    def __post_init__(self):
        amps = tuple(float(a) for a in np.ravel(self.amplitudes))
        if len(amps) != N_MODES:
            raise ParameterError(f"expected {N_MODES} curvature amplitudes, got {len(amps)}")
        object.__setattr__(self, "amplitudes", amps)
        if not self.ell > 0:
            raise ParameterError(f"curve length must be positive, got {self.ell}")
        if self.frequency is None:
            object.__setattr__(self, "frequency", float(self.ell))
        if not self.frequency > 0:
            raise ParameterError(f"frequency must be positive, got {self.frequency}")

    def with_amplitudes(self, amplitudes):
        return CurvatureParam(tuple(amplitudes), self.ell, self.frequency, self.offset)


def _wavenumbers(param):
    return 2.0 * np.pi * np.arange(1, N_MODES + 1) / param.frequency


def curvature(s, param):
    s = np.asarray(s, dtype=float)
    k = _wavenumbers(param)
    return param.offset + np.tensordot(np.asarray(param.amplitudes), np.cos(np.multiply.outer(k, s)), axes=1)


def curvature_partial(s, r, param):
    """d gamma / d a_r for r in 1..4 (independent of the amplitudes)."""
    if not 1 <= r <= N_MODES:
        raise ParameterError(f"mode index must lie in 1..{N_MODES}, got {r}")
    return np.cos(_wavenumbers(param)[r - 1] * np.asarray(s, dtype=float))


@dataclass(frozen=True)
class CurveFrame:
    """Rigid placement x = anchor + R y of local coordinates."""

    anchor: tuple = (12.5, 20.0)
    angle: float = 0.0

    @property
    def rotation(self):
        c, s = np.cos(self.angle), np.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    def to_global(self, local):
        local = np.asarray(local, dtype=float)
        return self._anchor(local.ndim) + np.tensordot(self.rotation, local, axes=1)

    def to_local(self, x):
        x = np.asarray(x, dtype=float)
        return np.tensordot(self.rotation.T, x - self._anchor(x.ndim), axes=1)

    def _anchor(self, ndim):
        return np.asarray(self.anchor, dtype=float).reshape((2,) + (1,) * (ndim - 1))


@dataclass(frozen=True)
class TubularNeighborhood:
    """Envelope eps(s) = width * sqrt(s (ell - s)) sampled at n_s + 1 arc-length nodes."""

    ell: float = 15.0
    width: float = 0.1
    n_s: int = 200

    def __post_init__(self):
        if self.n_s < 2:
            raise ParameterError("the curve needs at least 2 intervals")
        if self.width < 0 or not self.ell > 0:
            raise ParameterError("tube width must be >= 0 and ell > 0")

    @property
    def ds(self):
        return self.ell / self.n_s

    @property
    def s(self):
        return np.linspace(0.0, self.ell, self.n_s + 1)

    def envelope(self, s):
        s = np.asarray(s, dtype=float)
        return self.width * np.sqrt(np.clip(s * (self.ell - s), 0.0, None))

    def area(self):
        """Closed-form area int_0^ell 2 eps(s) ds of the reference tube."""
        return self.width * np.pi * self.ell**2 / 4.0


def _cumtrapz(values, ds):
    out = np.zeros_like(values)
    out[..., 1:] = np.cumsum(0.5 * ds * (values[..., 1:] + values[..., :-1]), axis=-1)
    return out


@dataclass(frozen=True)
class DeformationMap2D:
    param: CurvatureParam
    tube: TubularNeighborhood
    s: np.ndarray = field(repr=False)
    angle: np.ndarray = field(repr=False)
    position: np.ndarray = field(repr=False)
    angle_partials: np.ndarray = field(repr=False)
    position_partials: np.ndarray = field(repr=False)

    def _interp(self, table, y1):
        return np.interp(y1, self.s, table)

    def angle_at(self, y1):
        return self._interp(self.angle, y1)

    def evaluate(self, y1, y2):
        """X(y) in local coordinates, stacked on the leading axis."""
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        a = self.angle_at(y1)
        px = self._interp(self.position[0], y1)
        py = self._interp(self.position[1], y1)
        return np.array([px - y2 * np.sin(a), py + y2 * np.cos(a)])

    def gradient(self, y1, y2):
        """grad X with shape (2, 2, *y.shape)."""
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        a = self.angle_at(y1)
        stretch = 1.0 - y2 * curvature(y1, self.param)
        c, s = np.cos(a), np.sin(a)
        return np.array([[stretch * c, -s], [stretch * s, c]])

    def determinant(self, y1, y2):
        return 1.0 - np.asarray(y2, dtype=float) * curvature(y1, self.param)

    def eta_derivatives(self, y1, y2, r):
        """(dX/da_r, d det/da_r, d gradX/da_r) at y for mode r in 1..4."""
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        a = self.angle_at(y1)
        c, s = np.cos(a), np.sin(a)
        da = self._interp(self.angle_partials[r - 1], y1)
        dpx = self._interp(self.position_partials[r - 1, 0], y1)
        dpy = self._interp(self.position_partials[r - 1, 1], y1)
        dX = np.array([dpx - y2 * c * da, dpy - y2 * s * da])
        dgam = curvature_partial(y1, r, self.param)
        ddet = -y2 * dgam
        stretch = 1.0 - y2 * curvature(y1, self.param)
        dgrad = np.array([
            [-y2 * dgam * c - stretch * s * da, -c * da],
            [-y2 * dgam * s + stretch * c * da, -s * da],
        ])
        return dX, ddet, dgrad

    def invertibility(self):
        """sup over the curve nodes of |eps(s) gamma(s)|."""
        return float(np.max(np.abs(self.tube.envelope(self.s) * curvature(self.s, self.param))))


def build_map_2d(param, tube=None) -> DeformationMap2D:
    tube = tube or TubularNeighborhood(ell=param.ell)
    if abs(tube.ell - param.ell) > 1e-12 * param.ell:
        raise ParameterError("curve length of the tube and of the curvature disagree")
    s = tube.s
    ds = tube.ds
    gam = curvature(s, param)
    sup = float(np.max(np.abs(tube.envelope(s) * gam)))
    if not sup < 1.0:
        raise GeometryError(f"map not invertible: sup |eps gamma| = {sup:.6g} >= 1")
    angle = _cumtrapz(gam, ds)
    position = _cumtrapz(np.array([np.cos(angle), np.sin(angle)]), ds)
    dgam = np.array([curvature_partial(s, r, param) for r in range(1, N_MODES + 1)])
    dangle = _cumtrapz(dgam, ds)
    dpos = _cumtrapz(np.stack([-np.sin(angle) * dangle, np.cos(angle) * dangle], axis=1), ds)
    return DeformationMap2D(param, tube, s, angle, position, dangle, dpos)


def frame_apply(frame, m, y1, y2):
    """Physical image of local points, with gradient R grad X R^T and unchanged determinant."""
    local = m.evaluate(y1, y2)
    x = frame.to_global(local)
    R = frame.rotation
    grad = np.einsum("ij,jk...,lk->il...", R, m.gradient(y1, y2), R)
    return x, grad, m.determinant(y1, y2)


def cofactor(a):
    """cof(A) for 2x2 matrices stacked on the leading axes (A is (2, 2, ...))."""
    return np.array([[a[1, 1], -a[1, 0]], [-a[0, 1], a[0, 0]]])


def tube_lattice(tube, n_t=8):
    """Sample points and quadrature weights covering the reference tube.

    Outer trapezoid over the arc-length nodes, inner trapezoid over ``n_t``
    equispaced transverse samples in [-eps(s), eps(s)].
    Returns (y1, y2, weights), each of shape (n_s + 1, n_t).
    """
    if n_t < 2:
        raise ParameterError("need at least 2 transverse samples")
    s = tube.s
    ws = np.full(s.size, tube.ds)
    ws[0] = ws[-1] = 0.5 * tube.ds
    t = np.linspace(-1.0, 1.0, n_t)
    wt = np.full(n_t, 2.0 / (n_t - 1))
    wt[0] = wt[-1] = 1.0 / (n_t - 1)
    eps = tube.envelope(s)
    y1 = np.repeat(s[:, None], n_t, axis=1)
    y2 = eps[:, None] * t[None, :]
    weights = (ws * eps)[:, None] * wt[None, :]
    return y1, y2, weights


def interpolation_matrix(grid, px, py):
    """Dense-free bilinear interpolation operator as (index array, weight array).

    Returns ``(idx, w)`` of shape (4, n_points) such that the interpolant of
    a field f is sum_k w[k] * f.ravel()[idx[k]].
    """
    px = np.ravel(np.asarray(px, dtype=float))
    py = np.ravel(np.asarray(py, dtype=float))
    tol = 1e-12
    if np.any(px < -tol) or np.any(px > grid.lx + tol) or np.any(py < -tol) or np.any(py > grid.ly + tol):
        raise GeometryError("sample point outside the computational domain")
    fx = np.clip(px / grid.dx, 0.0, grid.nx - 1)
    fy = np.clip(py / grid.dy, 0.0, grid.ny - 1)
    i = np.minimum(np.floor(fx).astype(int), grid.nx - 2)
    j = np.minimum(np.floor(fy).astype(int), grid.ny - 2)
    tx = fx - i
    ty = fy - j
    ny = grid.ny
    idx = np.array([i * ny + j, (i + 1) * ny + j, i * ny + j + 1, (i + 1) * ny + j + 1])
    w = np.array([(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty])
    return idx, w


def _cell_gradient(grid, field, fx, fy, i, j):
    ny = grid.ny
    f = np.asarray(field).ravel()
    f00, f10 = f[i * ny + j], f[(i + 1) * ny + j]
    f01, f11 = f[i * ny + j + 1], f[(i + 1) * ny + j + 1]
    tx, ty = fx - i, fy - j
    gx = ((f10 - f00) * (1 - ty) + (f11 - f01) * ty) / grid.dx
    gy = ((f01 - f00) * (1 - tx) + (f11 - f10) * tx) / grid.dy
    return np.array([gx, gy])


def interpolation_gradient(grid, field, px, py):
    """Gradient (2, n_points) of the bilinear interpolant of ``field`` at the points.

    On an interior grid line the interpolant has a kink; there the two
    one-sided cell gradients are averaged.
    """
    fx = np.clip(np.ravel(np.asarray(px, dtype=float)) / grid.dx, 0.0, grid.nx - 1)
    fy = np.clip(np.ravel(np.asarray(py, dtype=float)) / grid.dy, 0.0, grid.ny - 1)
    on_x = (np.abs(fx - np.round(fx)) < 1e-12) & (np.round(fx) > 0) & (np.round(fx) < grid.nx - 1)
    on_y = (np.abs(fy - np.round(fy)) < 1e-12) & (np.round(fy) > 0) & (np.round(fy) < grid.ny - 1)
    # snap to the line, then average the cells on either side
    fx = np.where(on_x, np.round(fx), fx)
    fy = np.where(on_y, np.round(fy), fy)
    i = np.minimum(np.floor(fx).astype(int), grid.nx - 2)
    j = np.minimum(np.floor(fy).astype(int), grid.ny - 2)
    i_lo = np.where(on_x, i - 1, i)
    j_lo = np.where(on_y, j - 1, j)
    gx = 0.5 * (_cell_gradient(grid, field, fx, fy, i, j)[0] + _cell_gradient(grid, field, fx, fy, i_lo, j)[0])
    gy = 0.5 * (_cell_gradient(grid, field, fx, fy, i, j)[1] + _cell_gradient(grid, field, fx, fy, i, j_lo)[1])
    return np.array([gx, gy])


def apply_interpolation(op, fields):
    """Interpolate fields of shape (..., nx, ny) at the operator's points -> (..., n_points)."""
    idx, w = op
    flat = np.asarray(fields).reshape(np.shape(fields)[:-2] + (-1,))
    return np.sum(flat[..., idx] * w, axis=-2)


def physical_points(m, frame, y1, y2):
    return frame.to_global(m.evaluate(y1, y2))


def immersed_quadrature(values, tube, m, frame, grid=None, n_t=8):
    """Approximate the integral over the reference tube of phi(y) dy.

    ``values`` is either a callable phi(y1, y2) in local coordinates or a grid
    field f, in which case phi = f o X is evaluated by bilinear interpolation
    at the physical sample points.
    """
    y1, y2, w = tube_lattice(tube, n_t)
    if callable(values):
        phi = np.asarray(values(y1, y2), dtype=float)
    else:
        if grid is None:
            raise ParameterError("a grid is needed to integrate a grid field")
        x = physical_points(m, frame, y1, y2)
        phi = apply_interpolation(interpolation_matrix(grid, x[0], x[1]), values).reshape(y1.shape)
    return float(np.sum(w * phi))


def _candidates(grid, m, frame, tube):
    """Reference grid nodes near the tube and their images.

    Nodes inside the closed reference tube are mapped by X; the other nodes
    of the tube's bounding box are fixed, since the deformation is the
    identity outside the tube.  The box is grown by one grid diagonal plus
    the largest displacement of a tube node.
    Returns (flat indices, local y1, local y2, images (2, k)).
    """
    xx, yy = grid.mesh()
    y1, y2 = frame.to_local(np.array([xx, yy]))
    y1, y2 = y1.ravel(), y2.ravel()
    eps = tube.envelope(np.clip(y1, 0.0, tube.ell))
    tol = 1e-12
    inside = (y1 >= -tol) & (y1 <= tube.ell + tol) & (np.abs(y2) <= eps + tol)
    images = np.array([xx.ravel(), yy.ravel()])
    if inside.any():
        images[:, inside] = physical_points(m, frame, y1[inside], y2[inside])
    disp = float(np.max(np.hypot(*(images[:, inside] - np.array([xx.ravel(), yy.ravel()])[:, inside])),
                        initial=0.0))
    margin = np.hypot(grid.dx, grid.dy) + disp
    half = tube.width * tube.ell / 2.0
    box = (y1 >= -margin) & (y1 <= tube.ell + margin) & (np.abs(y2) <= half + margin)
    flat = np.flatnonzero(box)
    return flat, y1[flat], y2[flat], images[:, flat]


def locate_inverse_on_grid(m, frame, tube, grid, x):
    """Reference grid point y (global coordinates) minimising |x - X(y)|, or None.

    None is returned when the best distance exceeds one grid diagonal.
    """
    flat, _, _, images = _candidates(grid, m, frame, tube)
    if flat.size == 0:
        return None
    x = np.asarray(x, dtype=float)
    d2 = (images[0] - x[0]) ** 2 + (images[1] - x[1]) ** 2
    k = int(np.argmin(d2))
    if np.sqrt(d2[k]) > np.hypot(grid.dx, grid.dy):
        return None
    xx, yy = grid.mesh()
    return np.array([xx.ravel()[flat[k]], yy.ravel()[flat[k]]])


def inverse_map_on_grid(m, frame, tube, grid):
    """Vectorised nearest-grid inverse for the grid nodes of the tube's box.

    Returns (found mask, local y1, local y2) arrays over the grid; nodes
    outside the box are not found.
    """
    flat, c1, c2, images = _candidates(grid, m, frame, tube)
    found = np.zeros(grid.shape, dtype=bool)
    ry1 = np.zeros(grid.shape)
    ry2 = np.zeros(grid.shape)
    if flat.size == 0:
        return found, ry1, ry2
    xx, yy = grid.mesh()
    px, py = xx.ravel()[flat], yy.ravel()[flat]
    k = np.empty(flat.size, dtype=int)
    best = np.empty(flat.size)
    for start in range(0, flat.size, 2048):
        sl = slice(start, start + 2048)
        d2 = (px[sl, None] - images[0][None, :]) ** 2 + (py[sl, None] - images[1][None, :]) ** 2
        k[sl] = np.argmin(d2, axis=1)
        best[sl] = d2[np.arange(k[sl].size), k[sl]]
    ok = np.sqrt(best) <= np.hypot(grid.dx, grid.dy)
    sel = flat[ok]
    found.ravel()[sel] = True
    ry1.ravel()[sel] = c1[k[ok]]
    ry2.ravel()[sel] = c2[k[ok]]
    return found, ry1, ry2


def curve_points(m, frame):
    """Physical points of the deformed curve at the arc-length nodes."""
    return physical_points(m, frame, m.s, np.zeros_like(m.s))


def write_curve_csv(path, m, frame):
    pts = curve_points(m, frame)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "x1", "x2"])
        for s, a, b in zip(m.s, pts[0], pts[1]):
            w.writerow([repr(float(s)), repr(float(a)), repr(float(b))])

