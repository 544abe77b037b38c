"""Uniform node-centred grids, state storage, interpolation and quadrature."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError

G_EARTH = 9.81


@dataclass(frozen=True)
class Grid1D:
    length: float = 60.0
    n_nodes: int = 301

    def __post_init__(self):
        if self.n_nodes < 3:
            raise ParameterError(f"n_nodes must be >= 3, got {self.n_nodes}")
        if not self.length > 0:
            raise ParameterError(f"length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / (self.n_nodes - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_nodes)

    @property
    def shape(self):
        return (self.n_nodes,)

    def weights(self) -> np.ndarray:
        """Composite trapezoid weights (dx at interior nodes, dx/2 at the ends)."""
        w = np.full(self.n_nodes, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


@dataclass(frozen=True)
class Grid2D:
    lx: float = 40.0
    ly: float = 40.0
    nx: int = 101
    ny: int = 101

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ParameterError(f"nx, ny must be >= 3, got {self.nx}, {self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ParameterError("domain lengths must be positive")

    @property
    def dx(self) -> float:
        return self.lx / (self.nx - 1)

    @property
    def dy(self) -> float:
        return self.ly / (self.ny - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.lx, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, self.ly, self.ny)

    @property
    def shape(self):
        return (self.nx, self.ny)

    def mesh(self):
        """Node coordinates indexed [i, j] -> (x_i, y_j)."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def weights(self) -> np.ndarray:
        wx = np.full(self.nx, self.dx)
        wx[0] = wx[-1] = 0.5 * self.dx
        wy = np.full(self.ny, self.dy)
        wy[0] = wy[-1] = 0.5 * self.dy
        return np.outer(wx, wy)

    def contains(self, p, tol=1e-12) -> bool:
        px, py = p
        return (-tol <= px <= self.lx + tol) and (-tol <= py <= self.ly + tol)


@dataclass(frozen=True)
class PhysicsParams:
    g: float = G_EARTH
    h0: float = 1.5
    kappa: float = 0.0

    def __post_init__(self):
        if not self.g > 0:
            raise ParameterError(f"g must be positive, got {self.g}")
        if not self.h0 > 0:
            raise ParameterError(f"h0 must be positive, got {self.h0}")
        if self.kappa < 0:
            raise ParameterError(f"kappa must be non-negative, got {self.kappa}")


@dataclass
class Trajectory:
    """Space-time storage of u = (H, momentum...).

    ``states`` has shape (nt + 1, ncomp, *grid.shape); component 0 is the
    height, the remaining ones are the momentum components.
    """

    dt: float
    states: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def nt(self) -> int:
        return self.states.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def height(self, n=-1) -> np.ndarray:
        return self.states[n, 0]

    def velocity(self, n=-1) -> np.ndarray:
        return self.states[n, 1:] / self.states[n, 0]


def trapezoid_integral(values, grid) -> float:
    """Composite trapezoid rule over the full 1D or 2D grid."""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise DomainError(f"field shape {values.shape} does not match grid {grid.shape}")
    return float(np.sum(grid.weights() * values))


def time_trapezoid(values, dt) -> float:
    """Trapezoid rule along axis 0 for a sequence of per-level scalars."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 2:
        return 0.0
    return float(dt * (values.sum() - 0.5 * (values[0] + values[-1])))


def time_weights(nt, dt) -> np.ndarray:
    w = np.full(nt + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def linear_interpolate(values, grid, x) -> float:
    if not -1e-12 <= x <= grid.length + 1e-12:
        raise DomainError(f"point {x} outside [0, {grid.length}]")
    return float(np.interp(x, grid.x, values))


def _cell(coord, h, n):
    s = coord / h
    i = min(max(int(np.floor(s)), 0), n - 2)
    return i, s - i


def bilinear_interpolate(values, grid, p) -> float:
    """Bilinear combination of the four nodes surrounding ``p``."""
    if not grid.contains(p):
        raise DomainError(f"point {tuple(p)} outside [0, {grid.lx}] x [0, {grid.ly}]")
    i, tx = _cell(p[0], grid.dx, grid.nx)
    j, ty = _cell(p[1], grid.dy, grid.ny)
    return float(
        (1 - tx) * (1 - ty) * values[i, j]
        + tx * (1 - ty) * values[i + 1, j]
        + (1 - tx) * ty * values[i, j + 1]
        + tx * ty * values[i + 1, j + 1]
    )


def bilinear_interpolate_many(values, grid, px, py) -> np.ndarray:
    """Vectorised bilinear interpolation; ``values`` may carry leading axes.

    The trailing two axes of ``values`` are the grid axes.
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    tol = 1e-9
    if (px.min(initial=0) < -tol or py.min(initial=0) < -tol
            or px.max(initial=0) > grid.lx + tol or py.max(initial=0) > grid.ly + tol):
        raise DomainError("interpolation point outside the grid")
    sx = np.clip(px / grid.dx, 0.0, grid.nx - 1)
    sy = np.clip(py / grid.dy, 0.0, grid.ny - 1)
    i = np.minimum(np.floor(sx).astype(int), grid.nx - 2)
    j = np.minimum(np.floor(sy).astype(int), grid.ny - 2)
    tx = sx - i
    ty = sy - j
    return (
        (1 - tx) * (1 - ty) * values[..., i, j]
        + tx * (1 - ty) * values[..., i + 1, j]
        + (1 - tx) * ty * values[..., i, j + 1]
        + tx * ty * values[..., i + 1, j + 1]
    )


def write_snapshot_csv(path, grid, state):
    """One row per node: x[,y],H,v1[,v2] with a header line."""
    state = np.asarray(state, dtype=float)
    h = state[0]
    vel = state[1:] / h
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(grid, Grid1D):
            writer.writerow(["x", "H", "v1"])
            for xi, hi, vi in zip(grid.x, h, vel[0]):
                writer.writerow([repr(float(xi)), repr(float(hi)), repr(float(vi))])
        else:
            writer.writerow(["x", "y", "H", "v1", "v2"])
            xx, yy = grid.mesh()
            for row in zip(xx.ravel(), yy.ravel(), h.ravel(), vel[0].ravel(), vel[1].ravel()):
                writer.writerow([repr(float(v)) for v in row])


def write_field_csv(path, grid, components, names):
    """Generic per-node export (used for adjoint and gradient fields)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(grid, Grid1D):
            writer.writerow(["x", *names])
            cols = [grid.x, *[np.asarray(c) for c in components]]
        else:
            writer.writerow(["x", "y", *names])
            xx, yy = grid.mesh()
            cols = [xx.ravel(), yy.ravel(), *[np.asarray(c).ravel() for c in components]]
        for row in zip(*cols):
            writer.writerow([repr(float(v)) for v in row])
