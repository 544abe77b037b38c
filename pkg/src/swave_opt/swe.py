"""Inviscid shallow-water solvers (1D and 2D) with distributed forcing.

Two-step (Richtmyer) Lax-Wendroff on node-centred grids.  Walls carry a
mirror ghost node: the height is reflected evenly (zero gradient) and the
momentum oddly, so wall nodes keep zero momentum and the trapezoid mass is
conserved to round-off.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, PositivityError
from .grid import Grid1D, Trajectory, time_weights

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    nt: int = 2000
    t_final: float = 10.0
    cfl_warn_threshold: float = 1.0

    def __post_init__(self):
        if self.nt < 1:
            raise ParameterError(f"nt must be >= 1, got {self.nt}")
        if not self.t_final > 0:
            raise ParameterError(f"t_final must be positive, got {self.t_final}")

    @property
    def dt(self) -> float:
        return self.t_final / self.nt


class ControlRegion:
    """The support of the forcing, stored as a node mask (the operator 1_omega)."""

    def __init__(self, grid, bounds):
        self.grid = grid
        self.bounds = tuple(float(b) for b in bounds)
        tol = 1e-9
        if isinstance(grid, Grid1D):
            xa, xb = self.bounds
            if xa > xb:
                raise ParameterError("control interval is empty")
            x = grid.x
            self.mask = (x >= xa - tol) & (x <= xb + tol)
            self.dim = 1
        else:
            xa, xb, ya, yb = self.bounds
            if xa > xb or ya > yb:
                raise ParameterError("control rectangle is empty")
            xx, yy = grid.mesh()
            self.mask = (xx >= xa - tol) & (xx <= xb + tol) & (yy >= ya - tol) & (yy <= yb + tol)
            self.dim = 2
        if not self.mask.any():
            raise ParameterError(f"control region {self.bounds} contains no grid node")
        self.index = np.nonzero(self.mask)
        self.n_nodes = int(self.mask.sum())

    def zeros(self, nt):
        """A zero control field of shape (nt + 1, dim, n_masked_nodes)."""
        return np.zeros((nt + 1, self.dim, self.n_nodes))

    def scatter(self, values):
        """Masked values (dim, k) -> full-grid field (dim, *grid.shape)."""
        out = np.zeros((self.dim, *self.grid.shape))
        out[(slice(None), *self.index)] = values
        return out

    def gather(self, field):
        """Full-grid field (..., *grid.shape) -> masked values (..., k)."""
        return field[(Ellipsis, *self.index)]

    def weights(self) -> np.ndarray:
        """Spatial trapezoid weights of the full grid restricted to the masked nodes."""
        return self.grid.weights()[self.index]

    def inner(self, a, b, dt) -> float:
        """Space-time L2 inner product of two control fields."""
        wt = time_weights(a.shape[0] - 1, dt)
        ws = self.weights()
        return float(np.einsum("n,k,ndk,ndk->", wt, ws, a, b))


def flux_1d(h, q, g=9.81):
    h = np.asarray(h, dtype=float)
    _check_positive(h)
    return q, q * q / h + 0.5 * g * h * h


def flux_jacobian_1d(h, q, g=9.81):
    """F'(u) for u = (H, Hv); shape (2, 2) or (2, 2, n) for arrays."""
    h = np.asarray(h, dtype=float)
    _check_positive(h)
    v = q / h
    zero = np.zeros_like(v)
    one = np.ones_like(v)
    return np.array([[zero, one], [-v * v + g * h, 2 * v]])


def flux_2d(u, g=9.81):
    """Both directional fluxes of u = (H, Hv1, Hv2); returns (Fx, Fy)."""
    h, p, r = u[0], u[1], u[2]
    _check_positive(h)
    pr = p * r / h
    hydro = 0.5 * g * h * h
    fx = np.array([p, p * p / h + hydro, pr])
    fy = np.array([r, pr, r * r / h + hydro])
    return fx, fy


def flux_jacobian_2d(u, g=9.81):
    """The 3x3x2 tensor dF_{ij}/du_k, returned as (Ax, Ay) with Ax[i, k] = dFx_i/du_k."""
    h = np.asarray(u[0], dtype=float)
    _check_positive(h)
    v1 = u[1] / h
    v2 = u[2] / h
    zero = np.zeros_like(h)
    one = np.ones_like(h)
    c2 = g * h
    ax = np.array([
        [zero, one, zero],
        [-v1 * v1 + c2, 2 * v1, zero],
        [-v1 * v2, v2, v1],
    ])
    ay = np.array([
        [zero, zero, one],
        [-v1 * v2, v2, v1],
        [-v2 * v2 + c2, zero, 2 * v2],
    ])
    return ax, ay


def _check_positive(h, step=None):
    if np.any(~(h > 0)):
        bad = np.argwhere(~(h > 0))[0]
        node = tuple(int(b) for b in bad) if np.ndim(h) else ()
        where = f" at step {step}" if step is not None else ""
        raise PositivityError(f"height lost positivity{where} at node {node}", step=step, node=node)


def cfl_number(state, dt, dx, dy=None, g=9.81) -> float:
    state = np.asarray(state, dtype=float)
    h = state[0]
    _check_positive(h)
    c = np.sqrt(g * h)
    if state.shape[0] == 2:
        return float(np.max((np.abs(state[1] / h) + c) * dt / dx))
    dy = dx if dy is None else dy
    cx = np.max((np.abs(state[1] / h) + c) * dt / dx)
    cy = np.max((np.abs(state[2] / h) + c) * dt / dy)
    return float(max(cx, cy))


def froude_diagnostic(trajectory, g=9.81) -> float:
    """Max over space-time of |v| / sqrt(gH)."""
    s = trajectory.states
    h = s[:, 0]
    _check_positive(h)
    speed = np.sqrt(np.sum(s[:, 1:] ** 2, axis=1)) / h
    return float(np.max(speed / np.sqrt(g * h)))


def _prepare_initial(grid, physics, h_init, v_init, ncomp):
    shape = grid.shape
    h = np.full(shape, physics.h0) if h_init is None else np.broadcast_to(np.asarray(h_init, float), shape).copy()
    _check_positive(h, step=0)
    u = np.zeros((ncomp, *shape))
    u[0] = h
    if v_init is not None:
        v = np.asarray(v_init, dtype=float)
        if ncomp == 2:
            u[1] = h * np.broadcast_to(v, shape)
        else:
            u[1:] = h * np.broadcast_to(v, (2, *shape))
    return u


def _step_1d(u, dt, dx, g):
    h, q = u
    f1, f2 = q, q * q / h + 0.5 * g * h * h
    lam = 0.5 * dt / dx
    hm = 0.5 * (h[1:] + h[:-1]) - lam * (f1[1:] - f1[:-1])
    qm = 0.5 * (q[1:] + q[:-1]) - lam * (f2[1:] - f2[:-1])
    g1 = qm
    g2 = qm * qm / hm + 0.5 * g * hm * hm
    r = dt / dx
    new = np.empty_like(u)
    new[0, 1:-1] = h[1:-1] - r * (g1[1:] - g1[:-1])
    new[1, 1:-1] = q[1:-1] - r * (g2[1:] - g2[:-1])
    # mirror ghost: the wall mass flux is minus the first interior one
    new[0, 0] = h[0] - 2.0 * r * g1[0]
    new[0, -1] = h[-1] + 2.0 * r * g1[-1]
    new[1, 0] = 0.0
    new[1, -1] = 0.0
    return new, hm


def solve_forward_1d(grid, physics, config, region=None, control=None, h_init=None, v_init=None):
    """March the 1D system from t = 0 to T; returns a Trajectory of (H, Hv).

    ``control`` is a (nt + 1, 1, k) array over the masked nodes of ``region``.
    The forcing is added to the momentum at the full step using level n.
    """
    nt, dt, dx, g = config.nt, config.dt, grid.dx, physics.g
    u = _prepare_initial(grid, physics, h_init, v_init, 2)
    u[1, 0] = u[1, -1] = 0.0
    states = np.empty((nt + 1, 2, grid.n_nodes))
    states[0] = u
    forcing = None
    if control is not None:
        control = np.asarray(control, dtype=float)
        if control.shape != (nt + 1, 1, region.n_nodes):
            raise ParameterError(f"control shape {control.shape} != {(nt + 1, 1, region.n_nodes)}")
        if np.any(control):
            forcing = control[:, 0, :]
            idx = region.index[0]
    cfl_max = cfl_number(u, dt, dx, g=g)
    warnings = []
    for n in range(nt):
        new, hm = _step_1d(u, dt, dx, g)
        if forcing is not None:
            new[1, idx] += dt * forcing[n]
            new[1, 0] = new[1, -1] = 0.0
        if not (hm.min() > 0 and new[0].min() > 0):
            _check_positive(hm, step=n + 1)
            _check_positive(new[0], step=n + 1)
        u = new
        states[n + 1] = u
        c = float(np.max((np.abs(u[1] / u[0]) + np.sqrt(g * u[0])) * dt / dx))
        if c > cfl_max:
            cfl_max = c
        if c > config.cfl_warn_threshold and len(warnings) < 10:
            warnings.append((n + 1, c))
    if warnings:
        logger.warning("CFL above %.3g at %d step(s), first at step %d", config.cfl_warn_threshold,
                       len(warnings), warnings[0][0])
    diag = {"cfl_max": cfl_max, "cfl_warnings": warnings, "mass_drift": _mass_drift(states, grid)}
    return Trajectory(dt=dt, states=states, diagnostics=diag)


def _step_2d(u, dt, dx, dy, g):
    fx, fy = flux_2d(u, g)
    lx = 0.5 * dt / dx
    ly = 0.5 * dt / dy
    ux = 0.5 * (u[:, 1:, :] + u[:, :-1, :]) - lx * (fx[:, 1:, :] - fx[:, :-1, :])
    uy = 0.5 * (u[:, :, 1:] + u[:, :, :-1]) - ly * (fy[:, :, 1:] - fy[:, :, :-1])
    gx, _ = flux_2d(ux, g)
    _, gy = flux_2d(uy, g)
    rx = dt / dx
    ry = dt / dy
    new = np.empty_like(u)
    new[1:, 1:-1, 1:-1] = (
        u[1:, 1:-1, 1:-1]
        - rx * (gx[1:, 1:, 1:-1] - gx[1:, :-1, 1:-1])
        - ry * (gy[1:, 1:-1, 1:] - gy[1:, 1:-1, :-1])
    )
    new[1:, 0, :] = 0.0
    new[1:, -1, :] = 0.0
    new[1:, :, 0] = 0.0
    new[1:, :, -1] = 0.0
    mx = gx[0]
    my = gy[0]
    # mass flux with mirror ghosts at the walls
    mxe = np.concatenate([-mx[:1], mx, -mx[-1:]], axis=0)
    mye = np.concatenate([-my[:, :1], my, -my[:, -1:]], axis=1)
    new[0] = u[0] - rx * (mxe[1:] - mxe[:-1]) - ry * (mye[:, 1:] - mye[:, :-1])
    return new, ux[0], uy[0]


def solve_forward_2d(grid, physics, config, region=None, control=None, h_init=None, v_init=None):
    """March the 2D system; ``control`` has shape (nt + 1, 2, k)."""
    nt, dt, g = config.nt, config.dt, physics.g
    dx, dy = grid.dx, grid.dy
    u = _prepare_initial(grid, physics, h_init, v_init, 3)
    _pin_walls_2d(u)
    states = np.empty((nt + 1, 3, grid.nx, grid.ny))
    states[0] = u
    forcing = None
    if control is not None:
        control = np.asarray(control, dtype=float)
        if control.shape != (nt + 1, 2, region.n_nodes):
            raise ParameterError(f"control shape {control.shape} != {(nt + 1, 2, region.n_nodes)}")
        if np.any(control):
            forcing = control
            ii, jj = region.index
    cfl_max = cfl_number(u, dt, dx, dy, g=g)
    warnings = []
    for n in range(nt):
        new, hx, hy = _step_2d(u, dt, dx, dy, g)
        if forcing is not None:
            new[1, ii, jj] += dt * forcing[n, 0]
            new[2, ii, jj] += dt * forcing[n, 1]
            _pin_walls_2d(new)
        if not (hx.min() > 0 and hy.min() > 0 and new[0].min() > 0):
            _check_positive(hx, step=n + 1)
            _check_positive(hy, step=n + 1)
            _check_positive(new[0], step=n + 1)
        u = new
        states[n + 1] = u
        c = cfl_number(u, dt, dx, dy, g=g)
        if c > cfl_max:
            cfl_max = c
        if c > config.cfl_warn_threshold and len(warnings) < 10:
            warnings.append((n + 1, c))
    if warnings:
        logger.warning("CFL above %.3g at %d step(s)", config.cfl_warn_threshold, len(warnings))
    diag = {"cfl_max": cfl_max, "cfl_warnings": warnings, "mass_drift": _mass_drift(states, grid)}
    return Trajectory(dt=dt, states=states, diagnostics=diag)


def _pin_walls_2d(u):
    u[1:, 0, :] = 0.0
    u[1:, -1, :] = 0.0
    u[1:, :, 0] = 0.0
    u[1:, :, -1] = 0.0


def _mass_drift(states, grid) -> float:
    w = grid.weights()
    m0 = float(np.sum(w * states[0, 0]))
    masses = np.tensordot(states[:, 0], w, axes=w.ndim)
    return float(np.max(np.abs(masses - m0)) / abs(m0))


def mass_history(trajectory, grid) -> np.ndarray:
    w = grid.weights()
    return np.tensordot(trajectory.states[:, 0], w, axes=w.ndim)
