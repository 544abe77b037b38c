"""Cost functional, Hamiltonian density and the two gradient components."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .geometry1d import div_w_1d
from .geometry2d import (N_MODES, apply_interpolation, cofactor, curve_points, interpolation_gradient,
                         interpolation_matrix, physical_points, tube_lattice)
from .grid import linear_interpolate, time_weights
from .swe import flux_2d


@dataclass(frozen=True)
class CostConfig:
    alpha: float = 0.5

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")


@dataclass
class GradientBundle:
    grad_xi: np.ndarray
    grad_eta: np.ndarray
    cost_value: float
    cost_parts: dict = field(default_factory=dict)


def control_cost(control, region, dt, alpha) -> float:
    return -0.5 * alpha * region.inner(control, control, dt)


def cost_value_1d(trajectory, control, region, eta, grid, alpha):
    """J = -(alpha/2) int ||xi||^2 dt + H(eta, T)."""
    if not 0.0 < eta < grid.length:
        raise ParameterError(f"eta must lie strictly inside (0, {grid.length}), got {eta}")
    terminal = linear_interpolate(trajectory.states[-1, 0], grid, eta)
    ctrl = control_cost(control, region, trajectory.dt, alpha) if control is not None else 0.0
    return ctrl + terminal, {"control": ctrl, "terminal": terminal}


def flux_divergence_1d(u, dx, g=9.81):
    """d/dx F(u) by centred differences, second-order one-sided at the ends."""
    h, m = u[0], u[1]
    f = np.array([m, m * m / h + 0.5 * g * h * h])
    return np.gradient(f, dx, axis=-1, edge_order=2)


def hamiltonian_density_1d(u, xi_full, q, alpha, dx, g=9.81):
    """H(u, xi, q) = -(alpha/2)|xi|^2 - q . div F(u) + q . B xi at one time level.

    ``xi_full`` is the forcing on the whole grid (zero outside omega).
    """
    div_f = flux_divergence_1d(u, dx, g)
    return -0.5 * alpha * xi_full**2 - np.sum(q * div_f, axis=0) + q[1] * xi_full


def grad_xi(control, adjoint_states, region, alpha):
    """-alpha xi + B* q on omega at every time level; shape of ``control``."""
    q_mom = region.gather(adjoint_states[:, 1:])
    return -alpha * control + q_mom


def grad_eta_1d(trajectory, control, adjoint, region, eta_map, grid, alpha, g=9.81):
    """-int_0^T int_Omega div(w) H(u, xi, q) dx dt by space-time trapezoid."""
    states = trajectory.states
    q = adjoint.states
    nt, dt = trajectory.nt, trajectory.dt
    divw = div_w_1d(eta_map, grid.x)
    wx = grid.weights() * divw
    wt = time_weights(nt, dt)
    total = 0.0
    full = np.zeros(grid.n_nodes)
    idx = region.index[0]
    for n in range(nt + 1):
        if wt[n] == 0.0:
            continue
        full[idx] = control[n, 0] if control is not None else 0.0
        dens = hamiltonian_density_1d(states[n], full, q[n], alpha, grid.dx, g)
        total += wt[n] * float(np.dot(wx, dens))
    return -total


def cost_value_2d(trajectory, control, region, m, frame, grid, alpha):
    """J = -(alpha/2) int ||xi||^2 dt + int over the deformed curve of H(x, T)^2."""
    pts = curve_points(m, frame)
    op = interpolation_matrix(grid, pts[0], pts[1])
    h_curve = apply_interpolation(op, trajectory.states[-1, 0])
    ws = np.full(m.s.size, m.tube.ds)
    ws[0] = ws[-1] = 0.5 * m.tube.ds
    terminal = float(np.sum(ws * h_curve**2))
    ctrl = control_cost(control, region, trajectory.dt, alpha) if control is not None else 0.0
    return ctrl + terminal, {"control": ctrl, "terminal": terminal}


def flux_divergence_2d(u, dx, dy, g=9.81):
    fx, fy = flux_2d(u, g)
    return np.gradient(fx, dx, axis=1, edge_order=2) + np.gradient(fy, dy, axis=2, edge_order=2)


def hamiltonian_density_2d(u, xi_full, q, alpha, dx, dy, g=9.81):
    """Same density as in 1D with a two-component forcing ``xi_full`` (2, nx, ny)."""
    div_f = flux_divergence_2d(u, dx, dy, g)
    return (-0.5 * alpha * np.sum(xi_full**2, axis=0) - np.sum(q * div_f, axis=0)
            + np.sum(q[1:] * xi_full, axis=0))


def _flux_matrix_2d(u, g):
    """F(u) as (3, 2, ...): column 0 is the x-flux, column 1 the y-flux."""
    fx, fy = flux_2d(u, g)
    return np.stack([fx, fy], axis=1)


def grad_eta_2d(trajectory, control, adjoint, region, m, frame, grid, alpha, g=9.81, n_t=8, fd_step=None):
    """Gradient with respect to the four curvature amplitudes.

    Two integrals over the reference tube, each in space and time:

    * -d(det grad X)/da_r times the Hamiltonian density pulled back by X;
    * (q o X) . div_y(F(u o X) M_r) with M_r = d cof(grad X) / da_r, the
      divergence taken by centred differences of step ``fd_step`` in
      reference coordinates.
    """
    tube = m.tube
    states, q = trajectory.states, adjoint.states
    nt, dt = trajectory.nt, trajectory.dt
    h = grid.dx if fd_step is None else fd_step
    R = frame.rotation
    y1, y2, w = tube_lattice(tube, n_t)
    y1, y2, w = y1.ravel(), y2.ravel(), w.ravel()
    centre = physical_points(m, frame, y1, y2)
    op_c = interpolation_matrix(grid, centre[0], centre[1])
    ddet = np.array([m.eta_derivatives(y1, y2, r)[1] for r in range(1, N_MODES + 1)])
    # offsets along the two local axes: +e1, -e1, +e2, -e2
    shifts = [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)]
    ops, mats = [], []
    for d1, d2 in shifts:
        p = physical_points(m, frame, y1 + d1, y2 + d2)
        ops.append(interpolation_matrix(grid, p[0], p[1]))
        mr = []
        for r in range(1, N_MODES + 1):
            dgrad = m.eta_derivatives(y1 + d1, y2 + d2, r)[2]
            dgrad = np.einsum("ij,jk...,lk->il...", R, dgrad, R)
            mr.append(cofactor(dgrad))
        mats.append(np.array(mr))  # (4, 2, 2, npts)
    wt = time_weights(nt, dt)
    full = np.zeros((2, *grid.shape))
    ii, jj = region.index
    term1 = np.zeros(N_MODES)
    term2 = np.zeros(N_MODES)
    for n in range(nt + 1):
        if control is not None:
            full[:, ii, jj] = control[n]
        dens = hamiltonian_density_2d(states[n], full, q[n], alpha, grid.dx, grid.dy, g)
        term1 -= wt[n] * (ddet @ (w * apply_interpolation(op_c, dens)))
        qc = apply_interpolation(op_c, q[n])  # (3, npts)
        fl = [_flux_matrix_2d(apply_interpolation(op, states[n]), g) for op in ops]  # (3, 2, npts)
        # G_r = F M_r, shape (4, 3, 2, npts)
        gmat = [np.einsum("ijp,rjkp->rikp", f, mk) for f, mk in zip(fl, mats)]
        d_local = [(gmat[0] - gmat[1]) / (2 * h), (gmat[2] - gmat[3]) / (2 * h)]
        # divergence in reference coordinates, local derivatives rotated back
        div = sum(R[j, k] * d_local[k][:, :, j, :] for j in range(2) for k in range(2))
        term2 += wt[n] * np.einsum("rip,ip,p->r", div, qc, w)
    return term1 + term2, {"volume": term1, "flux": term2}


def grad_eta_trace_1d(trajectory, eta, grid):
    """Exact derivative of the interpolated terminal value H(eta, T) in eta.

    Slope of the cell holding eta; at a node the mean of the two slopes.
    """
    h = trajectory.states[-1, 0]
    f = eta / grid.dx
    i = int(np.clip(np.floor(f), 0, grid.n_nodes - 2))
    slope = (h[i + 1] - h[i]) / grid.dx
    if abs(f - round(f)) < 1e-12 and 0 < round(f) < grid.n_nodes - 1:
        j = int(round(f))
        slope = 0.5 * ((h[j + 1] - h[j]) + (h[j] - h[j - 1])) / grid.dx
    return float(slope)


def grad_eta_trace_2d(trajectory, m, frame, grid):
    """Exact amplitude derivatives of the discrete curve integral of H(., T)^2.

    Only the curve nodes move with the amplitudes; the forward solve does not.
    """
    pts = curve_points(m, frame)
    h_final = trajectory.states[-1, 0]
    op = interpolation_matrix(grid, pts[0], pts[1])
    h_curve = apply_interpolation(op, h_final)
    grad_h = interpolation_gradient(grid, h_final, pts[0], pts[1])
    ws = np.full(m.s.size, m.tube.ds)
    ws[0] = ws[-1] = 0.5 * m.tube.ds
    out = np.zeros(N_MODES)
    zeros = np.zeros_like(m.s)
    for r in range(1, N_MODES + 1):
        dx_local = m.eta_derivatives(m.s, zeros, r)[0]
        dx_global = frame.rotation @ dx_local
        out[r - 1] = np.sum(ws * 2.0 * h_curve * np.sum(grad_h * dx_global, axis=0))
    return out
