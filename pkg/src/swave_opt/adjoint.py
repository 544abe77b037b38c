"""Terminal conditions (regularised Dirac sources) and backward adjoint sweeps.

Two discretisations of -q' - F'(u)^T . grad q = 0 are offered: a direct
one (explicit Euler backward in time, centred differences in space) and the
exact transpose of the linearised forward scheme.
"""

import numpy as np

from .errors import InstabilityError
from .geometry2d import inverse_map_on_grid
from .grid import Trajectory, time_weights
from .swe import flux_2d, flux_jacobian_2d

SQRT_2PI = np.sqrt(2.0 * np.pi)


def gaussian_profile(r, sigma):
    return np.exp(-0.5 * (r / sigma) ** 2) / (sigma * SQRT_2PI)


def gaussian_dirac_1d(x0, grid, normalize=True):
    """Node values of a Gaussian of width sigma = dx / 4 centred at x0.

    With ``normalize`` the nodal values are rescaled to unit trapezoid mass;
    at sigma = dx / 4 the raw samples carry a mass of about 4 / sqrt(2 pi).
    """
    sigma = grid.dx / 4.0
    values = gaussian_profile(grid.x - x0, sigma)
    if normalize:
        values = values / np.sum(grid.weights() * values)
    return values


def terminal_condition_1d(u_final, eta_map, grid, normalize=True):
    """q(., T) = delta_eta / X'(L/2) * grad phi with phi(u) = u_1."""
    q = np.zeros_like(np.asarray(u_final, dtype=float))
    q[0] = gaussian_dirac_1d(eta_map.eta, grid, normalize) / eta_map.slope_at_centre()
    q[:, 0] = 0.0
    q[:, -1] = 0.0
    return q


def _centred_1d(f, dx):
    d = np.zeros_like(f)
    d[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * dx)
    return d


def solve_adjoint_1d(trajectory, terminal, dx, g=9.81, boundary="mirror", scheme="discrete"):
    """Backward adjoint sweep over a stored 1D trajectory.

    ``scheme="centred"`` marches q^n = q^{n+1} + dt F'(u^n)^T Dx q^{n+1}
    with centred differences.  ``boundary="dirichlet"`` then pins every
    component to zero at the walls, while ``"mirror"`` pins only the momentum
    component and reflects the height component evenly, the dual of the
    forward wall treatment.

    ``scheme="discrete"`` applies the exact transpose of the linearised
    forward step.  Level n of the result is the representer of the forcing
    applied at level n in the trapezoid space-time product, so
    -alpha xi + q_momentum is the exact gradient of the discrete cost.
    """
    if scheme == "discrete":
        return _discrete_adjoint_1d(trajectory, terminal, dx, g)
    if scheme != "centred":
        raise ValueError(f"unknown adjoint scheme {scheme!r}")
    states = trajectory.states
    nt, dt = trajectory.nt, trajectory.dt
    q = np.empty_like(states)
    cur = np.array(terminal, dtype=float)
    if boundary == "mirror":
        cur[1, 0] = cur[1, -1] = 0.0
    else:
        cur[:, 0] = cur[:, -1] = 0.0
    q[nt] = cur
    for n in range(nt - 1, -1, -1):
        h, m = states[n]
        v = m / h
        d1 = _centred_1d(cur[0], dx)
        d2 = _centred_1d(cur[1], dx)
        new = np.empty_like(cur)
        new[0] = cur[0] + dt * (g * h - v * v) * d2
        new[1] = cur[1] + dt * (d1 + 2.0 * v * d2)
        if boundary == "mirror":
            new[0, 0] = cur[0, 0] + dt * (g * h[0]) * cur[1, 1] / dx
            new[0, -1] = cur[0, -1] - dt * (g * h[-1]) * cur[1, -2] / dx
            new[1, 0] = new[1, -1] = 0.0
        else:
            new[:, 0] = new[:, -1] = 0.0
        _check_finite(new, n)
        q[n] = new
        cur = new
    return Trajectory(dt=dt, states=q)


def _check_finite(values, n):
    if not np.all(np.isfinite(values)):
        raise InstabilityError(f"adjoint sweep produced non-finite values at step {n}", step=n)


def _discrete_adjoint_1d(trajectory, terminal, dx, g):
    states = trajectory.states
    nt, dt = trajectory.nt, trajectory.dt
    w = np.full(states.shape[-1], dx)
    w[0] = w[-1] = 0.5 * dx
    scale = dt / time_weights(nt, dt)
    q = np.empty_like(states)
    q[nt] = terminal
    lam = np.array(terminal, dtype=float) * w
    for n in range(nt - 1, -1, -1):
        q[n] = scale[n] * lam / w
        lam = _step_1d_transpose(states[n], lam, dt, dx, g)
        _check_finite(lam, n)
    return Trajectory(dt=dt, states=q)


def _step_1d_transpose(u, lam_new, dt, dx, g):
    """Transpose of the linearised Richtmyer step about u, applied to lam_new."""
    h, q = u
    b0 = lam_new[0]
    b1 = lam_new[1].copy()
    b1[0] = b1[-1] = 0.0
    r = dt / dx
    lam = 0.5 * r
    f2 = q * q / h + 0.5 * g * h * h
    hm = 0.5 * (h[1:] + h[:-1]) - lam * (q[1:] - q[:-1])
    qm = 0.5 * (q[1:] + q[:-1]) - lam * (f2[1:] - f2[:-1])
    # cotangents of the midpoint fluxes
    # wall nodes see twice the first interior mass flux (mirror ghost)
    c = b0.copy()
    c[0] *= 2.0
    c[-1] *= 2.0
    bg1 = r * (c[1:] - c[:-1])
    bg2 = r * (b1[1:] - b1[:-1])
    bqm = bg1 + bg2 * 2.0 * qm / hm
    bhm = bg2 * (g * hm - qm * qm / (hm * hm))
    bh = b0.copy()
    bq = b1.copy()
    bh[1:] += 0.5 * bhm
    bh[:-1] += 0.5 * bhm
    bq[1:] += 0.5 * bqm
    bq[:-1] += 0.5 * bqm
    bf1 = np.zeros_like(h)
    bf1[1:] -= lam * bhm
    bf1[:-1] += lam * bhm
    bf2 = np.zeros_like(h)
    bf2[1:] -= lam * bqm
    bf2[:-1] += lam * bqm
    bq += bf1 + bf2 * 2.0 * q / h
    bh += bf2 * (g * h - q * q / (h * h))
    bq[0] = bq[-1] = 0.0
    return np.array([bh, bq])


def terminal_condition_2d(u_final, m, frame, tube, grid, normalize=True):
    """Line source along the deformed curve times grad(H^2) = (2H, 0, 0).

    Each grid node x is pulled back to the nearest reference grid point y
    (first-order inverse); the reference source is a transverse Gaussian of
    width dx / 4 across the straight segment, nonzero for 0 < y1 < ell.
    """
    found, y1, y2 = inverse_map_on_grid(m, frame, tube, grid)
    sigma = grid.dy / 4.0
    profile = gaussian_profile(y2, sigma)
    if normalize:
        # unit transverse trapezoid mass of the sampled reference profile
        offsets = np.arange(-4, 5) * grid.dy
        profile = profile / np.sum(grid.dy * gaussian_profile(offsets, sigma))
    active = found & (y1 > 0.0) & (y1 < tube.ell)
    q = np.zeros_like(np.asarray(u_final, dtype=float))
    q[0] = np.where(active, profile, 0.0) * 2.0 * u_final[0]
    _zero_walls_2d(q, all_components=True)
    return q


def _zero_walls_2d(q, all_components=False):
    comps = slice(None) if all_components else slice(1, None)
    q[comps, 0, :] = 0.0
    q[comps, -1, :] = 0.0
    q[comps, :, 0] = 0.0
    q[comps, :, -1] = 0.0


def _centred_2d(f, dx, dy):
    fx = np.zeros_like(f)
    fy = np.zeros_like(f)
    fx[..., 1:-1, :] = (f[..., 2:, :] - f[..., :-2, :]) / (2.0 * dx)
    fy[..., :, 1:-1] = (f[..., :, 2:] - f[..., :, :-2]) / (2.0 * dy)
    return fx, fy


def solve_adjoint_2d(trajectory, terminal, dx, dy, g=9.81, scheme="discrete"):
    """2D counterpart of :func:`solve_adjoint_1d`.

    The centred variant pins every component to zero on the walls.
    """
    if scheme == "discrete":
        return _discrete_adjoint_2d(trajectory, terminal, dx, dy, g)
    if scheme != "centred":
        raise ValueError(f"unknown adjoint scheme {scheme!r}")
    states = trajectory.states
    nt, dt = trajectory.nt, trajectory.dt
    q = np.empty_like(states)
    cur = np.array(terminal, dtype=float)
    _zero_walls_2d(cur, all_components=True)
    q[nt] = cur
    for n in range(nt - 1, -1, -1):
        ax, ay = flux_jacobian_2d(states[n], g)
        qx, qy = _centred_2d(cur, dx, dy)
        new = cur + dt * (np.einsum("ik...,i...->k...", ax, qx) + np.einsum("ik...,i...->k...", ay, qy))
        _zero_walls_2d(new, all_components=True)
        _check_finite(new, n)
        q[n] = new
        cur = new
    return Trajectory(dt=dt, states=q)


def _flux_transpose(jac, bar):
    """J^T bar for Jacobians of shape (3, 3, ...)."""
    return np.einsum("ik...,i...->k...", jac, bar)


def _step_2d_transpose(u, lam_new, dt, dx, dy, g):
    """Transpose of the linearised 2D Richtmyer step about u."""
    fx, fy = flux_2d(u, g)
    lx = 0.5 * dt / dx
    ly = 0.5 * dt / dy
    rx = dt / dx
    ry = dt / dy
    ux = 0.5 * (u[:, 1:, :] + u[:, :-1, :]) - lx * (fx[:, 1:, :] - fx[:, :-1, :])
    uy = 0.5 * (u[:, :, 1:] + u[:, :, :-1]) - ly * (fy[:, :, 1:] - fy[:, :, :-1])
    b0 = lam_new[0]
    bm = lam_new[1:].copy()
    _zero_walls_2d(bm, all_components=True)
    bgx = np.empty_like(ux)
    bgy = np.empty_like(uy)
    bgx[1:] = rx * (bm[:, 1:, :] - bm[:, :-1, :])
    bgy[1:] = ry * (bm[:, :, 1:] - bm[:, :, :-1])
    # wall nodes see twice the first interior mass flux (mirror ghost)
    cx = b0.copy()
    cx[0] *= 2.0
    cx[-1] *= 2.0
    bgx[0] = rx * (cx[1:] - cx[:-1])
    cy = b0.copy()
    cy[:, 0] *= 2.0
    cy[:, -1] *= 2.0
    bgy[0] = ry * (cy[:, 1:] - cy[:, :-1])
    jx, _ = flux_jacobian_2d(ux, g)
    _, jy = flux_jacobian_2d(uy, g)
    bux = _flux_transpose(jx, bgx)
    buy = _flux_transpose(jy, bgy)
    bu = np.empty_like(u)
    bu[0] = b0
    bu[1:] = bm
    bu[:, 1:, :] += 0.5 * bux
    bu[:, :-1, :] += 0.5 * bux
    bu[:, :, 1:] += 0.5 * buy
    bu[:, :, :-1] += 0.5 * buy
    bfx = np.zeros_like(u)
    bfx[:, 1:, :] -= lx * bux
    bfx[:, :-1, :] += lx * bux
    bfy = np.zeros_like(u)
    bfy[:, :, 1:] -= ly * buy
    bfy[:, :, :-1] += ly * buy
    ax, ay = flux_jacobian_2d(u, g)
    bu += _flux_transpose(ax, bfx) + _flux_transpose(ay, bfy)
    _zero_walls_2d(bu)
    return bu


def _discrete_adjoint_2d(trajectory, terminal, dx, dy, g):
    states = trajectory.states
    nt, dt = trajectory.nt, trajectory.dt
    nx, ny = states.shape[-2:]
    wx = np.full(nx, dx)
    wx[0] = wx[-1] = 0.5 * dx
    wy = np.full(ny, dy)
    wy[0] = wy[-1] = 0.5 * dy
    w = np.outer(wx, wy)
    scale = dt / time_weights(nt, dt)
    q = np.empty_like(states)
    q[nt] = terminal
    lam = np.array(terminal, dtype=float) * w
    for n in range(nt - 1, -1, -1):
        q[n] = scale[n] * lam / w
        lam = _step_2d_transpose(states[n], lam, dt, dx, dy, g)
        _check_finite(lam, n)
    return Trajectory(dt=dt, states=q)
