"""Control problems binding solvers, adjoints and gradients for the optimizer."""

from dataclasses import dataclass

import numpy as np

from .adjoint import solve_adjoint_1d, solve_adjoint_2d, terminal_condition_1d, terminal_condition_2d
from .errors import GeometryError, ParameterError
from .geometry1d import build_map_1d
from .geometry2d import CurvatureParam, CurveFrame, TubularNeighborhood, build_map_2d
from .gradient import (GradientBundle, cost_value_1d, cost_value_2d, grad_eta_1d, grad_eta_2d,
                       grad_eta_trace_1d, grad_eta_trace_2d, grad_xi)
from .grid import Grid1D, Grid2D, PhysicsParams
from .optimizer import Point
from .swe import ControlRegion, SolverConfig, froude_diagnostic, solve_forward_1d, solve_forward_2d


@dataclass
class Evaluation:
    trajectory: object
    adjoint: object


ETA_GRADIENTS = ("formula", "trace")


def _check_eta_gradient(name):
    if name not in ETA_GRADIENTS:
        raise ParameterError(f"eta_gradient must be one of {ETA_GRADIENTS}, got {name!r}")
    return name


class ControlProblem1D:
    """Maximise -(alpha/2)||xi||^2 + H(eta, T) over the forcing and the point eta."""

    def __init__(self, grid=None, physics=None, solver=None, omega=(0.0, 1.2), alpha=0.5,
                 eta_margin=0.02, adjoint_scheme="discrete", eta_gradient="formula"):
        self.grid = grid or Grid1D()
        self.physics = physics or PhysicsParams()
        self.solver = solver or SolverConfig()
        self.region = ControlRegion(self.grid, omega)
        self.alpha = float(alpha)
        self.eta_bounds = (eta_margin * self.grid.length, (1.0 - eta_margin) * self.grid.length)
        self.adjoint_scheme = adjoint_scheme
        self.eta_gradient = _check_eta_gradient(eta_gradient)
        self.last = None

    def initial_point(self, eta0=None) -> Point:
        eta0 = 0.5 * self.grid.length if eta0 is None else eta0
        return Point(self.region.zeros(self.solver.nt), np.array([float(eta0)]))

    def forward(self, xi):
        return solve_forward_1d(self.grid, self.physics, self.solver, self.region, xi)

    def cost(self, point) -> float:
        tr = self.forward(point.xi)
        return cost_value_1d(tr, point.xi, self.region, float(point.eta[0]), self.grid, self.alpha)[0]

    def evaluate(self, point):
        eta = float(point.eta[0])
        m = build_map_1d(eta, self.grid.length)
        tr = self.forward(point.xi)
        cost, parts = cost_value_1d(tr, point.xi, self.region, eta, self.grid, self.alpha)
        terminal = terminal_condition_1d(tr.final, m, self.grid)
        adj = solve_adjoint_1d(tr, terminal, self.grid.dx, self.physics.g, scheme=self.adjoint_scheme)
        gx = grad_xi(point.xi, adj.states, self.region, self.alpha)
        if self.eta_gradient == "trace":
            ge = grad_eta_trace_1d(tr, eta, self.grid)
        else:
            ge = grad_eta_1d(tr, point.xi, adj, self.region, m, self.grid, self.alpha, self.physics.g)
        self.last = Evaluation(tr, adj)
        return cost, GradientBundle(gx, np.array([ge]), cost, parts)

    def inner(self, a, b) -> float:
        return self.region.inner(a.xi, b.xi, self.solver.dt) + float(np.dot(a.eta, b.eta))

    def project(self, point, direction, tau) -> Point:
        trial = point.axpy(tau, direction)
        trial.eta = np.clip(trial.eta, *self.eta_bounds)
        return trial

    def diagnostics(self, bundle) -> dict:
        if self.last is None:
            return {}
        tr = self.last.trajectory
        return {"cfl_max": tr.diagnostics["cfl_max"], "froude_max": froude_diagnostic(tr, self.physics.g),
                "mass_drift": tr.diagnostics["mass_drift"]}


class ControlProblem2D:
    """Maximise -(alpha/2)||xi||^2 + int_Gamma H(., T)^2 over the forcing and curvature amplitudes."""

    def __init__(self, grid=None, physics=None, solver=None, omega=None, alpha=0.0005,
                 ell=15.0, frame=None, tube=None, frequency=None, n_t=8, adjoint_scheme="discrete",
                 max_backtracks=60, eta_gradient="formula"):
        self.grid = grid or Grid2D()
        self.physics = physics or PhysicsParams()
        self.solver = solver or SolverConfig()
        omega = omega or (0.0, self.grid.lx, 0.0, 0.05 * self.grid.ly)
        self.region = ControlRegion(self.grid, omega)
        self.alpha = float(alpha)
        L = self.grid.lx
        self.frame = frame or CurveFrame(anchor=(0.5 * (L - ell), 0.5 * self.grid.ly))
        self.tube = tube or TubularNeighborhood(ell=ell)
        self.param = CurvatureParam((0.0,) * 4, ell, frequency)
        self.n_t = n_t
        self.adjoint_scheme = adjoint_scheme
        self.max_backtracks = max_backtracks
        self.eta_gradient = _check_eta_gradient(eta_gradient)
        self.last = None

    def initial_point(self, amplitudes=(0.0, 0.0, 0.0, 0.0)) -> Point:
        return Point(self.region.zeros(self.solver.nt), np.array(amplitudes, dtype=float))

    def geometry(self, amplitudes):
        return build_map_2d(self.param.with_amplitudes(amplitudes), self.tube)

    def forward(self, xi):
        return solve_forward_2d(self.grid, self.physics, self.solver, self.region, xi)

    def cost(self, point) -> float:
        m = self.geometry(point.eta)
        tr = self.forward(point.xi)
        return cost_value_2d(tr, point.xi, self.region, m, self.frame, self.grid, self.alpha)[0]

    def evaluate(self, point):
        m = self.geometry(point.eta)
        tr = self.forward(point.xi)
        cost, parts = cost_value_2d(tr, point.xi, self.region, m, self.frame, self.grid, self.alpha)
        terminal = terminal_condition_2d(tr.final, m, self.frame, self.tube, self.grid)
        adj = solve_adjoint_2d(tr, terminal, self.grid.dx, self.grid.dy, self.physics.g, scheme=self.adjoint_scheme)
        gx = grad_xi(point.xi, adj.states, self.region, self.alpha)
        if self.eta_gradient == "trace":
            ge = grad_eta_trace_2d(tr, m, self.frame, self.grid)
        else:
            ge, _ = grad_eta_2d(tr, point.xi, adj, self.region, m, self.frame, self.grid, self.alpha,
                                self.physics.g, self.n_t)
        self.last = Evaluation(tr, adj)
        return cost, GradientBundle(gx, ge, cost, parts)

    def inner(self, a, b) -> float:
        return self.region.inner(a.xi, b.xi, self.solver.dt) + float(np.dot(a.eta, b.eta))

    def invertible(self, amplitudes) -> bool:
        try:
            self.geometry(amplitudes)
        except GeometryError:
            return False
        return True

    def project(self, point, direction, tau) -> Point:
        """Shorten the step until the deformed tube stays invertible."""
        for _ in range(self.max_backtracks):
            trial = point.axpy(tau, direction)
            if self.invertible(trial.eta):
                return trial
            tau *= 0.5
        return Point(point.xi.copy(), point.eta.copy())

    def diagnostics(self, bundle) -> dict:
        if self.last is None:
            return {}
        tr = self.last.trajectory
        return {"cfl_max": tr.diagnostics["cfl_max"], "froude_max": froude_diagnostic(tr, self.physics.g),
                "mass_drift": tr.diagnostics["mass_drift"]}
