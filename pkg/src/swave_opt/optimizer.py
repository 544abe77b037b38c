"""Armijo-initialised Barzilai-Borwein ascent over a stacked (control, geometry) variable.

The loop is problem-agnostic.  A problem object supplies

* ``evaluate(point) -> (cost, GradientBundle)``, raising ``SolverError`` for
  infeasible forward solves;
* ``inner(a, b)`` on pairs ``(xi, eta)`` (the product in which gradients are
  representers);
* ``project(point, direction, tau) -> point`` returning a feasible point on or
  near the ray ``point + tau * direction``.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import LineSearchError, OptimizerError, ParameterError, SolverError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    grad_tol: float = 1e-10
    max_iters: int = 500
    c1: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 40
    bb_variant: str = "BB1"
    step_min: float = 1e-12
    step_max: float = 1e6
    per_block: bool = False

    def __post_init__(self):
        if not 0 < self.c1 < 1:
            raise ParameterError(f"c1 must lie in (0, 1), got {self.c1}")
        if not 0 < self.shrink < 1:
            raise ParameterError(f"shrink must lie in (0, 1), got {self.shrink}")
        if self.bb_variant not in ("BB1", "BB2", "alternating"):
            raise ParameterError(f"unknown BB variant {self.bb_variant!r}")
        if not 0 < self.step_min <= self.step_max:
            raise ParameterError("step clamp must satisfy 0 < min <= max")
        if self.max_iters < 0 or self.max_backtracks < 1:
            raise ParameterError("max_iters must be >= 0 and max_backtracks >= 1")
        if not self.initial_step > 0:
            raise ParameterError("initial_step must be positive")


@dataclass
class Point:
    xi: np.ndarray
    eta: np.ndarray

    def axpy(self, tau, direction):
        return Point(self.xi + tau * direction.xi, self.eta + tau * direction.eta)

    def minus(self, other):
        return Point(self.xi - other.xi, self.eta - other.eta)


def gradient_point(bundle) -> Point:
    return Point(np.asarray(bundle.grad_xi, float), np.atleast_1d(np.asarray(bundle.grad_eta, float)))


@dataclass
class IterateRecord:
    iteration: int
    cost: float
    parts: dict
    grad_norm: float
    step: float
    eta: np.ndarray
    diagnostics: dict = field(default_factory=dict)


@dataclass
class OptimizeResult:
    point: Point
    cost: float
    bundle: object
    history: list
    converged: bool
    best_costs: list
    message: str = ""


def _safe_evaluate(problem, point):
    try:
        return problem.evaluate(point)
    except SolverError as exc:
        logger.info("infeasible trial point: %s", exc)
        return -np.inf, None


def armijo_ascent_step(problem, point, cost, bundle, config):
    """Backtrack from ``initial_step`` until the sufficient-increase test holds.

    Returns ``(new_point, new_cost, new_bundle, step)``.
    """
    direction = gradient_point(bundle)
    gnorm2 = problem.inner(direction, direction)
    if not gnorm2 > 0:
        raise OptimizerError("Armijo step needs a nonzero gradient")
    t = config.initial_step
    for _ in range(config.max_backtracks):
        trial = problem.project(point, direction, t)
        trial_cost, trial_bundle = _safe_evaluate(problem, trial)
        if trial_cost >= cost + config.c1 * t * gnorm2:
            return trial, trial_cost, trial_bundle, t
        t *= config.shrink
    raise LineSearchError(f"Armijo line search stalled after {config.max_backtracks} backtracks")


def bb_step_length(s, y, inner, config, iteration=1, fallback=1.0):
    """Barzilai-Borwein step from iterate and gradient differences.

    For ascent the gradient differences are negated curvature, so the
    absolute value of <s, y> is used.
    """
    sy = abs(inner(s, y))
    if sy == 0.0 or not np.isfinite(sy):
        return fallback
    variant = config.bb_variant
    if variant == "alternating":
        variant = "BB1" if iteration % 2 else "BB2"
    if variant == "BB1":
        tau = inner(s, s) / sy
    else:
        tau = sy / inner(y, y)
    return float(np.clip(tau, config.step_min, config.step_max))


def _block_steps(s, y, problem, config, fallback):
    """Separate BB steps for the control and the geometric block."""
    zero_xi = np.zeros_like(s.xi)
    zero_eta = np.zeros_like(s.eta)
    sx, yx = Point(s.xi, zero_eta), Point(y.xi, zero_eta)
    se, ye = Point(zero_xi, s.eta), Point(zero_xi, y.eta)
    return (bb_step_length(sx, yx, problem.inner, config, fallback=fallback),
            bb_step_length(se, ye, problem.inner, config, fallback=fallback))


def bb_ascent(problem, point1, point0, bundle1, bundle0, config, iteration=1, fallback=1.0):
    """Next point z1 + tau g1; returns ``(point, tau)``."""
    g1, g0 = gradient_point(bundle1), gradient_point(bundle0)
    s = point1.minus(point0)
    y = g1.minus(g0)
    if config.per_block:
        tx, te = _block_steps(s, y, problem, config, fallback)
        direction = Point(tx * g1.xi, te * g1.eta)
        return problem.project(point1, direction, 1.0), 1.0
    tau = bb_step_length(s, y, problem.inner, config, iteration, fallback)
    return problem.project(point1, g1, tau), tau


def optimize(problem, initial, config=None, callback=None):
    """Maximise the problem's cost; the best-so-far iterate is returned.

    A forward-solve failure at a BB iterate shrinks the step until the
    iterate is feasible again.  On any other error the partial history is
    attached to the raised exception as ``exc.history``.
    """
    config = config or OptimizerConfig()
    history = []
    best_costs = []
    try:
        return _optimize(problem, initial, config, callback, history, best_costs)
    except Exception as exc:
        exc.history = history
        raise


def _record(history, best_costs, it, cost, bundle, gnorm, step, point, problem):
    diag = problem.diagnostics(bundle) if hasattr(problem, "diagnostics") else {}
    rec = IterateRecord(it, float(cost), dict(bundle.cost_parts), float(gnorm), float(step),
                        np.array(point.eta, dtype=float), diag)
    history.append(rec)
    best = max(rec.cost, best_costs[-1]) if best_costs else rec.cost
    best_costs.append(best)
    return rec


def _optimize(problem, initial, config, callback, history, best_costs):
    point = initial
    cost, bundle = problem.evaluate(point)
    g = gradient_point(bundle)
    gnorm = np.sqrt(problem.inner(g, g))
    _record(history, best_costs, 0, cost, bundle, gnorm, 0.0, point, problem)
    best = (cost, point, bundle)
    if callback:
        callback(history[-1])
    if gnorm <= config.grad_tol or config.max_iters == 0:
        return OptimizeResult(point, cost, bundle, history, gnorm <= config.grad_tol, best_costs,
                              "gradient below tolerance at start" if gnorm <= config.grad_tol else "no iterations")

    new_point, new_cost, new_bundle, step = armijo_ascent_step(problem, point, cost, bundle, config)
    last_step = step
    it = 1
    while True:
        prev_point, prev_bundle = point, bundle
        point, cost, bundle = new_point, new_cost, new_bundle
        g = gradient_point(bundle)
        gnorm = np.sqrt(problem.inner(g, g))
        _record(history, best_costs, it, cost, bundle, gnorm, last_step, point, problem)
        if cost > best[0]:
            best = (cost, point, bundle)
        if callback:
            callback(history[-1])
        if gnorm <= config.grad_tol:
            if cost >= best[0] - 1e-12 * max(1.0, abs(best[0])):
                return OptimizeResult(point, cost, bundle, history, True, best_costs, "converged")
            # e.g. a long BB step into a flat region; the returned best point is not stationary
            return OptimizeResult(best[1], best[0], best[2], history, False, best_costs,
                                  "gradient vanished at an iterate below the best-so-far")
        if it >= config.max_iters:
            return OptimizeResult(best[1], best[0], best[2], history, False, best_costs, "max_iters reached")
        trial, tau = bb_ascent(problem, point, prev_point, bundle, prev_bundle, config, it, last_step)
        trial_cost, trial_bundle = _safe_evaluate(problem, trial)
        backtracks = 0
        while trial_bundle is None:
            # positivity loss: the BB step is shortened until the solve succeeds
            backtracks += 1
            if backtracks > config.max_backtracks:
                raise LineSearchError("no feasible BB iterate after shrinking the step")
            tau *= config.shrink
            trial = problem.project(point, g, tau)
            trial_cost, trial_bundle = _safe_evaluate(problem, trial)
        new_point, new_cost, new_bundle = trial, trial_cost, trial_bundle
        last_step = tau
        it += 1


def write_convergence_csv(path, history):
    """One row per iterate: index, cost, cost parts, gradient norm, step, geometry values."""
    if not history:
        raise ParameterError("empty optimisation history")
    part_keys = sorted(history[0].parts)
    n_eta = len(history[0].eta)
    eta_names = ["eta"] if n_eta == 1 else [f"a{r + 1}" for r in range(n_eta)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "cost", *part_keys, "grad_norm", "step", *eta_names])
        for rec in history:
            w.writerow([rec.iteration, repr(rec.cost), *(repr(float(rec.parts[k])) for k in part_keys),
                        repr(rec.grad_norm), repr(rec.step), *(repr(float(e)) for e in rec.eta)])
