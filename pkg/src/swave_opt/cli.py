"""Command-line front end: ``swave-opt <mode> --config <path> [--out <dir>] [--seed <n>]``."""

import argparse
import configparser
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, OptimizerError, ParameterError, SolverError, SwaveError
from .geometry2d import CurveFrame, TubularNeighborhood, write_curve_csv
from .grid import Grid1D, Grid2D, PhysicsParams, write_snapshot_csv
from .optimizer import OptimizerConfig, Point, optimize, write_convergence_csv
from .problems import ControlProblem1D, ControlProblem2D
from .swe import SolverConfig, froude_diagnostic, solve_forward_1d, solve_forward_2d

logger = logging.getLogger("swave_opt")

MODES = ("solve-1d", "solve-2d", "optimize-1d", "optimize-2d", "grad-check-1d", "grad-check-2d")

EXIT_OK, EXIT_GENERIC, EXIT_PARSE, EXIT_SOLVER, EXIT_OPTIMIZER = 0, 1, 2, 3, 4

# section -> key -> (type, default); None means "derived from the mode"
SCHEMA = {
    "grid": {
        "length": (float, 60.0), "n_nodes": (int, 301),
        "lx": (float, 40.0), "ly": (float, 40.0), "nx": (int, 101), "ny": (int, 101),
    },
    "physics": {"g": (float, 9.81), "h0": (float, 1.5), "kappa": (float, 0.0)},
    "solver": {"nt": (int, 2000), "t_final": (float, 10.0), "cfl_warn_threshold": (float, 1.0)},
    "initial": {
        "bump_amplitude": (float, 0.0), "bump_width": (float, 2.0),
        "bump_x": (float, None), "bump_y": (float, None),
    },
    "cost": {"alpha": (float, None), "omega": ("floats", None)},
    "geometry": {
        "eta0": (float, None), "eta_margin": (float, 0.02),
        "ell": (float, 15.0), "tube_width": (float, 0.1), "n_s": (int, 200), "n_t": (int, 8),
        "frequency": (float, None), "amplitudes": ("floats", (0.0, 0.0, 0.0, 0.0)),
        "anchor_x": (float, None), "anchor_y": (float, None), "angle": (float, 0.0),
    },
    "adjoint": {"scheme": (str, "discrete"), "eta_gradient": (str, "formula")},
    "optimizer": {
        "grad_tol": (float, 1e-10), "max_iters": (int, 500), "c1": (float, 1e-4), "shrink": (float, 0.5),
        "initial_step": (float, 1.0), "max_backtracks": (int, 40), "bb_variant": (str, "BB1"),
        "step_min": (float, 1e-12), "step_max": (float, 1e6), "per_block": (bool, False),
    },
    "gradcheck": {
        "directions": (int, 5), "seed": (int, 0), "fd_step_xi": (float, 1e-3),
        "fd_step_eta": (float, 1e-4), "base_xi_scale": (float, 1.0),
    },
    "output": {"snapshot_times": ("floats", None)},
}


@dataclass
class RunConfig:
    mode: str
    values: dict
    out_dir: str = "."
    source: str = ""
    snapshot_times: tuple = field(default_factory=tuple)

    def get(self, section, key):
        return self.values[section][key]


def _convert(kind, raw, section, key):
    text = raw.strip()
    try:
        if kind == "floats":
            return tuple(float(v) for v in text.replace(",", " ").split())
        if kind is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse value {raw!r}") from None


def _mode_defaults(mode, values):
    two_d = mode.endswith("2d")
    cost = values["cost"]
    if cost["alpha"] is None:
        cost["alpha"] = 0.0005 if two_d else 0.5
    if cost["omega"] is None:
        g = values["grid"]
        cost["omega"] = (0.0, g["lx"], 0.0, 0.05 * g["ly"]) if two_d else (0.0, 1.2)
    geo = values["geometry"]
    if geo["eta0"] is None:
        geo["eta0"] = 0.5 * values["grid"]["length"]
    if geo["anchor_x"] is None:
        geo["anchor_x"] = 0.5 * (values["grid"]["lx"] - geo["ell"])
    if geo["anchor_y"] is None:
        geo["anchor_y"] = 0.5 * values["grid"]["ly"]
    ini = values["initial"]
    if ini["bump_x"] is None:
        ini["bump_x"] = 0.5 * (values["grid"]["lx"] if two_d else values["grid"]["length"])
    if ini["bump_y"] is None:
        ini["bump_y"] = 0.5 * values["grid"]["ly"]


def _validate(mode, values):
    checks = [
        ("cost", "alpha", values["cost"]["alpha"] > 0, "must be positive"),
        ("gradcheck", "directions", values["gradcheck"]["directions"] >= 1, "must be >= 1"),
        ("gradcheck", "fd_step_xi", values["gradcheck"]["fd_step_xi"] > 0, "must be positive"),
        ("gradcheck", "fd_step_eta", values["gradcheck"]["fd_step_eta"] > 0, "must be positive"),
        ("geometry", "n_t", values["geometry"]["n_t"] >= 1, "must be >= 1"),
        ("initial", "bump_width", values["initial"]["bump_width"] > 0, "must be positive"),
        ("adjoint", "scheme", values["adjoint"]["scheme"] in ("discrete", "centred"),
         "must be 'discrete' or 'centred'"),
        ("adjoint", "eta_gradient", values["adjoint"]["eta_gradient"] in ("formula", "trace"),
         "must be 'formula' or 'trace'"),
    ]
    omega = values["cost"]["omega"]
    checks.append(("cost", "omega", len(omega) == (4 if mode.endswith("2d") else 2),
                   "needs 2 bounds in 1D and 4 in 2D"))
    checks.append(("geometry", "amplitudes", len(values["geometry"]["amplitudes"]) == 4,
                   "needs exactly 4 values"))
    for section, key, ok, why in checks:
        if not ok:
            raise ConfigError(f"[{section}] {key}: {why}")
    t_final = values["solver"]["t_final"]
    times = values["output"]["snapshot_times"]
    if times is not None and any(not 0.0 <= t <= t_final for t in times):
        raise ConfigError(f"[output] snapshot_times: values must lie in [0, {t_final}]")


def parse_config(path, mode="solve-1d") -> RunConfig:
    """Read an INI file; missing keys take defaults, unknown sections or keys are rejected."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            kind = SCHEMA[section][key][0]
            values[section][key] = _convert(kind, raw, section, key)
    _mode_defaults(mode, values)
    _validate(mode, values)
    times = values["output"]["snapshot_times"]
    if times is None:
        times = (0.0, values["solver"]["t_final"])
    return RunConfig(mode, values, source=path, snapshot_times=tuple(times))


def _build_common(cfg):
    v = cfg.values
    try:
        physics = PhysicsParams(**v["physics"])
        solver = SolverConfig(**v["solver"])
        opt = OptimizerConfig(**v["optimizer"])
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return physics, solver, opt


def _problem_1d(cfg):
    v = cfg.values
    physics, solver, _ = _build_common(cfg)
    grid = Grid1D(v["grid"]["length"], v["grid"]["n_nodes"])
    return ControlProblem1D(grid, physics, solver, omega=v["cost"]["omega"], alpha=v["cost"]["alpha"],
                            eta_margin=v["geometry"]["eta_margin"], adjoint_scheme=v["adjoint"]["scheme"],
                            eta_gradient=v["adjoint"]["eta_gradient"])


def _problem_2d(cfg):
    v = cfg.values
    physics, solver, _ = _build_common(cfg)
    g = v["grid"]
    geo = v["geometry"]
    grid = Grid2D(g["lx"], g["ly"], g["nx"], g["ny"])
    frame = CurveFrame(anchor=(geo["anchor_x"], geo["anchor_y"]), angle=geo["angle"])
    tube = TubularNeighborhood(ell=geo["ell"], width=geo["tube_width"], n_s=geo["n_s"])
    return ControlProblem2D(grid, physics, solver, omega=v["cost"]["omega"], alpha=v["cost"]["alpha"],
                            ell=geo["ell"], frame=frame, tube=tube, frequency=geo["frequency"],
                            n_t=geo["n_t"], adjoint_scheme=v["adjoint"]["scheme"],
                            eta_gradient=v["adjoint"]["eta_gradient"])


def initial_height(cfg, grid):
    """Flat water plus an optional Gaussian bump."""
    ini = cfg.values["initial"]
    h0 = cfg.values["physics"]["h0"]
    if isinstance(grid, Grid1D):
        r2 = (grid.x - ini["bump_x"]) ** 2
    else:
        xx, yy = grid.mesh()
        r2 = (xx - ini["bump_x"]) ** 2 + (yy - ini["bump_y"]) ** 2
    return h0 + ini["bump_amplitude"] * np.exp(-r2 / (2.0 * ini["bump_width"] ** 2))


def _snapshot_indices(cfg, solver):
    return [(t, int(round(t / solver.dt))) for t in cfg.snapshot_times]


def _write_snapshots(cfg, grid, trajectory, solver, prefix="snapshot"):
    names = []
    for t, n in _snapshot_indices(cfg, solver):
        name = f"{prefix}_t{t:.4f}.csv"
        write_snapshot_csv(os.path.join(cfg.out_dir, name), grid, trajectory.states[n])
        names.append(name)
    return names


def _diagnostics(trajectory, g):
    return {"cfl_max": float(trajectory.diagnostics["cfl_max"]),
            "froude_max": float(froude_diagnostic(trajectory, g)),
            "mass_drift": float(trajectory.diagnostics["mass_drift"])}


def _run_solve(cfg, manifest):
    v = cfg.values
    physics, solver, _ = _build_common(cfg)
    if cfg.mode == "solve-1d":
        grid = Grid1D(v["grid"]["length"], v["grid"]["n_nodes"])
        tr = solve_forward_1d(grid, physics, solver, h_init=initial_height(cfg, grid))
    else:
        g = v["grid"]
        grid = Grid2D(g["lx"], g["ly"], g["nx"], g["ny"])
        tr = solve_forward_2d(grid, physics, solver, h_init=initial_height(cfg, grid))
        problem = _problem_2d(cfg)
        m = problem.geometry(v["geometry"]["amplitudes"])
        write_curve_csv(os.path.join(cfg.out_dir, "curve.csv"), m, problem.frame)
        manifest["files"].append("curve.csv")
    manifest["files"] += _write_snapshots(cfg, grid, tr, solver)
    manifest["diagnostics"] = _diagnostics(tr, physics.g)


def _run_optimize(cfg, manifest):
    v = cfg.values
    _, solver, opt = _build_common(cfg)
    if cfg.mode == "optimize-1d":
        problem = _problem_1d(cfg)
        start = problem.initial_point(v["geometry"]["eta0"])
    else:
        problem = _problem_2d(cfg)
        start = problem.initial_point(v["geometry"]["amplitudes"])
    history = []
    try:
        result = optimize(problem, start, opt)
        history = result.history
    except Exception as exc:
        history = getattr(exc, "history", [])
        raise
    finally:
        if history:
            write_convergence_csv(os.path.join(cfg.out_dir, "convergence.csv"), history)
            manifest["files"].append("convergence.csv")
    problem.evaluate(result.point)
    tr = problem.last.trajectory
    manifest["files"] += _write_snapshots(cfg, problem.grid, tr, solver)
    if cfg.mode == "optimize-2d":
        write_curve_csv(os.path.join(cfg.out_dir, "curve.csv"), problem.geometry(result.point.eta), problem.frame)
        manifest["files"].append("curve.csv")
    manifest["diagnostics"] = _diagnostics(tr, problem.physics.g)
    manifest["result"] = {
        "cost": float(result.cost),
        "cost_parts": {k: float(x) for k, x in result.bundle.cost_parts.items()},
        "eta": [float(e) for e in result.point.eta],
        "grad_eta": [float(e) for e in np.atleast_1d(result.bundle.grad_eta)],
        "iterations": len(result.history) - 1,
        "converged": bool(result.converged),
        "message": result.message,
    }


def random_directions(region, nt, dt, k, rng):
    """k random controls supported on omega, unit-normalised in the weighted product."""
    out = []
    for _ in range(k):
        d = rng.standard_normal(region.zeros(nt).shape)
        d /= np.sqrt(region.inner(d, d, dt))
        out.append(d)
    return out


def grad_check(problem, point, directions, fd_step_xi=1e-3, fd_step_eta=1e-4):
    """Central finite differences of the cost against the assembled gradient.

    Returns rows (component, fd_value, adjoint_value, rel_error): one per
    control direction, then one per geometric component.
    """
    _, bundle = problem.evaluate(point)
    dt = problem.solver.dt
    rows = []
    for i, d in enumerate(directions, start=1):
        plus = problem.cost(Point(point.xi + fd_step_xi * d, point.eta))
        minus = problem.cost(Point(point.xi - fd_step_xi * d, point.eta))
        fd = (plus - minus) / (2.0 * fd_step_xi)
        adj = problem.region.inner(bundle.grad_xi, d, dt)
        rows.append((f"xi_dir{i}", fd, adj))
    grad_eta = np.atleast_1d(bundle.grad_eta)
    names = ["eta"] if grad_eta.size == 1 else [f"a{r + 1}" for r in range(grad_eta.size)]
    for r, name in enumerate(names):
        e = np.zeros_like(point.eta)
        e[r] = fd_step_eta
        fd = (problem.cost(Point(point.xi, point.eta + e)) - problem.cost(Point(point.xi, point.eta - e)))
        fd /= 2.0 * fd_step_eta
        rows.append((name, fd, float(grad_eta[r])))
    return [(c, float(f), float(a), abs(f - a) / max(abs(f), 1e-300)) for c, f, a in rows]


def write_grad_check_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "fd_value", "adjoint_value", "rel_error"])
        for c, f, a, e in rows:
            w.writerow([c, repr(f), repr(a), repr(e)])


def _run_grad_check(cfg, manifest, seed):
    v = cfg.values
    gc = v["gradcheck"]
    if cfg.mode == "grad-check-1d":
        problem = _problem_1d(cfg)
        base = problem.initial_point(v["geometry"]["eta0"])
    else:
        problem = _problem_2d(cfg)
        base = problem.initial_point(v["geometry"]["amplitudes"])
    if gc["base_xi_scale"] != 0.0:
        # move to an intermediate iterate along the first gradient
        _, b0 = problem.evaluate(base)
        base = Point(base.xi + gc["base_xi_scale"] * b0.grad_xi, base.eta)
    rng = np.random.default_rng(gc["seed"] if seed is None else seed)
    dirs = random_directions(problem.region, problem.solver.nt, problem.solver.dt, gc["directions"], rng)
    rows = grad_check(problem, base, dirs, gc["fd_step_xi"], gc["fd_step_eta"])
    write_grad_check_csv(os.path.join(cfg.out_dir, "grad_check.csv"), rows)
    manifest["files"].append("grad_check.csv")
    manifest["grad_check"] = {c: {"fd": f, "adjoint": a, "rel_error": e} for c, f, a, e in rows}
    manifest["diagnostics"] = _diagnostics(problem.last.trajectory, problem.physics.g)


def run(cfg, seed=None) -> int:
    """Execute one mode, always leaving ``manifest.json`` in the output directory."""
    manifest = {"mode": cfg.mode, "config_file": cfg.source, "config": cfg.values,
                "snapshot_times": list(cfg.snapshot_times), "files": []}
    status, failure = EXIT_OK, None
    try:
        os.makedirs(cfg.out_dir, exist_ok=True)
        if cfg.mode.startswith("solve"):
            _run_solve(cfg, manifest)
        elif cfg.mode.startswith("optimize"):
            _run_optimize(cfg, manifest)
        else:
            _run_grad_check(cfg, manifest, seed)
    except (ConfigError, ParameterError) as exc:
        status, failure = EXIT_PARSE, ("parse", str(exc))
    except SolverError as exc:
        status, failure = EXIT_SOLVER, ("solver", str(exc))
    except OptimizerError as exc:
        status, failure = EXIT_OPTIMIZER, ("optimizer", str(exc))
    except SwaveError as exc:
        status, failure = EXIT_GENERIC, ("error", str(exc))
    write_manifest(cfg.out_dir, manifest, status, failure)
    return status


def write_manifest(out_dir, manifest, status, failure=None):
    manifest = dict(manifest)
    manifest["exit_status"] = status
    manifest["failure_class"] = failure[0] if failure else None
    manifest["failure_message"] = failure[1] if failure else None
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (tuple, np.ndarray)):
        return list(obj)
    raise TypeError(f"not serialisable: {type(obj)!r}")


def build_parser():
    p = argparse.ArgumentParser(prog="swave-opt", description="Shallow-water optimal control and shape sensitivity.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="INI configuration file (may be empty)")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, default=None, help="seed for grad-check directions")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config, args.mode)
    except ConfigError as exc:
        print(f"swave-opt: {exc}", file=sys.stderr)
        write_manifest(args.out, {"mode": args.mode, "config_file": args.config, "files": []},
                       EXIT_PARSE, ("parse", str(exc)))
        return EXIT_PARSE
    cfg.out_dir = args.out
    status = run(cfg, args.seed)
    if status != EXIT_OK:
        print(f"swave-opt: run failed with exit status {status}; see {os.path.join(args.out, 'manifest.json')}",
              file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
