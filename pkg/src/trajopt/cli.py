"""Command-line experiment runner.

Three subcommands:

  run      execute one solve (or one per method) and write its artifacts
  compare  run several methods from the same initial guess and merge their
           iteration traces into plot-ready CSV tables
  verify   run the derivative checks and the dense-KKT equivalence suite

Configuration comes from a plain key=value file (--config), overridable with
repeated --set key=value flags and the direct --system/--method/--seed/--out
flags. Unknown keys are rejected. The TRAJOPT_OUT environment variable, when
set, overrides the output root. All CSV output uses 17 significant digits so
doubles round-trip losslessly; identical configuration and seed reproduce
byte-identical CSV files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from .backward import backward_ddp, backward_ilqr, backward_newton, write_gain_profile_csv
from .errors import ConfigError, DimensionError, TrajoptError
from .kkt import verify_equivalence, write_verification_json
from .linesearch import LineSearchConfig
from .models import check_derivatives, make_benchmark
from .solver import (SolverConfig, initial_multiplier_estimate, solve,
                     summary_dict, write_iterations_csv, write_trials_csv)
from .trajectory import rollout, write_trajectory_csv
from .expansion import expand_along

__all__ = [
    "ExperimentConfig",
    "build_config",
    "parse_kv_file",
    "prediction_row",
    "cmd_run",
    "cmd_compare",
    "cmd_verify",
    "main",
]

SYSTEMS = ("pendulum", "cartpole")
RUN_METHODS = ("ilqr", "newton", "ddp", "hybrid")
VERIFY_HORIZONS = (1, 2, 5, 20)


@dataclass(frozen=True)
class ExperimentConfig:
    system: str = "pendulum"
    method: str = "ilqr"
    horizon: int | None = None       # None -> benchmark default
    timestep: float | None = None
    q_diag: tuple | None = None
    r_scale: float | None = None
    qt_scale: float | None = None
    x0: tuple | None = None
    goal: tuple | None = None
    init: str = "zero"
    init_amplitude: float = 1.0
    seed: int = 0
    out: str = "runs"
    max_iters: int = 200
    grad_tol: float = 1e-4
    step_tol: float = 1e-9
    sigma: float = 0.1
    rho: float = 0.5
    alpha_min: float = 1e-8
    alpha_init: float = 1.0
    hybrid_alpha_switch: float = 1e-2
    hybrid_patience: int = 2
    warm_start: bool = False

    def solver_config(self, method) -> SolverConfig:
        return SolverConfig(
            method=method,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            step_tol=self.step_tol,
            linesearch=LineSearchConfig(
                sigma=self.sigma, rho=self.rho,
                alpha_min=self.alpha_min, alpha_init=self.alpha_init),
            hybrid_alpha_switch=self.hybrid_alpha_switch,
            hybrid_patience=self.hybrid_patience,
        )

    def methods(self):
        if self.method == "all":
            return list(RUN_METHODS)
        return self.method.split(",")


def _parse_float_list(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated floats, got '{text}'") from exc


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got '{text}'")


def _typed(parser, label):
    def parse(text):
        try:
            return parser(text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {label}: '{text}'") from exc
    return parse


_KEY_PARSERS = {
    "system": str,
    "method": str,
    "horizon": _typed(int, "horizon"),
    "timestep": _typed(float, "timestep"),
    "q_diag": _parse_float_list,
    "r_scale": _typed(float, "r_scale"),
    "qt_scale": _typed(float, "qt_scale"),
    "x0": _parse_float_list,
    "goal": _parse_float_list,
    "init": str,
    "init_amplitude": _typed(float, "init_amplitude"),
    "seed": _typed(int, "seed"),
    "out": str,
    "max_iters": _typed(int, "max_iters"),
    "grad_tol": _typed(float, "grad_tol"),
    "step_tol": _typed(float, "step_tol"),
    "sigma": _typed(float, "sigma"),
    "rho": _typed(float, "rho"),
    "alpha_min": _typed(float, "alpha_min"),
    "alpha_init": _typed(float, "alpha_init"),
    "hybrid_alpha_switch": _typed(float, "hybrid_alpha_switch"),
    "hybrid_patience": _typed(int, "hybrid_patience"),
    "warm_start": _parse_bool,
}


def parse_kv_file(path):
    """Read key=value lines; '#' starts a comment, blank lines are skipped."""
    pairs = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got '{line}'")
            key, value = line.split("=", 1)
            pairs[key.strip()] = value.strip()
    return pairs


def build_config(pairs) -> ExperimentConfig:
    """Validate raw string pairs and produce a typed configuration."""
    values = {}
    for key, raw in pairs.items():
        if key not in _KEY_PARSERS:
            raise ConfigError(f"unknown configuration key '{key}'")
        values[key] = _KEY_PARSERS[key](raw)

    cfg = ExperimentConfig(**values)
    if cfg.system not in SYSTEMS:
        raise ConfigError(f"unknown system '{cfg.system}'")
    if cfg.method != "all":
        for method in cfg.methods():
            if method not in RUN_METHODS:
                raise ConfigError(f"unknown method '{method}'")
    if cfg.init not in ("zero", "random"):
        raise ConfigError(f"unknown init '{cfg.init}'")
    if cfg.init_amplitude < 0:
        raise ConfigError("init_amplitude must be nonnegative")
    try:
        # Surface bad numeric settings now rather than mid-run.
        cfg.solver_config(cfg.methods()[0] if cfg.method != "all" else "ilqr")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _setup(cfg):
    try:
        return make_benchmark(
            cfg.system, horizon=cfg.horizon, timestep=cfg.timestep,
            q_diag=cfg.q_diag, r_scale=cfg.r_scale, qt_scale=cfg.qt_scale,
            x0=cfg.x0, goal=cfg.goal)
    except (ValueError, DimensionError) as exc:
        raise ConfigError(str(exc)) from exc


def initial_controls(cfg, horizon, control_dim):
    """Zero controls, or seeded uniform draws in [-a, a] per entry."""
    if cfg.init == "zero":
        return np.zeros((horizon, control_dim))
    rng = np.random.default_rng(cfg.seed)
    return rng.uniform(-cfg.init_amplitude, cfg.init_amplitude,
                       size=(horizon, control_dim))


def output_root(cfg):
    return os.environ.get("TRAJOPT_OUT", cfg.out)


def prediction_row(j, dj_pred, j_min=0.0):
    """Model-predicted next cost and whether it is physically attainable."""
    j_pred = j + dj_pred
    return j_pred, j_pred >= j_min


def _first_sweep(method, exp):
    if method == "ilqr":
        return backward_ilqr(exp)
    if method == "newton":
        return backward_newton(exp, initial_multiplier_estimate(exp))
    # hybrid starts with a DDP sweep
    return backward_ddp(exp)


def _run_single(cfg, method, model, cost, x0, outdir, controls0):
    os.makedirs(outdir, exist_ok=True)

    nominal = rollout(model, cost, x0, controls0)
    first_sol = _first_sweep(method, expand_along(model, cost, nominal))
    write_gain_profile_csv(os.path.join(outdir, "quu_profile.csv"), first_sol)

    start = time.perf_counter()
    result = solve(model, cost, x0, controls0, cfg.solver_config(method))
    wall = time.perf_counter() - start

    write_iterations_csv(os.path.join(outdir, "iterations.csv"), result.records)
    write_trials_csv(os.path.join(outdir, "trials.csv"), result.trial_logs)
    write_trajectory_csv(os.path.join(outdir, "trajectory.csv"),
                         result.trajectory, cost)
    summary = summary_dict(result, method, wall)
    summary.update({"system": cfg.system, "seed": cfg.seed})
    with open(os.path.join(outdir, "summary.json"), "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result


def cmd_run(cfg) -> int:
    model, cost, x0, horizon = _setup(cfg)
    controls0 = initial_controls(cfg, horizon, model.control_dim)
    root = output_root(cfg)
    methods = cfg.methods()
    for method in methods:
        outdir = root if len(methods) == 1 else os.path.join(root, method)
        result = _run_single(cfg, method, model, cost, x0, outdir, controls0)
        print(f"{cfg.system}/{method}: converged={result.converged} "
              f"reason={result.reason} iterations={result.iterations} "
              f"final_cost={result.final_cost:.6g}")
    return 0


def _write_merged_csv(path, results):
    lines = ["method,iteration,J,alpha,min_quu,grad_norm,dJ_pred"]
    for method, result in results:
        for r in result.records:
            lines.append(",".join([
                method, str(r.index),
                f"{r.cost:.17g}", f"{r.alpha:.17g}", f"{r.min_quu:.17g}",
                f"{r.grad_norm:.17g}", f"{r.dj_pred:.17g}",
            ]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_prediction_csv(path, results):
    lines = ["method,iteration,J,dJ_pred,J_pred,feasible"]
    for method, result in results:
        for r in result.records:
            j_pred, feasible = prediction_row(r.cost, r.dj_pred)
            lines.append(",".join([
                method, str(r.index),
                f"{r.cost:.17g}", f"{r.dj_pred:.17g}", f"{j_pred:.17g}",
                "true" if feasible else "false",
            ]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_compare(cfg) -> int:
    model, cost, x0, horizon = _setup(cfg)
    controls0 = initial_controls(cfg, horizon, model.control_dim)
    root = output_root(cfg)
    os.makedirs(root, exist_ok=True)

    if cfg.warm_start:
        # Shared near-solution starting point: plain iLQR down to a loose
        # gradient tolerance, then every method restarts from its controls.
        warm_cfg = replace(cfg, grad_tol=1e-2)
        warm = solve(model, cost, x0, controls0,
                     warm_cfg.solver_config("ilqr"))
        controls0 = warm.trajectory.controls

    results = []
    for method in cfg.methods():
        outdir = os.path.join(root, method)
        result = _run_single(cfg, method, model, cost, x0, outdir, controls0)
        results.append((method, result))
        print(f"{cfg.system}/{method}: converged={result.converged} "
              f"iterations={result.iterations} final_cost={result.final_cost:.6g}")

    _write_merged_csv(os.path.join(root, "merged.csv"), results)
    _write_prediction_csv(os.path.join(root, "prediction_table.csv"), results)
    return 0


def cmd_verify(cfg) -> int:
    root = output_root(cfg)
    os.makedirs(root, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    all_ok = True
    reports = []

    for system in SYSTEMS:
        model, cost, x0, _ = make_benchmark(system)
        deriv = check_derivatives(model, cost, sample_count=100, tol=1e-5,
                                  seed=cfg.seed)
        print(f"[{system}] {deriv.summary()}")
        all_ok = all_ok and deriv.passed

        for horizon in VERIFY_HORIZONS:
            controls = rng.uniform(-cfg.init_amplitude, cfg.init_amplitude,
                                   size=(horizon, model.control_dim))
            traj = rollout(model, cost, x0, controls)
            exp = expand_along(model, cost, traj)

            checks = [
                ("ilqr", backward_ilqr(exp), None),
            ]
            lam = initial_multiplier_estimate(exp)
            checks.append(("newton", backward_newton(exp, lam), lam))
            checks.append(("ddp", backward_ddp(exp), None))

            for label, sol, multipliers in checks:
                report = verify_equivalence(sol, exp, multipliers, tol=1e-8)
                reports.append(report)
                print(f"[{system}] {label:6s} {report.summary()}")
                all_ok = all_ok and report.passed

    write_verification_json(os.path.join(root, "verify_report.json"), reports)
    print("verification:", "PASS" if all_ok else "FAIL")
    return 0 if all_ok else 1


def _add_common_flags(sub):
    sub.add_argument("--config", help="key=value configuration file")
    sub.add_argument("--system", help="pendulum or cartpole")
    sub.add_argument("--method", help="ilqr, newton, ddp, hybrid, all, or a comma list")
    sub.add_argument("--seed", type=int, help="random seed")
    sub.add_argument("--out", help="output directory root")
    sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override any configuration key (repeatable)")


def _collect_pairs(args):
    pairs = {}
    if args.config:
        pairs.update(parse_kv_file(args.config))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    if args.system is not None:
        pairs["system"] = args.system
    if args.method is not None:
        pairs["method"] = args.method
    if args.seed is not None:
        pairs["seed"] = str(args.seed)
    if args.out is not None:
        pairs["out"] = args.out
    return pairs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trajopt",
        description="Trajectory optimization benchmark runner")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "compare", "verify"):
        _add_common_flags(subparsers.add_parser(name))

    args = parser.parse_args(argv)
    try:
        cfg = build_config(_collect_pairs(args))
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    dispatch = {"run": cmd_run, "compare": cmd_compare, "verify": cmd_verify}
    try:
        return dispatch[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except TrajoptError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
