"""Command-line frontend: ``steadypop <command> --scenario <path|catalog:name>``.

Reports go to stdout as JSON, tabular data to CSV files under ``--out``,
logs to stderr. Exit codes: 0 success, 1 property failure, 2 input error,
3 solver error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import operator_lab as ol
from . import verify as vf
from .errors import InputError, MonotonicityViolation, ScenarioError, SolverError
from .model import (
    Density, ModelKind, Monotonicity, RateFunction, cumulative_hazard, environment_profiles,
)
from .scenario import catalog_names, load_scenario, scenario_from_dict, scenario_hash
from .sim import simulate
from .spectral import spectral_bound
from .steady import solve_steady

log = logging.getLogger("steadypop")

EXIT_OK, EXIT_PROPERTY, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
DEFAULT_SCENARIO = "catalog:hierarchic_reference"
# scenario-level checks in verify run on at most this many cells
VERIFY_MAX_N = 500


def _clean(obj):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(value):
    if value is None or value == "":
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


class Run:
    """Collects one command's report."""

    def __init__(self, command, args):
        self.command = command
        self.args = args
        self.scenario = None
        self.outputs = {}
        self.files = []
        self.warnings = []
        self.error = None
        self.seed = None
        self._start = time.perf_counter()

    @property
    def out_dir(self):
        return Path(self.args.out) if self.args.out else None

    def csv(self, name, header, rows):
        if self.out_dir is None:
            return
        _write_csv(self.out_dir / name, header, rows)
        self.files.append(name)

    def report(self) -> dict:
        rep = {
            "command": self.command,
            "scenario": self.scenario.name if self.scenario else None,
            "scenario_hash": scenario_hash(self.scenario) if self.scenario else None,
            "seed": self.seed,
            "outputs": self.outputs,
            "files": self.files,
            "warnings": self.warnings,
            "error": self.error,
        }
        if getattr(self.args, "timing", False):
            rep["wall_time"] = time.perf_counter() - self._start
        return _clean(rep)


def _density_from_spec(spec: str, scenario) -> Density:
    grid = scenario.grid
    if spec in (None, "", "uniform"):
        return Density.uniform(grid)
    if spec == "initial":
        return scenario.initial_density()
    try:
        func = RateFunction.from_expr(spec)
    except InputError as exc:
        raise ScenarioError(f"--u: {exc}") from exc
    values = func(grid.nodes, np.zeros(grid.n))
    if np.any(values < 0) or not np.any(values > 0):
        raise ScenarioError("--u must be nonnegative and not identically zero")
    return Density(grid, values)


# ---------------------------------------------------------------------------
# commands

def cmd_spectral_bound(run: Run):
    sc = run.scenario
    u = _density_from_spec(run.args.u, sc)
    rep = spectral_bound(u, sc)
    run.warnings.extend(rep.warnings)
    run.outputs = {
        "u": run.args.u,
        "spectral_bound": rep.spectral_bound,
        "net_reproduction": rep.net_reproduction,
        "bracket": list(rep.bracket),
        "iterations": rep.iterations,
        "sign_consistent": rep.sign_consistent,
    }
    return EXIT_OK


def cmd_steady_state(run: Run):
    sc = run.scenario
    res = solve_steady(sc)
    run.warnings.extend(res.warnings)
    p = res.density
    mortality, fertility = environment_profiles(p, sc.rates)
    pi = np.exp(-cumulative_hazard(mortality.values, sc.grid.h))
    run.outputs = {
        "P_star": res.total,
        "alpha_star": res.alpha_star,
        "iterations": res.iterations,
        "l1_step_norms": list(res.l1_step_norms),
        "residual_boundary": res.residual_boundary,
        "residual_profile": res.residual_profile,
        "net_reproduction_at_solution": res.net_reproduction_at_solution,
    }
    run.csv("steady_state.csv", ["a", "p_star", "pi", "beta_profile", "mu_profile"],
            zip(sc.grid.nodes, p.values, pi, fertility.values, mortality.values))
    return EXIT_OK


def cmd_simulate(run: Run):
    sc = run.scenario
    args = run.args
    horizon = args.horizon if args.horizon is not None else 3.0 * sc.grid.m
    stride = args.stride if args.stride is not None else sc.grid.n
    if stride < 1:
        raise ScenarioError("--stride must be a positive integer")
    if args.from_steady is not None:
        p_star = solve_steady(sc).density
        p0 = args.from_steady * p_star
        run.outputs["P_star"] = p_star.total()
    else:
        p0 = sc.initial_density()
    res = simulate(sc, p0, horizon, stride=stride)
    run.outputs.update({
        "horizon": horizon,
        "steps": len(res.times) - 1,
        "initial_P": float(res.totals[0]),
        "final_P": float(res.totals[-1]),
        "final_birth_rate": float(res.births[-1]),
        "extinct": res.extinct,
        "max_value": res.max_value,
        "min_value": res.min_value,
        "snapshot_times": [t for t, _ in res.snapshots],
    })
    run.csv("series.csv", ["t", "P", "birth_rate"], zip(res.times, res.totals, res.births))
    rows = ((t, a, v) for t, d in res.snapshots for a, v in zip(sc.grid.nodes, d.values))
    run.csv("snapshots.csv", ["t", "a", "p"], rows)
    return EXIT_OK


def _scenario_checks(sc) -> dict:
    """Checks of one scenario's own declarations and operators."""
    checks = {}
    problems = sc.rates.diagnostics(sc.grid.m)
    mono = [p for p in problems if p.startswith("beta declared")]
    checks["declared_metadata"] = {
        "ok": not problems,
        "failures": [f"{MonotonicityViolation.__name__}: {p}" if p in mono else p for p in problems],
    }
    small = sc.with_n(min(sc.grid.n, VERIFY_MAX_N))
    u = small.initial_density()
    if not u.total() > 0:
        u = Density.uniform(small.grid)
    ulps = ol.split_reconstruction_error(u, small)
    checks["split_exactness"] = {"ok": ulps <= 1.0, "ulps": ulps}
    if (sc.kind is not ModelKind.LINEAR and sc.rates.beta_monotonicity is Monotonicity.DECREASING
            and not mono):
        alphas = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
        try:
            values = ol.ray_monotonicity_scan(u, alphas, small)
            checks["ray_monotonicity"] = {"ok": True, "alphas": alphas, "spectral_bounds": list(values)}
        except MonotonicityViolation as exc:
            checks["ray_monotonicity"] = {"ok": False, "failures": [f"{type(exc).__name__}: {exc}"]}
    return checks


def cmd_verify(run: Run):
    args = run.args
    sc = run.scenario
    run.seed = args.seed if args.seed is not None else (sc.seed if sc.seed is not None else 0)
    if args.draws < 0:
        raise ScenarioError("--draws must be nonnegative")
    results = vf.run_suites(run.seed, args.draws)
    properties = {name: res.to_json() for name, res in results.items()}
    if args.scenario:
        targets = {sc.name or "scenario": sc}
    else:
        targets = {name: load_scenario(f"catalog:{name}") for name in catalog_names()}
    checks = {name: _scenario_checks(target) for name, target in targets.items()}
    if args.dump:
        if run.out_dir is None:
            raise ScenarioError("--dump needs --out")
        written = ol.dump_matrices(sc.initial_density(), sc, run.out_dir)
        run.files.extend(Path(p).name for p in written)
    failed = any(r.failed for r in results.values()) or any(
        not c["ok"] for per in checks.values() for c in per.values())
    run.outputs = {
        "draws": args.draws,
        "properties": properties,
        "scenario_checks": checks,
        "passed": not failed,
    }
    return EXIT_PROPERTY if failed else EXIT_OK


def _set_path(spec: dict, path: str, raw: str):
    keys = path.split(".")
    node = spec
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ScenarioError(f"--param {path!r} does not address a scenario field")
        node = node[key]
    last = keys[-1]
    if not isinstance(node, dict) or last not in node:
        raise ScenarioError(f"--param {path!r} does not address a scenario field")
    current = node[last]
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ScenarioError(f"--param {path!r} is not numeric")
    node[last] = int(raw) if isinstance(current, int) else float(raw)


def _sweep_point(args):
    base, path, raw = args
    row = {"value": raw, "s": None, "R": None, "P_star": None, "error_code": ""}
    spec = copy.deepcopy(base)
    try:
        _set_path(spec, path, raw)
        sc = scenario_from_dict(spec)
        rep = spectral_bound(sc.initial_density(), sc)
        row["s"], row["R"] = rep.spectral_bound, rep.net_reproduction
        if sc.kind is not ModelKind.LINEAR:
            row["P_star"] = solve_steady(sc).total
    except (InputError, SolverError) as exc:
        row["error_code"] = exc.code
    except ValueError as exc:
        row["error_code"] = "input_error"
        log.warning("sweep value %s: %s", raw, exc)
    return row


def cmd_sweep(run: Run):
    args = run.args
    if not args.param or not args.values:
        raise ScenarioError("sweep needs --param and --values")
    raws = [v.strip() for v in args.values.split(",") if v.strip()]
    for raw in raws:
        try:
            float(raw)
        except ValueError as exc:
            raise ScenarioError(f"--values entry {raw!r} is not a number") from exc
    base = run.scenario.spec
    _set_path(copy.deepcopy(base), args.param, raws[0])  # bad path fails the whole command
    jobs = [(base, args.param, raw) for raw in raws]
    with ThreadPoolExecutor(max_workers=vf.worker_count()) as pool:
        rows = list(pool.map(_sweep_point, jobs))
    run.outputs = {"param": args.param, "rows": rows}
    header = ["value", "s", "R", "P_star", "error_code"]
    run.csv("sweep.csv", header, ([r[k] for k in header] for r in rows))
    return EXIT_OK


COMMANDS = {
    "spectral-bound": cmd_spectral_bound,
    "steady-state": cmd_steady_state,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="steadypop", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file or catalog:<name>")
    common.add_argument("--out", help="directory for CSV outputs")
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    common.add_argument("--timing", action="store_true",
                        help="add wall time to the report (breaks byte-identical reruns)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectral-bound", parents=[common], help="s(B_u) and R(u)")
    p.add_argument("--u", default="uniform",
                   help="environment: 'uniform', 'initial' or an expression in a")
    sub.add_parser("steady-state", parents=[common], help="positive steady state")
    p = sub.add_parser("simulate", parents=[common], help="time integration")
    p.add_argument("--horizon", type=float, help="final time (default 3 m)")
    p.add_argument("--stride", type=int, help="steps between snapshots (default n)")
    p.add_argument("--from-steady", type=float, metavar="FACTOR",
                   help="start from FACTOR times the computed steady state")
    p = sub.add_parser("verify", parents=[common], help="randomized invariant suites")
    p.add_argument("--seed", type=int)
    p.add_argument("--draws", type=int, default=100)
    p.add_argument("--dump", action="store_true", help="write the operator matrices to --out")
    p = sub.add_parser("sweep", parents=[common], help="parameter sweep")
    p.add_argument("--param", help="dotted path of a numeric scenario field, e.g. beta.params.value")
    p.add_argument("--values", help="comma-separated values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    run = Run(args.command, args)
    code = EXIT_OK
    try:
        run.scenario = load_scenario(args.scenario or DEFAULT_SCENARIO)
        code = COMMANDS[args.command](run)
    except InputError as exc:
        code = EXIT_INPUT
        run.error = {"code": exc.code, "type": type(exc).__name__, "message": str(exc)}
    except SolverError as exc:
        code = EXIT_SOLVER
        run.error = {"code": exc.code, "type": type(exc).__name__, "message": str(exc)}
    except ValueError as exc:
        code = EXIT_INPUT
        run.error = {"code": "input_error", "type": type(exc).__name__, "message": str(exc)}
    if run.error:
        print(f"steadypop: {run.error['type']}: {run.error['message']}", file=sys.stderr)
    sys.stdout.write(json.dumps(run.report(), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
