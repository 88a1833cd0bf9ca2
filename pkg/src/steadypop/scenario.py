"""Scenario files: schema, loading and the bundled catalog."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import ratedsl
from .errors import ExprSyntaxError, ScenarioError
from .model import AgeGrid, Density, ModelKind, Monotonicity, RateFunction, VitalRates

__all__ = [
    "SCENARIO_SCHEMA", "SolverControls", "Scenario", "scenario_from_dict",
    "load_scenario", "catalog_names", "load_catalog", "scenario_hash",
]

_RATE_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"expr": {"type": "string"}},
            "required": ["expr"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "family": {"type": "string"},
                "params": {"type": "object", "additionalProperties": {"type": "number"}},
            },
            "required": ["family", "params"],
            "additionalProperties": False,
        },
    ]
}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model_kind", "m", "n", "beta", "mu"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "model_kind": {"enum": [kind.value for kind in ModelKind]},
        "m": {"type": "number", "exclusiveMinimum": 0},
        "n": {"type": "integer", "minimum": 2},
        "beta": _RATE_SCHEMA,
        "mu": _RATE_SCHEMA,
        "mu0": {"type": "number", "minimum": 0},
        "beta_monotonicity": {"enum": [mono.value for mono in Monotonicity]},
        "saturation_K": {"type": "number", "exclusiveMinimum": 0},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "omega": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "alpha_bracket": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 2,
                    "maxItems": 2,
                },
            },
        },
        "initial": {
            "type": "object",
            "properties": {"expr": {"type": "string"}},
            "required": ["expr"],
            "additionalProperties": False,
        },
        "seed": {"type": "integer"},
    },
}


@dataclass(frozen=True)
class SolverControls:
    tol: float = 1e-9
    max_iter: int = 10_000
    omega: float = 1.0
    alpha_bracket: tuple = (1e-8, 1e8)


@dataclass(frozen=True)
class Scenario:
    grid: AgeGrid
    rates: VitalRates
    solver: SolverControls = SolverControls()
    initial: Optional[RateFunction] = None
    seed: Optional[int] = None
    name: str = ""
    spec: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def kind(self) -> ModelKind:
        return self.rates.model_kind

    def with_n(self, n: int) -> "Scenario":
        """Same model on a grid with ``n`` cells."""
        spec = copy.deepcopy(self.spec)
        if spec:
            spec["n"] = int(n)
        return Scenario(self.grid.refine(n), self.rates, self.solver, self.initial,
                        self.seed, self.name, spec)

    def initial_density(self) -> Density:
        """The scenario's initial density, or the unit-mass uniform one."""
        if self.initial is None:
            return Density.uniform(self.grid)
        values = self.initial(self.grid.nodes, np.zeros(self.grid.n))
        if np.any(values < 0):
            raise ScenarioError("initial density takes negative values")
        return Density(self.grid, values)


def _rate(spec, what):
    try:
        if "expr" in spec:
            return RateFunction.from_expr(spec["expr"])
        return RateFunction.from_family(spec["family"], spec["params"])
    except ExprSyntaxError as exc:
        raise ScenarioError(f"{what}: {exc}") from exc


def scenario_from_dict(spec: dict) -> Scenario:
    """Validate ``spec`` against the schema and build a :class:`Scenario`."""
    try:
        jsonschema.validate(spec, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"schema violation at {where}: {exc.message}") from exc
    rates = VitalRates(
        beta=_rate(spec["beta"], "beta"),
        mu=_rate(spec["mu"], "mu"),
        mu0=float(spec.get("mu0", 0.0)),
        beta_monotonicity=spec.get("beta_monotonicity", "none"),
        model_kind=spec["model_kind"],
        saturation_K=spec.get("saturation_K"),
    )
    solver_spec = spec.get("solver", {})
    solver = SolverControls(
        tol=float(solver_spec.get("tol", SolverControls.tol)),
        max_iter=int(solver_spec.get("max_iter", SolverControls.max_iter)),
        omega=float(solver_spec.get("omega", SolverControls.omega)),
        alpha_bracket=tuple(float(v) for v in solver_spec.get("alpha_bracket", SolverControls.alpha_bracket)),
    )
    if solver.alpha_bracket[0] >= solver.alpha_bracket[1]:
        raise ScenarioError("solver.alpha_bracket must be increasing")
    initial = None
    if "initial" in spec:
        initial = _rate(spec["initial"], "initial")
        if "x" in ratedsl.variables(initial.expr):
            raise ScenarioError("initial density may only depend on a")
    return Scenario(
        grid=AgeGrid(spec["m"], spec["n"]),
        rates=rates,
        solver=solver,
        initial=initial,
        seed=spec.get("seed"),
        name=spec.get("name", ""),
        spec=copy.deepcopy(spec),
    )


def catalog_names() -> list:
    root = resources.files("steadypop") / "catalog"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _catalog_text(name: str) -> str:
    path = resources.files("steadypop") / "catalog" / f"{name}.json"
    if not path.is_file():
        raise ScenarioError(f"no catalog scenario {name!r}; available: {catalog_names()}")
    return path.read_text()


def parse_scenario_text(text: str) -> Scenario:
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ScenarioError(f"malformed JSON at byte {offset}: {exc.msg}") from exc
    return scenario_from_dict(spec)


def load_catalog(name: str) -> Scenario:
    return parse_scenario_text(_catalog_text(name))


def load_scenario(source) -> Scenario:
    """Load from a dict, a file path, or ``catalog:<name>``."""
    if isinstance(source, Scenario):
        return source
    if isinstance(source, dict):
        return scenario_from_dict(source)
    source = str(source)
    if source.startswith("catalog:"):
        return load_catalog(source[len("catalog:"):])
    path = Path(source)
    if not path.is_file():
        raise ScenarioError(f"scenario file not found: {source}")
    return parse_scenario_text(path.read_text())


def scenario_hash(scenario: Scenario) -> str:
    canonical = json.dumps(scenario.spec, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
