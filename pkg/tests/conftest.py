import math
import sys

import pytest

from steadypop.scenario import load_catalog, scenario_from_dict

M = 5.0
E5 = math.exp(-5.0)


def make_scenario(kind="linear", beta=2.0, mu=1.0, n=400, m=M, **extra):
    """Scenario dict shorthand: numbers become constant families, strings expressions."""
    def rate(value):
        if isinstance(value, str):
            return {"expr": value}
        return {"family": "constant", "params": {"value": float(value)}}

    spec = {"model_kind": kind, "m": m, "n": n, "beta": rate(beta), "mu": rate(mu),
            "mu0": extra.pop("mu0", 0.0)}
    spec.update(extra)
    return scenario_from_dict(spec)


@pytest.fixture(scope="session")
def catalog():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_catalog(name)
        return cache[name]
    return get


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
