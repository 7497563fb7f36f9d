from __future__ import annotations

from dataclasses import dataclass

import pytest

from sea_impedance.config import bundled_config
from sea_impedance.sea import SeaParameters, WeightingSet, build_generalized_plant
from sea_impedance.synthesis import close_loop, synthesize_mixed


@dataclass
class BundledCase:
    name: str
    config: object
    plant: object
    controller: object
    closed_loop: object


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one ``(criterion, passed, detail)`` line per acceptance check."""
    return request.config.stash[ACCEPTANCE_KEY]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def params():
    return SeaParameters()


@pytest.fixture(scope="session")
def weights():
    return WeightingSet()


@pytest.fixture(scope="session")
def bundled_cases():
    """Synthesized controllers for the bundled cases, computed once."""
    out = {}
    for name in ("0.3", "0.6", "0.9", "general"):
        cfg = bundled_config(name)
        plant = build_generalized_plant(cfg.sea, cfg.impedance, cfg.weights)
        k = synthesize_mixed(plant, cfg.bounds)
        out[name] = BundledCase(name, cfg, plant, k, close_loop(plant, k))
    return out
