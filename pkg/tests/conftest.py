"""Shared fixtures: full scenario runs are expensive, so each is done once per session."""
import numpy as np
import pytest
from hypothesis import settings

from adaptive_pll.config import SimConfig
from adaptive_pll.engine import builtin_scenarios, run_scenario

settings.register_profile("repo", deadline=None, max_examples=50)
settings.load_profile("repo")


class ScenarioRuns:
    """Memoised ``run_scenario`` keyed by scenario, variant and config overrides."""

    def __init__(self):
        self._cache = {}
        self.timings = {}

    def __call__(self, name, variant="adaptive", **changes):
        key = (name, variant, tuple(sorted(changes.items())))
        if key not in self._cache:
            import time
            cfg = SimConfig().replace(**changes) if changes else SimConfig()
            sc = builtin_scenarios(cfg)[name]
            t0 = time.perf_counter()
            self._cache[key] = run_scenario(cfg, sc, variant=variant)
            self.timings[key] = time.perf_counter() - t0
        return self._cache[key]


@pytest.fixture(scope="session")
def runs():
    return ScenarioRuns()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def per_unit_bases(cfg=None):
    """Voltage base = nominal grid amplitude, current base = peak current at rated P."""
    cfg = cfg or SimConfig()
    V_b = cfg.grid.V_g
    return V_b, 2.0 * cfg.P_ref / (3.0 * V_b)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        # criterion number first, PASS/FAIL before NOTE
        for line in sorted(ACCEPTANCE_LINES, key=lambda ln: (ln.split("criterion ")[1][0],
                                                               ln.startswith("[NOTE]"))):
            terminalreporter.write_line(line)
