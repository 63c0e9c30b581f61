import time

import numpy as np
import pytest

from quadtwist.scenario import preset, run_scenario

_CACHE = {}
_ACCEPTANCE = pytest.StashKey[list]()


def cached_run(scenario: str, controller: str):
    """Full-length preset runs are a few seconds each; share them across tests."""
    key = (scenario, controller)
    if key not in _CACHE:
        start = time.perf_counter()
        log = run_scenario(preset(scenario), controller)
        log.meta["wall_time"] = time.perf_counter() - start
        _CACHE[key] = log
    return _CACHE[key]


@pytest.fixture(scope="session")
def runs():
    return cached_run


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def report(request):
    """Record one acceptance verdict line; all lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def emit(criterion: str, ok: bool, detail: str):
        line = f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
