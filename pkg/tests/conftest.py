import json
import time

import numpy as np
import pytest
from hypothesis import settings

from magnls.harness import SweepConfig, epsilon_sweep, table_for
from magnls.instance import preset
from magnls.limiting import LimitingSpec, SolverConfig, minimize_quotient

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")

# acceptance lines, printed after the run
ACCEPTANCE: dict[str, str] = {}
# wall-clock seconds spent building the shared session fixtures
TIMINGS: dict[str, float] = {}


def record_acceptance(key: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[key] = f"criterion {key:<4} {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")

    def order(k):
        digits = "".join(c for c in k if c.isdigit())
        return (int(digits), k)

    for key in sorted(ACCEPTANCE, key=order):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture(scope="session")
def limiting_results():
    """Cache of 128-node limiting solves keyed by (V*, B*)."""
    cache = {}

    def get(v, b, **kw):
        key = (v, b, tuple(sorted((k, repr(x)) for k, x in kw.items())))
        if key not in cache:
            cache[key] = minimize_quotient(LimitingSpec(v, b), **kw)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def quadratic_instance():
    return preset("quadratic-B")


@pytest.fixture(scope="session")
def quadratic_table(quadratic_instance):
    t0 = time.perf_counter()
    table = table_for(quadratic_instance, 41, SolverConfig())
    TIMINGS["quadratic_table"] = time.perf_counter() - t0
    return table


@pytest.fixture(scope="session")
def quadratic_table_file(quadratic_table, tmp_path_factory):
    path = tmp_path_factory.mktemp("table") / "table.json"
    quadratic_table.save(path)
    return path


@pytest.fixture(scope="session")
def quadratic_sweep(quadratic_instance, quadratic_table):
    t0 = time.perf_counter()
    report = epsilon_sweep(quadratic_instance, [0.1, 0.07, 0.05], SweepConfig(), quadratic_table)
    TIMINGS["quadratic_sweep"] = time.perf_counter() - t0
    return report


def strip_timestamps(text: str) -> dict:
    data = json.loads(text)
    data.get("meta", {}).pop("timestamp", None)
    return data


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
