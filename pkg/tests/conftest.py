import json
from dataclasses import dataclass
from pathlib import Path

import pytest

from unitphysics.reactor import ReactorConfig, integrate
from unitphysics.thermochem import default_mechanism, mechanism_from_dict

DATA = Path(__file__).parent / "data"


def toy_isomer_mechanism(A: float = 1.0, W: float = 10.0):
    """Single irreversible isomerisation A => B with identical thermo.

    Both species share one NASA-7 set, so the reaction releases no heat and
    the reactor reduces to the linear ODE dY_A/dt = -A Y_A.
    """
    nasa = [2.5, 0.0, 0.0, 0.0, 0.0, -1000.0, 4.0]
    thermo = {"model": "NASA7", "temperature-ranges": [200.0, 1000.0, 5000.0], "data": [nasa, nasa]}
    return mechanism_from_dict({
        "mechanism": {"id": "toy-isomer"},
        "units": {"length": "m", "quantity": "kmol", "activation-energy": "J/kmol"},
        "elements": {"X": W},
        "species": [
            {"name": "A", "composition": {"X": 1}, "thermo": thermo},
            {"name": "B", "composition": {"X": 1}, "thermo": thermo},
        ],
        "reactions": [{"equation": "A => B", "rate-constant": {"A": A, "b": 0.0, "Ea": 0.0}}],
    }, source="toy")


@pytest.fixture(scope="session")
def mech():
    return default_mechanism()


@pytest.fixture(scope="session")
def reference():
    return json.loads((DATA / "reference_kinetics.json").read_text())


@pytest.fixture(scope="session")
def benchmark_config():
    return ReactorConfig(T0=1300.0, p0=101325.0, phi=1.0, oxidizer="O2", dt=1e-10, t_end=2e-5)


@pytest.fixture(scope="session")
def benchmark_trajectory(mech, benchmark_config):
    return integrate(benchmark_config, mech)


@pytest.fixture(scope="session")
def air_trajectory(mech):
    cfg = ReactorConfig(T0=1300.0, p0=101325.0, phi=1.0, oxidizer="air", dt=1e-10, t_end=4e-5)
    return integrate(cfg, mech)


@pytest.fixture(scope="session")
def benchmark_file(benchmark_trajectory, tmp_path_factory):
    path = tmp_path_factory.mktemp("golden") / "benchmark.jsonl"
    benchmark_trajectory.write(path)
    return path


@dataclass
class ScriptedRun:
    output: object
    graph: object
    usage: list
    config: object


def reactor_input():
    from unitphysics.orchestrator import SupervisorInput, fixtures_dir
    from unitphysics.primitives import default_suite, default_suite_path

    query = (fixtures_dir() / "reactor_query.txt").read_text()
    return SupervisorInput(query, default_suite(), default_suite_path().read_text())


def scripted_run(root, fixture="three_stage.json", workers=1, **budget):
    """Run the loop against a shipped stub fixture with the fixture run config."""
    from unitphysics.orchestrator import (Budget, StateGraph, fixtures_dir, load_run_config, make_backend,
                                          run_loop)

    cfg = load_run_config(fixtures_dir() / "three_stage_run.yaml")
    cfg.sandbox.root = str(root)
    loop_cfg = cfg.loop_config()
    loop_cfg.workers = workers
    if budget:
        loop_cfg.budget = Budget(**{"max_iterations": cfg.budget.max_iterations,
                                    "max_repairs": cfg.budget.max_repairs,
                                    "retrieval": cfg.budget.retrieval, **budget})
    usage = []
    backend = make_backend(f"stub:{fixture}", on_usage=lambda r, i, o, c: usage.append((r, i, o, c)))
    graph = StateGraph(path=Path(root) / "graph.jsonl", clock=lambda: 0.0)
    out = run_loop(reactor_input(), backend, config=loop_cfg, graph=graph)
    return ScriptedRun(out, graph, usage, loop_cfg)


@pytest.fixture(scope="session")
def three_stage(tmp_path_factory):
    return scripted_run(tmp_path_factory.mktemp("three_stage"))
