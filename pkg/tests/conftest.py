import random
from pathlib import Path

import pytest
from hypothesis import strategies as st

from reach_entropy.entropy_graph import build_graph
from reach_entropy.generators import random_dag
from reach_entropy.pipeline import coarse_graph, run_pipeline
from reach_entropy.synthesis import check_reachability_satisfiable, synthesize

ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def record(request):
    """record(n, ok, detail) stores one pass/fail line for acceptance criterion n."""
    lines = request.config.stash.setdefault(ACCEPTANCE, {})

    def rec(n: int, ok: bool, detail: str):
        lines[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(lines[n])

    return rec


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])


@pytest.fixture(autouse=True)
def _cache_dir(tmp_path_factory, monkeypatch):
    monkeypatch.setenv("REACH_ENTROPY_CACHE_DIR", str(tmp_path_factory.getbasetemp() / "cache"))


@pytest.fixture(scope="session")
def room_report():
    cfg = Path(__file__).resolve().parents[1] / "configs" / "example3.toml"
    return run_pipeline(cfg, threads=4)


@st.composite
def dags(draw, max_nodes=8):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(1, max_nodes))
    return random_dag(random.Random(seed), n)


def graph_of(d, mode="include-target"):
    return build_graph(d, weight_mode=mode)


def pipeline_pieces(system, spec, mode="input", weight_mode="exclude-target"):
    """(graph, partition, controller) from synthesis and coarsening; graph is None when
    synthesis fails or there is nothing to control."""
    controller = synthesize(system, spec.safe, spec.target)
    ok, _ = check_reachability_satisfiable(controller, spec.safe, spec.target)
    if not ok or not controller.assignment:
        return None, None, controller
    partition, graph, _ = coarse_graph(system, controller, spec.target, mode, True, weight_mode)
    return graph, partition, controller
