from __future__ import annotations

import pytest

from treepack.exceptions import InfeasibleError, PreconditionError
from treepack.graph_core import SimpleGraph, complete_graph
from treepack.packer import HeuristicConfig, gl_instance, pack_exact, pack_heuristic, ringel_instances, verify_certificate
from treepack.packer.heuristic import _residual_parts, _tail_feasible
from treepack.tree_tools import RootedForest


def test_trivial_instance():
    outcome = pack_heuristic(SimpleGraph.empty(3), {})
    assert outcome.ok
    assert outcome.certificate.assignments == ()
    assert outcome.report["path"] == "trivial"

    single = {1: RootedForest.from_edges(1, [], [0])}
    outcome = pack_heuristic(SimpleGraph.empty(3), single)
    assert outcome.certificate.as_dict() == {1: (0,)}


def test_edge_count_mismatch():
    with pytest.raises(InfeasibleError) as info:
        pack_heuristic(complete_graph(4), [RootedForest.from_edges(2, [(0, 1)])])
    assert info.value.details == {"reason": "edge-count", "edges": 6, "trees": 1}


def test_small_instances_use_exact_search():
    G, trees = gl_instance(6, 2)
    outcome = pack_heuristic(G, trees)
    assert outcome.report["path"] == "exact"
    assert outcome.ok
    assert verify_certificate(G, trees, outcome.certificate).ok
    assert outcome.certificate == pack_exact(G, trees).certificate


def test_ringel_order_two():
    ((_, G, trees),) = ringel_instances(2)
    outcome = pack_heuristic(G, trees)
    assert outcome.ok
    assert verify_certificate(G, trees, outcome.certificate).ok


@pytest.mark.parametrize("seed", range(3))
def test_pipeline_returns_only_verified_certificates(seed):
    G, trees = gl_instance(12, seed, delta=3, unbounded_below=3)
    outcome = pack_heuristic(G, trees, HeuristicConfig(seed=seed, restarts=2))
    report = outcome.report
    assert report["path"] == "pipeline"
    assert report["n"] == 12 and report["trees"] == 12
    assert 1 <= len(report["attempts"]) <= 2
    assert all("seconds" in attempt for attempt in report["attempts"])
    if outcome.ok:
        assert report["attempts"][-1]["ok"]
        assert verify_certificate(G, trees, outcome.certificate).ok
    else:
        assert len(report["attempts"]) == 2
        assert report["phase"] is not None
        assert report["residual_edges"] >= 0


def test_pipeline_without_covering_or_vortex():
    G, trees = gl_instance(10, 1, delta=3, unbounded_below=3)
    config = HeuristicConfig(seed=1, restarts=2, vortex_levels=0, covering=False)
    outcome = pack_heuristic(G, trees, config)
    assert outcome.report["config"]["vortex_levels"] == 0
    for attempt in outcome.report["attempts"]:
        assert attempt.get("vortex") is None
        assert "cover" not in attempt
    if outcome.ok:
        assert verify_certificate(G, trees, outcome.certificate).ok


@pytest.mark.parametrize(
    "overrides",
    [{"restarts": 0}, {"reserve_fraction": 1.0}, {"reserve_fraction": -0.1}, {"vortex_levels": -1}],
)
def test_config_validation(overrides):
    with pytest.raises(PreconditionError):
        HeuristicConfig(**overrides)


def test_config_defaults_come_from_settings():
    config = HeuristicConfig()
    assert config.restarts == 5
    assert config.reserve_fraction == 0.15
    assert config.exact_finish_edges == 30
    assert config.tail_samples == 12
    assert config.time_limit == 120


@pytest.mark.slow
def test_ringel_order_three():
    for _, G, trees in ringel_instances(3):
        outcome = pack_heuristic(G, trees)
        assert outcome.ok
        assert verify_certificate(G, trees, outcome.certificate).ok



def test_time_limit_stops_restarts():
    G, trees = gl_instance(12, 1, delta=3, unbounded_below=3)
    outcome = pack_heuristic(G, trees, HeuristicConfig(seed=1, restarts=4, time_limit=0))
    assert len(outcome.report["attempts"]) == 1
    assert outcome.ok or outcome.report["timed_out"]


@pytest.mark.parametrize("seed", range(3))
def test_pipeline_reports_finish_rounds(seed):
    G, trees = gl_instance(14, seed, delta=3, unbounded_below=3)
    outcome = pack_heuristic(G, trees, HeuristicConfig(seed=seed))
    assert outcome.report["path"] == "pipeline"
    for attempt in outcome.report["attempts"]:
        if attempt["ok"]:
            assert attempt["bulk_trees"] >= 0
            assert set(attempt["finish"]) == {"nodes", "rounds", "filtered", "stalled"}
            assert attempt["finish"]["rounds"] <= HeuristicConfig().finish_backoff


def test_residual_parts():
    K4 = [(u, v) for u in range(4) for v in range(u + 1, 4)]
    H = SimpleGraph.from_edges(7, K4 + [(4, 5)])
    assert _residual_parts(H, set()) == [(6, 4), (1, 2)]
    assert _residual_parts(H, {(0, 1), (0, 2), (0, 3)}) == [(3, 3), (1, 2)]
    assert _residual_parts(H, set(H.edges)) == []


@pytest.mark.parametrize(
    "parts,sizes,expected",
    [
        ([(3, 4)], [3], True),
        ([(3, 3)], [3], False),
        ([(2, 3), (2, 3)], [2, 2], True),
        ([(3, 4), (1, 2)], [2, 2], False),
        ([(3, 4), (1, 2)], [3, 1, 0], True),
        ([(4, 5)], [3], False),
        ([], [0], True),
    ],
)
def test_tail_feasibility(parts, sizes, expected):
    assert _tail_feasible(parts, sizes) is expected


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_order_twenty(seed):
    G, trees = gl_instance(20, seed, delta=3, unbounded_below=3)
    outcome = pack_heuristic(G, trees, HeuristicConfig(seed=seed))
    assert outcome.ok
    assert verify_certificate(G, trees, outcome.certificate).ok


@pytest.mark.slow
@pytest.mark.parametrize("n", [20, 30, 40])
def test_success_rate_on_bounded_degree_sequences(n):
    verified = 0
    for seed in range(20):
        G, trees = gl_instance(n, seed, delta=3, unbounded_below=3)
        outcome = pack_heuristic(G, trees, HeuristicConfig(seed=seed))
        if outcome.ok:
            assert verify_certificate(G, trees, outcome.certificate).ok
            verified += 1
    assert verified >= 14
