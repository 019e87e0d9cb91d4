import math

import numpy as np
import pytest

from fognite.errors import InvalidInputError
from fognite.grid import (
    EnergyProfile,
    FogNode,
    GridState,
    Link,
    Task,
    service_time_ms,
    task_energy,
)
from fognite.twin import (
    PerturbationConfig,
    SafetyThresholds,
    TwinVerdict,
    cascade_failure_probability,
    cloud_forecast,
    edge_replay,
    gate_decision,
    health_report,
    path_failure_probability,
    projected_utilization,
)

QUIET = PerturbationConfig(
    cpu_jitter=0.0, delay_range=(0.0, 0.0), loss_range=(0.0, 0.0), replicas=5, max_retries=3
)


def grid_with(queue=(), **node_kw):
    node_kw.setdefault("cpu_capacity", 50.0)
    node_kw.setdefault("mem_capacity", 32.0)
    node = FogNode(id="n", queue=list(queue), **node_kw)
    tasks = {
        tid: Task(tid, cpu_demand=10.0, mem_demand=1.0, data_size_kb=8.0,
                  created_at=0.0, deadline=1000.0)
        for tid in queue
    }
    return GridState(nodes={"n": node}, links=[], tasks=tasks)


def make_task(demand=25.0):
    return Task("t", cpu_demand=demand, mem_demand=2.0, data_size_kb=64.0,
                created_at=0.0, deadline=2000.0)


# --- cascade rule ---------------------------------------------------------------


def test_cascade_two_factor_exact():
    got = cascade_failure_probability([0.1], [0.2])
    assert got == 1.0 - (1.0 - 0.1) * (1.0 - 0.2)
    assert got == pytest.approx(0.28)


def test_cascade_four_hop_exact():
    got = cascade_failure_probability([0.1] * 4, [0.0] * 4)
    assert got == pytest.approx(0.3439, abs=1e-12)


def test_cascade_matches_monte_carlo():
    node_p = [0.05, 0.2, 0.1]
    link_p = [0.01, 0.15, 0.0]
    exact = cascade_failure_probability(node_p, link_p)
    rng = np.random.default_rng(0)
    n = 100_000
    draws = rng.random((n, 6))
    fail = np.zeros(n, dtype=bool)
    for i, p in enumerate(node_p + link_p):
        fail |= draws[:, i] < p
    assert abs(fail.mean() - exact) < 0.01


def test_cascade_monotonicity_and_edges():
    assert cascade_failure_probability([], []) == 0.0
    assert cascade_failure_probability([1.0], [0.0]) == 1.0
    base = cascade_failure_probability([0.1, 0.1], [0.05, 0.0])
    longer = cascade_failure_probability([0.1, 0.1, 0.01], [0.05, 0.0, 0.0])
    riskier = cascade_failure_probability([0.1, 0.2], [0.05, 0.0])
    assert longer >= base and riskier >= base


def test_cascade_validation():
    with pytest.raises(InvalidInputError):
        cascade_failure_probability([0.1], [])
    with pytest.raises(InvalidInputError):
        cascade_failure_probability([1.5], [0.0])
    with pytest.raises(InvalidInputError):
        cascade_failure_probability([0.1], [-0.1])


def test_path_probability_uses_grid_links():
    nodes = {
        "a": FogNode(id="a", cpu_capacity=10, mem_capacity=10, failure_prob=0.0),
        "b": FogNode(id="b", cpu_capacity=10, mem_capacity=10, failure_prob=0.1),
    }
    links = [Link(src="a", dst="b", delay_ms=5.0, failure_prob=0.2)]
    grid = GridState(nodes=nodes, links=links)
    got = path_failure_probability(grid, [("a", "b")])
    assert got == pytest.approx(0.28)
    # unmodeled link contributes zero link risk
    assert path_failure_probability(grid, [("b", "a")]) == pytest.approx(0.0)
    with pytest.raises(InvalidInputError):
        path_failure_probability(grid, [("a", "zz")])


# --- edge replay ------------------------------------------------------------------


def test_zero_perturbation_replay_is_nominal():
    grid = grid_with(queue=["q1"])
    task = make_task(25.0)
    node = grid.nodes["n"]
    replay = edge_replay(task, node, grid, QUIET, seed=0)
    assert replay.latency_ms == service_time_ms(node, 25.0) + node.base_latency_ms
    assert replay.energy == pytest.approx(task_energy(node, 25.0), rel=1e-12)
    assert replay.utilization == pytest.approx((10.0 + 25.0) / 50.0)
    assert replay.delivery_failures == 0


def test_replay_forced_loss_means_infinite_latency():
    cfg = PerturbationConfig(
        cpu_jitter=0.0, delay_range=(0.0, 0.0), loss_range=(1.0, 1.0),
        replicas=4, max_retries=2,
    )
    grid = grid_with()
    replay = edge_replay(make_task(), grid.nodes["n"], grid, cfg, seed=1)
    assert math.isinf(replay.latency_ms)
    assert replay.delivery_failures == 4


def test_replay_is_seeded_and_jitter_bounded():
    cfg = PerturbationConfig(cpu_jitter=0.2, delay_range=(10.0, 30.0),
                             loss_range=(0.0, 0.0), replicas=30, max_retries=0)
    grid = grid_with()
    node = grid.nodes["n"]
    a = edge_replay(make_task(), node, grid, cfg, seed=7)
    b = edge_replay(make_task(), node, grid, cfg, seed=7)
    assert (a.latency_ms, a.energy) == (b.latency_ms, b.energy)
    nominal = service_time_ms(node, 25.0)
    assert a.latency_ms <= nominal * 1.2 + node.base_latency_ms + 30.0
    assert a.latency_ms >= nominal * 0.8 + node.base_latency_ms + 10.0


def test_replay_validation():
    grid = grid_with(alive=False)
    with pytest.raises(InvalidInputError):
        edge_replay(make_task(), grid.nodes["n"], grid, QUIET, seed=0)
    live = grid_with()
    bad = PerturbationConfig(replicas=0)
    with pytest.raises(InvalidInputError):
        edge_replay(make_task(), live.nodes["n"], live, bad, seed=0)
    assert len(PerturbationConfig(cpu_jitter=2.0, loss_range=(0.5, 0.1),
                                  replicas=0, max_retries=-1).validate()) == 4


# --- projections ------------------------------------------------------------------


def test_projected_utilization_drains_queue():
    grid = grid_with(queue=["q1", "q2"])            # 20 demand on 50 capacity
    node = grid.nodes["n"]
    assert projected_utilization(grid, node, 0.0) == pytest.approx(0.4)
    assert projected_utilization(grid, node, 200.0) == pytest.approx(0.2)
    assert projected_utilization(grid, node, 10_000.0) == 0.0
    grid.nodes["n"].queue.extend(f"g{i}" for i in range(20))
    for i in range(20):
        grid.tasks[f"g{i}"] = Task(f"g{i}", cpu_demand=10.0, mem_demand=1.0,
                                   data_size_kb=1.0, created_at=0.0, deadline=1.0)
    assert projected_utilization(grid, node, 0.0) == 1.0      # clamped


def test_cloud_forecast_degenerates_with_no_live_nodes():
    grid = grid_with(alive=False)
    report = cloud_forecast(grid, horizon_ms=500.0)
    assert report.live_nodes == 0 and not report.stable
    assert report.p_fail_per_node == {} and report.projected_utilization == {}


def test_cloud_forecast_worst_incoming_link():
    nodes = {
        "a": FogNode(id="a", cpu_capacity=10, mem_capacity=10, failure_prob=0.1),
        "b": FogNode(id="b", cpu_capacity=10, mem_capacity=10),
    }
    links = [
        Link(src="b", dst="a", delay_ms=1.0, failure_prob=0.2),
        Link(src="a", dst="b", delay_ms=1.0, failure_prob=0.05),
    ]
    report = cloud_forecast(GridState(nodes=nodes, links=links), horizon_ms=0.0)
    assert report.p_fail_per_node["a"] == pytest.approx(0.28)
    assert report.p_fail_per_node["b"] == pytest.approx(0.05)
    assert report.stable


# --- the gate ---------------------------------------------------------------------


def gate(grid, thresholds, demand=25.0):
    return gate_decision(make_task(demand), "n", grid, QUIET, thresholds, seed=3)


def test_gate_approves_within_thresholds():
    verdict = gate(grid_with(), SafetyThresholds())
    assert verdict.approved and verdict.reason == ""
    assert verdict.predicted_latency_ms == pytest.approx(510.0)     # 500 service + 10 base
    assert verdict.predicted_utilization == pytest.approx(0.5)


def test_gate_reason_is_first_violated_threshold():
    grid = grid_with(failure_prob=0.5)
    tight_all = SafetyThresholds(
        max_latency_ms=1.0, max_energy=1e-9, max_p_fail=0.01, max_utilization=0.01
    )
    assert gate(grid, tight_all).reason == "latency"
    assert gate(grid, SafetyThresholds(max_energy=1e-9, max_p_fail=0.01,
                                       max_utilization=0.01)).reason == "energy"
    assert gate(grid, SafetyThresholds(max_p_fail=0.01,
                                       max_utilization=0.01)).reason == "failure-risk"
    assert gate(grid, SafetyThresholds(max_p_fail=0.6,
                                       max_utilization=0.01)).reason == "utilization"


def test_gate_dead_or_unknown_target():
    verdict = gate_decision(make_task(), "ghost", grid_with(), QUIET, SafetyThresholds(), 0)
    assert not verdict.approved and verdict.reason == "dead-node"
    assert verdict.p_fail == 1.0 and math.isinf(verdict.predicted_latency_ms)
    dead = grid_with(alive=False)
    assert gate_decision(make_task(), "n", dead, QUIET, SafetyThresholds(), 0).reason == "dead-node"


def test_gate_loosening_thresholds_never_flips_to_reject():
    grid = grid_with(queue=["q1"], failure_prob=0.1)
    tight = SafetyThresholds(max_latency_ms=520.0, max_energy=0.01,
                             max_p_fail=0.2, max_utilization=0.8)
    loose = SafetyThresholds(max_latency_ms=5_000.0, max_energy=1.0,
                             max_p_fail=0.99, max_utilization=1.0)
    if gate(grid, tight).approved:
        assert gate(grid, loose).approved


# --- monitoring -------------------------------------------------------------------


def test_health_report_tallies_and_histogram():
    grid = grid_with(queue=["q1"])                  # utilization 0.2
    verdicts = [
        TwinVerdict(True, 1.0, 0.0, 0.0, 0.1),
        TwinVerdict(True, 1.0, 0.0, 0.0, 0.1),
        TwinVerdict(False, 1.0, 0.0, 0.0, 0.1, reason="latency"),
        TwinVerdict(False, 1.0, 0.0, 0.0, 0.1, reason="dead-node"),
    ]
    report = health_report(grid, verdicts)
    counts = report["verdict_counts"]
    assert counts["approved"] == 2 and counts["latency"] == 1 and counts["dead-node"] == 1
    assert counts["energy"] == 0
    assert sum(report["utilization_histogram"]) == 1
    assert report["utilization_histogram"][2] == 1
    assert report["live_nodes"] == 1
