"""Pre-execution validation of scheduling decisions.

Three tiers: a per-node replay that re-runs the proposed execution under
drawn perturbations (cpu jitter, network delay, packet loss with bounded
retries), a grid-level view that scores delivery paths with the cascade
rule

    P_fail = 1 - prod_i (1 - p_i_node) (1 - p_i_link)

and projects utilizations forward, and a monitoring summary. The gate
approves an action only if every predicted metric passes its threshold;
a rejected action is a value handed back to the scheduler, never an
exception, and the engine treats approval as a hard precondition of
execution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .grid import (
    FogNode,
    GridState,
    Task,
    queued_demand,
    service_time_ms,
    task_energy,
    utilization,
)

REASON_DEAD_NODE = "dead-node"
REASON_LATENCY = "latency"
REASON_ENERGY = "energy"
REASON_FAILURE_RISK = "failure-risk"
REASON_UTILIZATION = "utilization"

REJECT_REASONS = (
    REASON_DEAD_NODE,
    REASON_LATENCY,
    REASON_ENERGY,
    REASON_FAILURE_RISK,
    REASON_UTILIZATION,
)


@dataclass
class PerturbationConfig:
    """Envelope of the replay perturbations."""

    cpu_jitter: float = 0.10
    delay_range: tuple[float, float] = (20.0, 100.0)
    loss_range: tuple[float, float] = (0.001, 0.02)
    replicas: int = 20
    max_retries: int = 3

    def validate(self) -> list[str]:
        problems = []
        if not 0.0 <= self.cpu_jitter < 1.0:
            problems.append("cpu_jitter must lie in [0, 1)")
        for name in ("delay_range", "loss_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                problems.append(f"{name} must be an ordered nonnegative interval")
        lo, hi = self.loss_range
        if hi > 1.0:
            problems.append("loss_range must stay within [0, 1]")
        if self.replicas < 1:
            problems.append("replicas must be >= 1")
        if self.max_retries < 0:
            problems.append("max_retries must be >= 0")
        return problems


@dataclass
class SafetyThresholds:
    max_latency_ms: float = 1_000.0
    max_energy: float = 1.0
    max_p_fail: float = 0.25
    max_utilization: float = 0.95

    def validate(self) -> list[str]:
        problems = []
        for name in ("max_latency_ms", "max_energy", "max_p_fail", "max_utilization"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be > 0")
        return problems


@dataclass
class ReplayPrediction:
    """Edge-tier estimate of executing one task on one node."""

    latency_ms: float               # worst replica
    energy: float                   # mean over replicas
    utilization: float              # raw post-assignment ratio
    delivery_failures: int          # replicas that ran out of retries


@dataclass
class TwinVerdict:
    approved: bool
    predicted_latency_ms: float
    predicted_energy: float
    p_fail: float
    predicted_utilization: float
    reason: str = ""


@dataclass
class StabilityReport:
    horizon_ms: float
    live_nodes: int
    p_fail_per_node: dict[str, float]
    projected_utilization: dict[str, float]
    utilization_spread: float
    stable: bool


def edge_replay(
    task: Task,
    node: FogNode,
    grid: GridState,
    cfg: PerturbationConfig,
    seed: int,
) -> ReplayPrediction:
    """Replay the proposed execution ``replicas`` times under perturbation.

    Each replica scales the nominal service time by a cpu-jitter draw, adds
    one network delay draw, and retries transmission (with a fresh delay)
    on each loss draw up to ``max_retries``; a replica that still loses the
    packet counts as a delivery failure and reports infinite latency, which
    keeps the worst-case estimate conservative.
    """
    if not node.alive:
        raise InvalidInputError(f"edge replay target {node.id} is dead")
    problems = cfg.validate()
    if problems:
        raise InvalidInputError("; ".join(problems))
    rng = np.random.default_rng(seed)
    nominal_service = service_time_ms(node, task.cpu_demand)
    nominal_energy = task_energy(node, task.cpu_demand)
    worst_latency = 0.0
    energies = []
    failures = 0
    for _ in range(cfg.replicas):
        jitter = rng.uniform(-cfg.cpu_jitter, cfg.cpu_jitter) if cfg.cpu_jitter > 0 else 0.0
        service = nominal_service * (1.0 + jitter)
        delay = rng.uniform(*cfg.delay_range)
        loss_p = rng.uniform(*cfg.loss_range)
        delivered = True
        if loss_p > 0:
            attempts = 0
            while rng.random() < loss_p:
                attempts += 1
                if attempts > cfg.max_retries:
                    delivered = False
                    break
                delay += rng.uniform(*cfg.delay_range)
        latency = service + node.base_latency_ms + delay if delivered else math.inf
        if not delivered:
            failures += 1
        worst_latency = max(worst_latency, latency)
        energies.append(nominal_energy * (1.0 + jitter))
    post_util = (queued_demand(grid, node) + task.cpu_demand) / node.cpu_capacity
    return ReplayPrediction(
        latency_ms=worst_latency,
        energy=float(np.mean(energies)),
        utilization=post_util,
        delivery_failures=failures,
    )


def cascade_failure_probability(node_probs: list[float], link_probs: list[float]) -> float:
    """Probability that at least one hop on the path fails."""
    if len(node_probs) != len(link_probs):
        raise InvalidInputError("node and link probability lists must pair up per hop")
    survive = 1.0
    for pn, pl in zip(node_probs, link_probs):
        if not 0.0 <= pn <= 1.0 or not 0.0 <= pl <= 1.0:
            raise InvalidInputError("probabilities must lie in [0, 1]")
        survive *= (1.0 - pn) * (1.0 - pl)
    return 1.0 - survive


def path_failure_probability(grid: GridState, hops: list[tuple[str, str]]) -> float:
    """Cascade probability over (src, dst) hops.

    Each hop contributes the destination node's failure probability and the
    connecting link's; a hop with no modeled link contributes link p = 0.
    """
    node_probs = []
    link_probs = []
    for src, dst in hops:
        if dst not in grid.nodes:
            raise InvalidInputError(f"unknown node {dst} on path")
        node_probs.append(grid.nodes[dst].failure_prob)
        link = grid.find_link(src, dst)
        link_probs.append(link.failure_prob if link else 0.0)
    return cascade_failure_probability(node_probs, link_probs)


def projected_utilization(grid: GridState, node: FogNode, horizon_ms: float) -> float:
    """Queue drained at capacity rate for ``horizon_ms``, no new arrivals."""
    remaining = max(0.0, queued_demand(grid, node) - node.cpu_capacity * horizon_ms / 1000.0)
    return min(1.0, remaining / node.cpu_capacity)


def cloud_forecast(grid: GridState, horizon_ms: float) -> StabilityReport:
    """Grid-wide stability view: per-node delivery risk and projected load.

    Per-node risk is the single-hop cascade probability through the node's
    worst incoming link (a conservative monitoring view; the gate scores
    the actual path of the task it is judging). With no live nodes the
    report degenerates to certain failure.
    """
    live = grid.live_nodes()
    if not live:
        return StabilityReport(
            horizon_ms=horizon_ms,
            live_nodes=0,
            p_fail_per_node={},
            projected_utilization={},
            utilization_spread=0.0,
            stable=False,
        )
    p_fail: dict[str, float] = {}
    proj: dict[str, float] = {}
    for node in live:
        incoming = [l.failure_prob for l in grid.links if l.dst == node.id]
        worst_link = max(incoming) if incoming else 0.0
        p_fail[node.id] = cascade_failure_probability([node.failure_prob], [worst_link])
        proj[node.id] = projected_utilization(grid, node, horizon_ms)
    values = list(proj.values())
    spread = float(np.std(values))
    return StabilityReport(
        horizon_ms=horizon_ms,
        live_nodes=len(live),
        p_fail_per_node=p_fail,
        projected_utilization=proj,
        utilization_spread=spread,
        stable=all(p < 1.0 for p in p_fail.values()),
    )


def gate_decision(
    task: Task,
    target_id: str,
    grid: GridState,
    cfg: PerturbationConfig,
    thresholds: SafetyThresholds,
    seed: int,
) -> TwinVerdict:
    """Approve or reject executing ``task`` on ``target_id``.

    Checks run in threshold order (latency, energy, failure risk,
    utilization) after a liveness check; the reason names the first
    violated threshold. Rejection is a verdict, not an error.
    """
    node = grid.nodes.get(target_id)
    if node is None or not node.alive:
        return TwinVerdict(
            approved=False,
            predicted_latency_ms=math.inf,
            predicted_energy=0.0,
            p_fail=1.0,
            predicted_utilization=0.0,
            reason=REASON_DEAD_NODE,
        )
    replay = edge_replay(task, node, grid, cfg, seed)
    hops = [(task.origin or target_id, target_id)]
    p_fail = path_failure_probability(grid, hops)
    verdict = TwinVerdict(
        approved=True,
        predicted_latency_ms=replay.latency_ms,
        predicted_energy=replay.energy,
        p_fail=p_fail,
        predicted_utilization=replay.utilization,
    )
    if replay.latency_ms > thresholds.max_latency_ms:
        verdict.approved, verdict.reason = False, REASON_LATENCY
    elif replay.energy > thresholds.max_energy:
        verdict.approved, verdict.reason = False, REASON_ENERGY
    elif p_fail > thresholds.max_p_fail:
        verdict.approved, verdict.reason = False, REASON_FAILURE_RISK
    elif replay.utilization > thresholds.max_utilization:
        verdict.approved, verdict.reason = False, REASON_UTILIZATION
    return verdict


def health_report(grid: GridState, verdicts: list[TwinVerdict]) -> dict:
    """Monitoring summary: verdict tallies, per-node risk, load histogram."""
    counts = {"approved": 0}
    counts.update({reason: 0 for reason in REJECT_REASONS})
    for v in verdicts:
        if v.approved:
            counts["approved"] += 1
        else:
            counts[v.reason] = counts.get(v.reason, 0) + 1
    report = cloud_forecast(grid, horizon_ms=0.0)
    bins = [0] * 10
    for node in grid.live_nodes():
        u = utilization(grid, node)
        bins[min(9, int(u * 10))] += 1
    return {
        "verdict_counts": counts,
        "p_fail_per_node": dict(sorted(report.p_fail_per_node.items())),
        "utilization_histogram": bins,
        "live_nodes": report.live_nodes,
    }
