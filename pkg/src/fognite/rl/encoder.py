"""Scheduler observation: a fixed 15-feature view of (grid, node, task).

Feature order is part of the trained policy's contract and never changes:

     0  node cpu load (utilization, clamped)
     1  node free-memory fraction
     2  node queue depth / queue_norm
     3  node base latency / latency_norm_ms
     4  node battery level
     5  renewable fraction at the current clock
     6  energy-cost index (synthetic daily price curve)
     7  node temperature proxy (affine in utilization)
     8  task cpu demand / cpu_demand_norm
     9  task deadline budget / deadline_norm_ms
    10  task data size / data_norm_kb
    11  cluster mean utilization over live nodes
    12  cluster utilization standard deviation
    13  sin(2*pi * time of day)
    14  cos(2*pi * time of day)

Features 0-12 are clamped to [0, 1]; 13-14 lie in [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from ..grid import (
    FogNode,
    GridState,
    Task,
    queued_mem_demand,
    renewable_fraction_at,
    utilization,
)

STATE_DIM = 15

FEATURE_NAMES = (
    "cpu_load",
    "free_mem_fraction",
    "queue_depth",
    "base_latency",
    "battery_level",
    "renewable_fraction",
    "energy_cost_index",
    "temperature_proxy",
    "task_cpu_demand",
    "task_deadline_slack",
    "task_data_size",
    "cluster_mean_util",
    "cluster_util_std",
    "time_of_day_sin",
    "time_of_day_cos",
)


@dataclass
class EncoderConfig:
    """Normalization constants for the raw quantities.

    The energy-cost index is a synthetic daily price curve
    cost_base + cost_amplitude * sin(2*pi*(tod + cost_phase)); there is no
    market model behind it, it only gives the policy a periodic price-like
    signal to react to.
    """

    queue_norm: float = 10.0
    latency_norm_ms: float = 100.0
    cpu_demand_norm: float = 50.0
    deadline_norm_ms: float = 5_000.0
    data_norm_kb: float = 1_024.0
    day_ms: float = 86_400_000.0
    cost_base: float = 0.5
    cost_amplitude: float = 0.3
    cost_phase: float = 0.25
    temp_base: float = 0.3
    temp_gain: float = 0.5

    def validate(self) -> list[str]:
        problems = []
        for name in ("queue_norm", "latency_norm_ms", "cpu_demand_norm",
                     "deadline_norm_ms", "data_norm_kb", "day_ms"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be > 0")
        return problems


def _clamp01(v: float) -> float:
    return min(1.0, max(0.0, v))


def energy_cost_index(cfg: EncoderConfig, t_ms: float) -> float:
    tod = (t_ms % cfg.day_ms) / cfg.day_ms
    return _clamp01(cfg.cost_base + cfg.cost_amplitude * math.sin(2 * math.pi * (tod + cfg.cost_phase)))


def encode_state(
    grid: GridState,
    node: FogNode,
    task: Task,
    cfg: EncoderConfig | None = None,
) -> np.ndarray:
    """Encode one candidate (node, task) pairing at the grid's current clock."""
    if not node.alive:
        raise InvalidInputError(f"cannot encode dead node {node.id}")
    cfg = cfg or EncoderConfig()
    live = grid.live_nodes()
    utils = np.array([utilization(grid, n) for n in live], dtype=np.float64)
    tod = (grid.clock % cfg.day_ms) / cfg.day_ms
    node_util = utilization(grid, node)
    free_mem = _clamp01(1.0 - queued_mem_demand(grid, node) / node.mem_capacity)
    features = np.array(
        [
            node_util,
            free_mem,
            _clamp01(len(node.queue) / cfg.queue_norm),
            _clamp01(node.base_latency_ms / cfg.latency_norm_ms),
            _clamp01(node.battery_level),
            renewable_fraction_at(node.energy_profile, grid.clock),
            energy_cost_index(cfg, grid.clock),
            _clamp01(cfg.temp_base + cfg.temp_gain * node_util),
            _clamp01(task.cpu_demand / cfg.cpu_demand_norm),
            _clamp01(task.deadline_budget_ms / cfg.deadline_norm_ms),
            _clamp01(task.data_size_kb / cfg.data_norm_kb),
            float(np.mean(utils)) if len(utils) else 0.0,
            float(np.std(utils)) if len(utils) else 0.0,
            math.sin(2 * math.pi * tod),
            math.cos(2 * math.pi * tod),
        ],
        dtype=np.float64,
    )
    return features
