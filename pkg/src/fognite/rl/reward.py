"""Scalar reward for one scheduling decision.

r = alpha * R_time + beta * R_energy + gamma_util * R_util, with each
component clamped to [-1, 1]:

  R_time   = 1 - latency / deadline budget, floored at 0
  R_energy = renewable fraction at execution - normalized energy spent
  R_util   = 1 - cluster utilization standard deviation after placement

The weight on utilization is named gamma_util because gamma alone is taken
by the return discount.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError


@dataclass
class RewardWeights:
    alpha: float = 0.5
    beta: float = 0.3
    gamma_util: float = 0.2

    def validate(self) -> list[str]:
        problems = []
        if self.alpha < 0 or self.beta < 0 or self.gamma_util < 0:
            problems.append("reward weights must be >= 0")
        if self.alpha + self.beta + self.gamma_util <= 0:
            problems.append("reward weights must not all be zero")
        return problems


@dataclass
class RewardComponents:
    time: float
    energy: float
    util: float


@dataclass
class ExecutionOutcome:
    """What actually happened when a task ran (or failed to)."""

    latency_ms: float
    deadline_budget_ms: float
    energy: float
    energy_norm: float              # scale for the energy term
    renewable_fraction: float
    cluster_util_std: float
    completed: bool = True


def _clamp(v: float, lo: float = -1.0, hi: float = 1.0) -> float:
    return min(hi, max(lo, v))


def reward_components(outcome: ExecutionOutcome) -> RewardComponents:
    if outcome.deadline_budget_ms <= 0:
        raise InvalidInputError("deadline budget must be > 0")
    if not all(
        np.isfinite(v)
        for v in (
            outcome.latency_ms,
            outcome.energy,
            outcome.renewable_fraction,
            outcome.cluster_util_std,
        )
    ):
        raise InvalidInputError("outcome fields must be finite")
    r_time = _clamp(max(0.0, 1.0 - outcome.latency_ms / outcome.deadline_budget_ms))
    energy_norm = outcome.energy_norm if outcome.energy_norm > 0 else 1.0
    r_energy = _clamp(outcome.renewable_fraction - outcome.energy / energy_norm)
    r_util = _clamp(1.0 - outcome.cluster_util_std)
    if not outcome.completed:
        r_time = -1.0
    return RewardComponents(time=r_time, energy=r_energy, util=r_util)


def combine_reward(components: RewardComponents, weights: RewardWeights) -> float:
    return (
        weights.alpha * components.time
        + weights.beta * components.energy
        + weights.gamma_util * components.util
    )


def compute_reward(outcome: ExecutionOutcome, weights: RewardWeights) -> float:
    return combine_reward(reward_components(outcome), weights)


def discounted_returns(rewards: np.ndarray | list[float], gamma: float = 0.99) -> np.ndarray:
    """R_t = r_t + gamma * R_{t+1}, computed backward; terminal return = last reward."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise InvalidInputError("discounted_returns needs at least one reward")
    if not np.all(np.isfinite(r)):
        raise InvalidInputError("rewards must be finite")
    out = np.empty_like(r)
    acc = 0.0
    for i in range(r.size - 1, -1, -1):
        acc = r[i] + gamma * acc
        out[i] = acc
    return out
