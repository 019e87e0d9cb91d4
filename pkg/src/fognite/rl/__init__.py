"""PPO task scheduler: state encoding, rewards, and the clipped-surrogate
policy update, all on the same hand-written numpy kernels as the forecaster.
"""

from .encoder import EncoderConfig, encode_state, STATE_DIM
from .reward import (
    RewardWeights,
    RewardComponents,
    ExecutionOutcome,
    reward_components,
    combine_reward,
    compute_reward,
    discounted_returns,
)
from .agent import PPOConfig, PPOAgent, Trajectory, policy_probs, select_action

__all__ = [
    "EncoderConfig",
    "encode_state",
    "STATE_DIM",
    "RewardWeights",
    "RewardComponents",
    "ExecutionOutcome",
    "reward_components",
    "combine_reward",
    "compute_reward",
    "discounted_returns",
    "PPOConfig",
    "PPOAgent",
    "Trajectory",
    "policy_probs",
    "select_action",
]
