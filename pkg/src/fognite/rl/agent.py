"""PPO with a clipped surrogate, entropy bonus, and a value baseline.

Policy and value networks are 15 -> 128 -> 64 -> (A | 1) ReLU stacks on the
shared dense kernels. Gradients are derived by hand:

  * surrogate: d min(rA, clip(r)A) / d logp = r * A where the unclipped
    branch is active (r inside the clip window, or the min picks it), else 0
  * log-softmax: d logp(a) / d z = onehot(a) - p
  * entropy: d H / d z_j = -p_j (log p_j + H)

Advantages are plain discounted returns minus the cached value estimates,
normalized per update batch. Trajectories must carry the log-probs and
action masks recorded at collection time, otherwise the importance ratios
are meaningless.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError, ShapeError
from ..neural import layers
from ..neural.optim import AdamConfig, OptimizerState, adam_step
from .encoder import STATE_DIM
from .reward import discounted_returns

MASK_OFF = -1e30                    # additive logit for masked actions


@dataclass
class PPOConfig:
    hidden: tuple[int, ...] = (128, 64)
    lr: float = 5e-4
    clip: float = 0.2
    entropy_coeff: float = 0.01
    gamma: float = 0.99
    epochs: int = 4
    minibatch: int = 64
    value_coeff: float = 0.5

    def validate(self) -> list[str]:
        problems = []
        if self.lr <= 0:
            problems.append("lr must be > 0")
        if not 0 < self.clip < 1:
            problems.append("clip must lie in (0, 1)")
        if self.entropy_coeff < 0:
            problems.append("entropy_coeff must be >= 0")
        if not 0 <= self.gamma <= 1:
            problems.append("gamma must lie in [0, 1]")
        if self.epochs < 1 or self.minibatch < 1:
            problems.append("epochs and minibatch must be >= 1")
        if any(h < 1 for h in self.hidden):
            problems.append("hidden sizes must be >= 1")
        return problems


def build_mlp(widths: list[int], seed: int) -> dict[str, np.ndarray]:
    """Uniform +-1/sqrt(fan_in) init for a dense stack; last layer is linear."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for i in range(len(widths) - 1):
        fan_in = widths[i]
        bound = 1.0 / np.sqrt(fan_in)
        tensors[f"fc{i}.w"] = rng.uniform(-bound, bound, size=(widths[i + 1], fan_in))
        tensors[f"fc{i}.b"] = rng.uniform(-bound, bound, size=(widths[i + 1],))
    return tensors


def mlp_forward(tensors: dict[str, np.ndarray], x: np.ndarray) -> tuple[np.ndarray, list]:
    """ReLU between layers, linear output; returns (out, caches)."""
    n_layers = len(tensors) // 2
    caches = []
    h = x
    for i in range(n_layers):
        z, x_in = layers.dense_forward(h, tensors[f"fc{i}.w"], tensors[f"fc{i}.b"])
        if i < n_layers - 1:
            h, relu_mask = layers.relu_forward(z)
        else:
            h, relu_mask = z, None
        caches.append((x_in, relu_mask))
    return h, caches


def mlp_backward(
    tensors: dict[str, np.ndarray], caches: list, dout: np.ndarray
) -> dict[str, np.ndarray]:
    n_layers = len(tensors) // 2
    grads: dict[str, np.ndarray] = {}
    dh = dout
    for i in range(n_layers - 1, -1, -1):
        x_in, relu_mask = caches[i]
        dz = dh if relu_mask is None else layers.relu_backward(dh, relu_mask)
        dh, grads[f"fc{i}.w"], grads[f"fc{i}.b"] = layers.dense_backward(
            dz, x_in, tensors[f"fc{i}.w"]
        )
    return grads


def masked_log_softmax(logits: np.ndarray, masks: np.ndarray | None) -> np.ndarray:
    """Row-wise log-probabilities; masked-off actions get probability zero."""
    z = np.array(logits, dtype=np.float64)
    if masks is not None:
        if masks.shape != z.shape:
            raise ShapeError(f"mask shape {masks.shape} vs logits {z.shape}")
        if not masks.any(axis=1).all():
            raise InvalidInputError("every sample needs at least one allowed action")
        z = np.where(masks, z, MASK_OFF)
    z = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=1, keepdims=True))
    return z - lse


def policy_probs(
    policy: dict[str, np.ndarray],
    state: np.ndarray,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Action distribution for one state vector."""
    s = np.asarray(state, dtype=np.float64)
    if s.ndim != 1 or s.shape[0] != STATE_DIM:
        raise ShapeError(f"state must have {STATE_DIM} features, got {s.shape}")
    logits, _ = mlp_forward(policy, s[None, :])
    m = None if mask is None else np.asarray(mask, dtype=bool)[None, :]
    return np.exp(masked_log_softmax(logits, m))[0]


def select_action(
    probs: np.ndarray,
    rng: np.random.Generator | None = None,
    greedy: bool = False,
) -> int:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
        raise InvalidInputError("select_action needs a probability vector")
    if greedy or rng is None:
        return int(np.argmax(p))
    return int(rng.choice(p.size, p=p / p.sum()))


@dataclass
class Trajectory:
    """One episode of (s, a, r, logp, v, mask) recorded at collection time."""

    states: list[np.ndarray] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    logps: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    masks: list[np.ndarray] = field(default_factory=list)

    def add(self, state, action, reward, logp, value, mask) -> None:
        self.states.append(np.asarray(state, dtype=np.float64))
        self.actions.append(int(action))
        self.rewards.append(float(reward))
        self.logps.append(float(logp))
        self.values.append(float(value))
        self.masks.append(np.asarray(mask, dtype=bool))

    def __len__(self) -> int:
        return len(self.actions)


class PPOAgent:
    """One learner: policy net, value net, their optimizers, and the update."""

    def __init__(self, n_actions: int, config: PPOConfig | None = None, seed: int = 0):
        self.config = config or PPOConfig()
        problems = self.config.validate()
        if problems:
            raise InvalidInputError("; ".join(problems))
        if n_actions < 1:
            raise InvalidInputError("n_actions must be >= 1")
        self.n_actions = n_actions
        seeds = np.random.SeedSequence(seed).spawn(3)
        widths = [STATE_DIM, *self.config.hidden]
        self.policy = build_mlp(widths + [n_actions], int(seeds[0].generate_state(1)[0]))
        self.value = build_mlp(widths + [1], int(seeds[1].generate_state(1)[0]))
        adam = AdamConfig(lr=self.config.lr)
        self._policy_opt = OptimizerState(adam)
        self._value_opt = OptimizerState(adam)
        self._rng = np.random.default_rng(seeds[2])
        self.updates_done = 0

    def distribution(self, state: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        return policy_probs(self.policy, state, mask)

    def value_estimate(self, state: np.ndarray) -> float:
        s = np.asarray(state, dtype=np.float64)
        out, _ = mlp_forward(self.value, s[None, :])
        return float(out[0, 0])

    def act(
        self,
        state: np.ndarray,
        mask: np.ndarray | None = None,
        rng: np.random.Generator | None = None,
        greedy: bool = False,
    ) -> tuple[int, float, float]:
        """Pick an action; returns (action, logp at collection, value estimate)."""
        probs = self.distribution(state, mask)
        action = select_action(probs, rng=rng, greedy=greedy)
        return action, float(np.log(probs[action])), self.value_estimate(state)

    def update(self, trajectories: list[Trajectory]) -> dict[str, float]:
        """One PPO update over the collected batch; returns diagnostics."""
        trajectories = [t for t in trajectories if len(t)]
        if not trajectories:
            raise InvalidInputError("ppo update needs at least one non-empty trajectory")
        cfg = self.config
        states = np.concatenate([np.stack(t.states) for t in trajectories])
        actions = np.concatenate([np.array(t.actions, dtype=int) for t in trajectories])
        old_logp = np.concatenate([np.array(t.logps) for t in trajectories])
        old_values = np.concatenate([np.array(t.values) for t in trajectories])
        masks = np.concatenate([np.stack(t.masks) for t in trajectories])
        returns = np.concatenate([discounted_returns(t.rewards, cfg.gamma) for t in trajectories])

        adv = returns - old_values
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        n = states.shape[0]

        stats = {"ratio": [], "clip_fraction": [], "entropy": [], "policy_loss": [], "value_loss": []}
        for _ in range(cfg.epochs):
            order = self._rng.permutation(n)
            for start in range(0, n, cfg.minibatch):
                idx = order[start : start + cfg.minibatch]
                m = idx.size
                s_mb, a_mb = states[idx], actions[idx]
                adv_mb, ret_mb = adv[idx], returns[idx]
                logp_old_mb, mask_mb = old_logp[idx], masks[idx]

                logits, p_caches = mlp_forward(self.policy, s_mb)
                logp_all = masked_log_softmax(logits, mask_mb)
                probs = np.exp(logp_all)
                logp_new = logp_all[np.arange(m), a_mb]
                ratio = np.exp(logp_new - logp_old_mb)
                clipped = np.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip)
                unclipped_term = ratio * adv_mb
                clipped_term = clipped * adv_mb
                surr = np.minimum(unclipped_term, clipped_term)
                # p * logp is 0 * MASK_OFF = 0 for masked actions, so the sum is safe
                entropy = -np.sum(probs * logp_all, axis=1)

                active = unclipped_term <= clipped_term
                dsurr_dlogp = np.where(active, ratio * adv_mb, 0.0)
                onehot = np.zeros_like(probs)
                onehot[np.arange(m), a_mb] = 1.0
                dz = (
                    dsurr_dlogp[:, None] * (probs - onehot)
                    + cfg.entropy_coeff * probs * (logp_all + entropy[:, None])
                ) / m
                pgrads = mlp_backward(self.policy, p_caches, dz)
                self.policy = adam_step(self.policy, pgrads, self._policy_opt)

                v_out, v_caches = mlp_forward(self.value, s_mb)
                v = v_out[:, 0]
                dv = cfg.value_coeff * 2.0 * (v - ret_mb) / m
                vgrads = mlp_backward(self.value, v_caches, dv[:, None])
                self.value = adam_step(self.value, vgrads, self._value_opt)

                stats["ratio"].append(float(ratio.mean()))
                stats["clip_fraction"].append(float(np.mean(np.abs(ratio - 1.0) > cfg.clip)))
                stats["entropy"].append(float(entropy.mean()))
                stats["policy_loss"].append(float(-surr.mean() - cfg.entropy_coeff * entropy.mean()))
                stats["value_loss"].append(float(cfg.value_coeff * np.mean((v - ret_mb) ** 2)))

        self.updates_done += 1
        return {
            "mean_ratio": float(np.mean(stats["ratio"])),
            "clip_fraction": float(np.mean(stats["clip_fraction"])),
            "entropy": float(np.mean(stats["entropy"])),
            "policy_loss": float(np.mean(stats["policy_loss"])),
            "value_loss": float(np.mean(stats["value_loss"])),
            "mean_advantage": float(adv.mean()),
            "batch_size": float(n),
        }
