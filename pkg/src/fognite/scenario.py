"""Scenario configuration: everything a run needs, as plain dataclasses.

Configs load from YAML with exhaustive validation: unknown keys are
rejected, every violation is reported with its field path, and an empty
file yields the full default desk scenario. ``to_dict``/``from_dict``
round-trip exactly, which is what makes run reports self-reproducing.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field

import yaml

from .errors import ConfigurationError


@dataclass
class NodeSpec:
    id: str = ""
    cpu_capacity: float = 100.0
    mem_capacity: float = 100.0
    base_latency_ms: float = 10.0
    battery_level: float = 1.0
    failure_prob: float = 0.0
    renewable_level: float = 0.4        # constant term of the node's renewable series
    power_rate: float = 0.02            # energy per compute-unit-second
    idle_power: float = 0.0005          # energy per second

    def validate(self, path: str) -> list[str]:
        problems = []
        if not self.id:
            problems.append(f"{path}.id: must be non-empty")
        if self.cpu_capacity <= 0:
            problems.append(f"{path}.cpu_capacity: must be > 0")
        if self.mem_capacity <= 0:
            problems.append(f"{path}.mem_capacity: must be > 0")
        if self.base_latency_ms < 0:
            problems.append(f"{path}.base_latency_ms: must be >= 0")
        if not 0 <= self.battery_level <= 1:
            problems.append(f"{path}.battery_level: must lie in [0, 1]")
        if not 0 <= self.failure_prob <= 1:
            problems.append(f"{path}.failure_prob: must lie in [0, 1]")
        if not 0 <= self.renewable_level <= 1:
            problems.append(f"{path}.renewable_level: must lie in [0, 1]")
        if self.power_rate < 0 or self.idle_power < 0:
            problems.append(f"{path}.power_rate/idle_power: must be >= 0")
        return problems


@dataclass
class LinkSpec:
    """Defaults for the autogenerated full-mesh links."""

    delay_ms: float = 5.0
    loss_rate: float = 0.0
    failure_prob: float = 0.005

    def validate(self, path: str) -> list[str]:
        problems = []
        if self.delay_ms < 0:
            problems.append(f"{path}.delay_ms: must be >= 0")
        if not 0 <= self.loss_rate <= 1:
            problems.append(f"{path}.loss_rate: must lie in [0, 1]")
        if not 0 <= self.failure_prob <= 1:
            problems.append(f"{path}.failure_prob: must lie in [0, 1]")
        return problems


@dataclass
class WorkloadSpec:
    tasks: int = 500
    mean_interarrival_ms: float = 120.0
    cpu_demand: tuple[float, float] = (5.0, 25.0)
    mem_demand: tuple[float, float] = (1.0, 8.0)
    data_kb: tuple[float, float] = (16.0, 512.0)
    deadline_budget_ms: tuple[float, float] = (350.0, 900.0)

    def validate(self, path: str) -> list[str]:
        problems = []
        if self.tasks < 0:
            problems.append(f"{path}.tasks: must be >= 0")
        if self.mean_interarrival_ms <= 0:
            problems.append(f"{path}.mean_interarrival_ms: must be > 0")
        for name in ("cpu_demand", "mem_demand", "data_kb", "deadline_budget_ms"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                problems.append(f"{path}.{name}: must be an ordered nonnegative range")
        if self.deadline_budget_ms[0] <= 0:
            problems.append(f"{path}.deadline_budget_ms: must be > 0")
        return problems


@dataclass
class TelemetrySpec:
    meters: int = 12
    rate_hz: float = 0.2
    duration_ms: float = 1_800_000.0
    stride: int = 2
    gap_fraction: float = 0.05
    held_out_fraction: float = 0.25

    def validate(self, path: str) -> list[str]:
        problems = []
        if self.meters < 1:
            problems.append(f"{path}.meters: must be >= 1")
        if self.rate_hz <= 0 or self.duration_ms <= 0:
            problems.append(f"{path}.rate_hz/duration_ms: must be > 0")
        if self.stride < 1:
            problems.append(f"{path}.stride: must be >= 1")
        if not 0 <= self.gap_fraction < 1:
            problems.append(f"{path}.gap_fraction: must lie in [0, 1)")
        if not 0 < self.held_out_fraction < 1:
            problems.append(f"{path}.held_out_fraction: must lie in (0, 1)")
        return problems


@dataclass
class ModelSpec:
    window: int = 24
    conv_filters: int = 8
    kernel: int = 3
    pool_width: int = 2
    lstm_hidden: int = 16
    bidirectional: bool = True
    dropout_rate: float = 0.3
    dense: tuple[int, ...] = (32, 16)

    def validate(self, path: str) -> list[str]:
        return [f"{path}: {p}" for p in self.to_model_config().validate()]

    def to_model_config(self):
        from .neural.model import ModelConfig

        return ModelConfig(
            window=self.window,
            conv_filters=self.conv_filters,
            kernel=self.kernel,
            pool_width=self.pool_width,
            lstm_hidden=self.lstm_hidden,
            bidirectional=self.bidirectional,
            dropout_rate=self.dropout_rate,
            dense=tuple(self.dense),
        )


@dataclass
class FedSpec:
    rounds: int = 3
    epochs_per_round: int = 5
    batch_size: int = 32
    sync_interval: int = 5
    l2_penalty: float = 1e-5
    persist_optimizer: bool = False
    compression_enabled: bool = True
    prune_threshold: float = 0.001
    quant_bits: int = 8

    def validate(self, path: str) -> list[str]:
        problems = []
        if self.rounds < 0:
            problems.append(f"{path}.rounds: must be >= 0")
        for name in ("epochs_per_round", "batch_size", "sync_interval"):
            if getattr(self, name) < 1:
                problems.append(f"{path}.{name}: must be >= 1")
        if self.l2_penalty < 0:
            problems.append(f"{path}.l2_penalty: must be >= 0")
        if self.prune_threshold < 0:
            problems.append(f"{path}.prune_threshold: must be >= 0")
        if self.quant_bits != 8:
            problems.append(f"{path}.quant_bits: must be 8")
        return problems


@dataclass
class RLSpec:
    lr: float = 5e-4
    gamma: float = 0.99
    clip: float = 0.2
    entropy_coeff: float = 0.01
    epochs: int = 4
    minibatch: int = 64
    hidden: tuple[int, ...] = (128, 64)
    update_batch_episodes: int = 16
    rejection_penalty: float = 0.05
    per_node_learners: bool = False
    alpha: float = 0.5
    beta: float = 0.3
    gamma_util: float = 0.2
    energy_norm: float = 0.01

    def validate(self, path: str) -> list[str]:
        problems = [f"{path}: {p}" for p in self.to_ppo_config().validate()]
        problems += [f"{path}: {p}" for p in self.reward_weights().validate()]
        if self.update_batch_episodes < 1:
            problems.append(f"{path}.update_batch_episodes: must be >= 1")
        if self.rejection_penalty < 0:
            problems.append(f"{path}.rejection_penalty: must be >= 0")
        if self.energy_norm <= 0:
            problems.append(f"{path}.energy_norm: must be > 0")
        return problems

    def to_ppo_config(self):
        from .rl.agent import PPOConfig

        return PPOConfig(
            hidden=tuple(self.hidden),
            lr=self.lr,
            clip=self.clip,
            entropy_coeff=self.entropy_coeff,
            gamma=self.gamma,
            epochs=self.epochs,
            minibatch=self.minibatch,
        )

    def reward_weights(self):
        from .rl.reward import RewardWeights

        return RewardWeights(alpha=self.alpha, beta=self.beta, gamma_util=self.gamma_util)


@dataclass
class TwinSpec:
    cpu_jitter: float = 0.10
    delay_range: tuple[float, float] = (20.0, 100.0)
    loss_range: tuple[float, float] = (0.001, 0.02)
    replicas: int = 20
    max_retries: int = 3
    max_latency_ms: float = 450.0
    max_energy: float = 0.02
    max_p_fail: float = 0.25
    max_utilization: float = 0.5

    def validate(self, path: str) -> list[str]:
        problems = [f"{path}: {p}" for p in self.perturbation().validate()]
        problems += [f"{path}: {p}" for p in self.thresholds().validate()]
        return problems

    def perturbation(self):
        from .twin import PerturbationConfig

        return PerturbationConfig(
            cpu_jitter=self.cpu_jitter,
            delay_range=tuple(self.delay_range),
            loss_range=tuple(self.loss_range),
            replicas=self.replicas,
            max_retries=self.max_retries,
        )

    def thresholds(self):
        from .twin import SafetyThresholds

        return SafetyThresholds(
            max_latency_ms=self.max_latency_ms,
            max_energy=self.max_energy,
            max_p_fail=self.max_p_fail,
            max_utilization=self.max_utilization,
        )


@dataclass
class FaultSpec:
    count: int = 5
    window_fraction: tuple[float, float] = (0.10, 0.70)
    downtime_ms: tuple[float, float] = (8_000.0, 20_000.0)
    detection_delay_ms: float = 500.0
    redispatch_spacing_ms: float = 50.0

    def validate(self, path: str) -> list[str]:
        problems = []
        if self.count < 0:
            problems.append(f"{path}.count: must be >= 0")
        lo, hi = self.window_fraction
        if not (0 <= lo <= hi <= 1):
            problems.append(f"{path}.window_fraction: must be an ordered range in [0, 1]")
        lo, hi = self.downtime_ms
        if lo < 0 or hi < lo:
            problems.append(f"{path}.downtime_ms: must be an ordered nonnegative range")
        if self.detection_delay_ms < 0 or self.redispatch_spacing_ms < 0:
            problems.append(f"{path}.detection_delay_ms/redispatch_spacing_ms: must be >= 0")
        return problems


@dataclass
class CloudSpec:
    """Fallback executor for tasks no fog node may take."""

    latency_ms: float = 250.0
    power_rate: float = 0.05
    capacity: float = 200.0

    def validate(self, path: str) -> list[str]:
        problems = []
        if self.latency_ms < 0:
            problems.append(f"{path}.latency_ms: must be >= 0")
        if self.power_rate < 0:
            problems.append(f"{path}.power_rate: must be >= 0")
        if self.capacity <= 0:
            problems.append(f"{path}.capacity: must be > 0")
        return problems


@dataclass
class ReportSpec:
    tick_ms: float = 10_000.0

    def validate(self, path: str) -> list[str]:
        if self.tick_ms <= 0:
            return [f"{path}.tick_ms: must be > 0"]
        return []


def _default_nodes() -> list[NodeSpec]:
    # n4 is the bait: fastest and best-connected but flaky, so a static
    # least-cost rule loves it and the gate's risk check does not
    return [
        NodeSpec(id="n0", cpu_capacity=100.0, base_latency_ms=12.0, failure_prob=0.02,
                 renewable_level=0.8),
        NodeSpec(id="n1", cpu_capacity=70.0, base_latency_ms=10.0, failure_prob=0.01,
                 renewable_level=0.5),
        NodeSpec(id="n2", cpu_capacity=60.0, base_latency_ms=14.0, failure_prob=0.02,
                 renewable_level=0.9),
        NodeSpec(id="n3", cpu_capacity=55.0, base_latency_ms=12.0, failure_prob=0.01,
                 renewable_level=0.15, power_rate=0.03),
        NodeSpec(id="n4", cpu_capacity=120.0, base_latency_ms=6.0, failure_prob=0.30,
                 renewable_level=0.1, power_rate=0.035),
    ]


@dataclass
class ScenarioConfig:
    name: str = "desk"
    duration_ms: float = 120_000.0
    seed: int = 0
    nodes: list[NodeSpec] = field(default_factory=_default_nodes)
    link: LinkSpec = field(default_factory=LinkSpec)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    telemetry: TelemetrySpec = field(default_factory=TelemetrySpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    fed: FedSpec = field(default_factory=FedSpec)
    rl: RLSpec = field(default_factory=RLSpec)
    twin: TwinSpec = field(default_factory=TwinSpec)
    faults: FaultSpec = field(default_factory=FaultSpec)
    cloud: CloudSpec = field(default_factory=CloudSpec)
    report: ReportSpec = field(default_factory=ReportSpec)

    def validate(self) -> list[str]:
        problems = []
        if self.duration_ms <= 0:
            problems.append("duration_ms: must be > 0")
        if not self.nodes:
            problems.append("nodes: at least one node is required")
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            problems.append("nodes: ids must be unique")
        for i, node in enumerate(self.nodes):
            problems.extend(node.validate(f"nodes[{i}]"))
        problems.extend(self.link.validate("link"))
        problems.extend(self.workload.validate("workload"))
        problems.extend(self.telemetry.validate("telemetry"))
        problems.extend(self.model.validate("model"))
        problems.extend(self.fed.validate("fed"))
        problems.extend(self.rl.validate("rl"))
        problems.extend(self.twin.validate("twin"))
        problems.extend(self.faults.validate("faults"))
        problems.extend(self.cloud.validate("cloud"))
        problems.extend(self.report.validate("report"))
        min_samples = int(self.telemetry.duration_ms * self.telemetry.rate_hz / 1000.0)
        if min_samples < self.model.window + 1 and not any(
            p.startswith(("telemetry", "model")) for p in problems
        ):
            problems.append(
                "telemetry: duration_ms * rate_hz yields fewer samples than one "
                f"forecast window needs ({min_samples} < {self.model.window + 1})"
            )
        return problems


def _coerce(value, target_type, path: str, problems: list[str]):
    """Best-effort conversion of a parsed YAML value to the annotated type."""
    origin = typing.get_origin(target_type)
    if dataclasses.is_dataclass(target_type):
        if not isinstance(value, dict):
            problems.append(f"{path}: expected a mapping")
            return None
        return _from_dict(target_type, value, path, problems)
    if origin in (tuple, list):
        if not isinstance(value, (list, tuple)):
            problems.append(f"{path}: expected a sequence")
            return None
        args = typing.get_args(target_type)
        if origin is tuple and len(args) == 2 and args[1] is Ellipsis:
            elem_types = [args[0]] * len(value)
        elif origin is tuple:
            if len(value) != len(args):
                problems.append(f"{path}: expected {len(args)} entries, got {len(value)}")
                return None
            elem_types = list(args)
        else:
            elem_types = [args[0] if args else float] * len(value)
        out = [_coerce(v, t, f"{path}[{i}]", problems) for i, (v, t) in enumerate(zip(value, elem_types))]
        return tuple(out) if origin is tuple else out
    if target_type is bool:
        if not isinstance(value, bool):
            problems.append(f"{path}: expected a boolean")
            return None
        return value
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{path}: expected an integer")
            return None
        return value
    if target_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{path}: expected a number")
            return None
        return float(value)
    if target_type is str:
        if not isinstance(value, str):
            problems.append(f"{path}: expected a string")
            return None
        return value
    problems.append(f"{path}: unsupported config type {target_type}")
    return None


def _from_dict(cls, data: dict, path: str, problems: list[str]):
    hints = typing.get_type_hints(cls)
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        child = f"{path}.{key}" if path else key
        if key not in known:
            problems.append(f"{child}: unknown key")
            continue
        coerced = _coerce(value, hints[key], child, problems)
        if coerced is not None:
            kwargs[key] = coerced
    try:
        return cls(**kwargs)
    except TypeError:
        return cls()


def from_dict(data: dict | None) -> ScenarioConfig:
    """Build and validate a config; raises with every problem at once."""
    problems: list[str] = []
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigurationError(["top level: expected a mapping"])
    config = _from_dict(ScenarioConfig, data, "", problems)
    problems.extend(config.validate())
    if problems:
        raise ConfigurationError(problems)
    return config


def to_dict(config: ScenarioConfig) -> dict:
    return dataclasses.asdict(config)


def parse_config(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigurationError([f"config file not found: {path}"]) from None
    except yaml.YAMLError as exc:
        raise ConfigurationError([f"config is not valid YAML: {exc}"]) from exc
    return from_dict(data)


def emit_config(config: ScenarioConfig) -> str:
    """YAML text that parses back to an equal config."""

    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, tuple):
            return [clean(v) for v in obj]
        if isinstance(obj, list):
            return [clean(v) for v in obj]
        return obj

    return yaml.safe_dump(clean(to_dict(config)), sort_keys=False)


def default_scenario() -> ScenarioConfig:
    """The desk-scale scenario: 5 nodes, 12 meters, 500 decisions, 5 faults."""
    return ScenarioConfig()


def quick_scenario() -> ScenarioConfig:
    """Reduced preset for smoke runs."""
    cfg = ScenarioConfig(name="quick", duration_ms=40_000.0)
    cfg.workload = WorkloadSpec(tasks=120)
    cfg.telemetry = TelemetrySpec(meters=6, duration_ms=300_000.0)
    cfg.fed = FedSpec(rounds=2)
    cfg.faults = FaultSpec(count=2, downtime_ms=(5_000.0, 10_000.0))
    cfg.rl = RLSpec(update_batch_episodes=16)
    cfg.report = ReportSpec(tick_ms=5_000.0)
    return cfg
