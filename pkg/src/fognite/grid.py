"""Domain model of the simulated fog grid.

Nodes, links, tasks and energy profiles are plain value objects. They are
safe to copy and hand to any module; all mutation happens inside the
single-threaded simulation engine, which owns the ``GridState`` instance.

Units used throughout:
  * time        — simulated milliseconds
  * compute     — abstract compute units; a node with ``cpu_capacity`` c
                  retires c units per second
  * memory      — abstract memory units
  * energy      — abstract energy units (reported as kWh-equivalents)
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigurationError, InvalidInputError


@dataclass
class EnergyProfile:
    """Energy characteristics of a node.

    ``renewable_series`` is a periodic, piecewise-constant series: entry i
    covers simulated time [i*step_ms, (i+1)*step_ms); lookups past the end
    wrap around. ``power_rate`` is the marginal draw per compute-unit-second
    of work; ``idle_power`` is the constant baseline draw per second.
    """

    renewable_series: list[float] = field(default_factory=lambda: [0.4])
    step_ms: float = 3_600_000.0
    power_rate: float = 0.001
    idle_power: float = 0.0001

    def validate(self) -> list[str]:
        problems = []
        if not self.renewable_series:
            problems.append("renewable_series must be non-empty")
        if any(not 0.0 <= v <= 1.0 for v in self.renewable_series):
            problems.append("renewable_series values must lie in [0, 1]")
        if self.step_ms <= 0:
            problems.append("renewable step_ms must be > 0")
        if self.power_rate < 0 or self.idle_power < 0:
            problems.append("power rates must be >= 0")
        return problems


@dataclass
class FogNode:
    """A simulated edge device.

    ``queue`` holds ids of tasks currently assigned and not yet completed
    (including the one executing). ``failure_prob`` is the node's term in
    the cascade failure product used by the digital twin.
    """

    id: str
    cpu_capacity: float
    mem_capacity: float
    base_latency_ms: float = 10.0
    battery_level: float = 1.0
    alive: bool = True
    failure_prob: float = 0.0
    energy_profile: EnergyProfile = field(default_factory=EnergyProfile)
    queue: list[str] = field(default_factory=list)

    def validate(self) -> list[str]:
        problems = []
        if self.cpu_capacity <= 0:
            problems.append(f"node {self.id}: cpu_capacity must be > 0")
        if self.mem_capacity <= 0:
            problems.append(f"node {self.id}: mem_capacity must be > 0")
        if not 0.0 <= self.battery_level <= 1.0:
            problems.append(f"node {self.id}: battery_level must lie in [0, 1]")
        if not 0.0 <= self.failure_prob <= 1.0:
            problems.append(f"node {self.id}: failure_prob must lie in [0, 1]")
        if self.base_latency_ms < 0:
            problems.append(f"node {self.id}: base_latency_ms must be >= 0")
        if len(set(self.queue)) != len(self.queue):
            problems.append(f"node {self.id}: queue contains duplicate task ids")
        problems.extend(self.energy_profile.validate())
        return problems


@dataclass
class Link:
    """A directed network link between two nodes."""

    src: str
    dst: str
    delay_ms: float = 5.0
    loss_rate: float = 0.0
    failure_prob: float = 0.0

    def validate(self) -> list[str]:
        problems = []
        if self.delay_ms < 0:
            problems.append(f"link {self.src}->{self.dst}: delay_ms must be >= 0")
        if not 0.0 <= self.loss_rate <= 1.0:
            problems.append(f"link {self.src}->{self.dst}: loss_rate must lie in [0, 1]")
        if not 0.0 <= self.failure_prob <= 1.0:
            problems.append(f"link {self.src}->{self.dst}: failure_prob must lie in [0, 1]")
        return problems


@dataclass
class Task:
    """A unit of schedulable work."""

    id: str
    cpu_demand: float
    mem_demand: float
    data_size_kb: float
    created_at: float
    deadline: float
    origin: str = ""

    def validate(self) -> list[str]:
        problems = []
        if self.cpu_demand < 0 or self.mem_demand < 0 or self.data_size_kb < 0:
            problems.append(f"task {self.id}: demands must be >= 0")
        if self.deadline <= self.created_at:
            problems.append(f"task {self.id}: deadline must be after created_at")
        return problems

    @property
    def deadline_budget_ms(self) -> float:
        return self.deadline - self.created_at


@dataclass
class GridState:
    """All nodes and links plus the simulation clock.

    Mutated only by the simulation engine; every other module receives it
    read-only or works on copies.
    """

    nodes: dict[str, FogNode]
    links: list[Link]
    clock: float = 0.0
    tasks: dict[str, Task] = field(default_factory=dict)

    def validate(self) -> list[str]:
        problems = []
        for node in self.nodes.values():
            problems.extend(node.validate())
        for link in self.links:
            problems.extend(link.validate())
            if link.src not in self.nodes or link.dst not in self.nodes:
                problems.append(
                    f"link {link.src}->{link.dst} references an unknown node"
                )
        return problems

    def live_nodes(self) -> list[FogNode]:
        return [n for n in self.nodes.values() if n.alive]

    def find_link(self, src: str, dst: str) -> Link | None:
        for link in self.links:
            if link.src == src and link.dst == dst:
                return link
        return None


def queued_demand(grid: GridState, node: FogNode) -> float:
    """Total cpu demand currently queued on ``node``."""
    return sum(grid.tasks[tid].cpu_demand for tid in node.queue if tid in grid.tasks)


def queued_mem_demand(grid: GridState, node: FogNode) -> float:
    """Total memory demand currently queued on ``node``."""
    return sum(grid.tasks[tid].mem_demand for tid in node.queue if tid in grid.tasks)


def utilization(grid: GridState, node: FogNode) -> float:
    """Queued cpu demand over capacity, clamped to [0, 1].

    Actual overload (raw ratio > 1) is not visible here by design; the
    engine flags it as a runtime error at dispatch instead.
    """
    if node.cpu_capacity <= 0:
        raise InvalidInputError(f"node {node.id} has non-positive cpu_capacity")
    return min(1.0, queued_demand(grid, node) / node.cpu_capacity)


def raw_utilization(grid: GridState, node: FogNode) -> float:
    """Unclamped queued-demand / capacity ratio (used for overload checks)."""
    if node.cpu_capacity <= 0:
        raise InvalidInputError(f"node {node.id} has non-positive cpu_capacity")
    return queued_demand(grid, node) / node.cpu_capacity


def renewable_fraction_at(profile: EnergyProfile, t_ms: float) -> float:
    """Piecewise-constant lookup into the renewable series, wrapping past the end."""
    if not profile.renewable_series:
        raise ConfigurationError("renewable_series is empty")
    idx = int(t_ms // profile.step_ms) % len(profile.renewable_series)
    return profile.renewable_series[idx]


def service_time_ms(node: FogNode, cpu_demand: float) -> float:
    """Time for ``node`` to retire ``cpu_demand`` compute units, in ms."""
    return cpu_demand / node.cpu_capacity * 1000.0


def task_energy(node: FogNode, cpu_demand: float) -> float:
    """Marginal energy to execute a task: cpu-seconds times the node's power rate."""
    return cpu_demand / node.cpu_capacity * node.energy_profile.power_rate


def idle_energy(node: FogNode, elapsed_ms: float) -> float:
    """Baseline energy drawn by a node over ``elapsed_ms``, independent of load."""
    return node.energy_profile.idle_power * elapsed_ms / 1000.0
