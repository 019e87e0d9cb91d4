"""The experiment driver.

One ``Simulation`` owns the grid, the event queue, the journal, and the
scheduler under test, and runs the full loop: meter telemetry trains the
forecaster in federated rounds, tasks arrive and are placed by the chosen
scheduler, the twin gate vets every gated placement before it executes,
faults kill nodes and force reassignment, and metrics accumulate into one
record per run.

Scheduler kinds:
  * fognite        — PPO policy proposes a node, the twin gate must approve;
                     on rejection the policy re-proposes among the remaining
                     nodes and falls back to the cloud when all are refused
  * focca_baseline — static least-cost rule: argmin of estimated service
                     time plus base latency, queue-blind, no gate
  * random         — uniform choice over live nodes, no gate (control)

Runtime errors are dropped tasks, deadline misses, and executions started
on an overloaded node, counted as events. Everything is driven by named
substreams of one seed; repeated runs are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .. import fedlearn, telemetry
from ..errors import ConfigurationError, InvalidInputError
from ..grid import (
    EnergyProfile,
    FogNode,
    GridState,
    Link,
    Task,
    queued_demand,
    renewable_fraction_at,
    service_time_ms,
    task_energy,
    utilization,
)
from ..neural.model import build_model, forward
from ..rl.agent import PPOAgent, Trajectory
from ..rl.encoder import EncoderConfig, encode_state
from ..rl.reward import ExecutionOutcome, compute_reward
from ..scenario import ScenarioConfig
from ..twin import gate_decision
from .events import Event, EventKind, EventQueue, Fault, FaultPlan
from .journal import Journal

FAILED_PLACEMENT_REWARD = -0.5      # episode reward when the chosen node dies first
DROP_REWARD = -1.0


class SchedulerKind(str, Enum):
    FOGNITE = "fognite"
    FOCCA = "focca_baseline"
    RANDOM = "random"


METRICS_COLUMNS = [
    "scheduler",
    "seed",
    "avg_response_ms",
    "load_balance_efficiency_pct",
    "energy_kwh_equiv",
    "model_accuracy_pct",
    "fault_recovery_s",
    "runtime_errors",
    "dropped_tasks",
    "deadline_misses",
    "overload_executions",
    "tasks_arrived",
    "tasks_completed",
    "tasks_in_flight",
    "decisions",
    "gate_approvals",
    "gate_rejections",
    "cloud_executions",
    "mean_task_reward",
    "mean_task_reward_second_half",
]


@dataclass
class MetricsRecord:
    scheduler: str
    seed: int
    avg_response_ms: float
    load_balance_efficiency_pct: float
    energy_kwh_equiv: float
    model_accuracy_pct: float
    fault_recovery_s: float
    runtime_errors: int
    dropped_tasks: int
    deadline_misses: int
    overload_executions: int
    tasks_arrived: int
    tasks_completed: int
    tasks_in_flight: int
    decisions: int
    gate_approvals: int
    gate_rejections: int
    cloud_executions: int
    mean_task_reward: float
    mean_task_reward_second_half: float

    def to_row(self) -> list:
        return [getattr(self, col) for col in METRICS_COLUMNS]


@dataclass
class RunResult:
    metrics: MetricsRecord
    journal: Journal
    error_series: list[tuple[float, int]]
    config: ScenarioConfig
    scheduler: SchedulerKind
    seed: int


@dataclass
class _TaskState:
    task: Task
    status: str = "pending"         # queued | cloud | completed | dropped | awaiting_redispatch
    assigned: str = ""
    epoch: int = 0
    episode: "_Episode | None" = None


@dataclass
class _Episode:
    trajectory: Trajectory
    awaiting: bool = False          # final step's reward still unknown

    def settle(self, reward: float) -> None:
        if self.awaiting:
            self.trajectory.rewards[-1] = float(reward)
            self.awaiting = False


@dataclass
class _FailureRecord:
    node_id: str
    at_ms: float
    pending: set = field(default_factory=set)
    recovery_ms: float | None = None


class Simulation:
    def __init__(self, config: ScenarioConfig, kind: SchedulerKind, seed: int):
        problems = config.validate()
        if problems:
            raise ConfigurationError(problems)
        self.config = config
        self.kind = SchedulerKind(kind)
        self.seed = seed
        root = np.random.SeedSequence(seed)
        streams = root.spawn(8)
        self._rng_workload = np.random.default_rng(streams[0])
        self._telemetry_seed = int(streams[1].generate_state(1)[0])
        self._model_seed = int(streams[2].generate_state(1)[0])
        self._fl_seed = int(streams[3].generate_state(1)[0])
        self._rng_policy = np.random.default_rng(streams[4])
        self._rng_twin = np.random.default_rng(streams[5])
        self._rng_faults = np.random.default_rng(streams[6])
        self._rng_random_sched = np.random.default_rng(streams[7])

        self.grid = self._build_grid()
        self.node_order = [n.id for n in config.nodes]
        self.queue = EventQueue()
        self.journal = Journal()
        self.encoder_cfg = EncoderConfig()
        self.perturbation = config.twin.perturbation()
        self.thresholds = config.twin.thresholds()
        self.reward_weights = config.rl.reward_weights()

        # scheduler state
        self._tasks: dict[str, _TaskState] = {}
        self._busy_until: dict[str, float] = {nid: 0.0 for nid in self.node_order}
        self._agents: dict[str, PPOAgent] = {}
        self._ready_episodes: list[dict] = []   # {"agent": key, "episode": _Episode}
        self._episode_backlog: dict[str, list[Trajectory]] = {}

        # telemetry / federated state
        self._datasets: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self._held_out: tuple[np.ndarray, np.ndarray] | None = None
        self._fl_state: fedlearn.RoundState | None = None

        # accounting
        self._util_integral = {nid: 0.0 for nid in self.node_order}
        self._alive_ms = {nid: 0.0 for nid in self.node_order}
        self._last_event_time = 0.0
        self._energy = 0.0
        self._response_times: list[float] = []
        self._task_rewards: list[float] = []
        self._errors = {"dropped": 0, "deadline_miss": 0, "overload": 0}
        self._failures: list[_FailureRecord] = []
        self._skip_recoveries: dict[str, int] = {}
        self._error_series: list[tuple[float, int]] = []
        self._counters = {
            "arrived": 0,
            "completed": 0,
            "dropped": 0,
            "decisions": 0,
            "gate_approvals": 0,
            "gate_rejections": 0,
            "cloud_executions": 0,
        }

    # ---------- construction ----------

    def _build_grid(self) -> GridState:
        cfg = self.config
        nodes: dict[str, FogNode] = {}
        for spec in cfg.nodes:
            profile = EnergyProfile(
                renewable_series=[spec.renewable_level],
                power_rate=spec.power_rate,
                idle_power=spec.idle_power,
            )
            nodes[spec.id] = FogNode(
                id=spec.id,
                cpu_capacity=spec.cpu_capacity,
                mem_capacity=spec.mem_capacity,
                base_latency_ms=spec.base_latency_ms,
                battery_level=spec.battery_level,
                failure_prob=spec.failure_prob,
                energy_profile=profile,
            )
        links = [
            Link(src=a.id, dst=b.id, delay_ms=cfg.link.delay_ms,
                 loss_rate=cfg.link.loss_rate, failure_prob=cfg.link.failure_prob)
            for a in cfg.nodes
            for b in cfg.nodes
            if a.id != b.id
        ]
        grid = GridState(nodes=nodes, links=links)
        problems = grid.validate()
        if problems:
            raise ConfigurationError(problems)
        return grid

    def _prepare_telemetry(self) -> None:
        """Generate meter streams, window them, and shard across nodes."""
        cfg = self.config.telemetry
        window = self.config.model.window
        rng_seed = np.random.SeedSequence(self._telemetry_seed)
        per_node_x: dict[str, list[np.ndarray]] = {nid: [] for nid in self.node_order}
        per_node_y: dict[str, list[np.ndarray]] = {nid: [] for nid in self.node_order}
        held_x, held_y = [], []
        pattern = telemetry.PatternConfig(gap_fraction=cfg.gap_fraction)
        for i, child in enumerate(rng_seed.spawn(cfg.meters)):
            stream = telemetry.generate_stream(
                meter_id=f"m{i}",
                duration_ms=cfg.duration_ms,
                rate_hz=cfg.rate_hz,
                pattern=pattern,
                seed=int(child.generate_state(1)[0]),
            )
            stream = telemetry.impute_gaps(stream)
            sample_set = telemetry.normalize_samples(
                telemetry.make_windows(stream, window, stride=cfg.stride)
            )
            if not sample_set.samples:
                continue
            x = np.stack([s.input for s in sample_set.samples])
            y = np.array([s.target for s in sample_set.samples])
            cut = max(1, int(len(x) * (1.0 - cfg.held_out_fraction)))
            nid = self.node_order[i % len(self.node_order)]
            per_node_x[nid].append(x[:cut])
            per_node_y[nid].append(y[:cut])
            held_x.append(x[cut:])
            held_y.append(y[cut:])
        for nid in self.node_order:
            if per_node_x[nid]:
                self._datasets[nid] = (
                    np.concatenate(per_node_x[nid]),
                    np.concatenate(per_node_y[nid]),
                )
        if held_x:
            hx, hy = np.concatenate(held_x), np.concatenate(held_y)
            if len(hx):
                self._held_out = (hx, hy)
        if not self._datasets:
            raise ConfigurationError(["telemetry produced no training windows"])

    def _schedule_initial_events(self) -> None:
        cfg = self.config
        t = 0.0
        for i in range(cfg.workload.tasks):
            t += float(self._rng_workload.exponential(cfg.workload.mean_interarrival_ms))
            task = self._make_task(f"t{i:05d}", t)
            self.queue.push(Event(t, EventKind.TASK_ARRIVAL, {"task_id": task.id}))
        for i in range(cfg.fed.rounds):
            at = cfg.duration_ms * (i + 1) / (cfg.fed.rounds + 1)
            self.queue.push(Event(at, EventKind.FL_ROUND, {"round": i}))
        plan = self._draw_fault_plan()
        for f in plan.faults:
            self.queue.push(Event(f.at_ms, EventKind.NODE_FAILURE, {"node": f.node_id}))
            self.queue.push(
                Event(f.at_ms + f.downtime_ms, EventKind.NODE_RECOVERY, {"node": f.node_id})
            )
        tick = cfg.report.tick_ms
        n_ticks = int(cfg.duration_ms // tick)
        for i in range(1, n_ticks + 1):
            self.queue.push(Event(i * tick, EventKind.REPORT_TICK, {"tick": i}))

    def _make_task(self, task_id: str, created_at: float) -> Task:
        w = self.config.workload
        rng = self._rng_workload
        budget = float(rng.uniform(*w.deadline_budget_ms))
        task = Task(
            id=task_id,
            cpu_demand=float(rng.uniform(*w.cpu_demand)),
            mem_demand=float(rng.uniform(*w.mem_demand)),
            data_size_kb=float(rng.uniform(*w.data_kb)),
            created_at=created_at,
            deadline=created_at + budget,
            origin=self.node_order[int(rng.integers(len(self.node_order)))],
        )
        self.grid.tasks[task.id] = task
        self._tasks[task.id] = _TaskState(task=task)
        return task

    def _draw_fault_plan(self) -> FaultPlan:
        """Fault targets lean toward nodes with high modeled failure_prob,
        so the twin's risk signal correlates with what actually breaks."""
        cfg = self.config.faults
        duration = self.config.duration_ms
        weights = np.array(
            [0.05 + self.grid.nodes[nid].failure_prob for nid in self.node_order]
        )
        weights = weights / weights.sum()
        faults = []
        lo = duration * cfg.window_fraction[0]
        hi = duration * cfg.window_fraction[1]
        for _ in range(cfg.count):
            nid = self.node_order[int(self._rng_faults.choice(len(self.node_order), p=weights))]
            at = float(self._rng_faults.uniform(lo, hi))
            downtime = float(self._rng_faults.uniform(*cfg.downtime_ms))
            faults.append(Fault(node_id=nid, at_ms=at, downtime_ms=downtime))
        faults.sort(key=lambda f: f.at_ms)
        plan = FaultPlan(faults)
        problems = plan.validate(duration * 2, set(self.node_order))
        if problems:
            raise ConfigurationError(problems)
        return plan

    # ---------- agents ----------

    def _agent_key(self, task: Task) -> str:
        return task.origin if self.config.rl.per_node_learners else "shared"

    def _agent_for(self, task: Task) -> PPOAgent:
        key = self._agent_key(task)
        if key not in self._agents:
            agent_seed = int(
                np.random.SeedSequence([self.seed, 104729, len(self._agents)]).generate_state(1)[0]
            )
            self._agents[key] = PPOAgent(
                n_actions=len(self.node_order),
                config=self.config.rl.to_ppo_config(),
                seed=agent_seed,
            )
        return self._agents[key]

    # ---------- main loop ----------

    def run(self) -> RunResult:
        self.journal.log(
            0.0,
            "run_header",
            scheduler=self.kind.value,
            seed=self.seed,
            nodes=self.node_order,
            tasks=self.config.workload.tasks,
            duration_ms=self.config.duration_ms,
        )
        self._prepare_telemetry()
        model_cfg = self.config.model.to_model_config()
        global_params = build_model(model_cfg, seed=self._model_seed)
        self._fl_state = fedlearn.RoundState(
            global_params=global_params,
            sync_interval=self.config.fed.sync_interval,
            epochs_per_round=self.config.fed.epochs_per_round,
            batch_size=self.config.fed.batch_size,
            l2_penalty=self.config.fed.l2_penalty,
        )
        self._schedule_initial_events()

        handlers = {
            EventKind.TASK_ARRIVAL: self._on_arrival,
            EventKind.TASK_COMPLETE: self._on_complete,
            EventKind.TASK_REDISPATCH: self._on_redispatch,
            EventKind.NODE_FAILURE: self._on_failure,
            EventKind.NODE_RECOVERY: self._on_recovery,
            EventKind.FL_ROUND: self._on_fl_round,
            EventKind.REPORT_TICK: self._on_tick,
        }
        while self.queue:
            event = self.queue.pop()
            self._advance_clock(event.time)
            handlers[event.kind](event)

        metrics = self._final_metrics()
        self.journal.log(
            self.grid.clock,
            "run_summary",
            **{col: getattr(metrics, col) for col in METRICS_COLUMNS},
        )
        return RunResult(
            metrics=metrics,
            journal=self.journal,
            error_series=list(self._error_series),
            config=self.config,
            scheduler=self.kind,
            seed=self.seed,
        )

    def _advance_clock(self, now: float) -> None:
        dt = now - self._last_event_time
        if dt > 0:
            for nid in self.node_order:
                node = self.grid.nodes[nid]
                self._util_integral[nid] += utilization(self.grid, node) * dt
                if node.alive:
                    self._alive_ms[nid] += dt
            self._last_event_time = now
        self.grid.clock = now

    # ---------- dispatch paths ----------

    def _on_arrival(self, event: Event) -> None:
        ts = self._tasks[event.payload["task_id"]]
        self._counters["arrived"] += 1
        self.journal.log(
            self.grid.clock,
            "task_arrival",
            task=ts.task.id,
            origin=ts.task.origin,
            cpu=round(ts.task.cpu_demand, 3),
            deadline=round(ts.task.deadline, 3),
        )
        self._dispatch(ts)

    def _dispatch(self, ts: _TaskState) -> None:
        self._counters["decisions"] += 1
        live = [nid for nid in self.node_order if self.grid.nodes[nid].alive]
        if not live:
            if self.config.cloud.capacity > 0:
                self._execute_cloud(ts)
            else:
                self._drop(ts, reason="no-live-nodes")
            return
        if self.kind is SchedulerKind.FOGNITE:
            self._dispatch_fognite(ts, live)
        elif self.kind is SchedulerKind.FOCCA:
            self._execute(ts, self._focca_choice(ts.task, live))
        else:
            choice = live[int(self._rng_random_sched.integers(len(live)))]
            self._execute(ts, choice)

    def _focca_choice(self, task: Task, live: list[str]) -> str:
        def cost(nid: str) -> float:
            node = self.grid.nodes[nid]
            return service_time_ms(node, task.cpu_demand) + node.base_latency_ms

        best = min(live, key=lambda nid: (cost(nid), self.node_order.index(nid)))
        return best

    def _dispatch_fognite(self, ts: _TaskState, live: list[str]) -> None:
        agent = self._agent_for(ts.task)
        origin = self.grid.nodes.get(ts.task.origin)
        anchor = origin if origin is not None and origin.alive else self.grid.nodes[live[0]]
        state = encode_state(self.grid, anchor, ts.task, self.encoder_cfg)
        mask = np.array([self.grid.nodes[nid].alive for nid in self.node_order], dtype=bool)
        episode = _Episode(trajectory=Trajectory())
        penalty = self.config.rl.rejection_penalty
        while mask.any():
            action, logp, value = agent.act(state, mask, rng=self._rng_policy)
            target = self.node_order[action]
            verdict = gate_decision(
                ts.task,
                target,
                self.grid,
                self.perturbation,
                self.thresholds,
                seed=int(self._rng_twin.integers(0, 2**31)),
            )
            self.journal.log(
                self.grid.clock,
                "gate_verdict",
                task=ts.task.id,
                target=target,
                approved=verdict.approved,
                reason=verdict.reason,
                p_fail=round(verdict.p_fail, 6),
                predicted_latency_ms=self._finite_or_null(verdict.predicted_latency_ms),
                predicted_utilization=round(verdict.predicted_utilization, 6),
            )
            if verdict.approved:
                self._counters["gate_approvals"] += 1
                episode.trajectory.add(state, action, 0.0, logp, value, mask.copy())
                episode.awaiting = True
                ts.episode = episode
                self._execute(ts, target)
                return
            self._counters["gate_rejections"] += 1
            episode.trajectory.add(state, action, -penalty, logp, value, mask.copy())
            mask = mask.copy()
            mask[action] = False
        # every live node refused: run in the cloud; the policy only answers
        # for its refused proposals
        ts.episode = episode
        self._close_episode(ts, settle=None)
        self._execute_cloud(ts)

    @staticmethod
    def _finite_or_null(v: float):
        return round(v, 6) if math.isfinite(v) else None

    def _execute(self, ts: _TaskState, target_id: str) -> None:
        node = self.grid.nodes[target_id]
        if not node.alive:
            raise InvalidInputError(f"dispatch to dead node {target_id}")
        now = self.grid.clock
        post_util = (queued_demand(self.grid, node) + ts.task.cpu_demand) / node.cpu_capacity
        if post_util > 1.0:
            self._errors["overload"] += 1
            self.journal.log(
                now,
                "overload_execution",
                task=ts.task.id,
                node=target_id,
                raw_utilization=round(post_util, 6),
            )
        link = self.grid.find_link(ts.task.origin, target_id)
        link_delay = link.delay_ms if link else 0.0
        arrival_at_node = now + link_delay
        start = max(arrival_at_node, self._busy_until[target_id])
        service = service_time_ms(node, ts.task.cpu_demand)
        complete_at = start + service
        self._busy_until[target_id] = complete_at
        node.queue.append(ts.task.id)
        ts.status = "queued"
        ts.assigned = target_id
        ts.epoch += 1
        self.journal.log(
            now,
            "dispatch",
            task=ts.task.id,
            target=target_id,
            scheduler=self.kind.value,
            start=round(start, 6),
            service_ms=round(service, 6),
        )
        self.queue.push(
            Event(
                complete_at,
                EventKind.TASK_COMPLETE,
                {"task_id": ts.task.id, "node": target_id, "epoch": ts.epoch},
            )
        )

    def _execute_cloud(self, ts: _TaskState) -> None:
        cloud = self.config.cloud
        now = self.grid.clock
        service = ts.task.cpu_demand / cloud.capacity * 1000.0
        complete_at = now + cloud.latency_ms + service
        ts.status = "cloud"
        ts.assigned = "cloud"
        ts.epoch += 1
        self._counters["cloud_executions"] += 1
        self.journal.log(
            now,
            "dispatch",
            task=ts.task.id,
            target="cloud",
            scheduler=self.kind.value,
            start=round(now + cloud.latency_ms, 6),
            service_ms=round(service, 6),
        )
        self.queue.push(
            Event(
                complete_at,
                EventKind.TASK_COMPLETE,
                {"task_id": ts.task.id, "node": "cloud", "epoch": ts.epoch},
            )
        )

    def _drop(self, ts: _TaskState, reason: str) -> None:
        ts.status = "dropped"
        self._errors["dropped"] += 1
        self._counters["dropped"] += 1
        self._task_rewards.append(DROP_REWARD)
        self.journal.log(self.grid.clock, "task_drop", task=ts.task.id, reason=reason)
        self._close_episode(ts, settle=DROP_REWARD)

    # ---------- completion and rewards ----------

    def _on_complete(self, event: Event) -> None:
        ts = self._tasks[event.payload["task_id"]]
        if event.payload["epoch"] != ts.epoch or ts.status not in ("queued", "cloud"):
            return                                      # stale completion of a reassigned task
        now = self.grid.clock
        task = ts.task
        if ts.status == "cloud":
            latency = now - task.created_at
            energy = task.cpu_demand / self.config.cloud.capacity * self.config.cloud.power_rate
            renewable = 0.0
        else:
            node = self.grid.nodes[ts.assigned]
            if task.id in node.queue:
                node.queue.remove(task.id)
            latency = now + node.base_latency_ms - task.created_at
            energy = task_energy(node, task.cpu_demand)
            renewable = renewable_fraction_at(node.energy_profile, now)
        self._energy += energy
        ts.status = "completed"
        self._counters["completed"] += 1
        self._response_times.append(latency)
        missed = task.created_at + latency > task.deadline
        if missed:
            self._errors["deadline_miss"] += 1
        live = self.grid.live_nodes()
        util_std = float(np.std([utilization(self.grid, n) for n in live])) if live else 0.0
        outcome = ExecutionOutcome(
            latency_ms=latency,
            deadline_budget_ms=task.deadline_budget_ms,
            energy=energy,
            energy_norm=self.config.rl.energy_norm,
            renewable_fraction=renewable,
            cluster_util_std=util_std,
        )
        reward = compute_reward(outcome, self.reward_weights)
        self._task_rewards.append(reward)
        self.journal.log(
            now,
            "task_complete",
            task=task.id,
            node=ts.assigned,
            latency_ms=round(latency, 6),
            deadline_miss=missed,
            reward=round(reward, 6),
        )
        self._close_episode(ts, settle=reward)

    def _close_episode(self, ts: _TaskState, settle: float | None) -> None:
        episode = ts.episode
        ts.episode = None
        if episode is None or self.kind is not SchedulerKind.FOGNITE:
            return
        if settle is not None:
            episode.settle(settle)
        if episode.awaiting or not len(episode.trajectory):
            return
        key = self._agent_key(ts.task)
        self._episode_backlog.setdefault(key, []).append(episode.trajectory)
        backlog = self._episode_backlog[key]
        if len(backlog) >= self.config.rl.update_batch_episodes:
            agent = self._agent_for(ts.task)
            diag = agent.update(backlog)
            self._episode_backlog[key] = []
            self.journal.log(
                self.grid.clock,
                "ppo_update",
                agent=key,
                update=agent.updates_done,
                entropy=round(diag["entropy"], 6),
                clip_fraction=round(diag["clip_fraction"], 6),
                mean_ratio=round(diag["mean_ratio"], 6),
                policy_loss=round(diag["policy_loss"], 6),
                value_loss=round(diag["value_loss"], 6),
            )

    # ---------- faults ----------

    def _on_failure(self, event: Event) -> None:
        nid = event.payload["node"]
        node = self.grid.nodes[nid]
        now = self.grid.clock
        if not node.alive:
            # hit while already down: defer revival to the last recovery due
            self._skip_recoveries[nid] = self._skip_recoveries.get(nid, 0) + 1
            self.journal.log(now, "node_failure_noop", node=nid)
            return
        node.alive = False
        flushed = list(node.queue)
        node.queue.clear()
        self._busy_until[nid] = now
        record = _FailureRecord(node_id=nid, at_ms=now, pending=set(flushed))
        self._failures.append(record)
        if not flushed:
            record.recovery_ms = 0.0
        self.journal.log(now, "node_failure", node=nid, flushed=flushed)
        delay = self.config.faults.detection_delay_ms
        spacing = self.config.faults.redispatch_spacing_ms
        for i, task_id in enumerate(flushed):
            ts = self._tasks[task_id]
            ts.status = "awaiting_redispatch"
            ts.assigned = ""
            ts.epoch += 1
            self._close_episode(ts, settle=FAILED_PLACEMENT_REWARD)
            at = now + delay + i * spacing
            self.queue.push(
                Event(at, EventKind.TASK_REDISPATCH, {"task_id": task_id, "failure": len(self._failures) - 1})
            )

    def _on_redispatch(self, event: Event) -> None:
        ts = self._tasks[event.payload["task_id"]]
        if ts.status != "awaiting_redispatch":
            return
        self.journal.log(self.grid.clock, "task_redispatch", task=ts.task.id)
        self._dispatch(ts)
        record = self._failures[event.payload["failure"]]
        record.pending.discard(ts.task.id)
        if not record.pending and record.recovery_ms is None:
            record.recovery_ms = self.grid.clock - record.at_ms

    def _on_recovery(self, event: Event) -> None:
        nid = event.payload["node"]
        node = self.grid.nodes[nid]
        if node.alive:
            return
        if self._skip_recoveries.get(nid, 0) > 0:
            self._skip_recoveries[nid] -= 1
            self.journal.log(self.grid.clock, "node_recovery_noop", node=nid)
            return
        node.alive = True
        self._busy_until[nid] = self.grid.clock
        downtime = None
        for record in reversed(self._failures):
            if record.node_id == nid:
                downtime = self.grid.clock - record.at_ms
                break
        self.journal.log(
            self.grid.clock,
            "node_recovery",
            node=nid,
            downtime_ms=round(downtime, 6) if downtime is not None else None,
        )

    # ---------- federated rounds ----------

    def _on_fl_round(self, event: Event) -> None:
        live_datasets = {
            nid: data
            for nid, data in self._datasets.items()
            if self.grid.nodes[nid].alive
        }
        compression = None
        if self.config.fed.compression_enabled:
            compression = fedlearn.CompressionConfig(
                quant_bits=self.config.fed.quant_bits,
                prune_threshold=self.config.fed.prune_threshold,
            )
        self._fl_state, log = fedlearn.run_round(
            self._fl_state,
            live_datasets,
            compression,
            seed=self._fl_seed,
            persist_optimizer=self.config.fed.persist_optimizer,
        )
        self.journal.log(
            self.grid.clock,
            "fl_round",
            round=log.round_index,
            participants=log.participants,
            skipped=log.skipped,
            bytes_up=log.bytes_up,
            rebroadcast=log.rebroadcast,
            note=log.note,
        )

    # ---------- reporting ----------

    def _total_errors(self) -> int:
        return sum(self._errors.values())

    def _on_tick(self, event: Event) -> None:
        utils = {
            nid: round(utilization(self.grid, self.grid.nodes[nid]), 6)
            for nid in self.node_order
        }
        cum = self._total_errors()
        self._error_series.append((self.grid.clock, cum))
        self.journal.log(
            self.grid.clock,
            "report_tick",
            tick=event.payload["tick"],
            cumulative_errors=cum,
            utilization=utils,
        )

    def _model_accuracy(self) -> float:
        if self._held_out is None or self._fl_state is None:
            return 0.0
        x, y = self._held_out
        preds, _ = forward(self._fl_state.global_params, x, mode="eval")
        span = float(y.max() - y.min())
        if span <= 0:
            span = 1.0
        nrmse = float(np.sqrt(np.mean((preds - y) ** 2))) / span
        return float(np.clip(100.0 * (1.0 - nrmse), 0.0, 100.0))

    def _final_metrics(self) -> MetricsRecord:
        horizon = max(self.config.duration_ms, self._last_event_time)
        utils = np.array([self._util_integral[nid] / horizon for nid in self.node_order])
        mu = float(utils.mean())
        sigma = float(utils.std())
        if mu <= 0:
            efficiency = 100.0
        else:
            efficiency = 100.0 * max(0.0, 1.0 - sigma / mu)
        idle = sum(
            self.grid.nodes[nid].energy_profile.idle_power * self._alive_ms[nid] / 1000.0
            for nid in self.node_order
        )
        recoveries = [r.recovery_ms for r in self._failures if r.recovery_ms is not None]
        rewards = self._task_rewards
        half = len(rewards) // 2
        arrived = self._counters["arrived"]
        completed = self._counters["completed"]
        dropped = self._counters["dropped"]
        return MetricsRecord(
            scheduler=self.kind.value,
            seed=self.seed,
            avg_response_ms=float(np.mean(self._response_times)) if self._response_times else 0.0,
            load_balance_efficiency_pct=efficiency,
            energy_kwh_equiv=self._energy + idle,
            model_accuracy_pct=self._model_accuracy(),
            fault_recovery_s=float(np.mean(recoveries)) / 1000.0 if recoveries else 0.0,
            runtime_errors=self._total_errors(),
            dropped_tasks=self._errors["dropped"],
            deadline_misses=self._errors["deadline_miss"],
            overload_executions=self._errors["overload"],
            tasks_arrived=arrived,
            tasks_completed=completed,
            tasks_in_flight=arrived - completed - dropped,
            decisions=self._counters["decisions"],
            gate_approvals=self._counters["gate_approvals"],
            gate_rejections=self._counters["gate_rejections"],
            cloud_executions=self._counters["cloud_executions"],
            mean_task_reward=float(np.mean(rewards)) if rewards else 0.0,
            mean_task_reward_second_half=float(np.mean(rewards[half:])) if rewards else 0.0,
        )


def run_experiment(config: ScenarioConfig, kind: SchedulerKind | str, seed: int) -> RunResult:
    """Build, run, and return one seeded simulation."""
    return Simulation(config, SchedulerKind(kind), seed).run()
