"""Event queue with a total, reproducible ordering.

Events pop in (time, insertion order) — two events at the same timestamp
come out in the order they went in, so a seeded run replays identically.
The queue refuses events scheduled before the last popped time; the clock
never moves backward.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum

from ..errors import InvalidInputError


class EventKind(str, Enum):
    TASK_ARRIVAL = "task_arrival"
    TASK_COMPLETE = "task_complete"
    TASK_REDISPATCH = "task_redispatch"
    NODE_FAILURE = "node_failure"
    NODE_RECOVERY = "node_recovery"
    FL_ROUND = "fl_round"
    REPORT_TICK = "report_tick"


@dataclass
class Event:
    time: float
    kind: EventKind
    payload: dict = field(default_factory=dict)


class EventQueue:
    def __init__(self) -> None:
        self._heap: list[tuple[float, int, Event]] = []
        self._seq = 0
        self.now = 0.0

    def push(self, event: Event) -> None:
        if event.time < self.now:
            raise InvalidInputError(
                f"event {event.kind} at {event.time} is before the clock ({self.now})"
            )
        heapq.heappush(self._heap, (event.time, self._seq, event))
        self._seq += 1

    def pop(self) -> Event:
        if not self._heap:
            raise InvalidInputError("pop from an empty event queue")
        time, _, event = heapq.heappop(self._heap)
        self.now = time
        return event

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)


@dataclass
class Fault:
    node_id: str
    at_ms: float
    downtime_ms: float


@dataclass
class FaultPlan:
    faults: list[Fault] = field(default_factory=list)

    def validate(self, duration_ms: float, node_ids: set[str]) -> list[str]:
        problems = []
        for i, f in enumerate(self.faults):
            if f.node_id not in node_ids:
                problems.append(f"faults[{i}]: unknown node {f.node_id}")
            if not 0 <= f.at_ms <= duration_ms:
                problems.append(f"faults[{i}]: failure time outside the experiment")
            if f.downtime_ms <= 0:
                problems.append(f"faults[{i}]: downtime must be > 0")
        return problems
