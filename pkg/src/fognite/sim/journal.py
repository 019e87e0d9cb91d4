"""Run journal: an append-only list of JSON-serializable records.

One record per line, keys sorted, no wall-clock timestamps anywhere, so a
repeated run with the same seed produces byte-identical files. The audit
below replays a journal and reports every dispatch that violated the gate
contract; a clean run returns an empty list.
"""

from __future__ import annotations

import json
from pathlib import Path


class Journal:
    def __init__(self) -> None:
        self.records: list[dict] = []

    def log(self, t: float, kind: str, **fields) -> None:
        rec = {"t": round(float(t), 6), "kind": kind}
        rec.update(fields)
        self.records.append(rec)

    def to_lines(self) -> str:
        return "".join(
            json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n"
            for rec in self.records
        )

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_lines(), encoding="utf-8")

    @staticmethod
    def read(path: str | Path) -> list[dict]:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return [json.loads(line) for line in lines if line.strip()]


def find_gate_violations(records: list[dict]) -> list[str]:
    """Replay a journal and collect gate-contract violations.

    Checks: no dispatch lands on a node that was dead at dispatch time, and
    every gated dispatch (scheduler "fognite", fog target) follows an
    approving verdict for that (task, target) pair that is newer than any
    rejection of it.
    """
    violations = []
    dead: set[str] = set()
    last_verdict: dict[tuple[str, str], bool] = {}
    for i, rec in enumerate(records):
        kind = rec.get("kind")
        if kind == "node_failure":
            dead.add(rec["node"])
        elif kind == "node_recovery":
            dead.discard(rec["node"])
        elif kind == "gate_verdict":
            last_verdict[(rec["task"], rec["target"])] = bool(rec["approved"])
        elif kind == "dispatch":
            target = rec["target"]
            if target in dead:
                violations.append(f"record {i}: dispatch of {rec['task']} to dead node {target}")
            if rec.get("scheduler") == "fognite" and target != "cloud":
                if last_verdict.get((rec["task"], target)) is not True:
                    violations.append(
                        f"record {i}: gated dispatch of {rec['task']} to {target} "
                        "without a current approving verdict"
                    )
    return violations


def clock_is_monotonic(records: list[dict]) -> bool:
    times = [rec["t"] for rec in records if "t" in rec]
    return all(a <= b for a, b in zip(times, times[1:]))
