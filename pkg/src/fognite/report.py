"""Run artifacts and the comparison table.

A completed experiment becomes a directory of plain files: the resolved
config, one metrics row per (scheduler, seed), one journal and one error
time-series per run, a cumulative-error chart per scheduler, and a text
summary with the five headline metrics side by side per scheduler. Nothing
is written outside the chosen directory, and rerunning with the same
config and seeds reproduces the CSV and journal bytes exactly.

``report(run_dir)`` rebuilds the summary and charts from the files alone,
so a run can be rendered again (or elsewhere) without re-simulating.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import InvalidInputError
from .scenario import ScenarioConfig, emit_config, parse_config
from .sim.engine import METRICS_COLUMNS, MetricsRecord, RunResult

SUMMARY_METRICS = [
    ("avg_response_ms", "Average response time (ms)"),
    ("load_balance_efficiency_pct", "Load-balance efficiency (%)"),
    ("energy_kwh_equiv", "Energy consumption (kWh-equiv)"),
    ("model_accuracy_pct", "Forecast model accuracy (%)"),
    ("fault_recovery_s", "Fault recovery time (s)"),
]

CONFIG_FILE = "config.yaml"
METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.txt"


def _journal_name(scheduler: str, seed: int) -> str:
    return f"journal_{scheduler}_{seed}.jsonl"


def _errors_name(scheduler: str, seed: int) -> str:
    return f"errors_{scheduler}_{seed}.csv"


def _chart_name(scheduler: str) -> str:
    return f"errors_{scheduler}.svg"


@dataclass
class RunReport:
    """Everything a finished ``run`` produced, with artifact paths."""

    out_dir: Path
    config: ScenarioConfig
    rows: list[MetricsRecord]
    seeds: list[int]
    schedulers: list[str]
    artifacts: list[Path] = field(default_factory=list)
    versions: dict = field(default_factory=dict)

    def missing_artifacts(self) -> list[Path]:
        return [p for p in self.artifacts if not p.exists()]

    def summary_table(self) -> str:
        return summary_table(self.rows, self.schedulers, self.seeds, self.versions)


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def summary_table(
    rows: list[MetricsRecord],
    schedulers: list[str],
    seeds: list[int],
    versions: dict,
) -> str:
    """Five-metric comparison, one column per scheduler, seed-averaged."""
    by_sched = {s: [r for r in rows if r.scheduler == s] for s in schedulers}
    name_w = max(len(label) for _, label in SUMMARY_METRICS)
    col_w = max([12] + [len(s) for s in schedulers])
    lines = []
    header = "Metric".ljust(name_w) + "".join(s.rjust(col_w + 2) for s in schedulers)
    lines.append(header)
    lines.append("-" * len(header))
    for attr, label in SUMMARY_METRICS:
        cells = []
        for s in schedulers:
            cells.append(f"{_mean([getattr(r, attr) for r in by_sched[s]]):.2f}".rjust(col_w + 2))
        lines.append(label.ljust(name_w) + "".join(cells))
    lines.append("")
    for s in schedulers:
        errs = [r.runtime_errors for r in by_sched[s]]
        lines.append(
            f"cumulative runtime errors, {s}: total {sum(errs)} over seeds "
            f"{seeds} (mean {_mean(errs):.1f})"
        )
    lines.append("")
    lines.append(f"seeds: {seeds}")
    lines.append(f"versions: {versions}")
    return "\n".join(lines) + "\n"


def write_metrics_csv(path: Path, rows: list[MetricsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row.to_row()])


def read_metrics_csv(path: Path) -> list[MetricsRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRICS_COLUMNS:
            raise InvalidInputError(f"{path}: unexpected metrics columns {reader.fieldnames}")
        for raw in reader:
            kwargs = {}
            for col in METRICS_COLUMNS:
                current = MetricsRecord.__dataclass_fields__[col].type
                value = raw[col]
                if current == "int":
                    kwargs[col] = int(value)
                elif current == "float":
                    kwargs[col] = float(value)
                else:
                    kwargs[col] = value
            records.append(MetricsRecord(**kwargs))
    return records


def write_error_series(path: Path, series: list[tuple[float, int]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ms", "cumulative_errors"])
        for t, n in series:
            writer.writerow([repr(float(t)), n])


def read_error_series(path: Path) -> list[tuple[float, int]]:
    series = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            series.append((float(row["t_ms"]), int(row["cumulative_errors"])))
    return series


def write_error_chart(path: Path, scheduler: str, by_seed: dict[int, list[tuple[float, int]]]) -> None:
    """One SVG per scheduler: cumulative errors vs time, one line per seed."""
    import matplotlib

    matplotlib.use("Agg")
    # content-derived element ids instead of per-process object ids
    matplotlib.rcParams["svg.hashsalt"] = "fognite"
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for seed in sorted(by_seed):
        series = by_seed[seed]
        ax.step(
            [t / 1000.0 for t, _ in series],
            [n for _, n in series],
            where="post",
            label=f"seed {seed}",
        )
    ax.set_xlabel("time (s)")
    ax.set_ylabel("cumulative runtime errors")
    ax.set_title(f"cumulative runtime errors: {scheduler}")
    if len(by_seed) <= 10:
        ax.legend(fontsize="small")
    fig.tight_layout()
    # a fixed Date keeps rerenders byte-comparable
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_run_artifacts(out_dir: str | Path, config: ScenarioConfig, results: list[RunResult]) -> RunReport:
    """Persist every artifact for a batch of runs and return the report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schedulers = []
    seeds = []
    for res in results:
        if res.scheduler.value not in schedulers:
            schedulers.append(res.scheduler.value)
        if res.seed not in seeds:
            seeds.append(res.seed)

    artifacts = [out / CONFIG_FILE, out / METRICS_FILE, out / SUMMARY_FILE]
    (out / CONFIG_FILE).write_text(emit_config(config))
    rows = [res.metrics for res in results]
    write_metrics_csv(out / METRICS_FILE, rows)

    series_by_sched: dict[str, dict[int, list[tuple[float, int]]]] = {}
    for res in results:
        jpath = out / _journal_name(res.scheduler.value, res.seed)
        res.journal.write(jpath)
        epath = out / _errors_name(res.scheduler.value, res.seed)
        write_error_series(epath, res.error_series)
        artifacts += [jpath, epath]
        series_by_sched.setdefault(res.scheduler.value, {})[res.seed] = res.error_series
    for sched, by_seed in series_by_sched.items():
        cpath = out / _chart_name(sched)
        write_error_chart(cpath, sched, by_seed)
        artifacts.append(cpath)

    versions = {"fognite": __version__}
    report = RunReport(
        out_dir=out,
        config=config,
        rows=rows,
        seeds=seeds,
        schedulers=schedulers,
        artifacts=artifacts,
        versions=versions,
    )
    (out / SUMMARY_FILE).write_text(report.summary_table())
    return report


def report(run_dir: str | Path) -> str:
    """Re-render the summary and charts for an existing run directory.

    Returns the summary text. Raises ``InvalidInputError`` listing every
    expected file that is missing.
    """
    run = Path(run_dir)
    missing = [str(run / name) for name in (CONFIG_FILE, METRICS_FILE) if not (run / name).exists()]
    if missing:
        raise InvalidInputError(
            "run directory is incomplete; expected files: " + ", ".join(missing)
        )
    parse_config(run / CONFIG_FILE)      # config echo must still parse clean
    rows = read_metrics_csv(run / METRICS_FILE)
    schedulers = []
    seeds = []
    for row in rows:
        if row.scheduler not in schedulers:
            schedulers.append(row.scheduler)
        if row.seed not in seeds:
            seeds.append(row.seed)

    missing = []
    series_by_sched: dict[str, dict[int, list[tuple[float, int]]]] = {}
    for row in rows:
        epath = run / _errors_name(row.scheduler, row.seed)
        if not epath.exists():
            missing.append(str(epath))
            continue
        series_by_sched.setdefault(row.scheduler, {})[row.seed] = read_error_series(epath)
    if missing:
        raise InvalidInputError(
            "run directory is incomplete; expected files: " + ", ".join(missing)
        )

    for sched, by_seed in series_by_sched.items():
        write_error_chart(run / _chart_name(sched), sched, by_seed)
    text = summary_table(rows, schedulers, seeds, {"fognite": __version__})
    (run / SUMMARY_FILE).write_text(text)
    return text
