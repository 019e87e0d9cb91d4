import pytest

from fognite.errors import InvalidInputError
from fognite.report import (
    SUMMARY_METRICS,
    read_error_series,
    read_metrics_csv,
    summary_table,
    write_error_chart,
    write_error_series,
    write_metrics_csv,
)
from fognite.sim.engine import MetricsRecord


def record(scheduler="fognite", seed=0, **kw):
    base = dict(
        scheduler=scheduler,
        seed=seed,
        avg_response_ms=512.375,
        load_balance_efficiency_pct=84.2,
        energy_kwh_equiv=1.25,
        model_accuracy_pct=71.0,
        fault_recovery_s=2.5,
        runtime_errors=4,
        dropped_tasks=1,
        deadline_misses=2,
        overload_executions=1,
        tasks_arrived=100,
        tasks_completed=99,
        tasks_in_flight=0,
        decisions=110,
        gate_approvals=90,
        gate_rejections=20,
        cloud_executions=3,
        mean_task_reward=0.41,
        mean_task_reward_second_half=0.45,
    )
    base.update(kw)
    return MetricsRecord(**base)


def test_summary_table_has_five_metric_rows():
    rows = [record(), record(seed=1, avg_response_ms=500.0), record("focca_baseline")]
    table = summary_table(rows, ["fognite", "focca_baseline"], [0, 1], {"fognite": "0.1.0"})
    lines = table.splitlines()
    assert len(SUMMARY_METRICS) == 5
    for _, label in SUMMARY_METRICS:
        assert sum(label in line for line in lines) == 1
    # seed-averaged: (512.375 + 500.0) / 2
    response_line = next(l for l in lines if "Average response time" in l)
    assert "506.19" in response_line
    assert any("seeds: [0, 1]" in l for l in lines)


def test_summary_table_renders_with_no_rows():
    table = summary_table([], ["fognite"], [], {})
    assert "Average response time (ms)" in table


def test_metrics_csv_round_trip(tmp_path):
    rows = [record(), record("random", seed=7, avg_response_ms=1.0 / 3.0)]
    path = tmp_path / "metrics.csv"
    write_metrics_csv(path, rows)
    back = read_metrics_csv(path)
    assert back == rows                      # repr round-trip keeps floats exact

    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(InvalidInputError):
        read_metrics_csv(tmp_path / "bad.csv")


def test_error_series_round_trip(tmp_path):
    series = [(0.0, 0), (5_000.0, 2), (10_000.0, 2), (20_000.0, 7)]
    path = tmp_path / "errors.csv"
    write_error_series(path, series)
    assert read_error_series(path) == series


def test_error_chart_is_deterministic_svg(tmp_path):
    by_seed = {
        0: [(0.0, 0), (1_000.0, 1), (2_000.0, 4)],
        1: [(0.0, 0), (1_500.0, 2)],
    }
    a = tmp_path / "a.svg"
    b = tmp_path / "b.svg"
    write_error_chart(a, "fognite", by_seed)
    write_error_chart(b, "fognite", by_seed)
    data = a.read_bytes()
    assert data[:5] == b"<?xml"
    assert data == b.read_bytes()
