import pytest

from fognite.cli import main
from fognite.errors import ConfigurationError
from fognite.scenario import (
    ScenarioConfig,
    default_scenario,
    emit_config,
    from_dict,
    parse_config,
    quick_scenario,
    to_dict,
)


# --- config parsing ------------------------------------------------------------


def test_empty_file_yields_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert parse_config(str(path)) == ScenarioConfig()


def test_missing_file_is_a_config_error():
    with pytest.raises(ConfigurationError) as err:
        parse_config("/nonexistent/nowhere.yaml")
    assert "not found" in str(err.value)


def test_invalid_value_names_the_field(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("fed:\n  batch_size: 0\n")
    with pytest.raises(ConfigurationError) as err:
        parse_config(str(path))
    assert "fed.batch_size" in str(err.value)


def test_unknown_key_is_rejected_with_its_path(tmp_path):
    path = tmp_path / "unknown.yaml"
    path.write_text("twin:\n  max_speed: 3\n")
    with pytest.raises(ConfigurationError) as err:
        parse_config(str(path))
    assert "twin.max_speed: unknown key" in str(err.value)


def test_problems_accumulate():
    with pytest.raises(ConfigurationError) as err:
        from_dict({
            "duration_ms": -1,
            "bogus": True,
            "workload": {"tasks": -5},
            "rl": {"clip_epsilon": 2.0},
        })
    text = str(err.value)
    for fragment in ("duration_ms", "bogus", "workload.tasks", "rl.clip_epsilon"):
        assert fragment in text


def test_type_errors_are_reported_not_raised():
    with pytest.raises(ConfigurationError) as err:
        from_dict({"workload": {"tasks": "many"}, "nodes": "all"})
    text = str(err.value)
    assert "workload.tasks: expected an integer" in text
    assert "nodes: expected a sequence" in text


def test_emit_parse_round_trip(tmp_path):
    for config in (default_scenario(), quick_scenario()):
        path = tmp_path / f"{config.name}.yaml"
        path.write_text(emit_config(config))
        assert parse_config(str(path)) == config
    assert from_dict(to_dict(default_scenario())) == default_scenario()


def test_partial_override_keeps_other_defaults():
    config = from_dict({"workload": {"tasks": 7}})
    assert config.workload.tasks == 7
    assert config.workload.mean_interarrival_ms == ScenarioConfig().workload.mean_interarrival_ms
    assert config.nodes == ScenarioConfig().nodes


# --- CLI ------------------------------------------------------------------------


def test_cli_validate_config(tmp_path, capsys):
    good = tmp_path / "good.yaml"
    good.write_text(emit_config(quick_scenario()))
    assert main(["validate-config", "--config", str(good)]) == 0
    assert "config OK" in capsys.readouterr().out

    bad = tmp_path / "bad.yaml"
    bad.write_text("duration_ms: -4\n")
    assert main(["validate-config", "--config", str(bad)]) == 2
    assert "duration_ms" in capsys.readouterr().err


def test_cli_quick_and_config_conflict(capsys):
    assert main(["run", "--quick", "--config", "x.yaml"]) == 2
    assert "mutually exclusive" in capsys.readouterr().err


def test_cli_report_on_missing_directory(tmp_path, capsys):
    assert main(["report", str(tmp_path / "nope")]) == 1
    assert "report failed" in capsys.readouterr().err


@pytest.fixture(scope="module")
def quick_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("quickrun")
    code = main(["run", "--quick", "--seed", "0", "--out", str(out)])
    assert code == 0
    return out


def test_cli_run_writes_all_artifacts(quick_run):
    names = {p.name for p in quick_run.iterdir()}
    expected = {
        "config.yaml", "metrics.csv", "summary.txt",
        "journal_fognite_0.jsonl", "journal_focca_baseline_0.jsonl",
        "errors_fognite_0.csv", "errors_focca_baseline_0.csv",
        "errors_fognite.svg", "errors_focca_baseline.svg",
    }
    assert expected <= names


def test_cli_run_summary_mentions_both_schedulers(quick_run):
    summary = (quick_run / "summary.txt").read_text()
    assert "fognite" in summary and "focca_baseline" in summary
    assert "Average response time (ms)" in summary


def test_cli_config_echo_is_runnable(quick_run, capsys):
    assert main(["validate-config", "--config", str(quick_run / "config.yaml")]) == 0
    capsys.readouterr()
    assert parse_config(str(quick_run / "config.yaml")) == quick_scenario()


def test_cli_rerun_is_byte_identical(quick_run, tmp_path, capsys):
    again = tmp_path / "again"
    assert main(["run", "--quick", "--seed", "0", "--out", str(again)]) == 0
    capsys.readouterr()
    for name in ("metrics.csv", "journal_fognite_0.jsonl", "errors_focca_baseline_0.csv"):
        assert (again / name).read_bytes() == (quick_run / name).read_bytes()


def test_cli_report_rerenders(quick_run, capsys):
    assert main(["report", str(quick_run)]) == 0
    out = capsys.readouterr().out
    assert "fognite" in out and "focca_baseline" in out


def test_cli_bad_scheduler_flag_exits_nonzero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--scheduler", "mystery"])
    assert exc.value.code == 2
