"""Command-line entry point.

Verbs:
  run              execute seeded simulations and write all artifacts
  report           re-render the summary table and charts for a run directory
  validate-config  parse and validate a config file, printing every problem

Exit codes: 0 on success, 1 when a run fails, 2 on a config problem. The
default output root is the FOGNITE_OUT environment variable when set, else
./runs; each run lands in <root>/<scenario name>.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from pathlib import Path

from .errors import ConfigurationError, FogniteError
from .report import report as render_report
from .report import write_run_artifacts
from .scenario import ScenarioConfig, default_scenario, parse_config, quick_scenario
from .sim.engine import SchedulerKind, run_experiment

OUTPUT_ROOT_ENV = "FOGNITE_OUT"
EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_CONFIG_ERROR = 2

DEFAULT_SCHEDULERS = [SchedulerKind.FOGNITE.value, SchedulerKind.FOCCA.value]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fognite",
        description="Desk-scale fog-grid control-loop simulator.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    run_p = sub.add_parser("run", help="execute seeded runs and write artifacts")
    run_p.add_argument("--config", help="scenario config file (YAML); omit for defaults")
    run_p.add_argument("--quick", action="store_true", help="use the reduced smoke preset")
    run_p.add_argument(
        "--seed", type=int, nargs="+", default=None,
        help="one or more seeds (default: the config's seed)",
    )
    run_p.add_argument(
        "--scheduler", nargs="+", default=None,
        choices=[k.value for k in SchedulerKind],
        help=f"schedulers to run (default: {' '.join(DEFAULT_SCHEDULERS)})",
    )
    run_p.add_argument("--out", help="output directory (default: $FOGNITE_OUT/<name> or ./runs/<name>)")

    report_p = sub.add_parser("report", help="re-render summary and charts for a run directory")
    report_p.add_argument("run_dir", help="directory produced by `fognite run`")

    val_p = sub.add_parser("validate-config", help="check a config file and report all problems")
    val_p.add_argument("--config", required=True, help="scenario config file (YAML)")
    return parser


def _load_config(args) -> ScenarioConfig:
    if args.quick and args.config:
        raise ConfigurationError(["--quick and --config are mutually exclusive"])
    if args.quick:
        return quick_scenario()
    if args.config:
        return parse_config(args.config)
    return default_scenario()


def _output_dir(args, name: str) -> Path:
    if args.out:
        return Path(args.out)
    root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
    return Path(root) / name


def _cmd_run(args) -> int:
    config = _load_config(args)
    seeds = args.seed if args.seed is not None else [config.seed]
    schedulers = args.scheduler if args.scheduler is not None else list(DEFAULT_SCHEDULERS)
    out_dir = _output_dir(args, config.name)
    try:
        results = [
            run_experiment(config, SchedulerKind(s), seed)
            for s in schedulers
            for seed in seeds
        ]
        run_report = write_run_artifacts(out_dir, config, results)
    except FogniteError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    missing = run_report.missing_artifacts()
    if missing:
        print(f"run incomplete, missing artifacts: {missing}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    print(run_report.summary_table())
    print(f"artifacts written to {out_dir}")
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        print(render_report(args.run_dir))
    except FogniteError as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    return EXIT_OK


def _cmd_validate(args) -> int:
    config = parse_config(args.config)
    print(f"config OK: scenario '{config.name}', {len(config.nodes)} nodes, "
          f"{config.workload.tasks} tasks, seed {config.seed}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            return _cmd_run(args)
        if args.verb == "report":
            return _cmd_report(args)
        return _cmd_validate(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except FogniteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    except Exception:
        traceback.print_exc()
        return EXIT_RUN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
