"""Command-line interface.

    trustloop run --config <path|name> [--seed N] [--controller KIND] [--out DIR]
    trustloop suite --config <path|name> [--out DIR]
    trustloop summarize --in DIR [--no-figures]
    trustloop print-config [--config <path|name>]
    trustloop list-scenarios

Exit status 0 on success, 2 on configuration errors (diagnostic names the
offending field), 1 on any other failure. TRUSTLOOP_LOG controls verbosity
(DEBUG/INFO/WARNING; default INFO).
"""

import argparse
import logging
import os
import sys
from pathlib import Path

from trustloop.config import ScenarioConfig, builtin_scenarios, format_config, load_config
from trustloop.controller import KIND_ADAPTIVE, KIND_ATCL, KIND_FIXED, KIND_NONE, KIND_ORACLE
from trustloop.errors import ConfigError, TrustloopError

log = logging.getLogger("trustloop")

CLI_CONTROLLERS = [KIND_ATCL, KIND_FIXED, KIND_ADAPTIVE, KIND_NONE, KIND_ORACLE]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trustloop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one seeded scenario run")
    p_run.add_argument("--config", required=True, help="config file path or built-in scenario name")
    p_run.add_argument("--seed", type=int, default=None, help="master seed (default: first config seed)")
    p_run.add_argument("--controller", choices=CLI_CONTROLLERS, default=None,
                       help="override the config's controller")
    p_run.add_argument("--out", default=None, help="output directory (default: config out_dir)")

    p_suite = sub.add_parser("suite", help="run the controller/seed/intensity cross product")
    p_suite.add_argument("--config", required=True)
    p_suite.add_argument("--out", default=None)
    p_suite.add_argument("--write-runs", action="store_true",
                         help="also persist every individual run's artifacts")

    p_sum = sub.add_parser("summarize", help="summarize run artifacts into CSV + figures")
    p_sum.add_argument("--in", dest="in_dir", required=True, help="run directory or directory of runs")
    p_sum.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p_print = sub.add_parser("print-config", help="print every configuration key")
    p_print.add_argument("--config", default=None, help="print this config instead of the defaults")

    sub.add_parser("list-scenarios", help="list built-in scenario names")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config.seeds[0]
    out = Path(args.out) if args.out else Path(config.out_dir)
    from trustloop.engine import run_scenario

    result = run_scenario(config, seed, args.controller, out)
    s = result.summary
    log.info(
        "run %s: final_loss=%.4f final_accuracy=%.4f flips=%d messages=%d",
        result.run_dir.name, s["final_loss"], s["final_accuracy"],
        s["total_flips"], s["total_messages"],
    )
    print(result.run_dir)
    return 0


def _cmd_suite(args) -> int:
    config = load_config(args.config)
    out = Path(args.out) if args.out else Path(config.out_dir) / f"{config.name}_suite"
    from trustloop.suite import run_suite

    outcome = run_suite(config, out, write_runs=args.write_runs)
    for row in outcome["summary_rows"]:
        log.info(
            "suite cell controller=%s intensity=%g median_final_accuracy=%.4f median_flips=%g",
            row["controller"], row["intensity"],
            row["median_final_accuracy"], row["median_total_flips"],
        )
    from trustloop.report import render_suite_figures

    render_suite_figures(outcome["paths"]["runs"], out / "figures")
    print(out)
    return 0


def _cmd_summarize(args) -> int:
    from trustloop.report import summarize

    outcome = summarize(args.in_dir, render=not args.no_figures)
    log.info("summarized %d run(s); report at %s", len(outcome["runs"]),
             outcome["paths"]["runs_csv"].parent)
    print(outcome["paths"]["runs_csv"].parent)
    return 0


def _cmd_print_config(args) -> int:
    config = load_config(args.config) if args.config else ScenarioConfig()
    sys.stdout.write(format_config(config))
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("TRUSTLOOP_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "suite":
            return _cmd_suite(args)
        if args.command == "summarize":
            return _cmd_summarize(args)
        if args.command == "print-config":
            return _cmd_print_config(args)
        if args.command == "list-scenarios":
            print("\n".join(builtin_scenarios()))
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TrustloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
