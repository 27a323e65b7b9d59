"""Command line entry point: ``fifthmkdv <experiment> [--config FILE] [--set key=value ...]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import EXPERIMENTS, parse_config
from .errors import AcceptanceFailure, LabError

log = logging.getLogger("fifthmkdv")


def build_parser():
    p = argparse.ArgumentParser(prog="fifthmkdv", description="Wave-packet and multiplier experiments for the fifth-order mKdV equation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("validate",) + EXPERIMENTS:
        sp = sub.add_parser(name, help="check a config without running" if name == "validate" else f"run the {name} experiment")
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key (repeatable)")
        sp.add_argument("--output-dir", help="where reports go (also FIFTHMKDV_OUTPUT_DIR)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        if name == "validate":
            sp.add_argument("--experiment", choices=EXPERIMENTS)
        else:
            sp.add_argument("--no-plot-data", action="store_true", help="skip the per-fit plot-data tables")
    return p


def _config(args, experiment):
    sets = list(args.set)
    if args.seed is not None:
        sets.append(f"seed={args.seed}")
    if args.workers is not None:
        sets.append(f"workers={args.workers}")
    if args.output_dir:
        sets.append(f"output_dir={args.output_dir}")
    return parse_config(args.config, sets, experiment=experiment)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            cfg = _config(args, args.experiment)
            print(f"config ok: experiment = {cfg.experiment}")
            return 0
        from .experiments import run_experiment
        from .io import emit_plot_data, write_report

        cfg = _config(args, args.command)
        # an explicit flag beats the environment variable, which beats the config file
        out = args.output_dir or cfg.resolved_output_dir()
        report = run_experiment(cfg)
        paths = write_report(report, out)
        if not args.no_plot_data:
            emit_plot_data(report, out)
        print(report.summary())
        print(f"report: {paths['json']}")
        if not report.passed:
            raise AcceptanceFailure(", ".join(c.name for c in report.failures))
        return 0
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
