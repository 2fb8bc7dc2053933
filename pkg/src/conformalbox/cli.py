"""Command-line front end: run experiments, generate synthetic data, print reports.

Exit codes: 0 success, 2 configuration/validation problem, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .config import load_config
from .data import load_csv, synth_dataset
from .errors import ConfigError, ConformalBoxError
from .evaluate import (
    plot_validity,
    plot_volumes,
    run_experiment,
    summarize,
    write_curves_csv,
    write_report_json,
)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="conformalbox",
        description="Calibrated hyper-rectangle prediction for multi-target regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a cross-validated experiment from a JSON config")
    run_p.add_argument("--config", required=True, help="path to the JSON config file")
    run_p.add_argument("--jobs", type=int, default=None, help="parallel fold workers")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--out", default=None, help="override the output directory")
    run_p.add_argument("--target", action="append", default=None,
                       help="override target columns (repeatable)")

    synth_p = sub.add_parser("synth", help="write a synthetic multi-target CSV dataset")
    synth_p.add_argument("--n", type=int, required=True, help="number of rows")
    synth_p.add_argument("--m", type=int, required=True, help="number of targets")
    synth_p.add_argument("--dependence", type=float, required=True,
                         help="noise dependence in [0, 1)")
    synth_p.add_argument("--features", type=int, default=8, help="feature count")
    synth_p.add_argument("--seed", type=int, default=0)
    synth_p.add_argument("--out", required=True, help="output CSV path")

    report_p = sub.add_parser("report", help="print the summary table of a report.json")
    report_p.add_argument("path", help="path to report.json")
    return parser


def _resolve_seed(flag_seed, config_seed):
    # precedence: CLI flag, then CC_SEED, then the config file
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get("CC_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"CC_SEED must be an integer, got {env!r}") from None
    return config_seed


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
        overrides = {"seed": _resolve_seed(args.seed, config.seed)}
        if args.jobs is not None:
            overrides["jobs"] = args.jobs
        if args.out is not None:
            overrides["output_dir"] = args.out
        if args.target:
            overrides["targets"] = tuple(args.target)
        config = config.replace(**overrides)
        if not Path(config.dataset).exists():
            raise ConfigError(f"dataset file not found: {config.dataset}")
        dataset = load_csv(config.dataset, config.targets)
    except (ConfigError, ConformalBoxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_experiment(dataset, config)
        out_dir = Path(config.output_dir)
        plots = out_dir / "plots"
        plots.mkdir(parents=True, exist_ok=True)
        write_report_json(report, out_dir / "report.json")
        write_curves_csv(report, out_dir / "curves.csv")
        plot_validity(report, plots / "validity_curves.svg")
        plot_volumes(report, plots / "volume_boxplot.svg")
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out_dir / 'report.json'}, {out_dir / 'curves.csv'}, {plots}/*.svg")
    print(summarize(report.aggregates, report.copulas))
    return 0


def cmd_synth(args) -> int:
    try:
        data = synth_dataset(args.n, args.m, args.dependence,
                             feature_dim=args.features, seed=args.seed)
    except ConformalBoxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(data.feature_names) + list(data.target_names))
            for x_row, y_row in zip(data.features, data.targets):
                writer.writerow([repr(float(v)) for v in x_row]
                                + [repr(float(v)) for v in y_row])
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out} ({data.n_examples} rows, "
          f"{data.n_features} features, {data.n_targets} targets)")
    return 0


def cmd_report(args) -> int:
    try:
        with open(args.path) as fh:
            report = json.load(fh)
        aggregates = report["aggregates"]
        copulas = report["copulas"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: malformed report: {exc}", file=sys.stderr)
        return 2
    print(summarize(aggregates, copulas))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "synth":
        return cmd_synth(args)
    return cmd_report(args)


def entrypoint():
    sys.exit(main())
