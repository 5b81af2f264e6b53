"""Command-line entry point.

Subcommands:

* ``train <config.yaml>`` — run every seed of a config, write CSVs.
* ``sweep <config.yaml> --axis NAME --values a,b,...`` — Cartesian grid
  over one or more axes, writes + prints the normalized score table.
* ``aggregate <run.csv>... --column NAME`` — per-step stats across runs.
* ``plot <run.csv>... -o out.svg`` — mean ± std curves, grouped by config.
* ``verify [suite]`` — run the built-in invariant suites.
"""

import argparse
import json
import re
import sys
from collections import OrderedDict
from pathlib import Path

from bnlab.errors import ConfigError

from . import plotting, runner, sweep, verify
from .aggregate import aggregate_lines, aggregate_runs, final_score, \
    write_aggregate_csv
from .config import load_config

RUN_NAME_RE = re.compile(r"run_([0-9a-f]{12})_seed(-?\d+)\.csv$")


def _cmd_train(args):
    cfg = load_config(args.config)
    results = runner.run_config(cfg, out_dir=args.out, seeds=args.seed or None)
    for res in results:
        if res.faulted:
            print(
                f"seed {res.seed}: FAULTED at step "
                f"{res.metrics.fault_step} ({res.metrics.fault_message}) "
                f"-> {res.csv_path}"
            )
        else:
            score = final_score(res.metrics)
            print(f"seed {res.seed}: final eval return {score:.4f} -> {res.csv_path}")
    return 0


def _cmd_sweep(args):
    if len(args.axis) != len(args.values):
        raise ConfigError("values", "give one --values list per --axis")
    cfg = load_config(args.config)
    axes = [
        (axis, sweep.parse_axis_values(axis, values))
        for axis, values in zip(args.axis, args.values)
    ]
    cells = sweep.run_sweep(cfg, axes, out_dir=args.out)
    csv_path, json_path = sweep.write_sweep_files(cells, cfg, out_dir=args.out)
    print(sweep.format_table(cells))
    print(f"table written to {csv_path} and {json_path}")
    return 0


def _cmd_aggregate(args):
    stats = aggregate_runs(args.files, args.column)
    if args.output:
        write_aggregate_csv(stats, args.output)
        print(f"wrote {args.output}")
    else:
        for line in aggregate_lines(stats):
            print(line)
    return 0


def _group_runs(files):
    """Group run CSVs by config hash; other files stand alone."""
    groups = OrderedDict()
    for f in files:
        path = Path(f)
        match = RUN_NAME_RE.search(path.name)
        key = match.group(1) if match else path.stem
        groups.setdefault(key, []).append(path)
    return groups


def _series_label(key, paths):
    config_path = paths[0].parent / f"config_{key}.json"
    if config_path.exists():
        try:
            payload = json.loads(config_path.read_text(encoding="utf-8"))
            label = payload.get("label") or ""
            mode = payload.get("agent", {}).get("mode")
            if label and label != "run":
                return label
            if mode:
                return f"{mode} [{key[:6]}]"
        except (OSError, json.JSONDecodeError):
            pass
    return key


def _cmd_plot(args):
    groups = _group_runs(args.files)
    series = []
    for key, paths in groups.items():
        stats = aggregate_runs([str(p) for p in paths], args.column)
        series.append((_series_label(key, paths), stats))
    plotting.plot_aggregates(
        series, args.output, title=args.title, ylabel=args.column
    )
    print(f"wrote {args.output}")
    return 0


def _cmd_verify(args):
    names = list(verify.SUITES) if args.suite == "all" else [args.suite]
    results = verify.run_suites(names)
    print(verify.format_report(results))
    return 0 if all(r.passed for r in results) else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bnlab",
        description="Mode-aware batch-norm RL experiments: train, sweep, "
        "aggregate, plot, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run every seed of one config")
    p_train.add_argument("config", help="YAML experiment config")
    p_train.add_argument("--seed", type=int, action="append",
                         help="override config seeds (repeatable)")
    p_train.add_argument("--out", default=None, help="output directory")
    p_train.set_defaults(fn=_cmd_train)

    p_sweep = sub.add_parser("sweep", help="grid over config axes")
    p_sweep.add_argument("config")
    p_sweep.add_argument(
        "--axis", action="append", required=True,
        choices=sorted(sweep.SWEEP_AXES),
        help="sweep axis (repeatable, Cartesian product)",
    )
    p_sweep.add_argument(
        "--values", action="append", required=True,
        help="comma-separated values for the matching --axis",
    )
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_agg = sub.add_parser("aggregate", help="per-step stats across run CSVs")
    p_agg.add_argument("files", nargs="+")
    p_agg.add_argument("--column", default="eval_return")
    p_agg.add_argument("-o", "--output", default=None)
    p_agg.set_defaults(fn=_cmd_aggregate)

    p_plot = sub.add_parser("plot", help="SVG learning curves from run CSVs")
    p_plot.add_argument("files", nargs="+")
    p_plot.add_argument("--column", default="eval_return")
    p_plot.add_argument("-o", "--output", required=True)
    p_plot.add_argument("--title", default="")
    p_plot.set_defaults(fn=_cmd_plot)

    p_verify = sub.add_parser("verify", help="run built-in invariant suites")
    p_verify.add_argument(
        "suite", nargs="?", default="all",
        choices=sorted(verify.SUITES) + ["all"],
    )
    p_verify.set_defaults(fn=_cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
