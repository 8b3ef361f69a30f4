"""Command-line entry point ``uncertainty-lab``."""

import argparse
import sys

from .errors import ConfigError
from .experiments import EXIT_CONFIG, emit_plot_data, run


def build_parser():
    parser = argparse.ArgumentParser(
        prog="uncertainty-lab",
        description="Numerical experiments on spectral inequalities for band-limited functions on tori.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("--config", required=True, help="TOML experiment config")
    p_run.add_argument("--jobs", type=int, default=None, help="worker processes (default: run.jobs or 1)")
    p_run.add_argument("--out", default=None, help="output directory (default: output.dir)")
    p_plot = sub.add_parser("plot-data", help="write plain columnar data files from a report")
    p_plot.add_argument("--report", required=True, help="summary.json written by 'run'")
    p_plot.add_argument("--out", required=True, help="directory for the data files")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        if args.jobs is not None and args.jobs < 1:
            print("error: --jobs: must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        try:
            return run(args.config, jobs=args.jobs, out=args.out)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        for path in emit_plot_data(args.report, args.out):
            print(path)
    except (FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
