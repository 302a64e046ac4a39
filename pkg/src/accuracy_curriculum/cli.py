"""Command-line entry point: ``train``, ``plot`` and ``selftest``.

Exit codes: 0 success, 1 configuration fault, 2 numerical divergence, 3 I/O fault.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import kernels
from .errors import ConfigError, NumericalDivergence
from .harness import CSVFormatError, parse_config, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="accuracy-curriculum", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    train = sub.add_parser("train", help="train agents for every seed and aggregate")
    train.add_argument("--strategy", help="baseline, random or active")
    train.add_argument("--beta", help="prioritization exponent for active sampling")
    train.add_argument("--steps", dest="total_steps", help="environment steps per run")
    train.add_argument("--seeds", help="number of runs N (seeds 0..N-1) or a comma list")
    train.add_argument("--eval-period", dest="eval_period")
    train.add_argument("--eval-episodes", dest="eval_episodes")
    train.add_argument("--out", help="output root; files go to <out>/<strategy>/")
    train.add_argument("--config", help="JSON config file; flags override its values")
    train.add_argument("--paper-scale", action="store_true",
                       help="300,000 steps and 10 seeds instead of the desk-scale default")
    train.add_argument("--jobs", type=int, default=1, help="runs executed in parallel")

    plot = sub.add_parser("plot", help="render SVG summaries from training CSVs")
    plot.add_argument("--in", dest="inputs", nargs="+", required=True,
                      help="training output roots or strategy directories")
    plot.add_argument("--out", required=True, help="directory for the SVG files")

    sub.add_parser("selftest", help="run the built-in oracle and gradient checks")
    return parser


def _flag_value(name, raw):
    if raw is None:
        return None
    if name == "seeds":
        if "," in raw:
            return [_number(name, v, int) for v in raw.split(",") if v.strip()]
        return _number(name, raw, int)
    if name == "beta":
        return _number(name, raw, float)
    if name in ("total_steps", "eval_period", "eval_episodes"):
        return _number(name, raw, int)
    return raw


def _number(name, raw, kind):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{name}: expected {kind.__name__}, got {raw!r}") from None


def cmd_train(args) -> int:
    keys = ("strategy", "beta", "total_steps", "seeds", "eval_period", "eval_episodes", "out")
    overrides = {k: _flag_value(k, getattr(args, k)) for k in keys}
    config = parse_config(args.config, overrides, paper_scale=args.paper_scale)
    logging.info("kernel backend: %s", kernels.BACKEND)
    result = run_suite(config, jobs=args.jobs)
    print(f"wrote {result.directory}")
    if result.failures:
        for seed, exc in result.failures.items():
            print(f"seed {seed}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plots import emit_plots
    for path in emit_plots(args.inputs, args.out):
        print(f"wrote {path}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_all
    return EXIT_OK if run_all() else EXIT_DIVERGED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "train" else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    handlers = {"train": cmd_train, "plot": cmd_plot, "selftest": cmd_selftest}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalDivergence as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, CSVFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
