"""Command-line entry point: ``ostd run|regret|bench <config>``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ESTIMATORS, ConfigError, load_config
from .errors import InvalidArgumentError, NumericError
from . import harness

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", help="INI experiment config")
    p.add_argument("--seed", type=int, help="override experiment.master_seed")
    p.add_argument("--out-dir", help="override experiment.output_dir")
    p.add_argument("--workers", type=int, help="parallel trajectory workers")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ostd", description="Online random-feature GPTD experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="error curves for one estimator")
    _common(run)
    run.add_argument("--estimator", choices=ESTIMATORS)
    reg = sub.add_parser("regret", help="regret against horizon for single-kernel OS-GPTD")
    _common(reg)
    reg.add_argument("--horizons", type=int, nargs="+", required=True)
    bench = sub.add_parser("bench", help="per-slot update times")
    _common(bench)
    bench.add_argument("--methods", nargs="+", choices=ESTIMATORS, default=list(ESTIMATORS))
    return parser


def _load(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"experiment.master_seed={args.seed}")
    if args.out_dir is not None:
        overrides.append(f"experiment.output_dir={args.out_dir}")
    if args.workers is not None:
        overrides.append(f"experiment.workers={args.workers}")
    if getattr(args, "estimator", None):
        overrides.append(f"experiment.estimator={args.estimator}")
    return load_config(args.config, overrides)


def _print_table(header, rows, out) -> None:
    cells = [[str(h) for h in header]] + [[f"{x:.4g}" if isinstance(x, float) else str(x) for x in r]
                                          for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    for c in cells:
        print("  ".join(v.rjust(w) for v, w in zip(c, widths)), file=out)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        if args.command == "run":
            s = harness.run_experiment(cfg)
            _print_table(
                ("method", "env", "N", "T", "pred_err", "bellman_err", "cut_slot", "cut_pred", "cut_bellman"),
                [(s.method, s.environment, s.num_trajectories, s.horizon, s.final_pred_error,
                  s.final_bellman_error, s.cutoff_slot, s.cutoff_pred_error, s.cutoff_bellman_error)], out)
            if s.mean_final_weights is not None:
                print("final weights: " + ", ".join(f"{w:.4f}" for w in s.mean_final_weights), file=out)
            print(f"stability inequality held on every trajectory: {s.stability_holds}", file=out)
        elif args.command == "regret":
            rows = harness.run_regret_sweep(cfg, args.horizons)
            _print_table(harness.RegretRow.HEADER, [r.as_tuple() for r in rows], out)
        else:
            rows = harness.runtime_bench(cfg, args.methods)
            _print_table(harness.TimingRow.HEADER, [r.as_tuple() for r in rows], out)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"ostd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"ostd: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
