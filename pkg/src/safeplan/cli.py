"""Command-line entry points.

Subcommands:

* ``run --config FILE [--seed S] [--profile desk|paper]`` — execute an
  experiment; exit code is nonzero if any seed fails.
* ``metrics RUN_DIR`` — recompute and print a run's aggregate metrics
  from its persisted traces.
* ``compare DIR [DIR ...] --out DIR`` — cross-method summary table with
  optimality-front labels.
* ``explore RUN_DIR`` — emit behavior-coverage and reward-histogram CSVs.
* ``selftest`` — fast oracle and invariant checks.
"""

import argparse
import json
import sys

from .config import apply_profile, load_config, validate_config
from .harness import compare_runs, compute_run_metrics, run_experiment, write_exploration


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.profile:
        cfg = apply_profile(cfg, args.profile)
    if args.seed is not None:
        cfg.seeds = (args.seed,)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    validate_config(cfg)
    records = run_experiment(cfg)
    for r in records:
        line = f"seed {r.seed}: {r.status}"
        if r.status != "ok":
            line += f" (epoch {r.diverged_at}: {r.error})"
        print(line)
    print(f"outputs in {cfg.output_dir}")
    return 0 if all(r.status == "ok" for r in records) else 1


def _cmd_metrics(args) -> int:
    agg = compute_run_metrics(args.run_dir)
    print(json.dumps(agg, indent=2, sort_keys=True))
    return 0


def _cmd_compare(args) -> int:
    result = compare_runs(args.run_dirs, args.out)
    print((args.out if isinstance(args.out, str) else str(args.out))
          + "/comparison.csv")
    for m in result["missing"]:
        print(f"missing: {m}", file=sys.stderr)
    return 0 if result["rows"] else 1


def _cmd_explore(args) -> int:
    for path in write_exploration(args.run_dir):
        print(path)
    return 0


def _cmd_selftest(_args) -> int:
    from .selftest import run_selftest
    return run_selftest()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safeplan",
        description="Safe model-based planning experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("--config", required=True, help="YAML config file")
    p_run.add_argument("--seed", type=int, default=None,
                       help="run a single seed instead of the config's list")
    p_run.add_argument("--profile", choices=("desk", "paper"), default=None,
                       help="rescale epoch/seed budgets")
    p_run.add_argument("--output-dir", default=None,
                       help="override the config's output directory")
    p_run.set_defaults(func=_cmd_run)

    p_met = sub.add_parser("metrics", help="recompute metrics for a run")
    p_met.add_argument("run_dir")
    p_met.set_defaults(func=_cmd_metrics)

    p_cmp = sub.add_parser("compare", help="summarize several runs")
    p_cmp.add_argument("run_dirs", nargs="+")
    p_cmp.add_argument("--out", required=True)
    p_cmp.set_defaults(func=_cmd_compare)

    p_exp = sub.add_parser("explore", help="emit exploration CSVs for a run")
    p_exp.add_argument("run_dir")
    p_exp.set_defaults(func=_cmd_explore)

    p_self = sub.add_parser("selftest", help="fast oracle/invariant checks")
    p_self.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
