"""Command-line interface.

Subcommands: ``solve`` (one reconstruction), ``experiment`` (restart
batches), ``validate`` (oracle suites), ``show-config`` (resolved
defaults). Exit codes: 0 success, 1 validation failure, 2 configuration
error.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config, parse_config_text, render_config
from .errors import ConfigError, DivergedError
from .experiments import EXPERIMENT_KINDS, run_experiment, solve_once
from .validate import run_all


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one reconstruction")
    solve.add_argument("--config", required=True)
    solve.add_argument("--seed", type=int, default=None)
    solve.add_argument("--out", default=None)

    exp = sub.add_parser("experiment", help="run a restart-batch experiment")
    exp.add_argument("kind", choices=EXPERIMENT_KINDS)
    exp.add_argument("--config", required=True)
    exp.add_argument("--seed", type=int, default=None)
    exp.add_argument("--out", default=None)
    exp.add_argument("--restarts", type=int, default=None)

    sub.add_parser("validate", help="run the oracle suites")

    show = sub.add_parser("show-config", help="print resolved configuration")
    show.add_argument("--config", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return 0 if run_all() else 1

        if args.command == "show-config":
            if args.config is None:
                rc = parse_config_text("")
            else:
                rc = load_config(args.config)
            sys.stdout.write(render_config(rc))
            return 0

        rc = load_config(args.config)
        rc = rc.with_overrides(**{"seed": args.seed, "output_dir": args.out})
        out_dir = rc.base_dir / rc["output_dir"] if args.out is None else args.out

        if args.command == "solve":
            summary = solve_once(rc, out_dir)
            print(f"solve: wrote {out_dir} (y_mse={summary['y_mse']:.6g})")
            return 0

        rc = rc.with_overrides(**{"experiment.kind": args.kind, "experiment.restarts": args.restarts})
        report = run_experiment(rc, out_dir)
        print(f"experiment {report.kind}: wrote {out_dir} ({len(report.manifest)} files)")
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DivergedError as exc:
        print(f"run diverged: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
