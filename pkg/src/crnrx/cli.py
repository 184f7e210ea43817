"""Command-line harness: simulate experiments, emit baselines, render reports.

Exit codes: 0 on success, 2 on configuration problems (bad file, bad key,
bad value, missing input), 3 on numerical failures inside a run.
"""

from __future__ import annotations

import argparse
import sys

from .crn import ConfigError, EventBudgetExceeded, InvariantViolation, NumericalError
from .experiments import (
    OUTPUT_FILES,
    load_config,
    render_report,
    run_baseline,
    run_bm_study,
    run_experiment,
)

_NUMERICAL_FAILURES = (
    NumericalError,
    EventBudgetExceeded,
    InvariantViolation,
    FloatingPointError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crnrx",
        description=(
            "Stochastic reaction-network receiver experiments: run a "
            "configured study, compute its deterministic baselines, or "
            "render plots from previously produced tables."
        ),
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    specs = (
        ("simulate", "run the experiment described by the config file"),
        ("baseline", "write only the deterministic baseline table"),
        ("bm-study", "run the detector-comparison study"),
        ("report", "render SVG plots from the experiment's CSV output"),
    )
    for name, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument(
            "--realizations", type=int, default=None, help="override realization count"
        )
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument(
            "--workers", type=int, default=None, help="override worker process count"
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(
            args.config,
            seed=args.seed,
            realizations=args.realizations,
            out_dir=args.out,
            workers=args.workers,
        )
        if args.verb == "bm-study":
            cfg = cfg.with_updates(kind="bm-study")
            run_bm_study(cfg)
            produced = OUTPUT_FILES["bm-study"]
        elif args.verb == "baseline":
            run_baseline(cfg)
            produced = ("baselines.csv",)
        elif args.verb == "report":
            produced = (render_report(cfg),)
        else:
            run_experiment(cfg)
            produced = OUTPUT_FILES[cfg.kind]
        if cfg.out_dir is not None:
            for name in produced:
                path = name if args.verb == "report" else f"{cfg.out_dir}/{name}"
                print(path)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_FAILURES as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
