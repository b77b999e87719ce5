"""Command-line interface: train, compare, grad-check, and timeline.

Exit codes: 0 success, 1 configuration or input validation failure,
2 runtime or numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import apply_overrides, build_setup, load_config
from .errors import ConfigError, DomainError, FormatError, NumericError, ShapeError
from .runio import (
    COMPARISON_FIELDS,
    check_comparable,
    comparison_rows,
    execute_run,
    read_jsonl,
    summarize_timeline,
    write_csv,
)
from .verify import logit_grad_check

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="switchdistill",
        description="Online distillation with adaptive switching between reciprocal and frozen-teacher training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training configuration")
    p_train.add_argument("--config", required=True, help="flat key=value config file")
    p_train.add_argument("--out", required=True, help="run directory for artifacts")
    p_train.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )

    p_cmp = sub.add_parser("compare", help="train several configs and tabulate accuracies")
    p_cmp.add_argument("--configs", nargs="+", required=True)
    p_cmp.add_argument("--out", required=True, help="output directory")
    p_cmp.add_argument("--allow-mismatch", action="store_true",
                       help="skip the shared dataset/seed check")
    p_cmp.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override applied to every config",
    )

    p_gc = sub.add_parser("grad-check", help="verify analytic logit gradients against finite differences")
    p_gc.add_argument("--strategy", default="switch")
    p_gc.add_argument("--tau", type=float, default=1.0)
    p_gc.add_argument("--alpha", type=float, default=1.0)
    p_gc.add_argument("--beta", type=float, default=1.0)
    p_gc.add_argument("--seed", type=int, default=0)
    p_gc.add_argument("--trials", type=int, default=100)
    p_gc.add_argument("--tolerance", type=float, default=1e-4)
    p_gc.add_argument("--inject-fault", action="store_true",
                      help="scale the KL gradient by 2 to prove the check fails")

    p_tl = sub.add_parser("timeline", help="flatten a run's iteration log into a mode-timeline CSV")
    p_tl.add_argument("--run", required=True, help="run directory containing iteration JSONL")
    p_tl.add_argument("--file", default="iterations.jsonl",
                      help="which iteration log inside the run dir (for triples)")
    p_tl.add_argument("--out", default="timeline.csv",
                      help="output CSV path (written outside the run dir by default)")
    return parser


def cmd_train(args) -> int:
    values = apply_overrides(load_config(args.config), args.overrides)
    setup = build_setup(values)
    _, manifest = execute_run(setup, args.out)
    print(f"run complete: {args.out}")
    for name in manifest["artifacts"]:
        print(f"  {name}")
    return EXIT_OK


def cmd_compare(args) -> int:
    setups = []
    for path in args.configs:
        values = apply_overrides(load_config(path), args.overrides)
        label = os.path.splitext(os.path.basename(path))[0]
        setups.append((label, build_setup(values)))
    if not args.allow_mismatch:
        check_comparable(setups)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for i, (label, setup) in enumerate(setups):
        run_dir = os.path.join(args.out, f"run_{i:02d}_{label}")
        result, _ = execute_run(setup, run_dir)
        rows.extend(comparison_rows(label, result))
    out_csv = os.path.join(args.out, "comparison.csv")
    write_csv(out_csv, COMPARISON_FIELDS, rows)
    print(f"wrote {out_csv} ({len(rows)} rows)")
    return EXIT_OK


def cmd_grad_check(args) -> int:
    report = logit_grad_check(
        args.strategy,
        tau=args.tau,
        alpha=args.alpha,
        beta=args.beta,
        seed=args.seed,
        trials=args.trials,
        tolerance=args.tolerance,
        fault_scale=2.0 if args.inject_fault else 1.0,
    )
    for line in report.lines():
        print(line)
    if not report.ok:
        print(f"FAILED: max relative error {report.max_rel_error:.3e} > {report.tolerance:g}")
        return EXIT_RUNTIME
    print(f"all gradients within {report.tolerance:g} (max {report.max_rel_error:.3e})")
    return EXIT_OK


def cmd_timeline(args) -> int:
    path = os.path.join(args.run, args.file)
    records = read_jsonl(path)
    summary = summarize_timeline(records)
    rows = [
        {
            "iteration": rec["iteration"],
            "mode": rec["mode"],
            "G": rec["G"],
            "delta": rec["delta"],
            "epsilon": rec["epsilon"],
        }
        for rec in records
    ]
    write_csv(args.out, ["iteration", "mode", "G", "delta", "epsilon"], rows)
    print(f"wrote {args.out} ({len(rows)} rows)")
    for key, value in summary.items():
        print(f"  {key}: {value}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "train": cmd_train,
        "compare": cmd_compare,
        "grad-check": cmd_grad_check,
        "timeline": cmd_timeline,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ShapeError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
