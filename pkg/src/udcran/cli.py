"""Command-line experiment driver.

Exit codes: 0 success, 2 configuration error, 3 solver failure during the
sweep (failed runs are recorded in the per-run log and the run continues).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import emit_results, emit_run_log, run_experiment, validate_config
from .model import ConfigError
from .schemes import SCHEME_TAGS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="udcran",
        description="Joint fronthaul/OFDMA resource allocation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="run a Monte-Carlo sweep and write result tables")
    sp.add_argument("--config", type=Path, default=None, help="JSON config file")
    sp.add_argument("--scheme", choices=SCHEME_TAGS, default=None,
                    help="run a single scheme instead of the config list")
    sp.add_argument("--profile", choices=("desk", "paper"), default="desk")
    sp.add_argument("--out", type=Path, default=Path("results.csv"))
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--seed", type=int, default=None, help="override the base seed")
    sp.add_argument("--jobs", type=int, default=1, help="worker threads for the sweep")
    sp.add_argument("--omit-timing", action="store_true",
                    help="write runtimes as 0.0 so outputs are byte-reproducible")

    op = sub.add_parser("oracle", help="regenerate a brute-force fixture for a tiny instance")
    op.add_argument("--dims", type=int, nargs=3, metavar=("M", "K", "N"), default=(2, 2, 4))
    op.add_argument("--seed", type=int, default=0)
    op.add_argument("--tightness", type=float, default=1.0,
                    help="target fronthaul load scale of the generated instance")
    op.add_argument("--grid-levels", type=int, default=None)
    op.add_argument("--out", type=Path, default=Path("oracle_fixture.json"))
    return parser


def _cmd_solve(args) -> int:
    try:
        raw = args.config.read_text(encoding="utf-8") if args.config else ""
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = validate_config(raw, profile=args.profile)
        if args.scheme is not None:
            cfg = replace(cfg, schemes=[args.scheme])
        if args.seed is not None:
            cfg = replace(cfg, base_seed=args.seed)
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    rows, records = run_experiment(cfg, jobs=max(args.jobs, 1), omit_timing=args.omit_timing)
    try:
        emit_results(rows, args.format, args.out)
        run_path = args.out.with_name(args.out.stem + "_runs" + args.out.suffix)
        emit_run_log(records, args.format, run_path)
    except ConfigError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    failures = [rec for rec in records if rec.error]
    print(f"wrote {args.out} ({len(rows)} rows) and {run_path} ({len(records)} runs)")
    if failures:
        print(f"{len(failures)} runs failed; see the run log", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_oracle(args) -> int:
    from .channel import instance_to_json
    from .oracle import brute_force_wsr, random_tiny_instance

    M, K, N = args.dims
    try:
        inst = random_tiny_instance(args.seed, M=M, K=K, N=N, fronthaul_tightness=args.tightness)
        result = brute_force_wsr(inst, grid_levels=args.grid_levels)
    except (ValueError, RuntimeError) as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    payload = {
        "instance": json.loads(instance_to_json(inst)),
        "wsr_bps": result.wsr,
        "upper_bound_bps": result.upper_bound,
        "solved_assignments": result.solved_assignments,
        "users": result.users.tolist(),
        "rrh_masks": result.masks.tolist(),
    }
    args.out.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {args.out}: wsr={result.wsr / 1e6:.6f} Mbps")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "solve":
        return _cmd_solve(args)
    return _cmd_oracle(args)


if __name__ == "__main__":
    sys.exit(main())
