"""``dpbandcov`` command line: run, validate and rates subcommands."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .. import BACKEND
from ..errors import DPBandCovError
from ..theory import RateSpec, naive_rate, rate_terms
from .config import load_config
from .experiments import run_experiment


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpbandcov", description="Private bandable covariance experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config and write CSVs")
    run.add_argument("--config", required=True, help="YAML or JSON experiment config")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--out", help="override the output directory")
    run.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    run.add_argument("--no-timing", action="store_true", help="write wall_ms as NA for byte-stable output")

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)

    rates = sub.add_parser("rates", help="print minimax rate terms")
    rates.add_argument("--norm", choices=("operator", "frobenius"), default="operator")
    rates.add_argument("--n", type=_positive_float, required=True)
    rates.add_argument("--d", type=_positive_float, required=True)
    rates.add_argument("--rho", type=_positive_float, required=True, help="zCDP budget; 'inf' for no privacy")
    rates.add_argument("--alpha", type=_positive_float, required=True)
    return p


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(seed=args.seed, output_dir=args.out)
    if args.no_timing:
        cfg = cfg.with_overrides(timing=False)
    res = run_experiment(cfg, threads=args.threads)
    print(f"backend={BACKEND} experiment={cfg.experiment} rows={len(res.rows)}")
    for path in res.files.values():
        print(f"wrote {path}")
    return 0


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"ok: {cfg.experiment}, {len(cfg.estimators)} estimator(s), {cfg.replicates} replicate(s)")
    return 0


def _cmd_rates(args) -> int:
    spec = RateSpec(args.norm, args.n, args.d, args.rho, args.alpha)
    t = rate_terms(spec)
    print(f"statistical {t.statistical!r}")
    print(f"privacy {t.privacy!r}")
    print(f"total {t.total!r}")
    print(f"naive {naive_rate(args.n, args.d, args.rho)!r}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "validate": _cmd_validate, "rates": _cmd_rates}[args.command]
    try:
        return handler(args)
    except (DPBandCovError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
