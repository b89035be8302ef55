"""Command line entry point.

    finsler-spectra run --config cfg.json [--out DIR] [--format json|csv|svg-data] [--threads N]
    finsler-spectra check-duality --norm '{"family":"lq","q":3.0}' --samples 100

Exit code 0 iff every pass flag of the run is true.  FS_LOG in
{error, info, debug} controls diagnostics on standard error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import experiments
from .norms import check_duality, norm_from_dict

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = os.environ.get("FS_LOG", "error").lower()
    logging.basicConfig(
        stream=sys.stderr,
        level=_LOG_LEVELS.get(level, logging.ERROR),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = experiments.ExperimentConfig.from_json(args.config)
    report = experiments.run(cfg, threads=args.threads)
    out_dir = args.out or cfg.out or "."
    paths = experiments.emit_report(report, out_dir, args.format)
    for p in paths:
        print(p)
    return 0 if report.passed else 1


def _cmd_check_duality(args: argparse.Namespace) -> int:
    norm = norm_from_dict(json.loads(args.norm))
    rep = check_duality(norm, args.samples)
    print(json.dumps({
        "norm": norm.to_dict(),
        "samples": args.samples,
        "max_residual": rep.max_residual,
        "euler_primal": rep.euler_primal,
        "euler_polar": rep.euler_polar,
        "unit_grad_primal": rep.unit_grad_primal,
        "unit_grad_polar": rep.unit_grad_polar,
        "polar_inverse": rep.polar_inverse,
    }, indent=2, sort_keys=True))
    return 0 if rep.max_residual <= experiments.DUALITY_TOL else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finsler-spectra",
        description="Eigenvalues of the anisotropic p-Laplacian on rasterized planar sets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment described by a JSON config")
    p_run.add_argument("--config", required=True, help="path to the experiment config")
    p_run.add_argument("--out", default=None, help="output directory (default: config or cwd)")
    p_run.add_argument("--format", default="json", choices=experiments.FORMATS)
    p_run.add_argument("--threads", type=int, default=1, help="parallel jobs over p values")
    p_run.set_defaults(func=_cmd_run)

    p_dual = sub.add_parser("check-duality", help="verify the norm duality identities")
    p_dual.add_argument("--norm", required=True, help="norm spec as inline JSON")
    p_dual.add_argument("--samples", type=int, default=100)
    p_dual.set_defaults(func=_cmd_check_duality)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
