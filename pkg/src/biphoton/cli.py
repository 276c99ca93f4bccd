"""Command-line entry point: ``biphoton {simulate,correlate,fit,tomo,pipeline}``.

Exit codes: 0 success, 2 validation error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import RunConfig, apply_preset, load_config, paper_config
from .errors import ConvergenceError, ValidationError
from .io import dumps_report
from .pipeline import report_for

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed {text} is not an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biphoton", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="mode", required=True)
    for mode, help_ in [
        ("simulate", "generate Stokes / anti-Stokes time-tag files"),
        ("correlate", "histogram, g2, Cauchy-Schwarz factor and decay fit from two tag files"),
        ("fit", "exponential decay fit of a histogram CSV"),
        ("tomo", "MLE tomography from a counts CSV or from 16 simulated runs"),
        ("pipeline", "simulate, correlate, fit and reconstruct; write the full report"),
    ]:
        sp = sub.add_parser(mode, help=help_)
        sp.add_argument("--config", help="flat key = value configuration file")
        sp.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
        sp.add_argument("--out", help="output directory (default: out_dir from config, else ./out)")
        sp.add_argument("--preset", choices=["paper"], help="pin the experiment's parameters")
        if mode == "correlate":
            sp.add_argument("stokes", nargs="?", help="Stokes time-tag file")
            sp.add_argument("anti_stokes", nargs="?", help="anti-Stokes time-tag file")
        elif mode == "fit":
            sp.add_argument("histogram", nargs="?", help="histogram CSV")
        elif mode == "tomo":
            sp.add_argument("counts", nargs="?", help="16-row counts CSV; simulate if omitted")
    return p


def resolve_config(args) -> RunConfig:
    cfg = paper_config(mode=args.mode) if args.preset == "paper" else RunConfig(mode=args.mode)
    if args.config:
        cfg = load_config(args.config, cfg)
        cfg = replace(cfg, mode=args.mode)
    if args.preset:
        cfg = apply_preset(cfg, args.preset)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    paths = cfg.paths
    if getattr(args, "stokes", None):
        paths = replace(paths, stokes_path=args.stokes)
    if getattr(args, "anti_stokes", None):
        paths = replace(paths, anti_stokes_path=args.anti_stokes)
    if getattr(args, "histogram", None):
        paths = replace(paths, histogram_path=args.histogram)
    if getattr(args, "counts", None):
        paths = replace(paths, counts_path=args.counts)
    if args.out:
        paths = replace(paths, out_dir=args.out)
    return replace(cfg, paths=paths).validate()


def exit_code(report: dict) -> int:
    err = report.get("error")
    if err:
        return EXIT_CONVERGENCE if err["kind"] == "convergence" else EXIT_VALIDATION
    tomo = report.get("tomography")
    if tomo is not None and not tomo.get("converged", True):
        return EXIT_CONVERGENCE
    fit = report.get("fit")
    if fit is not None and not fit.get("converged", True):
        return EXIT_CONVERGENCE
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        report = report_for(cfg, cfg.paths.out_dir)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    sys.stdout.write(dumps_report(report))
    code = exit_code(report)
    if code and "error" in report:
        e = report["error"]
        print(f"error: [{e['stage']}] {e['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
