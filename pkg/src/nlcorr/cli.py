"""Command-line entry point.

Exit codes: 0 success, 1 invalid input (config, flags, I/O), 2 numerical
assertion failure (including a failed audit or check).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import checks, scenario
from .errors import NumericalError, ValidationError

log = logging.getLogger("nlcorr")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


def _format(args) -> str:
    if args.format:
        return args.format
    return "json" if Path(args.out).suffix.lower() == ".json" else "csv"


def _load(source: str) -> scenario.ExperimentConfig:
    if source in scenario.PRESETS and not Path(source).exists():
        return scenario.ExperimentConfig.preset(source)
    return scenario.ExperimentConfig.load(source)


def _overrides(args) -> dict:
    out = {}
    for flag, key in (("algorithm", "algorithm"), ("engine", "engine"), ("t_max", "t_max"),
                      ("dt", "dt"), ("stride", "sample_stride")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    return out


def _parse_perturbation(text: str) -> dict:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ValidationError(f"--perturb expects field=value, got {text!r}")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return {key.strip(): parsed}


def _write(series, args, cfg):
    path = scenario.export(series, _format(args), args.out, cfg)
    log.info("wrote %d series to %s", len(series), path)


def cmd_run(args) -> int:
    cfg = _load(args.config)
    over = _overrides(args)
    if args.t1 is not None or args.t2 is not None:
        t1, t2 = cfg.data["schedule"]
        over["schedule"] = [t1 if args.t1 is None else args.t1, t2 if args.t2 is None else args.t2]
    if over:
        cfg = cfg.with_overrides(**over)
    _write(scenario.run(cfg), args, cfg)
    return EXIT_OK


def cmd_figure(args) -> int:
    cfg = scenario.ExperimentConfig.preset(args.command)
    _write(scenario.run(cfg), args, cfg)
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = _load(args.config)
    report = scenario.locality_audit(cfg, [_parse_perturbation(p) for p in args.perturb], args.target)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK if report.passed else EXIT_NUMERICAL


def cmd_check(args) -> int:
    return EXIT_OK if checks.run_all(args.seed) else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlcorr", description="Two-time correlation experiments with "
                                     "nonlinear (Polchinski-type) spin-1/2 pair dynamics.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def output_flags(p):
        p.add_argument("--out", required=True, help="output file")
        p.add_argument("--format", choices=("csv", "json"), help="default: from the file suffix, else csv")

    p = sub.add_parser("run", help="run a config and export its time series")
    p.add_argument("--config", required=True, help="config JSON file or preset name (vi_c, figure1, figure2)")
    output_flags(p)
    p.add_argument("--algorithm", choices=("open", "projection_standard", "projection_generalized"))
    p.add_argument("--engine", choices=("auto", "closed_form", "integrator"))
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--stride", type=int)
    p.add_argument("--t1", type=float)
    p.add_argument("--t2", type=float)
    p.set_defaults(func=cmd_run)

    for name, text in (("figure1", "open-system curves"), ("figure2", "projection-at-a-distance curves")):
        p = sub.add_parser(name, help=f"reference scenario, {text}")
        output_flags(p)
        p.set_defaults(func=cmd_figure)

    p = sub.add_parser("audit", help="locality audit of one particle's reduced state")
    p.add_argument("--config", required=True)
    p.add_argument("--perturb", action="append", default=[], metavar="FIELD=VALUE",
                   help="override on the other particle, e.g. B=5, t2=2, axis2=z (repeatable)")
    p.add_argument("--target", type=int, choices=(1, 2), default=1, help="audited particle")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("check", help="run the invariant suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
