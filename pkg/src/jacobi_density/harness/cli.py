"""Command line entry point.

Exit codes: 0 all checks passed, 1 tolerance failures, 2 configuration
rejected, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from dataclasses import replace

from ..core import Kind
from ..errors import ConfigError, JacobiError
from .config import OutputFormat, validate_config
from .invariants import run_invariant_suite
from .sweep import run_density_sweep, to_csv, to_json

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

_ROUTES = {
    "density-critical": ("formula",),
    "density-noncritical": ("formula",),
    "density-stabilized": ("stabilized",),
}
_KIND = {"density-critical": Kind.CRITICAL, "density-noncritical": Kind.NONCRITICAL}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jacobi-density",
                                     description="Spectral densities of Jacobi matrices.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("density-critical", "density-noncritical", "density-stabilized", "compare",
                 "invariants", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", help="output path (default: config output.path or stdout)")
        p.add_argument("--format", choices=[f.value for f in OutputFormat])
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit the timestamp field from JSON output")
        p.add_argument("--jobs", type=int, default=1, help="worker processes over lambda")
    return parser


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = validate_config(fh.read())
        if args.command in _KIND and cfg.family.kind is not _KIND[args.command]:
            raise ConfigError(f"{args.command} needs a {_KIND[args.command].value} family")
    except (ConfigError, OSError) as exc:
        print(f"config rejected: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fmt = OutputFormat(args.format) if args.format else cfg.output_format
    out = args.out or cfg.output_path
    stamp = None if args.no_timestamp else _dt.datetime.now(_dt.timezone.utc).isoformat()

    if args.command == "validate":
        doc = cfg.to_dict()
        _emit(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n", out)
        return EXIT_OK

    try:
        if args.command == "invariants":
            report = run_invariant_suite(cfg)
            _emit(report.to_json(), out)
            if not report.passed:
                for e in report.entries:
                    if not e.passed:
                        print(f"FAIL {e.name}: {e.value} (tol {e.tolerance}) {e.detail}",
                              file=sys.stderr)
            numerical = any(not e.passed and e.value is None and ":" in e.detail
                            for e in report.entries)
            if numerical:
                return EXIT_NUMERICAL
            return EXIT_OK if report.passed else EXIT_TOLERANCE

        routes = _ROUTES.get(args.command, cfg.routes)
        report = run_density_sweep(replace(cfg, routes=tuple(routes)), jobs=max(1, args.jobs))
    except JacobiError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _emit(to_json(report, stamp) if fmt is OutputFormat.JSON else to_csv(report), out)
    if report.numerical_failure:
        return EXIT_NUMERICAL
    return EXIT_OK if report.passed else EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
