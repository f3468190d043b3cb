"""Command-line entry point: ``comp-cache figure|point|validate``.

Exit codes: 0 success, 2 configuration error, 3 numerical-precondition failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from .config import load_config
from .errors import ConfigError, DomainError, PreconditionWarning
from .experiments import FIGURES, METRICS, run_figure, run_point

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _assignments(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="comp-cache",
                                description="Cache placement for cooperative small-cell clusters.")
    sub = p.add_subparsers(dest="command", required=True)

    fig = sub.add_parser("figure", help="reproduce one figure sweep as CSV")
    fig.add_argument("name", help="one of: " + ", ".join(FIGURES))
    fig.add_argument("--config", default=None, help="flat key = value file (defaults if omitted)")
    fig.add_argument("--out", required=True, help="CSV output path")
    fig.add_argument("--seed", type=int, default=None)
    fig.add_argument("--realizations", type=int, default=None,
                     help="simulation realizations per K")

    pt = sub.add_parser("point", help="evaluate one metric, print JSON")
    pt.add_argument("--metric", required=True, choices=METRICS)
    pt.add_argument("--config", default=None)
    pt.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="config key or point key (rho, K, scheme, theta, rate, ratio, method)")

    val = sub.add_parser("validate", help="validate a config and print derived quantities")
    val.add_argument("--config", default=None)
    return p


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.command == "validate":
        print(json.dumps(cfg.report(), indent=2, sort_keys=True))
        return EXIT_OK
    if args.command == "figure":
        kw = {}
        if args.seed is not None:
            kw["seed"] = args.seed
        if args.realizations is not None:
            kw["n_realizations"] = args.realizations
        if kw:
            cfg = cfg.with_overrides(**kw)
        if args.name not in FIGURES:
            raise ConfigError(f"unknown figure {args.name!r}; available: {', '.join(FIGURES)}")
        run_figure(args.name, cfg, args.out)
        return EXIT_OK
    records = run_point(cfg, args.metric, _assignments(args.set))
    payload = [r.as_dict() for r in records]
    print(json.dumps(payload[0] if len(payload) == 1 else payload, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", PreconditionWarning)
            return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"numerical precondition failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
