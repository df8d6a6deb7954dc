"""Command line front end.

Subcommands: simulate, bounds, spectrum, thresholds, replay.  Every
config field is a --flag taking the same string form as the flat
key=value config files; --config FILE loads such a file first and
explicit flags override it.  Exit codes: 0 success, 2 configuration
error, 3 numerical-solver failure.
"""
from __future__ import annotations

import argparse
import sys

from .sim import (
    _FIELDS,
    ConfigError,
    ExperimentConfig,
    TraceMismatch,
    parse_kv_text,
    replay_trial,
    run_bounds,
    run_simulation,
    run_spectrum,
    run_thresholds,
)

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leeldpc",
        description="Lee-metric LDPC experiment harness (CSV in, CSV out)",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "simulate": "Monte Carlo block-error simulation on a delta grid",
        "bounds": "finite-length bound curves",
        "spectrum": "ensemble weight-spectrum growth rate curve",
        "thresholds": "density evolution / Shannon thresholds",
        "replay": "re-run one recorded trial and verify it bit-for-bit",
    }
    for name in ("simulate", "bounds", "spectrum", "thresholds", "replay"):
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", default="", metavar="FILE",
                       help="flat key=value file; flags override it")
        for field in sorted(_FIELDS[name]):
            p.add_argument(f"--{field}", default=None, metavar="V")
    return parser


def _dispatch(cfg: ExperimentConfig) -> None:
    if cfg.subcommand == "simulate":
        records = run_simulation(cfg)
        for r in records:
            print(
                f"delta={r.delta!r} decoder={r.decoder} bler={r.bler:.4e}"
                f" errors={r.errors} trials={r.trials}"
                f" ci_half={r.ci_half:.2e} mean_iters={r.mean_iters:.2f}"
            )
        if cfg.out:
            print(f"wrote {cfg.out}")
    elif cfg.subcommand == "bounds":
        curve = run_bounds(cfg)
        print(f"wrote {cfg.out} ({len(curve.points)} rows)")
    elif cfg.subcommand == "spectrum":
        paths = run_spectrum(cfg)
        for role in sorted(paths):
            print(f"wrote {paths[role]} ({role})")
    elif cfg.subcommand == "thresholds":
        rows = run_thresholds(cfg)
        for (q, d_v, d_c, dec), (ds, lo, hi) in rows:
            print(f"q={q} ({d_v},{d_c}) {dec}: delta_star={ds!r} bracket=[{lo!r},{hi!r}]")
        print(f"wrote {cfg.out}")
    else:
        res = replay_trial(cfg.trace)
        nonzero = int((res.estimate != 0).sum())
        print(
            f"replayed: converged={res.converged}"
            f" iterations={res.iterations_used} nonzero_symbols={nonzero}"
        )


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    pairs = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                text = fh.read()
        except OSError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        try:
            pairs.update(parse_kv_text(text))
        except ConfigError as exc:
            print(f"config error: {ns.config}: {exc}", file=sys.stderr)
            return 2
    for field in _FIELDS[ns.subcommand]:
        val = getattr(ns, field, None)
        if val is not None:
            pairs[field] = val
    try:
        cfg = ExperimentConfig.from_pairs(ns.subcommand, pairs)
        _dispatch(cfg)
    except (ConfigError, TraceMismatch) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
