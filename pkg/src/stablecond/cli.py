"""Command line entry point ``stablecond``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, ParameterError
from .experiments import (
    Suite,
    default_config,
    list_checks,
    load_config,
    run_suite,
    summary_lines,
)
from .stable_model import validate_params

_ORDER = [Suite.IDENTITY, Suite.ASYMPTOTICS, Suite.HARMONICITY_MC, Suite.ABSORPTION,
          Suite.CONDITIONING]


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="stablecond",
        description="Run verification suites for stable processes conditioned to hit an interval.")
    ap.add_argument("suite", choices=[s.value for s in _ORDER] + ["all"])
    ap.add_argument("--config", type=Path, help="flat key = value file")
    ap.add_argument("--alpha", type=float, action="append",
                    help="override parameters; pair each --alpha with a --rho")
    ap.add_argument("--rho", type=float, action="append")
    ap.add_argument("--x", type=float, action="append", help="override start points")
    ap.add_argument("--n-paths", type=int, help="override the number of paths or chains")
    ap.add_argument("--dt", type=float, help="override the time step")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", type=Path, help="output directory (default: results)")
    ap.add_argument("--check", action="append", help="only run checks whose id starts with this")
    ap.add_argument("--list-checks", action="store_true", help="print check ids and exit")
    return ap


def _configure(suite: Suite, a) -> "object":
    cfg = load_config(a.config, suite) if a.config else default_config(suite)
    if a.alpha or a.rho:
        if len(a.alpha or []) != len(a.rho or []):
            raise ConfigError("give as many --rho as --alpha values")
        try:
            cfg.params = [validate_params(al, r) for al, r in zip(a.alpha, a.rho)]
        except ParameterError as exc:
            raise ConfigError(f"invalid parameters: {exc}") from exc
    if a.x:
        cfg.points = list(a.x)
    if a.n_paths is not None:
        if "n_paths" not in cfg.values:
            raise ConfigError(f"suite {suite.value} has no n_paths setting")
        cfg.values["n_paths"] = float(a.n_paths)
    if a.dt is not None:
        if "dt" not in cfg.values:
            raise ConfigError(f"suite {suite.value} has no dt setting")
        cfg.values["dt"] = a.dt
    if a.seed is not None:
        cfg.seed = a.seed
    if a.out is not None:
        cfg.out_dir = str(a.out)
    if a.check:
        cfg.checks = list(a.check)
    return cfg


def main(argv=None) -> int:
    a = _parser().parse_args(argv)
    suites = _ORDER if a.suite == "all" else [Suite(a.suite)]
    try:
        cfgs = [_configure(s, a) for s in suites]
        if a.list_checks:
            for cfg in cfgs:
                try:
                    ids = list_checks(cfg)
                except ConfigError:
                    if a.suite != "all":
                        raise
                    ids = []
                print("\n".join(ids))
            return 0
        results = {}
        for cfg in cfgs:
            try:
                results[cfg.suite.value] = run_suite(cfg)
            except ConfigError:
                if a.suite != "all" or not a.check:
                    raise
    except ConfigError as exc:
        print(f"stablecond: configuration error: {exc}", file=sys.stderr)
        return 2
    lines = summary_lines(results)
    out = Path(cfgs[0].out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    ok = all(r.passed for res in results.values() for r in res)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
