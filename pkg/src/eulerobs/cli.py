"""Command line front end for the experiment harness.

Configuration can come from a flat ``key=value`` text file (``--config``),
with any command line flag overriding the file. Refinement levels above 2
are guarded behind ``--deep`` because the deepest runs take a while.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import ExperimentConfig, run_experiment, summary_text
from .reference import NoiseModel

__all__ = ["main", "parse_levels", "read_config_file"]

MAX_SHALLOW_LEVEL = 2

_CONFIG_KEYS = {
    "mu": float,
    "levels": str,
    "t_final": float,
    "gamma": float,
    "rho_init": float,
    "noise": str,
    "m_init": str,
    "out": str,
    "emit_plots": lambda s: s.lower() in ("1", "true", "yes", "on"),
    "workers": int,
    "deep": lambda s: s.lower() in ("1", "true", "yes", "on"),
    "delta": float,
    "base_cells": int,
    "base_steps": int,
}


def parse_levels(text: str) -> tuple[int, ...]:
    """Parse ``k`` or ``k0..k1`` into an inclusive tuple of levels."""
    text = text.strip()
    if ".." in text:
        lo_text, hi_text = text.split("..", 1)
        lo, hi = int(lo_text), int(hi_text)
        if hi < lo:
            raise ValueError(f"bad level range {text!r}: end below start")
        return tuple(range(lo, hi + 1))
    return (int(text),)


def read_config_file(path: Path) -> dict:
    """Read a flat key=value config file; '#' starts a comment."""
    values: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _CONFIG_KEYS[key](value.strip())
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eulerobs",
        description="nudging observer experiments for 1-D barotropic pipe flow",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a refinement sweep and write CSV/summary")
    run.add_argument("--config", type=Path, help="key=value file; flags override it")
    run.add_argument("--mu", type=float, help="nudging gain (default 1.0)")
    run.add_argument("--levels", type=str, help="refinement levels, e.g. 0..2 or 1")
    run.add_argument("--t-final", dest="t_final", type=float, help="final time (default 40)")
    run.add_argument("--gamma", type=float, help="friction coefficient (default 0.1)")
    run.add_argument("--rho-init", dest="rho_init", type=float,
                     help="constant initial density guess (default 2.5)")
    run.add_argument("--noise", type=str,
                     help="none | random:<amplitude>:<seed> | sin:<amplitude>:<freq>")
    run.add_argument("--m-init", dest="m_init", choices=["measured", "exact", "zero"],
                     help="initial momentum policy (default measured)")
    run.add_argument("--out", type=Path, help="output directory for CSV/summary/plots")
    run.add_argument("--emit-plots", dest="emit_plots", action="store_true", default=None,
                     help="also write an SVG error plot")
    run.add_argument("--workers", type=int, help="worker processes, one per level")
    run.add_argument("--deep", action="store_true", default=None,
                     help="allow refinement levels above 2 (slow)")
    run.add_argument("--delta", type=float,
                     help="weight of the coupling term in the modified energy (default 0.1)")
    run.add_argument("--base-cells", dest="base_cells", type=int,
                     help="cells at level 0 (default 30)")
    run.add_argument("--base-steps", dest="base_steps", type=int,
                     help="time steps at level 0 (default 1200)")
    return parser


def _run_command(args: argparse.Namespace) -> int:
    settings: dict = {}
    if args.config is not None:
        settings.update(read_config_file(args.config))
    for key in _CONFIG_KEYS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            settings[key] = flag_value

    levels = parse_levels(str(settings.get("levels", "0..2")))
    deep = bool(settings.get("deep", False))
    if not deep and max(levels) > MAX_SHALLOW_LEVEL:
        print(
            f"error: level {max(levels)} exceeds the default cap of "
            f"{MAX_SHALLOW_LEVEL}; pass --deep to allow it",
            file=sys.stderr,
        )
        return 2

    config = ExperimentConfig(
        mu=float(settings.get("mu", 1.0)),
        levels=levels,
        base_cells=int(settings.get("base_cells", 30)),
        base_steps=int(settings.get("base_steps", 1200)),
        t_final=float(settings.get("t_final", 40.0)),
        gamma=float(settings.get("gamma", 0.1)),
        rho_init=float(settings.get("rho_init", 2.5)),
        m_init=str(settings.get("m_init", "measured")),
        noise=NoiseModel.parse(str(settings.get("noise", "none"))),
        delta=float(settings.get("delta", 0.1)),
        out_dir=Path(settings["out"]) if "out" in settings else None,
        emit_plots=bool(settings.get("emit_plots", False)),
        workers=int(settings.get("workers", 1)),
    )
    summary = run_experiment(config)
    print(summary_text(summary), end="")
    return 1 if summary.failures else 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _run_command(args)
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
