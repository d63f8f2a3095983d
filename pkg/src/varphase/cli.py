"""``simulate`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, InvalidArgumentError
from .io import OutputError
from .runner import EXIT_ABORT, EXIT_CONFIG, EXIT_OK, run_scenario
from .scenarios import PRESETS, parse_config, preset

__all__ = ["build_parser", "load_config", "main"]


def _mesh_arg(text: str) -> tuple[int, ...]:
    try:
        cells = tuple(int(v) for v in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'n' or 'nx,ny', got {text!r}") from None
    if not 1 <= len(cells) <= 2 or min(cells) < 1:
        raise argparse.ArgumentTypeError(f"expected one or two positive counts, got {text!r}")
    return cells


def _seed_arg(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Run a phase-transformation scenario from a config file or a figure preset.",
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", type=Path, help="scenario file (key = value with [sections])")
    source.add_argument("--preset", choices=sorted(PRESETS), help="built-in figure scenario")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    parser.add_argument("--seed", type=_seed_arg, default=None, help="random IC seed (default: 42, or the config value)")
    parser.add_argument("--dt", type=float, default=None, help="time step in s")
    parser.add_argument("--t-end", type=float, default=None, help="final time in s")
    parser.add_argument(
        "--mesh", type=_mesh_arg, default=None, help="cell counts 'n' or 'nx,ny'; a single n on a 2-D scenario means n x n"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log every time step")
    return parser


def load_config(args):
    """Scenario from the parsed arguments with command-line overrides applied."""
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc.strerror or exc}", 0) from exc
        config = parse_config(text)
    else:
        config = preset(args.preset)
    if args.mesh is not None:
        cells = args.mesh
        if len(cells) == 1 and config.mesh.dimension == 2:
            cells = (cells[0], cells[0])
        config = replace(config, mesh=replace(config.mesh, dimension=len(cells), cells=cells))
    if args.dt is not None or args.t_end is not None:
        dt = config.time.dt if args.dt is None else args.dt
        t_end = config.time.t_end if args.t_end is None else args.t_end
        config = replace(config, time=replace(config.time, dt=dt, t_end=t_end))
    if args.seed is not None:
        config = replace(config, ic=replace(config.ic, seed=args.seed))
    return replace(config, output_dir=str(args.out))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"simulate: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_scenario(config, args.out)
    except OutputError as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return EXIT_ABORT
    if result.exit_code != EXIT_OK:
        print(f"simulate: {result.message}; partial outputs kept in {args.out}", file=sys.stderr)
        return EXIT_ABORT
    last = result.trajectory.records[-1]
    print(f"{config.name}: t={last.t:g} s, {len(result.trajectory) - 1} steps, outputs in {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
