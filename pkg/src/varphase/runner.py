"""End-to-end scenario execution with on-disk artifacts."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .diagnostics import make_diagnose
from .io import OutputError, write_diagnostics_csv, write_snapshot
from .lagrangian import TernarySystem
from .scenarios import ScenarioConfig, build_system, initial_state
from .solver import NewtonConfig, TimeMarchAborted, TimeMarchConfig, Trajectory, time_march

__all__ = ["EXIT_OK", "EXIT_CONFIG", "EXIT_ABORT", "RunResult", "run_scenario", "metadata"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    exit_code: int
    trajectory: Trajectory
    system: object
    output_dir: Path | None
    message: str = ""


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def metadata(config: ScenarioConfig, newton: NewtonConfig, march: TimeMarchConfig | None = None) -> dict:
    """Every parameter that determines a run, defaults included."""
    meta = {
        "code": {"package": "varphase", "version": __version__},
        "environment": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        "scenario": config.as_dict(),
        "newton": dataclasses.asdict(newton),
        "time_march": {"max_retries": march.max_retries if march else TimeMarchConfig.max_retries},
        "units": {"length": "mm", "time": "s", "energy": "J/mol", "kappa": "J mm^2/mol", "diffusivity": "mm^2/s"},
    }
    return _jsonable(meta)


def run_scenario(
    config: ScenarioConfig,
    output_dir=None,
    newton: NewtonConfig = NewtonConfig(),
    write_files: bool = True,
) -> RunResult:
    """Run ``config`` to ``t_end``, writing snapshots, diagnostics and metadata.

    Returns exit code 0 on success and 2 when the time march aborts; the
    partial trajectory and all artifacts written so far are kept.
    """
    system = build_system(config)
    U0 = initial_state(config, system)
    march = TimeMarchConfig(config.time.dt, config.time.t_end, U0, config.time.snapshot_stride)
    out = Path(output_dir if output_dir is not None else config.output_dir) if write_files else None
    observers = []
    if out is not None:
        snaps = out / "snapshots"
        try:
            snaps.mkdir(parents=True, exist_ok=True)
            (out / "metadata.json").write_text(json.dumps(metadata(config, newton, march), indent=2) + "\n")
        except OSError as exc:
            raise OutputError(f"cannot prepare output directory {out}: {exc.strerror or exc}") from exc

        def snapshot(step, t, state, record):
            if step % config.time.snapshot_stride == 0:
                write_snapshot(system, state, snaps / f"state_{step:06d}.vtk", t)

        observers.append(snapshot)

    ternary = isinstance(system, TernarySystem)
    code, message = EXIT_OK, "completed"
    try:
        traj = time_march(system.step_problem, march, newton, observers, make_diagnose(system))
    except TimeMarchAborted as exc:
        traj, code, message = exc.trajectory, EXIT_ABORT, str(exc)
        log.error("%s", message)
    if out is not None:
        write_diagnostics_csv(traj, out / "diagnostics.csv", ternary=ternary)
        final = traj.final_state
        if final is not None:
            write_snapshot(system, final, out / "final.vtk", traj.times[-1])
    return RunResult(code, traj, system, out, message)
