"""Damped Newton iteration, sparse direct solves and backward-Euler time marching."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgumentError, LinearSolveError, NonConvergenceError, VarphaseError

__all__ = [
    "NewtonConfig",
    "NewtonResult",
    "TimeMarchConfig",
    "Trajectory",
    "TimeMarchAborted",
    "linear_solve",
    "newton_solve",
    "time_march",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonConfig:
    atol: float = 1e-10
    rtol: float = 1e-8
    max_iterations: int = 25
    max_halvings: int = 8
    # A correction this small relative to the state is at the rounding floor.
    step_tol: float = 1e-12

    def __post_init__(self):
        if not (self.atol > 0 and self.rtol > 0 and self.step_tol > 0):
            raise InvalidArgumentError("tolerances must be positive")
        if self.max_iterations < 1 or self.max_halvings < 1:
            raise InvalidArgumentError("iteration caps must be >= 1")


@dataclass
class NewtonResult:
    state: np.ndarray
    iterations: int
    history: list[float]


def linear_solve(matrix, rhs, refine: int = 3) -> np.ndarray:
    """Direct sparse LU solve with a residual check.

    Accepts ``||A x - b||_inf <= 1e-10 (1 + ||b||_inf)`` or, for stiff
    matrices where rounding in ``A x`` alone exceeds that, a normwise
    backward error ``||A x - b|| / (||A|| ||x|| + ||b||) <= 1e-13``.
    Up to ``refine`` rounds of iterative refinement are tried first;
    otherwise raises.
    """
    A = sp.csc_matrix(matrix)
    b = np.asarray(rhs, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise InvalidArgumentError(f"incompatible shapes {A.shape} and {b.shape}")
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        diag = np.abs(A.diagonal())
        raise LinearSolveError(
            f"sparse factorization failed ({exc}); n={A.shape[0]}, "
            f"smallest |diagonal|={diag.min() if diag.size else float('nan'):.3e}"
        ) from exc
    u_diag = np.abs(lu.U.diagonal())
    x = lu.solve(b)
    b_norm = np.abs(b).max(initial=0.0)
    a_norm = spla.norm(A, np.inf)

    def bound(x):
        return max(1e-10 * (1.0 + b_norm), 1e-13 * (a_norm * np.abs(x).max(initial=0.0) + b_norm))

    res = b - A @ x
    for _ in range(refine):
        if np.abs(res).max(initial=0.0) <= bound(x):
            break
        x = x + lu.solve(res)
        res = b - A @ x
    err = np.abs(res).max(initial=0.0)
    if not np.isfinite(err) or err > bound(x):
        raise LinearSolveError(
            f"linear solve residual {err:.3e} exceeds {bound(x):.3e}; "
            f"pivot range [{u_diag.min():.3e}, {u_diag.max():.3e}]"
        )
    return x


def newton_solve(
    assemble: Callable, initial_state, config: NewtonConfig = NewtonConfig(), free=None, weights=None
) -> NewtonResult:
    """Solve ``residual(U) = 0`` on the ``free`` dofs by damped Newton.

    ``assemble(U, with_jacobian)`` returns an object with ``residual`` and
    ``jacobian``. Entries outside ``free`` are left untouched. A step is
    halved until the residual infinity-norm decreases; if no halving
    helps, the smallest trial step is taken anyway. Iteration also stops
    once the Newton correction drops below ``step_tol`` relative to the
    state, which is where rounding in large cancelling terms keeps the
    residual from reaching ``atol``.

    ``weights`` rescales residual rows for the convergence test and the
    line search only; the Newton direction is unaffected.
    """
    U = np.array(initial_state, dtype=float)
    if free is None:
        free = np.arange(U.size)
    w = np.ones(free.size) if weights is None else np.asarray(weights, dtype=float)[free]

    def measure(res):
        return float(np.abs(w * res).max(initial=0.0))
    system = assemble(U, True)
    r = system.residual[free]
    norm = measure(r)
    if not np.isfinite(norm):
        raise NonConvergenceError("non-finite residual at the initial state", U, [norm])
    history = [norm]
    tol = max(config.atol, config.rtol * norm)
    iterations = 0
    while norm > tol:
        if iterations >= config.max_iterations:
            raise NonConvergenceError(
                f"Newton did not converge in {config.max_iterations} iterations (|r|={norm:.3e})", U, history
            )
        J = system.jacobian[free][:, free]
        delta = linear_solve(J, -r)
        if np.abs(delta).max() <= config.step_tol * (1.0 + np.abs(U[free]).max()):
            U = U.copy()
            U[free] += delta
            iterations += 1
            history.append(measure(assemble(U, False).residual[free]))
            break
        alpha = 1.0
        for _ in range(config.max_halvings + 1):
            trial = U.copy()
            trial[free] += alpha * delta
            r_trial = assemble(trial, False).residual[free]
            trial_norm = measure(r_trial)
            if np.isfinite(trial_norm) and trial_norm < norm:
                break
            alpha *= 0.5
        if not np.isfinite(trial_norm):
            raise NonConvergenceError("residual became non-finite", U, history + [trial_norm])
        U = trial
        iterations += 1
        system = assemble(U, True)
        r = system.residual[free]
        norm = measure(r)
        history.append(norm)
        log.debug("newton it=%d |r|=%.3e alpha=%g", iterations, norm, alpha)
    return NewtonResult(U, iterations, history)


@dataclass(frozen=True)
class TimeMarchConfig:
    dt: float
    t_end: float
    initial_state: np.ndarray
    snapshot_stride: int = 1
    max_retries: int = 4

    def __post_init__(self):
        if not 0 < self.dt <= self.t_end:
            raise InvalidArgumentError("need 0 < dt <= t_end")
        if self.snapshot_stride < 1:
            raise InvalidArgumentError("snapshot stride must be >= 1")


@dataclass
class Trajectory:
    """Accepted states of a time march.

    Entry 0 is the initial state at ``t = 0``; ``states[i]`` is ``None``
    for entries that fall between snapshot strides.
    """

    times: list[float] = field(default_factory=list)
    states: list = field(default_factory=list)
    records: list = field(default_factory=list)

    def append(self, t, state, record):
        if self.times and not t > self.times[-1]:
            raise VarphaseError("trajectory times must increase strictly")
        self.times.append(float(t))
        self.states.append(state)
        self.records.append(record)

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self):
        for s in reversed(self.states):
            if s is not None:
                return s
        return None


class TimeMarchAborted(VarphaseError):
    def __init__(self, message, trajectory: Trajectory, cause: Exception | None = None):
        super().__init__(message)
        self.trajectory = trajectory
        self.cause = cause


def time_march(
    step_problem_factory: Callable,
    march: TimeMarchConfig,
    newton: NewtonConfig = NewtonConfig(),
    observers: Sequence[Callable] = (),
    diagnose: Callable | None = None,
) -> Trajectory:
    """Backward-Euler march from ``march.initial_state`` to ``march.t_end``.

    ``step_problem_factory(previous_state, dt)`` returns a problem with
    ``assemble(U, with_jacobian)`` and ``free``. Each step starts Newton
    from the previous state. A failed step is retried as two half steps,
    recursively up to ``march.max_retries`` levels, before aborting with
    :class:`TimeMarchAborted` carrying the partial trajectory.

    ``diagnose(state, previous, t, iterations)`` builds the record stored
    in the trajectory and handed to every observer as
    ``observer(step, t, state, record)``.
    """
    traj = Trajectory()
    U = np.array(march.initial_state, dtype=float)
    U.setflags(write=False)
    record = diagnose(U, None, 0.0, 0) if diagnose else None
    traj.append(0.0, U, record)
    for obs in observers:
        obs(0, 0.0, U, record)

    n_steps = int(round(march.t_end / march.dt))
    if not np.isclose(n_steps * march.dt, march.t_end, rtol=1e-9, atol=0.0):
        n_steps = int(np.ceil(march.t_end / march.dt))
    t = 0.0
    count = 0

    def advance(U, t, dt, depth):
        nonlocal count
        problem = step_problem_factory(U, dt)
        try:
            result = newton_solve(
                problem.assemble, U, newton, problem.free, getattr(problem, "residual_weights", None)
            )
        except (NonConvergenceError, LinearSolveError) as exc:
            if depth >= march.max_retries:
                raise
            log.info("step at t=%.6g with dt=%.3g failed (%s); halving", t, dt, exc)
            U, t = advance(U, t, 0.5 * dt, depth + 1)
            return advance(U, t, 0.5 * dt, depth + 1)
        new = result.state
        new.setflags(write=False)
        t_new = t + dt
        count += 1
        rec = diagnose(new, U, t_new, result.iterations) if diagnose else None
        keep = count % march.snapshot_stride == 0
        traj.append(t_new, new if keep else None, rec)
        for obs in observers:
            obs(count, t_new, new, rec)
        return new, t_new

    for n in range(n_steps):
        dt = min(march.dt, march.t_end - t) if n == n_steps - 1 else march.dt
        try:
            U, t = advance(U, t, dt, 0)
        except (NonConvergenceError, LinearSolveError) as exc:
            raise TimeMarchAborted(f"time march aborted at t={t:.6g}: {exc}", traj, exc) from exc
    if traj.states[-1] is None:
        traj.states[-1] = U
    return traj
