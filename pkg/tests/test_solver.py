import numpy as np
import pytest
import scipy.sparse as sp

from varphase.energy import SingleQuadraticEnergy, convex_hull
from varphase.errors import InvalidArgumentError, LinearSolveError, NonConvergenceError
from varphase.lagrangian import BinarySystem
from varphase.mesh_fem import build_interval_mesh, interpolate
from varphase.solver import (
    NewtonConfig,
    TimeMarchAborted,
    TimeMarchConfig,
    Trajectory,
    linear_solve,
    newton_solve,
    time_march,
)


class TestLinearSolve:
    def test_identity(self):
        b = np.arange(5.0)
        np.testing.assert_array_equal(linear_solve(sp.identity(5), b), b)

    def test_two_by_two(self):
        np.testing.assert_allclose(linear_solve(np.array([[2.0, 1.0], [1.0, 3.0]]), [3.0, 5.0]), [0.8, 1.4], atol=1e-14)

    def test_spd_residual(self):
        rng = np.random.default_rng(0)
        M = rng.normal(size=(50, 50))
        A = M @ M.T + 50 * np.eye(50)
        b = rng.normal(size=50)
        x = linear_solve(sp.csr_matrix(A), b)
        assert np.abs(A @ x - b).max() <= 1e-10 * (1 + np.abs(b).max())

    def test_singular(self):
        with pytest.raises(LinearSolveError):
            linear_solve(sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]])), [1.0, 2.0])

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            linear_solve(sp.identity(3), np.ones(2))


class _Scalar:
    def __init__(self, residual, jacobian):
        self.residual = np.atleast_1d(residual)
        self.jacobian = sp.csr_matrix(np.atleast_2d(jacobian))


class TestNewton:
    def test_quadratic_convergence(self):
        result = newton_solve(lambda u, j=True: _Scalar(u**3 - 2.0, 3 * u**2), np.array([1.5]), NewtonConfig(atol=1e-14, rtol=1e-14))
        assert result.state[0] == pytest.approx(2 ** (1 / 3), abs=1e-14)
        h = result.history
        # error roughly squares each iteration once in the basin
        ratios = [np.log(h[i + 1]) / np.log(h[i]) for i in range(1, len(h) - 1) if 1e-13 < h[i + 1] and h[i] < 1e-1]
        assert ratios and min(ratios) > 1.8

    def test_already_converged(self):
        result = newton_solve(lambda u, j=True: _Scalar(u - 1.0, 1.0), np.array([1.0]))
        assert result.iterations == 0

    def test_damping_keeps_residual_monotone(self):
        result = newton_solve(lambda u, j=True: _Scalar(np.arctan(u), 1 / (1 + u**2)), np.array([3.0]))
        assert abs(result.state[0]) < 1e-8
        assert all(b < a for a, b in zip(result.history, result.history[1:]))

    def test_iteration_cap(self):
        with pytest.raises(NonConvergenceError) as info:
            newton_solve(lambda u, j=True: _Scalar(u**2 + 1.0, 2 * u + 1e-3), np.array([0.3]), NewtonConfig(max_iterations=3))
        assert len(info.value.history) >= 1

    def test_free_dofs_untouched(self):
        def assemble(u, j=True):
            return _Scalar(u - np.array([1.0, 2.0]), np.eye(2))

        result = newton_solve(assemble, np.array([0.0, 7.0]), free=np.array([0]))
        np.testing.assert_allclose(result.state, [1.0, 7.0])

    def test_uniform_fixed_point(self):
        energy = convex_hull()
        system = BinarySystem(build_interval_mesh(10), energy)
        n = system.scalar_space.n_scalar_dofs
        U0 = system.layout.join({"x": np.full(n, 0.5), "mu": np.full(n, -0.02)})
        problem = system.step_problem(U0, 1e-3)
        result = newton_solve(problem.assemble, U0, free=problem.free, weights=problem.residual_weights)
        assert result.iterations == 0
        np.testing.assert_array_equal(result.state, U0)

    @pytest.mark.parametrize("kwargs", [dict(atol=0.0), dict(max_iterations=0), dict(max_halvings=0)])
    def test_invalid_config(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            NewtonConfig(**kwargs)


def _cosine_run(kappa, steps, dt=1e-3, cells=40, D=1.0):
    energy = SingleQuadraticEnergy(k=2.0, x_eq=0.5, kappa=kappa)
    system = BinarySystem(build_interval_mesh(cells), energy, diffusivity=D)
    x0 = interpolate(system.scalar_space, lambda p: 0.5 + 0.01 * np.cos(np.pi * p[:, 0]))
    march = TimeMarchConfig(dt, steps * dt, system.initial_state(x0.coeffs))
    traj = time_march(system.step_problem, march)
    x = traj.final_state[system.layout.slice("x")]
    return (x[np.argmin(system.scalar_space.dof_coordinates[:, 0])] - 0.5) / 0.01, traj


class TestTimeMarch:
    @pytest.mark.parametrize("kappa", [0.0, 1e-2])
    def test_cosine_mode_decays_at_backward_euler_rate(self, kappa):
        steps, dt = 50, 1e-3
        amp, traj = _cosine_run(kappa, steps, dt)
        rate = np.pi**2 + kappa * np.pi**4 / 2.0
        assert amp == pytest.approx((1 + rate * dt) ** -steps, rel=1e-4)
        assert len(traj) == steps + 1 and traj.times[0] == 0.0
        assert traj.times[-1] == pytest.approx(steps * dt)

    def test_snapshot_stride_and_observers(self):
        energy = SingleQuadraticEnergy()
        system = BinarySystem(build_interval_mesh(4), energy)
        x0 = interpolate(system.scalar_space, lambda p: 0.5 + 0.01 * np.cos(np.pi * p[:, 0]))
        seen = []
        march = TimeMarchConfig(0.01, 0.05, system.initial_state(x0.coeffs), snapshot_stride=2)
        traj = time_march(system.step_problem, march, observers=[lambda step, t, s, r: seen.append(step)])
        assert seen == list(range(6))
        assert [s is not None for s in traj.states] == [True, False, True, False, True, True]

    def test_abort_carries_partial_trajectory(self):
        energy = SingleQuadraticEnergy()
        system = BinarySystem(build_interval_mesh(4), energy)
        x0 = interpolate(system.scalar_space, lambda p: 0.5 + 0.1 * np.cos(np.pi * p[:, 0]))
        march = TimeMarchConfig(0.01, 0.05, system.initial_state(x0.coeffs), max_retries=0)
        with pytest.raises(TimeMarchAborted) as info:
            time_march(system.step_problem, march, NewtonConfig(atol=1e-300, rtol=1e-300, max_iterations=1, step_tol=1e-300))
        assert len(info.value.trajectory) == 1

    def test_invalid_march(self):
        with pytest.raises(InvalidArgumentError):
            TimeMarchConfig(0.2, 0.1, np.zeros(1))
        with pytest.raises(InvalidArgumentError):
            TimeMarchConfig(0.1, 0.2, np.zeros(1), snapshot_stride=0)

    def test_trajectory_times_increase(self):
        traj = Trajectory()
        traj.append(0.0, None, None)
        with pytest.raises(Exception):
            traj.append(0.0, None, None)


def test_diagonal_system():
    np.testing.assert_allclose(linear_solve(np.array([[2.0, 0.0], [0.0, 4.0]]), [2.0, 4.0]), [1.0, 1.0])


def _ramp_step(energy, cells=50, dt=1e-3):
    system = BinarySystem(build_interval_mesh(cells), energy)
    x0 = interpolate(system.scalar_space, lambda p: p[:, 0])
    U0 = system.initial_state(x0.coeffs)
    problem = system.step_problem(U0, dt)
    return newton_solve(problem.assemble, U0, free=problem.free, weights=problem.residual_weights)


def test_linear_problem_one_iteration():
    assert _ramp_step(SingleQuadraticEnergy()).iterations == 1


def test_double_well_step_quadratic_rate():
    from varphase.energy import double_well

    result = _ramp_step(double_well(kappa=5.0))
    assert result.iterations <= 10
    h = result.history
    rates = [h[i + 1] / h[i] ** 2 for i in range(len(h) - 1) if h[i] < 1e-2]
    assert rates and max(rates) < 1e3


def test_uniform_equilibrium_march_is_constant():
    energy = convex_hull()
    system = BinarySystem(build_interval_mesh(8), energy)
    n = system.scalar_space.n_scalar_dofs
    U0 = system.layout.join({"x": np.full(n, 0.5), "mu": np.full(n, -0.02)})
    traj = time_march(system.step_problem, TimeMarchConfig(0.01, 0.05, U0))
    for state in traj.states:
        np.testing.assert_array_equal(state, U0)


def test_stiff_system_accepted_at_backward_error_floor():
    rng = np.random.default_rng(9)
    n = 200
    A = sp.random(n, n, density=0.05, random_state=rng) * 1e8 + sp.identity(n)
    b = rng.normal(size=n)
    x = linear_solve(A, b)
    res = np.abs(A @ x - b).max()
    assert res <= max(1e-10 * (1 + np.abs(b).max()), 1e-13 * (abs(A).sum(axis=1).max() * np.abs(x).max() + np.abs(b).max()))
