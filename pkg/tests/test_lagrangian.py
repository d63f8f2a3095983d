import numpy as np
import pytest

from varphase.energy import convex_hull, double_well
from varphase.errors import InvalidArgumentError
from varphase.lagrangian import (
    BinarySystem,
    TernaryParams,
    TernarySystem,
    assemble_residual_handcoded_binary,
    binary_lagrangian_density,
)
from varphase.mesh_fem import build_interval_mesh, build_unit_square_mesh

DT = 1e-3
MESHES = {"1d": lambda: build_interval_mesh(6), "2d": lambda: build_unit_square_mesh(3, 3)}


def _size(layout, name):
    a, b = layout.partition[name]
    return b - a


def _random_binary_state(system, rng):
    parts = {
        "x": rng.uniform(0.3, 0.7, _size(system.layout, "x")),
        "j": rng.normal(scale=0.1, size=_size(system.layout, "j")),
        "mu": rng.normal(scale=0.05, size=_size(system.layout, "mu")),
    }
    U = system.layout.join(parts)
    U[system.constrained] = 0.0
    return U


def _random_ternary_state(system, rng):
    sizes = {k: b - a for k, (a, b) in system.layout.partition.items()}
    parts = {
        "x0": rng.uniform(5e-4, 2e-3, sizes["x0"]),
        "x1": rng.uniform(0.3, 0.7, sizes["x1"]),
        "j0": rng.normal(scale=0.01, size=sizes["j0"]),
        "j1": rng.normal(scale=0.1, size=sizes["j1"]),
        "mu0": rng.normal(scale=0.05, size=sizes["mu0"]),
        "mu1": rng.normal(scale=0.05, size=sizes["mu1"]),
        "phi": rng.normal(scale=0.1, size=sizes["phi"]),
    }
    U = system.layout.join(parts)
    U[system.constrained] = 0.0
    return U


def _fd_jacobian(problem, U, h=1e-7):
    n = U.size
    J = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        J[:, i] = (problem.assemble(U + e, False).residual - problem.assemble(U - e, False).residual) / (2 * h)
    return J


@pytest.mark.parametrize("mesh", sorted(MESHES))
def test_ad_matches_handcoded_residual(mesh):
    rng = np.random.default_rng(0)
    system = BinarySystem(MESHES[mesh](), double_well(kappa=0.3))
    worst = 0.0
    for _ in range(50):
        prev = _random_binary_state(system, rng)
        U = _random_binary_state(system, rng)
        problem = system.step_problem(prev, DT)
        ad = problem.assemble(U, with_jacobian=False).residual
        hand = assemble_residual_handcoded_binary(problem, U, match_ad=True)
        worst = max(worst, np.abs(ad - hand).max() / max(1.0, np.abs(ad).max()))
    assert worst <= 1e-12


def test_handcoded_default_omits_dt_on_energy_rows():
    rng = np.random.default_rng(1)
    system = BinarySystem(build_interval_mesh(4), convex_hull())
    U = _random_binary_state(system, rng)
    problem = system.step_problem(U, DT)
    sl = system.layout.slice("x")
    a = assemble_residual_handcoded_binary(problem, U)[sl]
    b = assemble_residual_handcoded_binary(problem, U, match_ad=True)[sl]
    np.testing.assert_allclose(a, b * DT, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("mesh", sorted(MESHES))
def test_binary_jacobian_matches_finite_differences(mesh):
    rng = np.random.default_rng(2)
    system = BinarySystem(MESHES[mesh](), double_well(kappa=0.3))
    U = _random_binary_state(system, rng)
    problem = system.step_problem(_random_binary_state(system, rng), DT)
    J = problem.assemble(U).jacobian.toarray()
    Jfd = _fd_jacobian(problem, U)
    assert np.abs(J - Jfd).max() <= 1e-6 * np.abs(J).max()


def test_ternary_jacobian_matches_finite_differences():
    rng = np.random.default_rng(3)
    system = TernarySystem(build_interval_mesh(3), convex_hull(), TernaryParams(k0=1e2, d0=5.0))
    U = _random_ternary_state(system, rng)
    problem = system.step_problem(_random_ternary_state(system, rng), DT)
    J = problem.assemble(U).jacobian.toarray()
    Jfd = _fd_jacobian(problem, U, h=1e-6)
    assert np.abs(J - Jfd).max() <= 1e-6 * np.abs(J).max()


@pytest.mark.parametrize("kind", ["binary", "ternary"])
def test_jacobian_symmetric(kind):
    rng = np.random.default_rng(4)
    mesh = build_unit_square_mesh(3, 3)
    if kind == "binary":
        system = BinarySystem(mesh, double_well(kappa=1.0))
        U = _random_binary_state(system, rng)
    else:
        system = TernarySystem(mesh, convex_hull(), TernaryParams())
        U = _random_ternary_state(system, rng)
    J = system.step_problem(U, DT).assemble(U).jacobian
    scale = abs(J).max()
    assert abs(J - J.T).max() <= 1e-12 * scale


@pytest.mark.parametrize("kind", ["binary", "ternary"])
def test_dissipation_block_positive_semidefinite(kind):
    rng = np.random.default_rng(5)
    mesh = build_unit_square_mesh(2, 2)
    if kind == "binary":
        system = BinarySystem(mesh, convex_hull(), diffusivity=lambda x: 1.0 + x)
        U = _random_binary_state(system, rng)
        idx = np.arange(*_span(system.layout, ["j"]))
    else:
        system = TernarySystem(mesh, convex_hull(), TernaryParams(d0=3.0))
        U = _random_ternary_state(system, rng)
        idx = np.arange(*_span(system.layout, ["j0", "j1"]))
    J = system.step_problem(U, DT).assemble(U).jacobian.toarray()
    block = J[np.ix_(idx, idx)]
    assert np.linalg.eigvalsh(0.5 * (block + block.T)).min() >= -1e-12 * np.abs(block).max()


def _span(layout, names):
    return min(layout.partition[n][0] for n in names), max(layout.partition[n][1] for n in names)


@pytest.mark.parametrize("mesh", sorted(MESHES))
def test_uniform_state_is_fixed_point(mesh):
    energy = convex_hull()
    system = BinarySystem(MESHES[mesh](), energy)
    n = system.scalar_space.n_scalar_dofs
    slope = float(energy.evaluate(0.5)[1])
    U = system.layout.join({"x": np.full(n, 0.5), "mu": np.full(n, -slope)})
    r = system.step_problem(U, DT).assemble(U, False).residual
    assert np.abs(r[system.free]).max() <= 1e-13


def test_ternary_equilibrium_is_fixed_point():
    energy = convex_hull()
    system = TernarySystem(build_unit_square_mesh(2, 2), energy, TernaryParams())
    n = system.scalar_space.n_scalar_dofs
    tp = system.params
    mu1 = -float(energy.evaluate(0.5)[1])
    # zero site source needs mu0 (1 - x0) = mu1 x1 and k0 (x0 - x0_eq) = -mu0
    x0 = tp.x0_eq
    for _ in range(20):
        mu0 = mu1 * 0.5 / (1.0 - x0)
        x0 = tp.x0_eq - mu0 / tp.k0
    U = system.layout.join({
        "x0": np.full(n, x0),
        "x1": np.full(n, 0.5),
        "mu0": np.full(n, mu0),
        "mu1": np.full(n, mu1),
    })
    problem = system.step_problem(U, DT)
    r = problem.assemble(U, False).residual * problem.residual_weights
    assert np.abs(r[system.free]).max() <= 1e-12


def test_density_accepts_plain_floats():
    energy = convex_hull()
    prev = {"x": 0.5, "f": 0.015, "grad_sq": 0.0, "D": 1.0}
    q = {"x": 0.5, "grad_x": [0.0], "j": [0.1], "div_j": 0.0, "mu": 0.0}
    value = binary_lagrangian_density(q, prev, {"energy": energy, "dt": DT, "k": 2.0})
    assert value == pytest.approx(0.5 * 2.0 * 0.01)


def test_diagnostics_consistent():
    rng = np.random.default_rng(6)
    system = BinarySystem(build_interval_mesh(10), convex_hull())
    U = _random_binary_state(system, rng)
    x = U[system.layout.slice("x")]
    assert system.mass(U)["x"] == pytest.approx(system.quad.integrate(system.quad.scalar_values(x)))
    assert system.dissipation(U) >= 0 and system.entropy_production(U).min() >= 0
    lo, hi = system.field_ranges(U)["x"]
    assert lo == x.min() and hi == x.max()


def test_onsager_matrix_spd():
    system = TernarySystem(build_interval_mesh(2), convex_hull(), TernaryParams())
    L = system.onsager_matrix()
    np.testing.assert_allclose(L, L.T)
    assert np.linalg.eigvalsh(L).min() > 0


def test_invalid_inputs():
    system = BinarySystem(build_interval_mesh(2), convex_hull())
    with pytest.raises(InvalidArgumentError):
        system.step_problem(np.zeros(system.layout.n_dofs), 0.0)
    with pytest.raises(InvalidArgumentError):
        BinarySystem(build_interval_mesh(2), convex_hull(), diffusivity=-1.0)
    with pytest.raises(InvalidArgumentError):
        TernaryParams(x0_eq=1.5)
