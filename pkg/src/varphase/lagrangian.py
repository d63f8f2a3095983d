"""Discrete incremental Lagrangians and their first and second variations.

A time step is the stationary point of the cell-summed Lagrangian
density over all unknown fields of that step. The density is written
once, in terms of point quantities (field values, gradients, flux
divergences). It is evaluated with second-order forward-mode jets seeded
in those quantities, and then pulled back to element dofs through the
linear interpolation map ``q = B u``:

    residual = B^T dL/dq,    Jacobian = B^T d2L/dq2 B.

The pull-back is exact because ``q`` is linear in the dofs.

Sign convention: the multiplier enters as ``+ mu (dx/dt + div j)``, so
the stored multiplier field equals minus the chemical affinity
``delta f_m / delta x``. Use :func:`affinity_from_multiplier` for
reporting.

The flux space carries an essential no-normal-flux condition, which is
what makes the system closed: no boundary integrals appear anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, InvalidArgumentError
from .jet import Jet
from .mesh_fem import CellQuadrature, FunctionSpace, Mesh, build_function_space

__all__ = [
    "MixedLayout",
    "AssembledSystem",
    "BinarySystem",
    "BinaryStepProblem",
    "TernaryParams",
    "TernarySystem",
    "TernaryStepProblem",
    "binary_lagrangian_density",
    "ternary_lagrangian_density",
    "assemble_residual_jacobian_ad",
    "assemble_residual_handcoded_binary",
    "assemble_ternary_ad",
    "natural_boundary_terms",
    "affinity_from_multiplier",
]

CHUNK_CELLS = 512


class MixedLayout:
    """Concatenation of several function spaces into one unknown vector."""

    def __init__(self, fields: list[tuple[str, FunctionSpace]]):
        self.names = [name for name, _ in fields]
        self.spaces = dict(fields)
        self.offsets = {}
        self.local_offsets = {}
        offset = 0
        local = 0
        for name, space in fields:
            self.offsets[name] = offset
            self.local_offsets[name] = local
            offset += space.n_dofs
            local += space.dofmap.shape[1]
        self.n_dofs = offset
        self.n_local = local
        self.cell_dofs = np.concatenate(
            [space.dofmap + self.offsets[name] for name, space in fields], axis=1
        )

    def slice(self, name: str) -> slice:
        start = self.offsets[name]
        return slice(start, start + self.spaces[name].n_dofs)

    def split(self, U: np.ndarray) -> dict[str, np.ndarray]:
        return {name: U[self.slice(name)] for name in self.names}

    def join(self, parts: dict[str, np.ndarray]) -> np.ndarray:
        U = np.zeros(self.n_dofs)
        for name, values in parts.items():
            U[self.slice(name)] = values
        return U

    @property
    def partition(self) -> dict[str, tuple[int, int]]:
        return {name: (self.offsets[name], self.offsets[name] + self.spaces[name].n_dofs) for name in self.names}


@dataclass(frozen=True)
class AssembledSystem:
    residual: np.ndarray
    jacobian: sp.csr_matrix
    partition: dict


def natural_boundary_terms(problem) -> None:
    """No boundary integrals are assembled.

    The flux divergence is kept un-integrated in every form, and the
    no-normal-flux condition lives in the flux space (constrained dofs),
    so the discrete system is closed without any boundary contribution.
    """
    return None


def affinity_from_multiplier(mu: np.ndarray) -> np.ndarray:
    return -np.asarray(mu)


# ---------------------------------------------------------------------------
# point quantities


def _quantity_rows(layout: MixedLayout, spec: list[tuple[str, str]], dim: int):
    """Expand ``(field, kind)`` pairs into a list of named rows.

    kind ``val``: every component value; ``grad``: gradient of a scalar;
    ``div``: divergence of a vector field.
    """
    rows = []
    for name, kind in spec:
        comps = layout.spaces[name].components
        if kind == "val":
            rows += [(name, kind, c, None) for c in range(comps)]
        elif kind == "grad":
            if comps != 1:
                raise InvalidArgumentError("gradients are only formed for scalar fields")
            rows += [(name, kind, 0, d) for d in range(dim)]
        elif kind == "div":
            rows.append((name, kind, None, None))
        else:
            raise InvalidArgumentError(f"unknown quantity kind {kind!r}")
    return rows


def _build_B(layout: MixedLayout, rows, quad: CellQuadrature, cells: slice) -> np.ndarray:
    dN = quad.grads[cells]
    n_c, n_q, n_loc, dim = dN.shape
    B = np.zeros((n_c, n_q, len(rows), layout.n_local))
    for r, (name, kind, comp, d) in enumerate(rows):
        o = layout.local_offsets[name]
        if kind == "val":
            B[:, :, r, o + comp * n_loc:o + (comp + 1) * n_loc] = quad.values[None]
        elif kind == "grad":
            B[:, :, r, o:o + n_loc] = dN[..., d]
        else:
            for c in range(dim):
                B[:, :, r, o + c * n_loc:o + (c + 1) * n_loc] = dN[..., c]
    return B


def _assemble(layout, spec, quad, density, aux, U, with_jacobian=True):
    """Generic residual/Jacobian assembly of ``int density dV``."""
    dim = quad.grads.shape[-1]
    rows = _quantity_rows(layout, spec, dim)
    vector_names = {name for name, kind in spec if kind == "div"}
    scalar_names = {name for name in layout.names if name not in vector_names}
    m = len(rows)
    n = layout.n_dofs
    residual = np.zeros(n)
    data, ri, ci = [], [], []
    n_cells = quad.n_cells
    for start in range(0, n_cells, CHUNK_CELLS):
        cells = slice(start, min(start + CHUNK_CELLS, n_cells))
        dofs = layout.cell_dofs[cells]
        B = _build_B(layout, rows, quad, cells)
        qvals = np.einsum("cqml,cl->cqm", B, U[dofs])
        jets = [Jet.seed(qvals[..., i], i, m) for i in range(m)]
        q = {}
        for (name, kind, comp, d), jet in zip(rows, jets):
            if kind == "val":
                q.setdefault(name, []).append(jet)
            elif kind == "grad":
                q.setdefault("grad_" + name, []).append(jet)
            else:
                q["div_" + name] = jet
        for name in scalar_names:
            if name in q:
                q[name] = q[name][0]
        local_aux = {k: v[cells] for k, v in aux.items()}
        L = density(q, local_aux)
        finite = np.isfinite(L.val) & np.isfinite(L.grad).all(-1) & np.isfinite(L.hess).all((-2, -1))
        if not finite.all():
            bad = np.argwhere(~finite)[0]
            cell = start + int(bad[0])
            values = {row[0] + (f"[{row[2]}]" if row[2] is not None else "") + (f".d{row[3]}" if row[3] is not None else ""): float(qvals[bad[0], bad[1], i])
                      for i, row in enumerate(rows)}
            raise AssemblyError(f"non-finite Lagrangian density in cell {cell}: {values}")
        w = quad.weights[cells]
        g_e = np.einsum("cq,cqm,cqml->cl", w, L.grad, B, optimize=True)
        residual += np.bincount(dofs.ravel(), weights=g_e.ravel(), minlength=n)
        if with_jacobian:
            T = np.einsum("cqmk,cqkl->cqml", L.hess * w[..., None, None], B, optimize=True)
            H_e = np.einsum("cqmi,cqml->cil", B, T, optimize=True)
            nz = H_e != 0.0
            data.append(H_e[nz])
            ri.append(np.broadcast_to(dofs[:, :, None], H_e.shape)[nz])
            ci.append(np.broadcast_to(dofs[:, None, :], H_e.shape)[nz])
    if not with_jacobian:
        return residual, None
    J = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))), shape=(n, n)
    ).tocsr()
    return residual, J


def _energy_row_weights(layout: MixedLayout, fields, dt: float) -> np.ndarray:
    w = np.ones(layout.n_dofs)
    for name in fields:
        w[layout.slice(name)] = dt
    return w


def _sq(v):
    return v.square() if isinstance(v, Jet) else v * v


def _energy(model, x):
    if isinstance(x, Jet):
        return x.compose(*model.evaluate(x.val))
    return model.evaluate(x)[0]


def _norm_sq(vs):
    out = _sq(vs[0])
    for v in vs[1:]:
        out = out + _sq(v)
    return out


# ---------------------------------------------------------------------------
# binary model


def binary_lagrangian_density(q: dict, prev: dict, params: dict):
    """Time-discrete Lagrangian density of a binary system.

    ``q`` holds the unknown point quantities ``x``, ``grad_x`` (list),
    ``j`` (list), ``div_j`` and ``mu``; ``prev`` holds ``x``, ``f``
    (bulk energy) and ``grad_sq`` of the previous step plus the
    diffusivity ``D`` evaluated there. ``params`` carries ``energy``,
    ``dt`` and the dissipation curvature ``k``. Works on plain floats or
    arrays as well as on jets.
    """
    energy = params["energy"]
    dt = params["dt"]
    kappa = energy.kappa
    k = params.get("k", energy.curvature)
    fm = _energy(energy, q["x"])
    if kappa:
        fm = fm + 0.5 * kappa * _norm_sq(q["grad_x"])
    fm_prev = prev["f"] + 0.5 * kappa * prev["grad_sq"]
    dissipation = _norm_sq(q["j"]) * (0.5 * k / prev["D"])
    constraint = q["mu"] * ((q["x"] - prev["x"]) * (1.0 / dt) + q["div_j"])
    return (fm - fm_prev) * (1.0 / dt) + dissipation + constraint


class BinarySystem:
    """Spaces, quadrature and constraints for the three-field binary problem."""

    def __init__(self, mesh: Mesh, energy, diffusivity: float | Callable = 1.0):
        self.mesh = mesh
        self.energy = energy
        self.diffusivity = diffusivity
        self.scalar_space = build_function_space(mesh, 1)
        self.vector_space = build_function_space(mesh, mesh.dimension)
        self.layout = MixedLayout([("x", self.scalar_space), ("j", self.vector_space), ("mu", self.scalar_space)])
        self.quad = CellQuadrature(self.scalar_space)
        self.constrained = self.vector_space.normal_constrained_dofs() + self.layout.offsets["j"]
        mask = np.ones(self.layout.n_dofs, dtype=bool)
        mask[self.constrained] = False
        self.free = np.flatnonzero(mask)
        if not callable(diffusivity) and not diffusivity > 0:
            raise InvalidArgumentError("diffusivity must be positive")

    conserved = ("x",)

    def initial_state(self, x0: np.ndarray) -> np.ndarray:
        return self.layout.join({"x": np.asarray(x0, dtype=float)})

    def diffusivity_at(self, x_values: np.ndarray) -> np.ndarray:
        if callable(self.diffusivity):
            D = np.asarray(self.diffusivity(x_values), dtype=float)
        else:
            D = np.full_like(x_values, float(self.diffusivity))
        if np.any(D <= 0):
            raise AssemblyError("diffusivity must stay positive")
        return np.broadcast_to(D, x_values.shape)

    def step_problem(self, previous: np.ndarray, dt: float) -> "BinaryStepProblem":
        return BinaryStepProblem(self, previous, dt)

    # diagnostics ------------------------------------------------------------

    def mass(self, U: np.ndarray) -> dict[str, float]:
        x = U[self.layout.slice("x")]
        return {"x": self.quad.integrate(self.quad.scalar_values(x))}

    def free_energy(self, U: np.ndarray) -> float:
        x = U[self.layout.slice("x")]
        xq = self.quad.scalar_values(x)
        density = self.energy.evaluate(xq)[0]
        if self.energy.kappa:
            g = self.quad.scalar_gradients(x)
            density = density + 0.5 * self.energy.kappa * np.sum(g * g, axis=-1)
        return self.quad.integrate(density)

    def _vector_values(self, coeffs: np.ndarray) -> np.ndarray:
        n = self.scalar_space.n_scalar_dofs
        return np.stack([self.quad.scalar_values(coeffs[c * n:(c + 1) * n]) for c in range(self.mesh.dimension)], axis=-1)

    def dissipation(self, U: np.ndarray, previous: np.ndarray | None = None) -> float:
        """``int (k / D) |j|^2 dV`` with D evaluated on the previous composition."""
        parts = self.layout.split(U)
        j = self._vector_values(parts["j"])
        x_ref = parts["x"] if previous is None else previous[self.layout.slice("x")]
        D = self.diffusivity_at(self.quad.scalar_values(x_ref))
        return self.quad.integrate(self.energy.curvature / D * np.sum(j * j, axis=-1))

    def entropy_production(self, U: np.ndarray, previous: np.ndarray | None = None) -> np.ndarray:
        """Pointwise ``(D / k) |grad mu|^2`` (scaled units, T = 1)."""
        parts = self.layout.split(U)
        g = self.quad.scalar_gradients(parts["mu"])
        x_ref = parts["x"] if previous is None else previous[self.layout.slice("x")]
        D = self.diffusivity_at(self.quad.scalar_values(x_ref))
        return D / self.energy.curvature * np.sum(g * g, axis=-1)

    def field_ranges(self, U: np.ndarray) -> dict[str, tuple[float, float]]:
        x = U[self.layout.slice("x")]
        return {"x": (float(x.min()), float(x.max()))}


class BinaryStepProblem:
    """One backward-Euler step of the binary system."""

    def __init__(self, system: BinarySystem, previous: np.ndarray, dt: float):
        if not dt > 0:
            raise InvalidArgumentError("time step must be positive")
        self.system = system
        self.previous = np.asarray(previous, dtype=float)
        self.dt = float(dt)
        quad = system.quad
        x_prev = self.previous[system.layout.slice("x")]
        xq = quad.scalar_values(x_prev)
        gq = quad.scalar_gradients(x_prev)
        self.prev = {
            "x": xq,
            "f": system.energy.evaluate(xq)[0],
            "grad_sq": np.sum(gq * gq, axis=-1),
            "D": system.diffusivity_at(xq),
        }
        self.params = {"energy": system.energy, "dt": self.dt, "k": system.energy.curvature}

    @property
    def layout(self) -> MixedLayout:
        return self.system.layout

    @property
    def free(self) -> np.ndarray:
        return self.system.free

    energy_fields = ("x",)

    def density(self, q, aux):
        return binary_lagrangian_density(q, aux, self.params)

    @property
    def residual_weights(self) -> np.ndarray:
        """Row weights for convergence checks: the energy rows carry ``1/dt``."""
        return _energy_row_weights(self.layout, self.energy_fields, self.dt)

    def assemble(self, U: np.ndarray, with_jacobian: bool = True) -> AssembledSystem:
        return assemble_residual_jacobian_ad(self, U, with_jacobian)

    def lagrangian(self, U: np.ndarray) -> float:
        """Value of the cell-summed discrete Lagrangian."""
        s = self.system
        parts = s.layout.split(U)
        n = s.scalar_space.n_scalar_dofs
        dim = s.mesh.dimension
        q = {
            "x": s.quad.scalar_values(parts["x"]),
            "grad_x": list(np.moveaxis(s.quad.scalar_gradients(parts["x"]), -1, 0)),
            "j": [s.quad.scalar_values(parts["j"][c * n:(c + 1) * n]) for c in range(dim)],
            "div_j": sum(s.quad.scalar_gradients(parts["j"][c * n:(c + 1) * n])[..., c] for c in range(dim)),
            "mu": s.quad.scalar_values(parts["mu"]),
        }
        return s.quad.integrate(binary_lagrangian_density(q, self.prev, self.params))


_BINARY_SPEC = [("x", "val"), ("x", "grad"), ("j", "val"), ("j", "div"), ("mu", "val")]


def assemble_residual_jacobian_ad(problem: BinaryStepProblem, U: np.ndarray, with_jacobian: bool = True) -> AssembledSystem:
    """Gradient and Hessian of the binary discrete Lagrangian by forward-mode AD."""
    s = problem.system
    r, J = _assemble(s.layout, _BINARY_SPEC, s.quad, problem.density, problem.prev, np.asarray(U, float), with_jacobian)
    return AssembledSystem(r, J, s.layout.partition)


def assemble_residual_handcoded_binary(problem: BinaryStepProblem, U: np.ndarray, match_ad: bool = False) -> np.ndarray:
    """Residual of the three printed weak forms, assembled directly.

    Blocks: ``int f'(x) x^ + kappa grad x . grad x^ + mu x^``,
    ``int (k/D) j . j^ + mu div j^`` and ``int ((x - x_t)/dt + div j) mu^``.
    The first block lacks the ``1/dt`` factor that the variation of the
    Lagrangian carries; ``match_ad=True`` restores it.
    """
    s = problem.system
    quad = s.quad
    dim = s.mesh.dimension
    n = s.scalar_space.n_scalar_dofs
    parts = s.layout.split(np.asarray(U, float))
    N = quad.values
    dN = quad.grads
    w = quad.weights
    dm = s.scalar_space.scalar_dofmap

    x = quad.scalar_values(parts["x"])
    gx = quad.scalar_gradients(parts["x"])
    mu = quad.scalar_values(parts["mu"])
    jc = [parts["j"][c * n:(c + 1) * n] for c in range(dim)]
    jv = [quad.scalar_values(v) for v in jc]
    divj = sum(quad.scalar_gradients(v)[..., c] for c, v in enumerate(jc))
    df = s.energy.evaluate(x)[1]
    kappa = s.energy.kappa
    k_over_D = s.energy.curvature / problem.prev["D"]

    def scatter(local):
        return np.bincount(dm.ravel(), weights=local.ravel(), minlength=n)

    rx = np.einsum("cq,cq,ql->cl", w, df + mu, N) + kappa * np.einsum("cq,cqd,cqld->cl", w, gx, dN)
    if match_ad:
        rx = rx / problem.dt
    rj = [
        np.einsum("cq,cq,ql->cl", w, k_over_D * jv[c], N) + np.einsum("cq,cq,cql->cl", w, mu, dN[..., c])
        for c in range(dim)
    ]
    rmu = np.einsum("cq,cq,ql->cl", w, (x - problem.prev["x"]) / problem.dt + divj, N)
    return np.concatenate([scatter(rx)] + [scatter(r) for r in rj] + [scatter(rmu)])


# ---------------------------------------------------------------------------
# ternary vacancy model


@dataclass(frozen=True)
class TernaryParams:
    """Kinetic parameters of the vacancy-mediated ternary model.

    ``d0 = inf`` drops the vacancy-flux dissipation term. ``k1``/``k2``
    default to the curvature of the host energy.
    """

    d1: float = 2.0
    d2: float = 1.0
    d0: float = np.inf
    k0: float = 1.0e6
    x0_eq: float = 1.0e-3
    k1: float | None = None
    k2: float | None = None
    a_phi: float = 1.0e3

    def __post_init__(self):
        for name in ("d1", "d2", "d0", "k0", "a_phi"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        for name in ("k1", "k2"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if not 0 < self.x0_eq < 1:
            raise InvalidArgumentError("x0_eq must lie in (0, 1)")


def ternary_lagrangian_density(q: dict, prev: dict, params: dict):
    """Density of free energy rate + dissipation + constraints for (x0, x1).

    Dissipation follows the vacancy-mechanism functional without a 1/2
    prefactor: ``k0/D0 |j0|^2 + k1/D1 |j1|^2 + k2/D2 |j0 + j1|^2 + phi^2/A``.
    """
    energy = params["energy"]
    tp: TernaryParams = params["ternary"]
    dt = params["dt"]
    kappa = energy.kappa
    x0, x1, phi = q["x0"], q["x1"], q["phi"]
    fm = _energy(energy, x1) + _sq(x0 - tp.x0_eq) * (0.5 * tp.k0)
    if kappa:
        fm = fm + 0.5 * kappa * _norm_sq(q["grad_x1"])
    fm_prev = prev["f"] + 0.5 * kappa * prev["grad_sq"]

    j0, j1 = q["j0"], q["j1"]
    dissipation = _norm_sq(j1) * (params["k1"] / tp.d1)
    dissipation = dissipation + _norm_sq([a + b for a, b in zip(j0, j1)]) * (params["k2"] / tp.d2)
    if np.isfinite(tp.d0):
        dissipation = dissipation + _norm_sq(j0) * (tp.k0 / tp.d0)
    dissipation = dissipation + _sq(phi) * (1.0 / tp.a_phi)

    c0 = (x0 - prev["x0"]) * (1.0 / dt) + q["div_j0"] - phi * (1.0 - x0)
    c1 = (x1 - prev["x1"]) * (1.0 / dt) + q["div_j1"] + phi * x1
    return (fm - fm_prev) * (1.0 / dt) + dissipation + q["mu0"] * c0 + q["mu1"] * c1


class TernarySystem:
    """Seven-field vacancy model: x0, x1, j0, j1, mu0, mu1, phi."""

    conserved = ("x0", "x1")

    def __init__(self, mesh: Mesh, energy, params: TernaryParams):
        self.mesh = mesh
        self.energy = energy
        self.params = params
        self.k1 = params.k1 if params.k1 is not None else energy.curvature
        self.k2 = params.k2 if params.k2 is not None else energy.curvature
        self.scalar_space = build_function_space(mesh, 1)
        self.vector_space = build_function_space(mesh, mesh.dimension)
        S, V = self.scalar_space, self.vector_space
        self.layout = MixedLayout(
            [("x0", S), ("x1", S), ("j0", V), ("j1", V), ("mu0", S), ("mu1", S), ("phi", S)]
        )
        self.quad = CellQuadrature(S)
        cons = V.normal_constrained_dofs()
        self.constrained = np.concatenate([cons + self.layout.offsets["j0"], cons + self.layout.offsets["j1"]])
        mask = np.ones(self.layout.n_dofs, dtype=bool)
        mask[self.constrained] = False
        self.free = np.flatnonzero(mask)

    def initial_state(self, x1: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        if x0 is None:
            x0 = np.full_like(x1, self.params.x0_eq)
        return self.layout.join({"x0": x0, "x1": x1})

    def step_problem(self, previous: np.ndarray, dt: float) -> "TernaryStepProblem":
        return TernaryStepProblem(self, previous, dt)

    def onsager_matrix(self) -> np.ndarray:
        """Scaled Onsager matrix mapping multiplier gradients to (j0, j1)."""
        p = self.params
        a = self.k2 / p.d2
        R = np.array([[a, a], [a, a + self.k1 / p.d1]])
        if np.isfinite(p.d0):
            R[0, 0] += p.k0 / p.d0
        return 0.5 * np.linalg.inv(R)

    def mass(self, U: np.ndarray) -> dict[str, float]:
        parts = self.layout.split(U)
        return {name: self.quad.integrate(self.quad.scalar_values(parts[name])) for name in ("x0", "x1")}

    def source_integral(self, U: np.ndarray) -> dict[str, float]:
        """Rates ``int phi (1 - x0)`` and ``-int phi x1`` feeding the site-fraction balances."""
        parts = self.layout.split(U)
        phi = self.quad.scalar_values(parts["phi"])
        x0 = self.quad.scalar_values(parts["x0"])
        x1 = self.quad.scalar_values(parts["x1"])
        return {"x0": self.quad.integrate(phi * (1.0 - x0)), "x1": -self.quad.integrate(phi * x1)}

    def free_energy(self, U: np.ndarray) -> float:
        parts = self.layout.split(U)
        x1 = self.quad.scalar_values(parts["x1"])
        x0 = self.quad.scalar_values(parts["x0"])
        density = self.energy.evaluate(x1)[0] + 0.5 * self.params.k0 * (x0 - self.params.x0_eq) ** 2
        if self.energy.kappa:
            g = self.quad.scalar_gradients(parts["x1"])
            density = density + 0.5 * self.energy.kappa * np.sum(g * g, axis=-1)
        return self.quad.integrate(density)

    def _vector_values(self, coeffs):
        n = self.scalar_space.n_scalar_dofs
        return np.stack([self.quad.scalar_values(coeffs[c * n:(c + 1) * n]) for c in range(self.mesh.dimension)], axis=-1)

    def dissipation(self, U: np.ndarray, previous=None) -> float:
        parts = self.layout.split(U)
        p = self.params
        j0 = self._vector_values(parts["j0"])
        j1 = self._vector_values(parts["j1"])
        phi = self.quad.scalar_values(parts["phi"])
        d = self.k1 / p.d1 * np.sum(j1 * j1, -1) + self.k2 / p.d2 * np.sum((j0 + j1) ** 2, -1) + phi**2 / p.a_phi
        if np.isfinite(p.d0):
            d = d + p.k0 / p.d0 * np.sum(j0 * j0, -1)
        return self.quad.integrate(d)

    def entropy_production(self, U: np.ndarray, previous=None) -> np.ndarray:
        parts = self.layout.split(U)
        g = np.stack([self.quad.scalar_gradients(parts["mu0"]), self.quad.scalar_gradients(parts["mu1"])])
        L = self.onsager_matrix()
        return np.einsum("ik,i...d,k...d->...", L, g, g)

    def field_ranges(self, U: np.ndarray) -> dict[str, tuple[float, float]]:
        parts = self.layout.split(U)
        return {name: (float(parts[name].min()), float(parts[name].max())) for name in ("x0", "x1")}


class TernaryStepProblem:
    def __init__(self, system: TernarySystem, previous: np.ndarray, dt: float):
        if not dt > 0:
            raise InvalidArgumentError("time step must be positive")
        self.system = system
        self.previous = np.asarray(previous, dtype=float)
        self.dt = float(dt)
        quad = system.quad
        parts = system.layout.split(self.previous)
        x0 = quad.scalar_values(parts["x0"])
        x1 = quad.scalar_values(parts["x1"])
        g1 = quad.scalar_gradients(parts["x1"])
        tp = system.params
        self.prev = {
            "x0": x0,
            "x1": x1,
            "f": system.energy.evaluate(x1)[0] + 0.5 * tp.k0 * (x0 - tp.x0_eq) ** 2,
            "grad_sq": np.sum(g1 * g1, axis=-1),
        }
        self.params = {"energy": system.energy, "ternary": tp, "dt": self.dt, "k1": system.k1, "k2": system.k2}

    @property
    def layout(self) -> MixedLayout:
        return self.system.layout

    @property
    def free(self) -> np.ndarray:
        return self.system.free

    energy_fields = ("x0", "x1")

    def density(self, q, aux):
        return ternary_lagrangian_density(q, aux, self.params)

    @property
    def residual_weights(self) -> np.ndarray:
        """Row weights for convergence checks: the energy rows carry ``1/dt``."""
        return _energy_row_weights(self.layout, self.energy_fields, self.dt)

    def assemble(self, U: np.ndarray, with_jacobian: bool = True) -> AssembledSystem:
        return assemble_ternary_ad(self, U, with_jacobian)


_TERNARY_SPEC = [
    ("x0", "val"),
    ("x1", "val"),
    ("x1", "grad"),
    ("j0", "val"),
    ("j0", "div"),
    ("j1", "val"),
    ("j1", "div"),
    ("mu0", "val"),
    ("mu1", "val"),
    ("phi", "val"),
]


def assemble_ternary_ad(problem: TernaryStepProblem, U: np.ndarray, with_jacobian: bool = True) -> AssembledSystem:
    """Gradient and Hessian of the ternary discrete Lagrangian by forward-mode AD."""
    s = problem.system
    r, J = _assemble(s.layout, _TERNARY_SPEC, s.quad, problem.density, problem.prev, np.asarray(U, float), with_jacobian)
    return AssembledSystem(r, J, s.layout.partition)
