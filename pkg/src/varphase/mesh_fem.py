"""Meshes, degree-2 Lagrange spaces, quadrature and field evaluation.

Only two mesh families are supported: uniform intervals and structured
triangulations of the unit square. Both are affine, so basis gradients
are constant per cell mapping and can be precomputed for every
quadrature point at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "Mesh",
    "QuadratureRule",
    "FunctionSpace",
    "Field",
    "CellQuadrature",
    "build_interval_mesh",
    "build_unit_square_mesh",
    "build_function_space",
    "default_quadrature",
    "reference_basis",
    "evaluate_basis",
    "interpolate",
    "integrate_scalar",
]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Affine simplicial mesh in one or two dimensions.

    ``cells`` holds intervals (2 vertices) in 1-D and counter-clockwise
    triangles (3 vertices) in 2-D. ``boundary_facets`` holds vertex
    indices of facets owned by exactly one cell.
    """

    dimension: int
    vertices: np.ndarray
    cells: np.ndarray
    boundary_facets: np.ndarray

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise InvalidArgumentError("mesh dimension must be 1 or 2")
        if self.vertices.ndim != 2 or self.vertices.shape[1] != self.dimension:
            raise InvalidArgumentError("vertex array must have shape (n, dimension)")
        if self.cells.shape[1] != self.dimension + 1:
            raise InvalidArgumentError("cells must be simplices")
        if self.cells.min() < 0 or self.cells.max() >= len(self.vertices):
            raise InvalidArgumentError("cell connectivity index out of range")
        if np.any(self.cell_measures <= 0.0):
            raise InvalidArgumentError("every cell must have positive measure")
        self.vertices.setflags(write=False)
        self.cells.setflags(write=False)
        self.boundary_facets.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @cached_property
    def jacobians(self) -> np.ndarray:
        """Affine map Jacobians, shape (n_cells, dim, dim); column i is v_{i+1} - v_0."""
        v = self.vertices[self.cells]
        return np.stack([v[:, i + 1] - v[:, 0] for i in range(self.dimension)], axis=-1)

    @cached_property
    def cell_measures(self) -> np.ndarray:
        v = self.vertices[self.cells]
        if self.dimension == 1:
            return v[:, 1, 0] - v[:, 0, 0]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def inverse_jacobians(self) -> np.ndarray:
        return np.linalg.inv(self.jacobians)

    @property
    def measure(self) -> float:
        return float(np.sum(self.cell_measures))

    @cached_property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def cell_size(self) -> float:
        """Largest cell diameter (interval length in 1-D, longest edge in 2-D)."""
        if self.dimension == 1:
            return float(self.cell_measures.max())
        v = self.vertices[self.cells]
        edges = np.concatenate([v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]])
        return float(np.sqrt((edges**2).sum(axis=1)).max())


def _boundary_facets(cells: np.ndarray, dimension: int) -> np.ndarray:
    if dimension == 1:
        facets = cells.reshape(-1, 1)
    else:
        facets = np.concatenate([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]])
    keys = np.sort(facets, axis=1)
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    return uniq[counts == 1]


def build_interval_mesh(n_cells: int, length: float = 1.0) -> Mesh:
    """Uniform mesh of ``n_cells`` intervals on ``[0, length]``."""
    if int(n_cells) != n_cells or n_cells < 1:
        raise InvalidArgumentError("n_cells must be a positive integer")
    if not length > 0:
        raise InvalidArgumentError("length must be positive")
    n_cells = int(n_cells)
    vertices = (np.arange(n_cells + 1, dtype=float) * (length / n_cells)).reshape(-1, 1)
    vertices[-1, 0] = length
    cells = np.column_stack([np.arange(n_cells), np.arange(1, n_cells + 1)])
    return Mesh(1, vertices, cells, _boundary_facets(cells, 1))


def build_unit_square_mesh(nx: int, ny: int, length: float = 1.0) -> Mesh:
    """Structured triangulation of the square ``[0, length]^2``.

    Each of the ``nx * ny`` quads is split along its lower-left to
    upper-right diagonal. Vertex ``(i, j)`` has index ``j * (nx + 1) + i``.
    """
    for n in (nx, ny):
        if int(n) != n or n < 1:
            raise InvalidArgumentError("subdivision counts must be positive integers")
    if not length > 0:
        raise InvalidArgumentError("length must be positive")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, length, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (j * (nx + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh(2, vertices, cells, _boundary_facets(cells, 2))


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on the reference cell (``[0,1]`` or the unit triangle)."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def n_points(self) -> int:
        return len(self.weights)


def _gauss_interval(n_points: int = 3) -> QuadratureRule:
    xi, w = np.polynomial.legendre.leggauss(n_points)
    return QuadratureRule(0.5 * (xi + 1.0).reshape(-1, 1), 0.5 * w, 2 * n_points - 1)


def _dunavant_degree4() -> QuadratureRule:
    # Dunavant (1985), 6-point rule exact to degree 4.
    a1, a2, w1 = 0.445948490915965, 0.108103018168070, 0.223381589678011
    b1, b2, w2 = 0.091576213509771, 0.816847572980459, 0.109951743655322
    bary = np.array(
        [
            [a1, a1, a2],
            [a1, a2, a1],
            [a2, a1, a1],
            [b1, b1, b2],
            [b1, b2, b1],
            [b2, b1, b1],
        ]
    )
    weights = 0.5 * np.array([w1, w1, w1, w2, w2, w2])
    return QuadratureRule(bary[:, 1:].copy(), weights, 4)


def default_quadrature(dimension: int) -> QuadratureRule:
    """Degree-4 (or better) rule for the reference cell of ``dimension``."""
    if dimension == 1:
        return _gauss_interval(3)
    if dimension == 2:
        return _dunavant_degree4()
    raise InvalidArgumentError("dimension must be 1 or 2")


def reference_basis(dimension: int, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P2 shape function values and reference gradients.

    Local ordering is vertices first, then edge midpoints: in 1-D the
    midpoint is local dof 2; in 2-D local dofs 3, 4, 5 sit on edges
    (0,1), (1,2), (2,0).

    Returns ``(values, grads)`` with shapes ``(n_pts, n_loc)`` and
    ``(n_pts, n_loc, dimension)``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if dimension == 1:
        xi = points[:, 0]
        lam = np.stack([1.0 - xi, xi], axis=1)
        dlam = np.array([[-1.0], [1.0]])
        edges = [(0, 1)]
    elif dimension == 2:
        xi, eta = points[:, 0], points[:, 1]
        lam = np.stack([1.0 - xi - eta, xi, eta], axis=1)
        dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        edges = [(0, 1), (1, 2), (2, 0)]
    else:
        raise InvalidArgumentError("dimension must be 1 or 2")

    n_vert = dimension + 1
    values = np.empty((len(points), n_vert + len(edges)))
    grads = np.empty((len(points), n_vert + len(edges), dimension))
    for i in range(n_vert):
        values[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * dlam[i]
    for e, (a, b) in enumerate(edges):
        values[:, n_vert + e] = 4.0 * lam[:, a] * lam[:, b]
        grads[:, n_vert + e, :] = 4.0 * (lam[:, a, None] * dlam[b] + lam[:, b, None] * dlam[a])
    return values, grads


@dataclass(frozen=True, eq=False)
class FunctionSpace:
    """Continuous degree-2 Lagrange space with ``components`` copies.

    Global scalar dofs are numbered vertices first, then edges (2-D) or
    cells (1-D). Vector spaces stack component blocks: dof
    ``c * n_scalar + i`` is component ``c`` of scalar dof ``i``.
    """

    mesh: Mesh
    components: int
    scalar_dofmap: np.ndarray
    dof_coordinates: np.ndarray
    degree: int = field(default=2)

    @property
    def n_scalar_dofs(self) -> int:
        return len(self.dof_coordinates)

    @property
    def n_dofs(self) -> int:
        return self.components * self.n_scalar_dofs

    @property
    def n_local(self) -> int:
        return self.scalar_dofmap.shape[1]

    @cached_property
    def dofmap(self) -> np.ndarray:
        """Cell to global dof indices, shape (n_cells, components * n_local)."""
        n = self.n_scalar_dofs
        return np.concatenate([self.scalar_dofmap + c * n for c in range(self.components)], axis=1)

    def boundary_scalar_dofs(self) -> np.ndarray:
        """Scalar dofs lying on the boundary (vertices and facet midpoints)."""
        return np.unique(self._boundary_facet_dofs().ravel())

    def _boundary_facet_dofs(self) -> np.ndarray:
        mesh = self.mesh
        facets = mesh.boundary_facets
        if mesh.dimension == 1:
            return facets.copy()
        lookup = _edge_lookup(mesh)
        key = np.sort(facets, axis=1)
        mids = np.array([lookup[tuple(k)] for k in key], dtype=np.int64) + mesh.n_vertices
        return np.column_stack([facets, mids])

    def normal_constrained_dofs(self) -> np.ndarray:
        """Global dofs of a vector space fixed to zero by a no-normal-flux condition.

        Only axis-aligned boundaries are supported (intervals and the
        structured square); the component along the outward normal of every
        boundary facet is constrained at all dofs on that facet.
        """
        if self.components != self.mesh.dimension:
            raise InvalidArgumentError("normal constraints need a vector space")
        mesh = self.mesh
        n = self.n_scalar_dofs
        if mesh.dimension == 1:
            return np.unique(mesh.boundary_facets.ravel())
        facet_dofs = self._boundary_facet_dofs()
        tangent = mesh.vertices[mesh.boundary_facets[:, 1]] - mesh.vertices[mesh.boundary_facets[:, 0]]
        tol = 1e-12 * np.abs(tangent).max()
        constrained = []
        for dofs, t in zip(facet_dofs, tangent):
            if abs(t[1]) <= tol:
                constrained.extend(dofs + n)  # horizontal facet: normal along y
            elif abs(t[0]) <= tol:
                constrained.extend(dofs)
            else:
                raise InvalidArgumentError("normal constraints require axis-aligned boundaries")
        return np.unique(np.asarray(constrained, dtype=np.int64))


def _cell_edges(mesh: Mesh) -> np.ndarray:
    c = mesh.cells
    return np.stack([c[:, [0, 1]], c[:, [1, 2]], c[:, [2, 0]]], axis=1)


def _edge_lookup(mesh: Mesh) -> dict:
    keys = np.sort(_cell_edges(mesh).reshape(-1, 2), axis=1)
    uniq = np.unique(keys, axis=0)
    return {tuple(k): i for i, k in enumerate(uniq)}


def build_function_space(mesh: Mesh, components: int = 1) -> FunctionSpace:
    """Degree-2 Lagrange space on ``mesh`` with 1 or ``mesh.dimension`` components."""
    if components not in (1, mesh.dimension):
        raise InvalidArgumentError(
            f"components must be 1 or the mesh dimension ({mesh.dimension}), got {components}"
        )
    nv = mesh.n_vertices
    if mesh.dimension == 1:
        mids = np.arange(mesh.n_cells) + nv
        dofmap = np.column_stack([mesh.cells, mids])
        mid_coords = mesh.vertices[mesh.cells].mean(axis=1)
    else:
        edges = np.sort(_cell_edges(mesh).reshape(-1, 2), axis=1)
        uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
        dofmap = np.column_stack([mesh.cells, inverse.reshape(-1, 3) + nv])
        mid_coords = mesh.vertices[uniq].mean(axis=1)
    coords = np.concatenate([mesh.vertices, mid_coords])
    dofmap = dofmap.astype(np.int64)
    dofmap.setflags(write=False)
    coords.setflags(write=False)
    return FunctionSpace(mesh, components, dofmap, coords)


@dataclass
class Field:
    """Coefficient vector attached to a function space."""

    space: FunctionSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.n_dofs,):
            raise InvalidArgumentError(
                f"coefficient length {self.coeffs.shape} does not match {self.space.n_dofs} dofs"
            )

    def component(self, c: int) -> np.ndarray:
        n = self.space.n_scalar_dofs
        return self.coeffs[c * n:(c + 1) * n]


def evaluate_basis(space: FunctionSpace, cell: int, reference_points) -> tuple[np.ndarray, np.ndarray]:
    """Scalar shape function values and physical gradients on one cell."""
    mesh = space.mesh
    if not 0 <= cell < mesh.n_cells:
        raise InvalidArgumentError(f"cell index {cell} out of range [0, {mesh.n_cells})")
    values, ref_grads = reference_basis(mesh.dimension, reference_points)
    grads = ref_grads @ mesh.inverse_jacobians[cell]
    return values, grads


class CellQuadrature:
    """Basis data at every quadrature point of every cell.

    Attributes
    ----------
    values : (n_q, n_loc)
    grads : (n_cells, n_q, n_loc, dim) physical gradients
    weights : (n_cells, n_q) quadrature weight times |det J|
    points : (n_cells, n_q, dim) physical coordinates
    """

    def __init__(self, space: FunctionSpace, rule: QuadratureRule | None = None):
        mesh = space.mesh
        self.space = space
        self.rule = rule or default_quadrature(mesh.dimension)
        self.values, ref_grads = reference_basis(mesh.dimension, self.rule.points)
        self.grads = np.einsum("qld,cde->cqle", ref_grads, mesh.inverse_jacobians)
        detj = np.abs(np.linalg.det(mesh.jacobians))
        self.weights = detj[:, None] * self.rule.weights[None, :]
        v0 = mesh.vertices[mesh.cells[:, 0]]
        self.points = v0[:, None, :] + np.einsum("cde,qe->cqd", mesh.jacobians, self.rule.points)

    @property
    def n_cells(self) -> int:
        return self.weights.shape[0]

    def scalar_values(self, coeffs: np.ndarray) -> np.ndarray:
        """Values of a scalar P2 field at quadrature points, (n_cells, n_q)."""
        local = coeffs[self.space.scalar_dofmap]
        return local @ self.values.T

    def scalar_gradients(self, coeffs: np.ndarray) -> np.ndarray:
        """Gradients of a scalar P2 field, (n_cells, n_q, dim)."""
        local = coeffs[self.space.scalar_dofmap]
        return np.einsum("cl,cqld->cqd", local, self.grads)

    def integrate(self, density: np.ndarray) -> float:
        return float(np.sum(self.weights * density))


def interpolate(space: FunctionSpace, function: Callable[[np.ndarray], np.ndarray]) -> Field:
    """Nodal interpolation of ``function(coords)``.

    ``coords`` has shape ``(n_nodes, dim)``. A scalar space expects values
    of shape ``(n_nodes,)``; a vector space ``(n_nodes, components)``.
    """
    values = np.asarray(function(space.dof_coordinates), dtype=float)
    n = space.n_scalar_dofs
    if space.components == 1:
        values = np.broadcast_to(values, (n,))
        return Field(space, np.array(values, dtype=float))
    values = np.broadcast_to(values, (n, space.components))
    return Field(space, np.ascontiguousarray(values.T).ravel())


def integrate_scalar(mesh: Mesh, quadrature: QuadratureRule, density_callback) -> float:
    """Integrate ``density_callback(points)`` over the mesh.

    ``points`` has shape ``(n_cells, n_q, dim)`` and the callback returns
    densities of shape ``(n_cells, n_q)`` (or anything broadcastable).
    """
    detj = np.abs(np.linalg.det(mesh.jacobians))
    v0 = mesh.vertices[mesh.cells[:, 0]]
    points = v0[:, None, :] + np.einsum("cde,qe->cqd", mesh.jacobians, quadrature.points)
    density = np.broadcast_to(np.asarray(density_callback(points), dtype=float), points.shape[:2])
    return float(np.sum(detj[:, None] * quadrature.weights[None, :] * density))
