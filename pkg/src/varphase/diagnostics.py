"""Per-step diagnostics and 1-D profile measurements."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, UndefinedWidthError
from .mesh_fem import Field, FunctionSpace

__all__ = [
    "DiagnosticsRecord",
    "interface_width",
    "profile_crossings",
    "phase_plateaus",
    "phase_fraction",
    "make_diagnose",
]


@dataclass
class DiagnosticsRecord:
    """Scalar summary of one accepted state.

    ``mass`` maps each composition field to its integral, ``ranges`` to
    its nodal (min, max). ``interface_width`` is ``None`` in 2-D or when
    the profile does not span both thresholds.
    """

    t: float
    mass: dict[str, float]
    free_energy: float
    dissipation: float
    min_xi: float
    interface_width: float | None
    newton_iters: int
    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        values = list(self.mass.values()) + [self.free_energy]
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError(f"non-finite mass or energy at t={self.t:g}")

    @property
    def mass_total(self) -> float:
        """Integral of the solute field (``x`` or ``x1``)."""
        return self.mass["x1"] if "x1" in self.mass else self.mass["x"]


def _cell_quadratics(space: FunctionSpace, coeffs: np.ndarray):
    if space.mesh.dimension != 1:
        raise InvalidArgumentError("profile measurements need a 1-D space")
    coeffs = np.asarray(coeffs, dtype=float)
    dm = space.scalar_dofmap
    s0 = space.mesh.vertices[space.mesh.cells[:, 0], 0]
    s1 = space.mesh.vertices[space.mesh.cells[:, 1], 0]
    order = np.argsort(np.minimum(s0, s1))
    return s0[order], s1[order], coeffs[dm[order, 0]], coeffs[dm[order, 1]], coeffs[dm[order, 2]]


def profile_crossings(space: FunctionSpace, coeffs, level: float) -> np.ndarray:
    """Sorted positions where the P2 interpolant equals ``level``."""
    s0, s1, v0, v1, vm = _cell_quadratics(space, coeffs)
    # v(t) = a t^2 + b t + c on t in [0, 1] from s0 to s1
    a = 2.0 * v0 + 2.0 * v1 - 4.0 * vm
    b = -3.0 * v0 - v1 + 4.0 * vm
    c = v0 - level
    hits = []
    for i in range(s0.size):
        roots = np.roots([a[i], b[i], c[i]]) if abs(a[i]) > 1e-14 * (abs(b[i]) + abs(c[i]) + 1e-300) else (
            np.array([-c[i] / b[i]]) if b[i] != 0.0 else np.array([])
        )
        for r in np.atleast_1d(roots):
            if abs(r.imag) < 1e-12 and -1e-12 <= r.real <= 1.0 + 1e-12:
                t = min(max(r.real, 0.0), 1.0)
                hits.append(s0[i] + t * (s1[i] - s0[i]))
    return np.unique(np.round(np.asarray(hits, dtype=float), 14))


def _as_space_coeffs(field_1d, coeffs=None):
    if isinstance(field_1d, Field):
        return field_1d.space, field_1d.coeffs
    if coeffs is None:
        raise InvalidArgumentError("pass a Field or a (space, coeffs) pair")
    return field_1d, coeffs


def interface_width(field_1d, lo: float = 0.30, hi: float = 0.70, coeffs=None) -> float:
    """Distance between the first ``lo`` crossing and the last ``hi`` crossing.

    A profile that decreases in the large is measured on its mirror
    image. Raises :class:`UndefinedWidthError` when a threshold is never
    reached.
    """
    if not lo < hi:
        raise InvalidArgumentError("need lo < hi")
    space, c = _as_space_coeffs(field_1d, coeffs)
    s0, s1, v0, v1, _ = _cell_quadratics(space, c)
    lo_hits = profile_crossings(space, c, lo)
    hi_hits = profile_crossings(space, c, hi)
    if lo_hits.size == 0 or hi_hits.size == 0:
        raise UndefinedWidthError(
            f"profile in [{np.min(c):.6g}, {np.max(c):.6g}] does not cross both {lo} and {hi}"
        )
    if v1[-1] >= v0[0]:
        return float(hi_hits[-1] - lo_hits[0])
    return float(lo_hits[-1] - hi_hits[0])


def _segments(space: FunctionSpace, coeffs, n_sub: int = 8):
    """Sub-sampled values and lengths along the profile."""
    s0, s1, v0, v1, vm = _cell_quadratics(space, coeffs)
    t = (np.arange(n_sub) + 0.5) / n_sub
    vals = np.outer(v0, (1 - t) * (1 - 2 * t)) + np.outer(v1, t * (2 * t - 1)) + np.outer(vm, 4 * t * (1 - t))
    lengths = np.repeat(np.abs(s1 - s0)[:, None] / n_sub, n_sub, axis=1)
    return vals.ravel(), lengths.ravel()


def phase_plateaus(field_1d, split: float = 0.5, band: tuple[float, float] = (0.30, 0.70), coeffs=None):
    """Length-averaged composition of each phase region away from the interface.

    Points with values inside ``band`` belong to the interface and are
    excluded; the remaining points are split at ``split``. Returns
    ``(low, high)`` with ``nan`` for an empty region.
    """
    space, c = _as_space_coeffs(field_1d, coeffs)
    vals, w = _segments(space, c)
    low = vals < band[0]
    high = vals > band[1]
    mean = lambda m: float(np.sum(vals[m] * w[m]) / np.sum(w[m])) if m.any() else float("nan")
    return mean(low), mean(high)


def phase_fraction(field_1d, split: float = 0.5, coeffs=None) -> float:
    """Length fraction of the profile above ``split`` (the high phase)."""
    space, c = _as_space_coeffs(field_1d, coeffs)
    vals, w = _segments(space, c)
    return float(np.sum(w[vals > split]) / np.sum(w))


def make_diagnose(system, lo: float = 0.30, hi: float = 0.70):
    """Build a ``diagnose(state, previous, t, iterations)`` callback for ``system``."""
    solute = "x1" if "x1" in system.layout.offsets else "x"
    one_d = system.mesh.dimension == 1

    def diagnose(U, previous, t, iterations):
        width = None
        if one_d:
            try:
                width = interface_width(system.scalar_space, lo, hi, coeffs=U[system.layout.slice(solute)])
            except UndefinedWidthError:
                width = None
        xi = system.entropy_production(U, previous)
        return DiagnosticsRecord(
            t=float(t),
            mass=system.mass(U),
            free_energy=system.free_energy(U),
            dissipation=system.dissipation(U, previous),
            min_xi=float(xi.min()),
            interface_width=width,
            newton_iters=int(iterations),
            ranges=system.field_ranges(U),
        )

    return diagnose
