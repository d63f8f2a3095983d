"""Closed-form molar free energies with first and second derivatives.

Every model exposes ``evaluate(x) -> (f, df, d2f)`` on numpy arrays, a
gradient-energy coefficient ``kappa`` and the bulk ``curvature`` used to
scale the dissipation term. Energies are in J/mol, ``kappa`` in
J mm^2/mol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "TwoPhaseParams",
    "TwoPhaseEnergy",
    "SingleQuadraticEnergy",
    "VacancyEnergyParams",
    "VacancyEnergy",
    "REFERENCE_PARAMS",
    "two_phase_energy",
    "vacancy_energy",
    "single_quadratic_energy",
    "double_well",
    "convex_hull",
    "verify_derivatives",
]


@dataclass(frozen=True)
class TwoPhaseParams:
    """Two quadratic phases joined by their common tangent.

    ``x_alpha < x_beta`` are the equilibrium mole fractions, ``f_alpha``
    and ``f_beta`` the phase reference energies, ``k`` the parabola
    curvature and ``delta_f_int`` the height of the interface bump
    added between the equilibria (zero gives the convex hull).
    """

    x_alpha: float = 0.25
    x_beta: float = 0.75
    f_alpha: float = 0.01
    f_beta: float = 0.02
    k: float = 2.0
    delta_f_int: float = 1.0 / 120.0
    kappa: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.x_alpha < self.x_beta < 1.0:
            raise InvalidArgumentError("need 0 < x_alpha < x_beta < 1")
        if not self.k > 0.0:
            raise InvalidArgumentError("curvature k must be > 0")
        if not self.delta_f_int >= 0.0:
            raise InvalidArgumentError("delta_f_int must be >= 0")
        if not self.kappa >= 0.0:
            raise InvalidArgumentError("kappa must be >= 0")

    @property
    def tangent_slope(self) -> float:
        return (self.f_beta - self.f_alpha) / (self.x_beta - self.x_alpha)


REFERENCE_PARAMS = TwoPhaseParams()


def two_phase_energy(params: TwoPhaseParams, x):
    """Energy of the parametric two-phase model and its derivatives.

    Outside ``[x_alpha, x_beta]`` the common tangent is lifted by
    ``k/2 (x - x_eq)^2``; inside, a smoothstep bump
    ``4 dF s (1 - s)`` is added, which vanishes with zero slope at both
    equilibria. At ``x == x_alpha`` the left (quadratic) branch is used,
    at ``x == x_beta`` the middle branch.
    """
    x = np.asarray(x, dtype=float)
    xa, xb, k = params.x_alpha, params.x_beta, params.k
    slope = params.tangent_slope
    width = xb - xa

    f = params.f_alpha + slope * (x - xa)
    df = np.full_like(x, slope)
    d2f = np.zeros_like(x)

    left = x <= xa
    right = x > xb
    mid = ~(left | right)

    dl = x - xa
    f = np.where(left, f + 0.5 * k * dl**2, f)
    df = np.where(left, df + k * dl, df)
    d2f = np.where(left, k, d2f)

    dr = x - xb
    f = np.where(right, f + 0.5 * k * dr**2, f)
    df = np.where(right, df + k * dr, df)
    d2f = np.where(right, k, d2f)

    if params.delta_f_int > 0.0:
        u = np.clip(dl / width, 0.0, 1.0)
        s = u * u * (3.0 - 2.0 * u)
        ds = 6.0 * u * (1.0 - u) / width
        d2s = (6.0 - 12.0 * u) / width**2
        a = 4.0 * params.delta_f_int
        bump = a * s * (1.0 - s)
        dbump = a * (1.0 - 2.0 * s) * ds
        d2bump = a * ((1.0 - 2.0 * s) * d2s - 2.0 * ds * ds)
        f = np.where(mid, f + bump, f)
        df = np.where(mid, df + dbump, df)
        d2f = np.where(mid, d2f + d2bump, d2f)
    return f, df, d2f


class TwoPhaseEnergy:
    """Double-well (``delta_f_int > 0``) or convex-hull (``delta_f_int == 0``) energy."""

    def __init__(self, params: TwoPhaseParams = REFERENCE_PARAMS):
        self.params = params

    @property
    def kind(self) -> str:
        return "double-well" if self.params.delta_f_int > 0 else "convex-hull"

    @property
    def kappa(self) -> float:
        return self.params.kappa

    @property
    def curvature(self) -> float:
        return self.params.k

    @property
    def equilibria(self) -> tuple[float, float]:
        return self.params.x_alpha, self.params.x_beta

    def evaluate(self, x):
        return two_phase_energy(self.params, x)

    def __repr__(self):
        return f"TwoPhaseEnergy({self.params!r})"


def double_well(kappa: float = 0.0, delta_f_int: float = 1.0 / 120.0) -> TwoPhaseEnergy:
    """The double-well energy of the reference two-phase system."""
    return TwoPhaseEnergy(TwoPhaseParams(delta_f_int=delta_f_int, kappa=kappa))


def convex_hull(kappa: float = 0.0) -> TwoPhaseEnergy:
    """The common-tangent convexification of :func:`double_well`."""
    return TwoPhaseEnergy(TwoPhaseParams(delta_f_int=0.0, kappa=kappa))


def single_quadratic_energy(k: float, x_eq: float, x):
    """``k/2 (x - x_eq)^2`` with derivatives."""
    x = np.asarray(x, dtype=float)
    d = x - x_eq
    return 0.5 * k * d * d, k * d, np.full_like(x, float(k))


class SingleQuadraticEnergy:
    """One parabolic phase; the diffusion equation in disguise."""

    kind = "single-quadratic"

    def __init__(self, k: float = 2.0, x_eq: float = 0.5, kappa: float = 0.0):
        if not k > 0:
            raise InvalidArgumentError("curvature k must be > 0")
        if not kappa >= 0:
            raise InvalidArgumentError("kappa must be >= 0")
        self.k = float(k)
        self.x_eq = float(x_eq)
        self._kappa = float(kappa)

    @property
    def kappa(self) -> float:
        return self._kappa

    @property
    def curvature(self) -> float:
        return self.k

    def evaluate(self, x):
        return single_quadratic_energy(self.k, self.x_eq, x)

    def __repr__(self):
        return f"SingleQuadraticEnergy(k={self.k}, x_eq={self.x_eq}, kappa={self._kappa})"


@dataclass(frozen=True)
class VacancyEnergyParams:
    k0: float
    x0_eq: float = 1e-3

    def __post_init__(self):
        if not self.k0 > 0:
            raise InvalidArgumentError("vacancy curvature k0 must be > 0")
        if not 0.0 < self.x0_eq < 1.0:
            raise InvalidArgumentError("x0_eq must lie in (0, 1)")


def vacancy_energy(params: VacancyEnergyParams, x0):
    """Quadratic penalty of vacancy site fractions away from equilibrium."""
    return single_quadratic_energy(params.k0, params.x0_eq, x0)


class VacancyEnergy:
    kind = "vacancy"

    def __init__(self, params: VacancyEnergyParams):
        self.params = params

    kappa = 0.0

    @property
    def curvature(self) -> float:
        return self.params.k0

    def evaluate(self, x0):
        return vacancy_energy(self.params, x0)


def verify_derivatives(model, samples, step: float = 1e-6) -> float:
    """Largest mismatch between analytic and central-difference derivatives.

    The error of each derivative is ``|fd - exact| / max(1, |exact|)``,
    i.e. absolute for small values and relative for large ones. Samples
    must stay away from kinks by more than ``step``.
    """
    x = np.asarray(samples, dtype=float)
    f_p, df_p, _ = model.evaluate(x + step)
    f_m, df_m, _ = model.evaluate(x - step)
    _, df, d2f = model.evaluate(x)
    fd1 = (f_p - f_m) / (2.0 * step)
    fd2 = (df_p - df_m) / (2.0 * step)
    e1 = np.abs(fd1 - df) / np.maximum(1.0, np.abs(df))
    e2 = np.abs(fd2 - d2f) / np.maximum(1.0, np.abs(d2f))
    return float(max(e1.max(initial=0.0), e2.max(initial=0.0)))
