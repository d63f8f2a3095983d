"""Chemical potentials, affinities, entropy production and Onsager scaling.

Compositions are arrays of the ``n - 1`` independent mole (or site)
fractions; the dependent fraction is ``1 - sum(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import single_quadratic_energy, two_phase_energy
from .errors import InvalidArgumentError, SingularConfigurationError

__all__ = [
    "MolarEnergy",
    "as_molar_energy",
    "TernaryVacancyMolarEnergy",
    "chemical_potentials",
    "affinity",
    "entropy_production_density",
    "flux_form_entropy_production",
    "onsager_from_diffusion",
    "gibbs_duhem_residual",
    "affinity_variable_volume",
]


@dataclass
class MolarEnergy:
    """Molar free energy of ``n - 1`` independent fractions.

    ``value(x)`` returns ``f_m`` and ``gradient(x)`` the partial derivatives
    with respect to each independent fraction.
    """

    value: callable
    gradient: callable
    n_independent: int


def as_molar_energy(model) -> MolarEnergy:
    """Wrap a binary energy model (``evaluate``) or pass a MolarEnergy through."""
    if isinstance(model, MolarEnergy):
        return model
    if hasattr(model, "evaluate"):
        return MolarEnergy(
            value=lambda x: float(model.evaluate(np.asarray(x, dtype=float)[0])[0]),
            gradient=lambda x: np.array([float(model.evaluate(np.asarray(x, dtype=float)[0])[1])]),
            n_independent=1,
        )
    raise InvalidArgumentError(f"cannot interpret {model!r} as a molar energy")


class TernaryVacancyMolarEnergy(MolarEnergy):
    """Convex hull in ``x1`` plus a quadratic vacancy term in ``x0``.

    Composition order is ``(x0, x1)``; the host component is ``x2``.
    """

    def __init__(self, params, k0: float, x0_eq: float):
        self.params = params
        self.k0 = k0
        self.x0_eq = x0_eq
        super().__init__(self._value, self._gradient, 2)

    def _value(self, x):
        x0, x1 = x
        return float(two_phase_energy(self.params, x1)[0] + single_quadratic_energy(self.k0, self.x0_eq, x0)[0])

    def _gradient(self, x):
        x0, x1 = x
        return np.array(
            [
                float(single_quadratic_energy(self.k0, self.x0_eq, x0)[1]),
                float(two_phase_energy(self.params, x1)[1]),
            ]
        )


def _check_composition(x, strict: bool = False) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xn = 1.0 - x.sum()
    if strict:
        if np.any(x <= 0.0) or xn <= 0.0:
            raise InvalidArgumentError("composition must lie in the interior of the simplex")
    elif np.any(x < 0.0) or np.any(x > 1.0) or xn < -1e-14:
        raise InvalidArgumentError("fractions must lie in [0, 1] and sum to at most 1")
    return x


def chemical_potentials(model, composition) -> np.ndarray:
    """All ``n`` chemical potentials from the molar free energy.

    ``mu_i = f + sum_k (delta_ik - x_k) df/dx_k`` for ``i < n`` and
    ``mu_n = f - sum_k x_k df/dx_k``.
    """
    energy = as_molar_energy(model)
    x = _check_composition(composition)
    f = energy.value(x)
    g = np.asarray(energy.gradient(x), dtype=float)
    base = f - float(np.dot(x, g))
    return np.append(base + g, base)


def affinity(model, composition) -> np.ndarray:
    """``mu_i - mu_n`` for the independent components (equals ``df/dx_i``)."""
    energy = as_molar_energy(model)
    x = _check_composition(composition)
    return np.asarray(energy.gradient(x), dtype=float)


def _check_spd(matrix) -> np.ndarray:
    L = np.atleast_2d(np.asarray(matrix, dtype=float))
    if L.shape[0] != L.shape[1]:
        raise InvalidArgumentError("Onsager matrix must be square")
    if not np.allclose(L, L.T, rtol=1e-12, atol=0.0):
        raise InvalidArgumentError("Onsager matrix must be symmetric")
    if np.linalg.eigvalsh(L).min() <= 0.0:
        raise InvalidArgumentError("Onsager matrix must be positive definite")
    return L


def entropy_production_density(affinity_gradients, onsager, temperature: float = 1.0) -> np.ndarray:
    """Quadratic form ``1/T^2 sum_ik L_ik grad(mu_i) . grad(mu_k)``.

    ``affinity_gradients`` has shape ``(n - 1, ..., dim)``; a leading
    component axis and a trailing spatial axis, with any point axes in
    between. Returns one density per point.
    """
    L = _check_spd(onsager)
    if not temperature > 0:
        raise InvalidArgumentError("temperature must be positive")
    g = np.asarray(affinity_gradients, dtype=float)
    if g.shape[0] != L.shape[0]:
        raise InvalidArgumentError("one affinity gradient per independent component required")
    return np.einsum("ik,i...d,k...d->...", L, g, g) / temperature**2


def flux_form_entropy_production(fluxes, affinity_gradients, temperature: float = 1.0) -> np.ndarray:
    """``-1/T sum_k j_k . grad(mu_k)``; equals the quadratic form when fluxes obey the linear law."""
    j = np.asarray(fluxes, dtype=float)
    g = np.asarray(affinity_gradients, dtype=float)
    return -np.einsum("k...d,k...d->...", j, g) / temperature


def onsager_from_diffusion(diffusivity: float, temperature: float, curvature: float, molar_volume: float) -> float:
    """Onsager coefficient reproducing Fick's law in a quadratic bulk phase.

    ``L = D T / (k Omega)``.
    """
    for name, v in (
        ("diffusivity", diffusivity),
        ("temperature", temperature),
        ("curvature", curvature),
        ("molar_volume", molar_volume),
    ):
        if not v > 0:
            raise InvalidArgumentError(f"{name} must be positive")
    return diffusivity * temperature / (curvature * molar_volume)


def gibbs_duhem_residual(model, composition, direction, step: float = 1e-6) -> float:
    """``sum_j x_j d(mu_j)`` along ``direction`` by central differences.

    The direction perturbs the independent fractions; the dependent one
    follows from closure. Identically zero for any molar energy, so the
    returned value measures truncation and rounding error only.
    """
    x = _check_composition(composition, strict=True)
    d = np.atleast_1d(np.asarray(direction, dtype=float))
    if d.shape != x.shape:
        raise InvalidArgumentError("direction must have one entry per independent fraction")
    mu_p = chemical_potentials(model, x + step * d)
    mu_m = chemical_potentials(model, x - step * d)
    dmu = (mu_p - mu_m) / (2.0 * step)
    x_full = np.append(x, 1.0 - x.sum())
    return float(np.dot(x_full, dmu))


def affinity_variable_volume(f: float, df: float, omega: float, domega: float, x: float) -> float:
    """Affinity when the molar volume depends on composition.

    ``(f' Omega - f Omega') / (Omega - x Omega')``; reduces to ``f'`` for
    constant volume.
    """
    denom = omega - x * domega
    if abs(denom) < 1e-14 * abs(omega):
        raise SingularConfigurationError(
            f"Omega - x Omega' = {denom:g} vanishes (Omega={omega:g}, Omega'={domega:g}, x={x:g})"
        )
    return (df * omega - f * domega) / denom
