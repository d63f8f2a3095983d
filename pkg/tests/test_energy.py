import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import away_from, double_well_verbatim, hull_verbatim
from varphase.energy import (
    REFERENCE_PARAMS,
    SingleQuadraticEnergy,
    TwoPhaseEnergy,
    TwoPhaseParams,
    VacancyEnergy,
    VacancyEnergyParams,
    convex_hull,
    double_well,
    single_quadratic_energy,
    two_phase_energy,
    vacancy_energy,
    verify_derivatives,
)
from varphase.errors import InvalidArgumentError

HULL = convex_hull()
WELL = double_well()


class TestReferenceInstance:
    def test_hull_values(self):
        f, df, d2f = HULL.evaluate(np.array([0.25, 0.5, 0.0]))
        assert f[0] == pytest.approx(0.01, abs=1e-15)
        assert (f[1], df[1], d2f[1]) == pytest.approx((0.015, 0.02, 0.0), abs=1e-15)
        assert f[2] == pytest.approx(0.0675, abs=1e-15)

    def test_double_well_midpoint(self):
        f = WELL.evaluate(0.5)[0]
        assert float(f) == pytest.approx(0.015 + 1 / 120, abs=1e-15)
        assert float(f) == pytest.approx(double_well_verbatim(0.5), abs=1e-15)

    def test_matches_verbatim_hull(self):
        x = np.linspace(0.0, 1.0, 1000)
        np.testing.assert_allclose(HULL.evaluate(x)[0], hull_verbatim(x), atol=1e-12, rtol=0)

    def test_matches_verbatim_double_well(self):
        x = away_from(np.linspace(0.0, 1.0, 1000), (0.25, 0.75), 1e-9)
        assert x.size >= 990
        np.testing.assert_allclose(WELL.evaluate(x)[0], double_well_verbatim(x), atol=1e-12, rtol=0)

    def test_default_params_are_the_reference_instance(self):
        p = REFERENCE_PARAMS
        assert (p.x_alpha, p.f_alpha, p.x_beta, p.f_beta, p.k, p.delta_f_int) == (0.25, 0.01, 0.75, 0.02, 2.0, 1 / 120)


class TestTwoPhase:
    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.2501, 0.7499))
    def test_zero_bump_is_hull(self, x):
        p = TwoPhaseParams(delta_f_int=0.0)
        assert two_phase_energy(p, x)[0] == pytest.approx(float(HULL.evaluate(x)[0]), abs=1e-16)

    def test_bump_height(self):
        x = np.linspace(0, 1, 200001)
        gap = WELL.evaluate(x)[0] - HULL.evaluate(x)[0]
        assert gap.max() == pytest.approx(1 / 120, abs=1e-10)
        assert x[np.argmax(gap)] == pytest.approx(0.5, abs=1e-5)

    def test_common_tangent_limits(self):
        eps = 1e-12
        slope = REFERENCE_PARAMS.tangent_slope
        assert float(HULL.evaluate(0.25 - eps)[1]) == pytest.approx(slope, abs=1e-10)
        assert float(HULL.evaluate(0.75 + eps)[1]) == pytest.approx(slope, abs=1e-10)
        assert slope == pytest.approx(0.02)

    def test_hull_is_convex(self):
        x = np.linspace(-1e-8, 1 + 1e-8, 5001)
        _, df, d2f = HULL.evaluate(x)
        assert d2f.min() >= 0
        assert np.all(np.diff(df) >= -1e-15)

    def test_kink_uses_left_branch_curvature(self):
        assert float(HULL.evaluate(0.25)[2]) == 2.0
        assert float(HULL.evaluate(0.75)[2]) == 0.0

    def test_continuity_at_kinks(self):
        for model in (HULL, WELL):
            for xk in (0.25, 0.75):
                lo, hi = model.evaluate(np.array([xk - 1e-12, xk + 1e-12]))[0]
                assert abs(lo - hi) < 1e-12

    def test_derivatives_against_finite_differences(self):
        x = away_from(np.linspace(0.005, 0.995, 100), (0.25, 0.75), 1e-4)
        assert verify_derivatives(WELL, x) <= 1e-6
        assert verify_derivatives(HULL, x) <= 1e-6

    def test_hull_slope_check(self):
        assert verify_derivatives(HULL, [0.5]) <= 1e-8

    @pytest.mark.parametrize(
        "kwargs",
        [dict(x_alpha=0.8, x_beta=0.7), dict(k=0.0), dict(delta_f_int=-1.0), dict(kappa=-1.0), dict(x_alpha=0.0)],
    )
    def test_invalid_params(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            TwoPhaseParams(**kwargs)

    def test_kinds(self):
        assert HULL.kind == "convex-hull" and WELL.kind == "double-well"
        assert double_well(kappa=5.0).kappa == 5.0
        assert TwoPhaseEnergy().equilibria == (0.25, 0.75)

    def test_outside_unit_interval_evaluates_closed_form(self):
        f, df, d2f = HULL.evaluate(np.array([-1e-9, 1 + 1e-9]))
        assert np.all(np.isfinite(f)) and np.all(d2f == 2.0)


class TestQuadratics:
    def test_single_quadratic_values(self):
        assert single_quadratic_energy(2.0, 0.5, 0.6) == pytest.approx((0.01, 0.2, 2.0))
        assert single_quadratic_energy(2.0, 0.5, 0.5) == (0.0, 0.0, 2.0)

    def test_single_quadratic_derivatives_exact(self):
        model = SingleQuadraticEnergy(3.0, 0.4)
        assert verify_derivatives(model, np.linspace(0, 1, 37)) <= 1e-9
        assert np.all(model.evaluate(np.linspace(-1, 2, 9))[2] == 3.0)

    def test_single_quadratic_rejects_bad_curvature(self):
        with pytest.raises(InvalidArgumentError):
            SingleQuadraticEnergy(0.0)

    def test_vacancy_minimum(self):
        p = VacancyEnergyParams(k0=5.0, x0_eq=1e-3)
        assert vacancy_energy(p, 1e-3) == (0.0, 0.0, 5.0)
        assert float(vacancy_energy(VacancyEnergyParams(2.0, 1e-3), 2e-3)[0]) == pytest.approx(1e-6, rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-6, 1e-3))
    def test_vacancy_derivative_is_odd(self, d):
        m = VacancyEnergy(VacancyEnergyParams(7.0, 1e-3))
        assert float(m.evaluate(1e-3 + d)[1]) == pytest.approx(-float(m.evaluate(1e-3 - d)[1]), rel=1e-9)

    @pytest.mark.parametrize("kwargs", [dict(k0=0.0), dict(k0=1.0, x0_eq=0.0), dict(k0=1.0, x0_eq=1.0)])
    def test_vacancy_invalid(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            VacancyEnergyParams(**kwargs)
