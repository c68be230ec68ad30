import math

import numpy as np
import pytest

from loewner_branch import (CSBPModel, FieldSegment, FiniteMeanError, HerglotzFieldBF,
                            LevyFamily, ParameterError, conservative, dirac,
                            extinction_report, from_generating_family, mean,
                            monotonicity_class, rescale_state, survival_probability,
                            transition_laplace, variance)
from loewner_branch.analytics import homogeneous_conservativeness
from conftest import feller_field, yule_family


@pytest.fixture
def quad_model():
    return CSBPModel(feller_field(0.0, 1.0))


@pytest.fixture
def drift_quad_model():
    return CSBPModel(feller_field(1.0, 1.0))


class TestTransitionLaplace:
    def test_absorbed_at_zero(self, quad_model):
        assert transition_laplace(quad_model, 0.0, 1.0, 0.0, 1.0) == 1.0

    def test_quadratic_value(self, quad_model):
        got = transition_laplace(quad_model, 0.0, 1.0, 1.0, 1.0)
        assert got == pytest.approx(math.exp(-0.5), abs=1e-9)

    def test_identity_times(self, quad_model):
        got = transition_laplace(quad_model, 0.5, 0.5, 2.0, 3.0)
        assert got == pytest.approx(math.exp(-6.0), rel=1e-14)

    def test_monotone_in_theta_and_x(self, quad_model):
        values_theta = [transition_laplace(quad_model, 0.0, 1.0, 1.0, th)
                        for th in (0.1, 0.5, 1.0, 5.0)]
        assert all(a >= b for a, b in zip(values_theta, values_theta[1:]))
        values_x = [transition_laplace(quad_model, 0.0, 1.0, x, 1.0)
                    for x in (0.0, 0.5, 1.0, 4.0)]
        assert all(a >= b for a, b in zip(values_x, values_x[1:]))

    def test_branching_property_product_form(self, quad_model):
        x, y = 0.7, 1.9
        lhs = transition_laplace(quad_model, 0.0, 1.0, x + y, 1.0)
        rhs = (transition_laplace(quad_model, 0.0, 1.0, x, 1.0)
               * transition_laplace(quad_model, 0.0, 1.0, y, 1.0))
        assert lhs == pytest.approx(rhs, rel=1e-13)


class TestSurvivalAndConservativeness:
    def test_finite_mean_field_survives(self, quad_model):
        for t in (0.5, 1.0, 3.0):
            assert survival_probability(quad_model, 0.0, t, 1.0) == pytest.approx(1.0, abs=1e-9)

    def test_pure_killing_survival(self):
        model = CSBPModel(HerglotzFieldBF(LevyFamily((0.0,), (FieldSegment(1.0, 0.0, 0.0),))))
        got = survival_probability(model, 0.0, 1.0, 1.0)
        assert got == pytest.approx(math.exp(-1.0), abs=1e-9)

    def test_zero_start_always_survives(self, quad_model):
        assert survival_probability(quad_model, 0.0, 1.0, 0.0) == 1.0

    def test_conservative_flags(self, quad_model):
        assert conservative(quad_model, 4.0)
        killing = CSBPModel(HerglotzFieldBF(LevyFamily((0.0,), (FieldSegment(0.5, 0.0, 0.0),))))
        assert not conservative(killing, 4.0)

    def test_homogeneous_criterion(self, quad_model):
        assert homogeneous_conservativeness(quad_model.field) is True
        killing = HerglotzFieldBF(LevyFamily((0.0,), (FieldSegment(0.5, 0.0, 0.0),)))
        assert homogeneous_conservativeness(killing) is False
        two = HerglotzFieldBF(LevyFamily((0.0, 1.0), (FieldSegment(0.0, 1.0, 0.0),
                                                      FieldSegment(0.0, 2.0, 0.0))))
        assert homogeneous_conservativeness(two) is None


class TestMoments:
    def test_critical_quadratic(self, quad_model):
        assert mean(quad_model, 0.0, 1.0, 1.0) == pytest.approx(1.0, rel=1e-14)
        assert variance(quad_model, 0.0, 1.0, 1.0) == pytest.approx(2.0, rel=1e-14)

    def test_subcritical_quadratic(self, drift_quad_model):
        e1 = math.exp(-1.0)
        assert mean(drift_quad_model, 0.0, 1.0, 1.0) == pytest.approx(e1, rel=1e-14)
        assert variance(drift_quad_model, 0.0, 1.0, 1.0) == pytest.approx(
            2.0 * e1 * (1.0 - e1), rel=1e-12)

    def test_deterministic_drift_has_zero_variance(self):
        model = CSBPModel(HerglotzFieldBF(LevyFamily((0.0,), (FieldSegment(0.0, 1.0, 0.0),))))
        assert variance(model, 0.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_two_segment_mean(self):
        field = HerglotzFieldBF(LevyFamily((0.0, 1.0), (FieldSegment(0.0, 1.0, 1.0),
                                                        FieldSegment(0.0, 2.0, 1.0))))
        model = CSBPModel(field)
        assert mean(model, 0.0, 2.0, 3.0) == pytest.approx(3.0 * math.exp(-3.0), rel=1e-14)

    def test_finite_mean_gate(self):
        model = CSBPModel(HerglotzFieldBF(LevyFamily((0.0,), (FieldSegment(0.1, 1.0, 0.0),))))
        with pytest.raises(FiniteMeanError):
            mean(model, 0.0, 1.0, 1.0)
        with pytest.raises(FiniteMeanError):
            variance(model, 0.0, 1.0, 1.0)

    def test_scaling_in_x(self, quad_model):
        assert mean(quad_model, 0.0, 1.0, 3.0) == pytest.approx(3.0, rel=1e-14)
        assert variance(quad_model, 0.0, 1.0, 3.0) == pytest.approx(6.0, rel=1e-13)


class TestExtinction:
    def test_pure_quadratic_certified_extinct(self, quad_model):
        grid = (0.5, 1.0, 2.0, 4.0)
        report = extinction_report(quad_model, 0.0, 1.0, grid)
        assert report.certificate == "certified_extinct"
        assert report.certified_limit == 1.0
        for t, p in zip(report.times, report.probabilities):
            assert p == pytest.approx(math.exp(-1.0 / t), abs=1e-6)
        assert np.all(np.diff(report.probabilities) >= -1e-12)
        assert report.bound_margin is not None
        assert report.bound_margin >= -1e-5

    def test_pure_birth_certified_never(self):
        model = CSBPModel(from_generating_family(yule_family()))
        report = extinction_report(model, 0.0, 1.0, (1.0, 2.0))
        assert report.certificate == "certified_never"
        assert report.certified_limit == 0.0
        assert report.probabilities == (0.0, 0.0)

    def test_zero_start_all_one(self, quad_model):
        report = extinction_report(quad_model, 0.0, 0.0, (1.0, 2.0))
        assert report.probabilities == (1.0, 1.0)

    def test_mixed_field_inconclusive(self):
        # diffusion present but vanishing on the tail: neither route certifies
        field = HerglotzFieldBF(LevyFamily((0.0, 1.0), (FieldSegment(0.0, 0.0, 1.0),
                                                        FieldSegment(0.0, 1.0, 0.0))))
        report = extinction_report(CSBPModel(field), 0.0, 1.0, (0.5, 1.0, 3.0))
        assert report.certificate == "inconclusive"

    def test_grid_validation(self, quad_model):
        with pytest.raises(ParameterError):
            extinction_report(quad_model, 1.0, 1.0, (0.5, 2.0))
        with pytest.raises(ParameterError):
            extinction_report(quad_model, 0.0, 1.0, (2.0, 1.0))


class TestMonotonicityClass:
    def test_pure_birth_is_non_decreasing(self):
        model = CSBPModel(from_generating_family(yule_family()))
        report = monotonicity_class(model)
        assert report.non_decreasing
        assert report.ess_inf_ratios is not None
        assert all(r == pytest.approx(1.0, rel=1e-14) for r in report.ess_inf_ratios)

    def test_quadratic_is_not(self, quad_model):
        report = monotonicity_class(quad_model)
        assert not report.non_decreasing
        assert report.ess_inf_ratios is None    # diffusion excludes the plain-kernel form

    def test_identity_pair_sits_at_equality(self, quad_model):
        report = monotonicity_class(quad_model, pairs=((0.5, 0.5),))
        assert report.non_decreasing
        assert report.min_margin == pytest.approx(0.0, abs=1e-15)


class TestRescale:
    def test_unit_scale_is_identity(self, quad_model):
        view = rescale_state(quad_model, [1.0])
        assert view.laplace_exponent(0.0, 1.0, 1.0) == pytest.approx(
            quad_model.laplace_exponent(0.0, 1.0, 1.0), rel=1e-14)

    def test_doubling_scale(self, quad_model):
        view = rescale_state(quad_model, [2.0])
        # v_hat(1) = v(2)/2 = (2/3)/2
        assert view.laplace_exponent(0.0, 1.0, 1.0) == pytest.approx(1.0 / 3.0, abs=1e-9)
        assert view.transition_laplace(0.0, 1.0, 1.0, 1.0) == pytest.approx(
            math.exp(-1.0 / 3.0), abs=1e-9)

    def test_equal_times_identity(self, quad_model):
        view = rescale_state(quad_model, [2.0])
        assert view.laplace_exponent(0.7, 0.7, 3.0) == pytest.approx(3.0, rel=1e-14)

    def test_scale_validation(self, quad_model):
        with pytest.raises(ParameterError):
            rescale_state(quad_model, [0.0])
        with pytest.raises(ParameterError):
            rescale_state(quad_model, [1.0, 2.0])
