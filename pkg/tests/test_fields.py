import math

import numpy as np
import pytest

from loewner_branch import (BRFPInfFamily, BRFPInfSegment, DiscretizedMeasure, DomainError,
                            DW0Family, DW0Segment, FieldSegment, GeneratingFamily,
                            HerglotzFieldBF, LevyFamily, NotEmbeddableError, ParameterError,
                            PGFSegment, dirac, empty_measure, from_brfp_inf, from_dw0,
                            from_generating_family)
from conftest import random_step_field


def single(segment):
    return HerglotzFieldBF(LevyFamily((0.0,), (segment,)))


class TestPhiEval:
    def test_polynomial_field(self):
        field = single(FieldSegment(0.0, 1.0, 1.0))
        assert field.phi_scalar(1.0, 0.0) == pytest.approx(2.0, abs=1e-15)

    def test_uncompensated_atom(self):
        field = single(FieldSegment(0.0, 0.0, 0.0, dirac(2.0)))
        assert field.phi_scalar(1.0, 0.0).real == pytest.approx(math.exp(-2.0) - 1.0, abs=1e-15)
        assert field.phi_scalar(1.0, 0.0).real == pytest.approx(-0.8646647, abs=1e-7)

    def test_compensated_atom(self):
        field = single(FieldSegment(0.0, 0.0, 0.0, dirac(0.5)))
        expected = math.exp(-0.5) - 1.0 + 0.5
        assert field.phi_scalar(1.0, 0.0).real == pytest.approx(expected, abs=1e-15)
        assert field.phi_scalar(1.0, 0.0).real == pytest.approx(0.1065307, abs=1e-7)

    def test_domain(self):
        field = single(FieldSegment(0.0, 1.0, 0.0))
        with pytest.raises(DomainError):
            field.phi(np.array([-1.0 + 0j]), 0.0)

    def test_segment_lookup_with_tail(self):
        field = HerglotzFieldBF(LevyFamily((0.0, 1.0), (FieldSegment(0.0, 1.0, 0.0),
                                                        FieldSegment(0.0, 2.0, 0.0))))
        assert field.phi_scalar(1.0, 0.5).real == pytest.approx(1.0)
        assert field.phi_scalar(1.0, 1.0).real == pytest.approx(2.0)
        assert field.phi_scalar(1.0, 99.0).real == pytest.approx(2.0)  # repeat last


class TestBoundaryData:
    def test_quadratic(self):
        assert single(FieldSegment(0.0, 1.0, 1.0)).boundary_data(0.0) == (0.0, 1.0, 2.0)

    def test_pure_killing(self):
        assert single(FieldSegment(0.3, 0.0, 0.0)).boundary_data(0.0) == (-0.3, 0.0, 0.0)

    def test_atom_beyond_one(self):
        phi0, dphi0, d2inf = single(FieldSegment(0.0, 0.0, 0.0, dirac(2.0))).boundary_data(0.0)
        assert phi0 == 0.0
        assert dphi0 == pytest.approx(-2.0)
        assert d2inf == 0.0

    def test_second_derivative_at_infinity_matches_finite_difference(self):
        seg = FieldSegment(0.1, 0.5, 0.7, dirac(2.0, 0.4))
        field = single(seg)
        theta = 1e6
        h = 1e3
        pts = field.phi(np.array([theta - h, theta, theta + h], dtype=complex), 0.0).real
        fd = (pts[2] - 2 * pts[1] + pts[0]) / h ** 2
        assert fd == pytest.approx(field.boundary_data(0.0)[2], rel=1e-6)


class TestConversions:
    def test_dw0_pure_quadratic(self):
        field = from_dw0(DW0Family((0.0,), (DW0Segment(0.0, 1.0, empty_measure()),)))
        seg = field.segments[0]
        assert (seg.kill, seg.drift, seg.diffusion) == (0.0, 0.0, 1.0)
        assert seg.jumps.is_empty

    def test_brfp_atom_at_one_needs_no_compensator(self):
        field = from_brfp_inf(BRFPInfFamily((0.0,), (BRFPInfSegment(0.0, 0.0, dirac(1.0)),)))
        seg = field.segments[0]
        assert (seg.kill, seg.drift, seg.diffusion) == (0.0, 0.0, 0.0)
        assert field.phi_scalar(1.0, 0.0).real == pytest.approx(math.exp(-1.0) - 1.0, abs=1e-14)

    def test_brfp_atom_below_one_shifts_drift(self):
        # plain kernel e^{-0.5 z} - 1 needs canonical drift -0.5 to offset the
        # compensator; phi values of both forms agree identically
        field = from_brfp_inf(BRFPInfFamily((0.0,), (BRFPInfSegment(0.0, 0.0, dirac(0.5)),)))
        assert field.segments[0].drift == pytest.approx(-0.5)
        assert field.phi_scalar(1.0, 0.0).real == pytest.approx(math.exp(-0.5) - 1.0, abs=1e-14)

    def test_dw0_round_trip_probes(self, rng):
        jumps = DiscretizedMeasure(atoms=((0.3, 0.5), (1.5, 0.2)))
        family = DW0Family((0.0, 0.8), (DW0Segment(0.4, 0.6, jumps),
                                        DW0Segment(0.0, 1.2, dirac(2.5, 0.3))))
        field = from_dw0(family)
        for _ in range(50):
            t = rng.uniform(0.0, 2.0)
            zeta = complex(rng.uniform(0.05, 30.0), rng.uniform(-10.0, 10.0))
            a = field.phi_scalar(zeta, t)
            b = complex(np.asarray(family.segment_at(t).phi(np.array([zeta])))[0])
            assert abs(a - b) <= 1e-12 * max(1.0, abs(a))

    def test_brfp_round_trip_probes(self, rng):
        family = BRFPInfFamily((0.0, 1.0), (BRFPInfSegment(0.2, -0.5, dirac(0.7, 0.6)),
                                            BRFPInfSegment(0.0, 0.3, dirac(1.0, 0.5))))
        field = from_brfp_inf(family)
        for _ in range(50):
            t = rng.uniform(0.0, 2.0)
            zeta = complex(rng.uniform(0.05, 30.0), rng.uniform(-10.0, 10.0))
            a = field.phi_scalar(zeta, t)
            b = complex(np.asarray(family.segment_at(t).phi(np.array([zeta])))[0])
            assert abs(a - b) <= 1e-12 * max(1.0, abs(a))

    def test_dw0_fixes_origin_exactly(self):
        family = DW0Family((0.0,), (DW0Segment(0.5, 0.3, dirac(0.4, 0.2)),))
        field = from_dw0(family)
        assert field.boundary_data(0.0)[0] == 0.0

    def test_special_form_recovery(self):
        # a canonical family with no diffusion is re-expressible at infinity,
        # with d = phi'(oo) = drift + head moment
        field = single(FieldSegment(0.1, 0.7, 0.0, dirac(0.5, 0.4)))
        brfp = field.as_brfp_inf()
        assert brfp is not None
        assert brfp.segments[0].linear == pytest.approx(0.7 + 0.2)
        roundtrip = brfp.segments[0].to_field_segment()
        assert roundtrip.drift == pytest.approx(field.segments[0].drift)
        assert single(FieldSegment(0.0, 0.0, 1.0)).as_brfp_inf() is None

    def test_as_dw0_requires_no_killing_and_nonneg_linear(self):
        assert single(FieldSegment(0.1, 0.0, 1.0)).as_dw0() is None
        assert single(FieldSegment(0.0, 0.0, 0.0, dirac(2.0))).as_dw0() is None   # c = -2
        dw0 = single(FieldSegment(0.0, 2.0, 0.0, dirac(2.0))).as_dw0()
        assert dw0 is not None
        assert dw0.segments[0].linear == pytest.approx(0.0)


class TestFiniteMean:
    def test_quadratic_true(self):
        ok, diag = single(FieldSegment(0.0, 1.0, 1.0)).finite_mean_check()
        assert ok and diag["reasons"] == []

    def test_killing_false(self):
        ok, diag = single(FieldSegment(0.1, 1.0, 0.0)).finite_mean_check()
        assert not ok
        assert "killing" in diag["reasons"][0]

    def test_atom_moment_reported(self):
        ok, diag = single(FieldSegment(0.0, 0.0, 0.0, dirac(2.0))).finite_mean_check()
        assert ok
        assert diag["tail_moments"][0] == pytest.approx(2.0)


class TestGeneratingFamilyLift:
    def test_yule_lift(self):
        gf = GeneratingFamily((0.0,), (PGFSegment(0.0, {2: 1.0}),))
        field = from_generating_family(gf)
        seg = field.segments[0]
        assert (seg.kill, seg.drift, seg.diffusion) == (0.0, 0.0, 0.0)
        assert tuple(seg.jumps.support) == (1.0,)
        assert tuple(seg.jumps.masses) == (1.0,)
        assert field.brfp_inf_source is not None

    def test_critical_binary_rejected(self):
        gf = GeneratingFamily((0.0,), (PGFSegment(0.0, {0: 1.0, 2: 1.0}),))
        with pytest.raises(NotEmbeddableError):
            from_generating_family(gf)

    def test_pure_explosion_lift(self):
        gf = GeneratingFamily((0.0,), (PGFSegment(0.4, {}),))
        field = from_generating_family(gf)
        seg = field.segments[0]
        assert (seg.kill, seg.drift, seg.diffusion) == (0.4, 0.0, 0.0)
        assert seg.jumps.is_empty


class TestShape:
    def test_phi_convex_on_positive_axis(self, rng):
        field = random_step_field(rng)
        thetas = np.linspace(0.2, 8.0, 30)
        for t in (0.0, 0.7, 2.0):
            vals = field.phi(thetas.astype(complex), t).real
            second = vals[2:] - 2 * vals[1:-1] + vals[:-2]
            assert np.all(second >= -1e-9)

    def test_breakpoint_validation(self):
        with pytest.raises(ParameterError):
            LevyFamily((0.5,), (FieldSegment(),))
        with pytest.raises(ParameterError):
            LevyFamily((0.0, 0.0), (FieldSegment(), FieldSegment()))
        with pytest.raises(ParameterError):
            LevyFamily((0.0, 1.0), (FieldSegment(),))

    def test_segment_validation(self):
        with pytest.raises(ParameterError):
            FieldSegment(kill=-0.1)
        with pytest.raises(ParameterError):
            FieldSegment(diffusion=-0.1)
        with pytest.raises(ParameterError):
            DW0Segment(linear=-0.1)
