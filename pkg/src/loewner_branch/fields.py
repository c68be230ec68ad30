"""Time-dependent branching mechanisms as piecewise-constant step families.

The canonical form is the quadruple (kill q, drift a, diffusion b, jumps pi)
per time segment,

    phi(zeta, t) = -q + a zeta + b zeta^2
                   + int (e^{-zeta x} - 1 + zeta x 1_{(0,1)}(x)) pi(dx),

which generates Bernstein-function flows.  Two special parameterizations are
validated converters into that form: families fixing 0 (compensated kernel,
coefficients c, b, pi) and families fixing infinity (plain kernel,
coefficients q, d, pi).  Step families keep every time-integrability
requirement trivially true and let the ODE solver restart exactly at
breakpoints.  Genuinely time-continuous coefficients (e.g. rates like 1/t
whose limits are not locally integrable) can only be approximated by grid
refinement and may lose the boundary fixed point the special forms encode.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MeasureIntegrabilityError, NotEmbeddableError, ParameterError
from .measures import DiscretizedMeasure, empty_measure, integrate_kernel

__all__ = [
    "FieldSegment",
    "DW0Segment",
    "BRFPInfSegment",
    "LevyFamily",
    "DW0Family",
    "BRFPInfFamily",
    "HerglotzFieldBF",
    "from_dw0",
    "from_brfp_inf",
    "from_generating_family",
    "finite_mean_check",
]


def _check_breakpoints(breakpoints, n_segments):
    bps = tuple(float(t) for t in breakpoints)
    if not bps or bps[0] != 0.0:
        raise ParameterError("breakpoints must start at 0")
    if any(b >= c for b, c in zip(bps, bps[1:])):
        raise ParameterError("breakpoints must be strictly increasing")
    if len(bps) != n_segments:
        raise ParameterError(f"expected {len(bps)} segments for {len(bps)} breakpoints, got {n_segments}")
    return bps


class StepFamily:
    """Shared lookup for families that are constant between breakpoints.

    Segment k is active on [breakpoints[k], breakpoints[k+1]); the last
    segment extends to infinity (tail rule: repeat last).
    """

    def __init__(self, breakpoints, segments):
        self.segments = tuple(segments)
        self.breakpoints = _check_breakpoints(breakpoints, len(self.segments))

    def segment_index(self, t):
        if t < 0.0:
            raise ParameterError("time must be non-negative")
        return min(bisect_right(self.breakpoints, t) - 1, len(self.segments) - 1)

    def segment_at(self, t):
        return self.segments[self.segment_index(t)]

    def intervals(self, s, t):
        """Yield (segment, lo, hi) covering [s, t] in increasing time."""
        if not 0.0 <= s <= t:
            raise ParameterError(f"need 0 <= s <= t, got ({s}, {t})")
        if s == t:
            return
        cuts = [s] + [b for b in self.breakpoints if s < b < t] + [t]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            yield self.segments[self.segment_index(lo)], lo, hi


@dataclass(frozen=True, eq=False)
class FieldSegment:
    """One constant-in-time quadruple (kill, drift, diffusion, jumps)."""

    kill: float = 0.0
    drift: float = 0.0
    diffusion: float = 0.0
    jumps: DiscretizedMeasure = empty_measure()

    def __post_init__(self):
        if self.kill < 0.0 or not math.isfinite(self.kill):
            raise ParameterError("kill rate must be finite and non-negative")
        if not math.isfinite(self.drift):
            raise ParameterError("drift must be finite")
        if self.diffusion < 0.0 or not math.isfinite(self.diffusion):
            raise ParameterError("diffusion must be finite and non-negative")
        # Levy integrability min{x^2,1} is checked by the measure itself

    def phi(self, zeta):
        z = np.asarray(zeta, dtype=complex)
        out = -self.kill + self.drift * z + self.diffusion * z * z
        x = self.jumps.support
        if x.size:
            zx = np.multiply.outer(z, x)
            integrand = np.exp(-zx) - 1.0 + zx * (x < 1.0)
            out = out + integrand @ self.jumps.masses
        return out

    def boundary_data(self):
        """(phi(0), phi'(0), phi''(oo)) for this segment."""
        dphi0 = self.drift - self.jumps.moment("x_tail")
        return (-self.kill, dphi0, 2.0 * self.diffusion)

    def dphi_at_zero(self):
        return self.boundary_data()[1]

    def d2phi_at_zero(self):
        return 2.0 * self.diffusion + self.jumps.moment("x_squared")


@dataclass(frozen=True, eq=False)
class DW0Segment:
    """Compensated-kernel segment fixing the origin: c zeta + b zeta^2 + int(e^{-zx}-1+zx) pi."""

    linear: float = 0.0
    diffusion: float = 0.0
    jumps: DiscretizedMeasure = empty_measure()

    def __post_init__(self):
        if self.linear < 0.0 or not math.isfinite(self.linear):
            raise ParameterError("linear coefficient must be finite and non-negative")
        if self.diffusion < 0.0 or not math.isfinite(self.diffusion):
            raise ParameterError("diffusion must be finite and non-negative")
        head = self.jumps.moment("x_head") + self.jumps.moment("x_tail")
        if not math.isfinite(head):
            raise MeasureIntegrabilityError("int min{x^2, x} pi(dx) must be finite")

    def phi(self, zeta):
        z = np.asarray(zeta, dtype=complex)
        out = self.linear * z + self.diffusion * z * z
        x = self.jumps.support
        if x.size:
            zx = np.multiply.outer(z, x)
            out = out + (np.exp(-zx) - 1.0 + zx) @ self.jumps.masses
        return out

    def to_field_segment(self):
        drift = self.linear + self.jumps.moment("x_tail")
        return FieldSegment(0.0, drift, self.diffusion, self.jumps)


@dataclass(frozen=True, eq=False)
class BRFPInfSegment:
    """Plain-kernel segment fixing infinity: -q + d zeta + int(e^{-zx}-1) pi."""

    kill: float = 0.0
    linear: float = 0.0
    jumps: DiscretizedMeasure = empty_measure()

    def __post_init__(self):
        if self.kill < 0.0 or not math.isfinite(self.kill):
            raise ParameterError("kill rate must be finite and non-negative")
        if not math.isfinite(self.linear):
            raise ParameterError("linear coefficient must be finite")
        if not math.isfinite(self.jumps.moment("min_1_x")):
            raise MeasureIntegrabilityError("int min{x,1} pi(dx) must be finite")

    def phi(self, zeta):
        z = np.asarray(zeta, dtype=complex)
        out = -self.kill + self.linear * z
        x = self.jumps.support
        if x.size:
            out = out + (np.exp(-np.multiply.outer(z, x)) - 1.0) @ self.jumps.masses
        return out

    def to_field_segment(self):
        # the compensated kernel adds +zeta*x on (0,1), so the linear part drops
        # by the head moment when switching to the canonical form
        drift = self.linear - self.jumps.moment("x_head")
        return FieldSegment(self.kill, drift, 0.0, self.jumps)


class LevyFamily(StepFamily):
    """Piecewise-constant quadruples (kill, drift, diffusion, jumps)."""

    def __init__(self, breakpoints, segments):
        segments = tuple(segments)
        if not all(isinstance(s, FieldSegment) for s in segments):
            raise ParameterError("LevyFamily segments must be FieldSegment instances")
        super().__init__(breakpoints, segments)


class DW0Family(StepFamily):
    """Step family of compensated-kernel segments (common fixed point at 0)."""

    def __init__(self, breakpoints, segments):
        segments = tuple(segments)
        if not all(isinstance(s, DW0Segment) for s in segments):
            raise ParameterError("DW0Family segments must be DW0Segment instances")
        super().__init__(breakpoints, segments)


class BRFPInfFamily(StepFamily):
    """Step family of plain-kernel segments (common regular fixed point at infinity)."""

    def __init__(self, breakpoints, segments):
        segments = tuple(segments)
        if not all(isinstance(s, BRFPInfSegment) for s in segments):
            raise ParameterError("BRFPInfFamily segments must be BRFPInfSegment instances")
        super().__init__(breakpoints, segments)

    @property
    def dw_infinity(self):
        """True when the linear coefficient stays <= 0, i.e. infinity attracts."""
        return all(seg.linear <= 0.0 for seg in self.segments)


class HerglotzFieldBF:
    """Canonical evaluation handle over a LevyFamily, with cached boundary data.

    Immutable; safe to share between threads.  Special entry points keep a
    reference to their source family so downstream certificates can use the
    stronger parameterization.
    """

    def __init__(self, family, dw0_source=None, brfp_inf_source=None):
        if not isinstance(family, LevyFamily):
            raise ParameterError("HerglotzFieldBF wraps a LevyFamily")
        self.family = family
        self.dw0_source = dw0_source
        self.brfp_inf_source = brfp_inf_source
        self._boundary = tuple(seg.boundary_data() for seg in family.segments)

    @property
    def breakpoints(self):
        return self.family.breakpoints

    @property
    def segments(self):
        return self.family.segments

    def segment_index(self, t):
        return self.family.segment_index(t)

    def intervals(self, s, t):
        return self.family.intervals(s, t)

    def phi(self, zeta, t):
        z = np.asarray(zeta, dtype=complex)
        if np.any(z.real <= 0.0):
            raise DomainError("phi is defined on the open right half-plane")
        return self.family.segment_at(t).phi(zeta)

    def phi_scalar(self, zeta, t):
        return complex(self.phi(np.asarray([zeta]), t)[0])

    def boundary_data(self, t):
        """(phi(0,t), phi'(0,t), phi''(oo,t)) for the segment containing t."""
        return self._boundary[self.segment_index(t)]

    def finite_mean_check(self):
        """(ok, diagnostics): every segment must kill nothing and have finite x-tail moment."""
        reasons = []
        moments = []
        for k, seg in enumerate(self.segments):
            if seg.kill > 0.0:
                reasons.append(f"segment {k}: killing present (q={seg.kill})")
            tail = seg.jumps.moment("x_tail")
            moments.append(tail)
            if not math.isfinite(tail):
                reasons.append(f"segment {k}: int x 1_[1,oo) pi(dx) diverges")
        return (not reasons), {"reasons": reasons, "tail_moments": moments}

    def as_dw0(self):
        """Re-express in compensated form when possible (q = 0 and c >= 0 per segment), else None."""
        if self.dw0_source is not None:
            return self.dw0_source
        segs = []
        for seg in self.segments:
            c = seg.drift - seg.jumps.moment("x_tail")
            if seg.kill > 0.0 or c < 0.0:
                return None
            segs.append(DW0Segment(c, seg.diffusion, seg.jumps))
        return DW0Family(self.breakpoints, segs)

    def as_brfp_inf(self):
        """Re-express in plain-kernel form when possible (no diffusion), else None."""
        if self.brfp_inf_source is not None:
            return self.brfp_inf_source
        segs = []
        for seg in self.segments:
            if seg.diffusion > 0.0:
                return None
            d = seg.drift + seg.jumps.moment("x_head")
            segs.append(BRFPInfSegment(seg.kill, d, seg.jumps))
        return BRFPInfFamily(self.breakpoints, segs)


def _verify_conversion(field, source, probe_rtol=1e-12, n_probes=16, seed=7):
    rng = np.random.default_rng(seed)
    horizon = field.breakpoints[-1] + 1.0
    for _ in range(n_probes):
        t = rng.uniform(0.0, horizon)
        zeta = complex(rng.uniform(0.05, 20.0), rng.uniform(-5.0, 5.0))
        a = field.phi_scalar(zeta, t)
        b = complex(np.asarray(source.segment_at(t).phi(np.asarray([zeta])))[0])
        if abs(a - b) > probe_rtol * max(1.0, abs(a)):
            raise MeasureIntegrabilityError(
                f"parameterizations disagree at (zeta={zeta}, t={t}): {a} vs {b}")


def from_dw0(family):
    """Canonicalize a compensated-form family; identical phi values are verified at probes."""
    if not isinstance(family, DW0Family):
        raise ParameterError("from_dw0 expects a DW0Family")
    levy = LevyFamily(family.breakpoints, [seg.to_field_segment() for seg in family.segments])
    field = HerglotzFieldBF(levy, dw0_source=family)
    _verify_conversion(field, family)
    return field


def from_brfp_inf(family):
    """Canonicalize a plain-kernel family; identical phi values are verified at probes."""
    if not isinstance(family, BRFPInfFamily):
        raise ParameterError("from_brfp_inf expects a BRFPInfFamily")
    levy = LevyFamily(family.breakpoints, [seg.to_field_segment() for seg in family.segments])
    field = HerglotzFieldBF(levy, brfp_inf_source=family)
    _verify_conversion(field, family)
    return field


def from_generating_family(gf):
    """Lift a discrete generating family to the half-plane.

    Requires offspring weight alpha(0) = 0 on every segment (the spatial
    embedding condition).  The lifted quadruple is (q, 0, 0, pi) with
    pi = sum_k alpha(k+1) delta_k.
    """
    segs = []
    brfp_segs = []
    for k, seg in enumerate(gf.segments):
        if seg.offspring.get(0, 0.0) > 0.0:
            raise NotEmbeddableError(
                f"segment {k} has alpha(0) = {seg.offspring[0]} > 0; the process can decrease")
        atoms = tuple((float(n - 1), w) for n, w in sorted(seg.offspring.items())
                      if n >= 2 and w > 0.0)
        pi = DiscretizedMeasure(atoms=atoms)
        segs.append(FieldSegment(seg.kill, pi.moment("x_head"), 0.0, pi))
        brfp_segs.append(BRFPInfSegment(seg.kill, 0.0, pi))
    levy = LevyFamily(gf.breakpoints, segs)
    return HerglotzFieldBF(levy, brfp_inf_source=BRFPInfFamily(gf.breakpoints, brfp_segs))


def finite_mean_check(field):
    """Module-level convenience mirroring HerglotzFieldBF.finite_mean_check."""
    return field.finite_mean_check()
