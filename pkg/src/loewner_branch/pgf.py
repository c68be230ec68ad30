"""Discrete-state counterpart: generating families and PGF flows on the disk.

The vector field is Phi(z, t) = q_t z + sum_n alpha_t(n) (z - z^n) over
n in {0, 2, 3, ...} with finite support; F_{s,t} solves the same backward ODE
as the half-plane flow, restricted to |z| < 1.  The q z term accounts for
mass leaking to infinity at rate q per individual, so coefficient sums may
stay below 1 (the defect).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rk import integrate_autonomous
from .errors import (DomainError, ExtrapolationError, FiniteMeanError,
                     InconsistencyError, ParameterError, TruncationError)
from .evolution import EvolutionSolver, evolve_points
from .fields import StepFamily, from_generating_family

__all__ = [
    "PGFSegment",
    "GeneratingFamily",
    "PGFCoefficients",
    "EmbeddabilityReport",
    "phi_pgf_eval",
    "evolve_pgf",
    "evolve_pgf_points",
    "pgf_at_one",
    "extract_coefficients",
    "mean_discrete",
    "embeddability_test",
    "round_trip_check",
]

_REL_TOL = 1e-5
_ABS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PGFSegment:
    """One constant-in-time generating pair (kill rate q, offspring weights alpha)."""

    kill: float = 0.0
    offspring: dict = None

    def __post_init__(self):
        if self.kill < 0.0 or not math.isfinite(self.kill):
            raise ParameterError("kill rate must be finite and non-negative")
        offspring = dict(self.offspring or {})
        for n, w in offspring.items():
            if not isinstance(n, int) or n < 0 or n == 1:
                raise ParameterError(f"offspring counts live in {{0, 2, 3, ...}}, got {n}")
            if w < 0.0 or not math.isfinite(w):
                raise ParameterError(f"offspring weight alpha({n}) must be finite and non-negative")
        object.__setattr__(self, "offspring", offspring)

    @property
    def total_rate(self):
        return self.kill + sum(self.offspring.values())

    def phi(self, z):
        z = np.asarray(z, dtype=complex)
        out = self.kill * z
        for n, w in self.offspring.items():
            out = out + w * (z - z ** n)
        return out

    def dphi_at_one(self):
        return self.kill + sum(w * (1 - n) for n, w in self.offspring.items())


class GeneratingFamily(StepFamily):
    """Piecewise-constant generating pairs (q_t, alpha_t)."""

    def __init__(self, breakpoints, segments):
        segments = tuple(segments)
        if not all(isinstance(s, PGFSegment) for s in segments):
            raise ParameterError("GeneratingFamily segments must be PGFSegment instances")
        super().__init__(breakpoints, segments)


def phi_pgf_eval(gf, z, t):
    """Phi(z, t) = q_t z + sum alpha_t(n)(z - z^n) for |z| < 1."""
    zc = complex(z)
    if abs(zc) >= 1.0:
        raise DomainError(f"PGF field is defined on the open unit disk, got |z| = {abs(zc)}")
    value = complex(gf.segment_at(t).phi(zc))
    if isinstance(z, (int, float)):
        return value.real
    return value


def _backward_rhs(segment):
    q = segment.kill
    counts = np.array(sorted(segment.offspring), dtype=int)
    weights = np.array([segment.offspring[int(n)] for n in counts])
    total = float(weights.sum())

    def rhs(y):
        out = -q * y - total * y
        for n, w in zip(counts, weights):
            out = out + w * y ** int(n)
        return out
    return rhs


def _escape_disk(y):
    return bool(np.any(np.abs(y) >= 1.0))


def evolve_pgf_points(gf, zs, s, t, rel_tol=_REL_TOL, abs_tol=_ABS_TOL):
    """F_{s,t} applied to an array of points in the open unit disk."""
    z = np.asarray(zs, dtype=complex)
    if np.any(np.abs(z) >= 1.0):
        raise DomainError("evolution requires |z| < 1")
    if not 0.0 <= s <= t:
        raise ParameterError(f"need 0 <= s <= t, got ({s}, {t})")
    y = z.copy()
    h_cap = math.sqrt(rel_tol)
    for seg, lo, hi in reversed(list(gf.intervals(s, t))):
        y, _err, _n = integrate_autonomous(_backward_rhs(seg), y, hi - lo,
                                           rel_tol, abs_tol, h_cap, escape=_escape_disk)
    return y


def evolve_pgf(gf, z, s, t, rel_tol=_REL_TOL, abs_tol=_ABS_TOL):
    """Scalar F_{s,t}(z); stays in the open unit disk."""
    value = evolve_pgf_points(gf, np.asarray([z], dtype=complex), s, t, rel_tol, abs_tol)[0]
    if isinstance(z, (int, float)):
        return value.real
    return complex(value)


def pgf_at_one(gf, s, t, ladder_rtol=1e-6):
    """F_{s,t}(1) = P^{(s,1)}[N_t < oo] via the ladder z = 1 - 10^{-k}, k = 1..8."""
    zs = 1.0 - 10.0 ** -np.arange(1, 9, dtype=float)
    vals = evolve_pgf_points(gf, zs.astype(complex), s, t).real
    if np.any(np.diff(vals) < -1e-9):
        raise ExtrapolationError("PGF ladder toward z = 1 is not monotone",
                                 diagnostics={"z": list(zs), "values": list(vals)})
    last, prev = vals[-1], vals[-2]
    rel = abs(last - prev) / max(abs(last), 1e-300)
    if rel >= ladder_rtol:
        raise ExtrapolationError("PGF ladder toward z = 1 did not converge",
                                 diagnostics={"z": list(zs), "values": list(vals)})
    diffs = np.diff(vals)
    if len(diffs) >= 2 and abs(diffs[-2]) > 0.0:
        ratio = diffs[-1] / diffs[-2]
        if 0.0 < ratio < 0.9:
            return float(min(1.0, last + diffs[-1] * ratio / (1.0 - ratio)))
    return float(min(1.0, last))


@dataclass(frozen=True)
class PGFCoefficients:
    """Transition probabilities p_0..p_N extracted from F_{s,t} by circle sampling.

    defect = 1 - sum(coeffs) collects mass at infinity plus truncated tail;
    alias_bound = r^N / (1 - r) bounds the tail/aliasing error of the circle
    representation, and roundoff_bound = eps * r^{-N} the floating-point
    amplification at the top order (small radii blow up high orders, which is
    why the default radius sits at 0.85 rather than lower).
    """

    order: int
    coeffs: np.ndarray
    defect: float
    alias_bound: float
    roundoff_bound: float
    radius: float
    n_samples: int

    def mean_from_coeffs(self):
        return float(np.dot(np.arange(len(self.coeffs)), self.coeffs))


def extract_coefficients(gf, s, t, order=60, radius=0.85, truncation_tol=1e-3,
                         rel_tol=_REL_TOL, abs_tol=_ABS_TOL):
    """Taylor coefficients of F_{s,t} via DFT over >= 4*order circle samples."""
    if not 0.0 < radius < 1.0:
        raise ParameterError("radius must lie in (0, 1)")
    if order < 1:
        raise ParameterError("order must be at least 1")
    alias_bound = radius ** order / (1.0 - radius)
    if alias_bound > truncation_tol:
        raise TruncationError(
            f"aliasing bound {alias_bound:.3e} exceeds {truncation_tol:.1e}; "
            "increase the order or decrease the radius")
    roundoff_bound = 1e-15 * radius ** -order
    m = 4 * order
    samples = radius * np.exp(2j * np.pi * np.arange(m) / m)
    values = evolve_pgf_points(gf, samples, s, t, rel_tol, abs_tol)
    spectrum = np.fft.fft(values) / m
    coeffs = spectrum[: order + 1].real / radius ** np.arange(order + 1)
    defect = 1.0 - float(coeffs.sum())
    return PGFCoefficients(order, coeffs, defect, alias_bound, roundoff_bound, radius, m)


def mean_discrete(gf, s, t):
    """E^{(s,1)}[N_t] = exp(-int_s^t Phi'(1,r) dr); killing makes the mean infinite."""
    for k, seg in enumerate(gf.segments):
        if seg.kill > 0.0:
            raise FiniteMeanError(f"segment {k} has explosion rate q = {seg.kill} > 0")
    exponent = 0.0
    for seg, lo, hi in gf.intervals(s, t):
        exponent += seg.dphi_at_one() * (hi - lo)
    return math.exp(-exponent)


@dataclass(frozen=True)
class EmbeddabilityReport:
    embeddable: bool
    symbolic_zero_weight: bool      # alpha(0) = 0 on all segments
    max_abs_pgf_at_zero: float
    pairs: tuple


def embeddability_test(gf, pairs=None, tol=1e-8):
    """Spatial embeddability: alpha(0) = 0 symbolically AND F_{s,t}(0) = 0 numerically.

    The two checks must agree; disagreement raises InconsistencyError.
    """
    symbolic = all(seg.offspring.get(0, 0.0) == 0.0 for seg in gf.segments)
    if pairs is None:
        horizon = gf.breakpoints[-1] + 1.0
        pairs = ((0.0, 0.5 * horizon), (0.0, horizon), (0.25 * horizon, horizon))
    worst = 0.0
    for s, t in pairs:
        worst = max(worst, abs(evolve_pgf(gf, 0.0 + 0.0j, s, t)))
    numeric = worst < tol
    if symbolic != numeric:
        raise InconsistencyError(
            f"symbolic embeddability ({symbolic}) contradicts |F(0)| = {worst:.3e}")
    return EmbeddabilityReport(symbolic, symbolic, worst, tuple(pairs))


def round_trip_check(gf, s, t, thetas, rel_tol=_REL_TOL, abs_tol=_ABS_TOL):
    """max over thetas of |exp(-v_{s,t}(theta)) - F_{s,t}(e^{-theta})| for the lifted field."""
    field = from_generating_family(gf)
    solver = EvolutionSolver(field, rel_tol=rel_tol, abs_tol=abs_tol)
    th = np.asarray(thetas, dtype=float)
    v = evolve_points(solver, th.astype(complex), s, t).real
    f = evolve_pgf_points(gf, np.exp(-th).astype(complex), s, t, rel_tol, abs_tol).real
    return float(np.max(np.abs(np.exp(-v) - f)))
