"""Branching-process quantities derived from the evolution family.

Transition kernels are never materialized; every quantity is expressed
through the Laplace exponents v_{s,t}: transforms, survival, moments,
extinction probabilities with certificates, monotonicity class, and linear
state rescaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import FiniteMeanError, ParameterError
from .evolution import (EvolutionSolver, evolve_limit_at_infinity, evolve_point,
                        evolve_points)
from .fields import HerglotzFieldBF

__all__ = [
    "CSBPModel",
    "ExtinctionReport",
    "MonotonicityReport",
    "RescaledCSBPModel",
    "transition_laplace",
    "survival_probability",
    "conservative",
    "homogeneous_conservativeness",
    "mean",
    "variance",
    "extinction_report",
    "monotonicity_class",
    "rescale_state",
]


class CSBPModel:
    """A branching process handle: Herglotz field plus bound evolution solver."""

    def __init__(self, field, solver=None):
        if not isinstance(field, HerglotzFieldBF):
            raise ParameterError("CSBPModel expects a HerglotzFieldBF")
        if solver is None:
            solver = EvolutionSolver(field)
        elif solver.field is not field:
            raise ParameterError("solver must be bound to the same field")
        self.field = field
        self.solver = solver

    def laplace_exponent(self, s, t, theta):
        """v_{s,t}(theta) for theta > 0."""
        if theta <= 0.0:
            raise ParameterError("theta must be positive")
        return evolve_point(self.solver, float(theta), s, t)

    def laplace_exponent_at_zero(self, s, t, probe=1e-12):
        """v_{s,t}(0) by Richardson refinement of two tiny-theta evolves."""
        v1, v2 = evolve_points(self.solver, np.array([probe, 2 * probe], dtype=complex), s, t).real
        return max(0.0, 2.0 * v1 - v2)

    def limit_at_infinity(self, s, t):
        return evolve_limit_at_infinity(self.solver, s, t)


def transition_laplace(model, s, t, x, theta):
    """E^{(s,x)}[e^{-theta Z_t}] = exp(-x v_{s,t}(theta)); equals 1 at x = 0."""
    if x < 0.0:
        raise ParameterError("initial state must be non-negative")
    if x == 0.0:
        return 1.0
    return math.exp(-x * model.laplace_exponent(s, t, theta))


def survival_probability(model, s, t, x):
    """P^{(s,x)}[Z_t < oo] = exp(-x v_{s,t}(0))."""
    if x < 0.0:
        raise ParameterError("initial state must be non-negative")
    if x == 0.0:
        return 1.0
    return math.exp(-x * model.laplace_exponent_at_zero(s, t))


def conservative(model, horizon, n_grid=8, tol=1e-9):
    """True when v_{0,t}(0) stays below tol on a grid of times up to the horizon."""
    if horizon <= 0.0:
        raise ParameterError("horizon must be positive")
    for t in np.linspace(horizon / n_grid, horizon, n_grid):
        if model.laplace_exponent_at_zero(0.0, float(t)) > tol:
            return False
    return True


def homogeneous_conservativeness(field):
    """Exact conservativeness of a single-segment field; None when inhomogeneous.

    For a time-homogeneous mechanism the divergence of int_0 dtheta/|phi| is
    equivalent (for finitely discretized measures, where phi'(0) is finite) to
    the absence of killing.  No analogue is known for step fields with more
    than one segment, so those return None and callers fall back to the
    finite-mean sufficient condition.
    """
    if len(field.segments) != 1:
        return None
    return field.segments[0].kill == 0.0


def _dphi0_cumulative(field, s, t):
    """Cuts s=r_0<...<r_m=t with segment data (dphi0, d2phi0) and running integral of phi'(0)."""
    cuts = [s]
    data = []
    acc = [0.0]
    running = 0.0
    for seg, lo, hi in field.intervals(s, t):
        cuts.append(hi)
        data.append((seg.dphi_at_zero(), seg.d2phi_at_zero()))
        running += seg.dphi_at_zero() * (hi - lo)
        acc.append(running)
    return cuts, data, acc


def mean(model, s, t, x):
    """E^{(s,x)}[Z_t] = x exp(-int_s^t phi'(0,r) dr), exact for step fields."""
    ok, diag = model.field.finite_mean_check()
    if not ok:
        raise FiniteMeanError("; ".join(diag["reasons"]))
    _cuts, _data, acc = _dphi0_cumulative(model.field, s, t)
    return x * math.exp(-acc[-1])


def variance(model, s, t, x):
    """Var = E[Z_t] * int_s^t phi''(0,r) v'_{r,t}(0) dr, segment-exact."""
    ok, diag = model.field.finite_mean_check()
    if not ok:
        raise FiniteMeanError("; ".join(diag["reasons"]))
    cuts, data, acc = _dphi0_cumulative(model.field, s, t)
    total = acc[-1]
    integral = 0.0
    for k, (c, g) in enumerate(data):
        lo, hi = cuts[k], cuts[k + 1]
        # int_lo^hi g * exp(A(r) - A(t)) dr with A linear on the piece
        base = math.exp(acc[k] - total)
        width = hi - lo
        if c == 0.0:
            integral += g * base * width
        else:
            integral += g * base * (math.exp(c * width) - 1.0) / c
    return x * math.exp(-total) * integral


@dataclass(frozen=True)
class ExtinctionReport:
    """Extinction probabilities along a horizon grid with a certificate.

    certificate is one of "certified_extinct", "certified_never",
    "inconclusive"; the witness dictionary holds the quantity backing it.
    certified_limit is the exact value of P[T_0 < oo] when certified, else None.
    """

    times: tuple
    probabilities: tuple
    horizon_limit: float
    horizon_converged: bool
    certificate: str
    witness: dict = dataclass_field(default_factory=dict)
    certified_limit: float | None = None
    bound_margin: float | None = None


def _comparison_bound_margin(model, s, times, probes=(1.0, 10.0, 1e3)):
    """min over grid and probes of theta/(1 + b(s,t) theta) - v_{s,t}(theta)."""
    margin = math.inf
    for t in times:
        b_st = 0.0
        for seg, lo, hi in model.field.intervals(s, t):
            b_st += seg.diffusion * (hi - lo)
        if b_st == 0.0:
            continue
        vals = evolve_points(model.solver, np.asarray(probes, dtype=complex), s, t).real
        for theta, v in zip(probes, vals):
            margin = min(margin, theta / (1.0 + b_st * theta) - v)
    return None if margin is math.inf else float(margin)


def extinction_report(model, s, x, horizon_grid):
    """Extinction probabilities P^{(s,x)}[Z_t = 0] = e^{-x v_{s,t}(oo)} plus certificate."""
    times = tuple(float(t) for t in horizon_grid)
    if not times or any(t < s for t in times) or any(b >= c for b, c in zip(times, times[1:])):
        raise ParameterError("horizon grid must be increasing and start at or after s")
    if x < 0.0:
        raise ParameterError("initial state must be non-negative")

    if x == 0.0:
        probs = tuple(1.0 for _ in times)
    else:
        probs = []
        for t in times:
            vinf = model.limit_at_infinity(s, t)
            probs.append(0.0 if math.isinf(vinf) else math.exp(-x * vinf))
        probs = tuple(probs)

    horizon_converged = len(probs) >= 2 and abs(probs[-1] - probs[-2]) < 1e-6

    certificate = "inconclusive"
    witness = {}
    certified_limit = None
    bound_margin = None
    dw0 = model.field.as_dw0()
    if dw0 is not None and model.field.segments[-1].diffusion > 0.0:
        # tail repeats the last segment, so int phi''(oo) grows without bound
        certificate = "certified_extinct"
        witness = {"tail_diffusion": model.field.segments[-1].diffusion,
                   "phi2_infinity_integral": "divergent"}
        certified_limit = 1.0
        bound_margin = _comparison_bound_margin(model, s, times)
    else:
        brfp = model.field.as_brfp_inf()
        if brfp is not None:
            certificate = "certified_never"
            witness = {"plain_kernel_form": True,
                       "linear_coefficients": [seg.linear for seg in brfp.segments]}
            certified_limit = 0.0
    return ExtinctionReport(times, probs, probs[-1], horizon_converged,
                            certificate, witness, certified_limit, bound_margin)


@dataclass(frozen=True)
class MonotonicityReport:
    non_decreasing: bool
    min_margin: float              # min over probes of v(theta) - theta
    pairs: tuple
    ess_inf_ratios: tuple | None   # v'_{s,t}(oo) per pair, when the plain-kernel form exists


def monotonicity_class(model, pairs=None, thetas=None):
    """Non-decreasing iff v_{s,t}(theta) >= theta on the probe grid for all sampled (s,t)."""
    if pairs is None:
        horizon = model.field.breakpoints[-1] + 1.0
        pairs = ((0.0, 0.5 * horizon), (0.0, horizon), (0.25 * horizon, horizon))
    if thetas is None:
        thetas = np.geomspace(1e-2, 1e2, 9)
    thetas = np.asarray(thetas, dtype=float)
    min_margin = math.inf
    for s, t in pairs:
        vals = evolve_points(model.solver, thetas.astype(complex), s, t).real
        min_margin = min(min_margin, float(np.min(vals - thetas)))
    non_decreasing = min_margin >= -1e-9 * float(np.max(thetas))
    brfp = model.field.as_brfp_inf()
    ratios = None
    if brfp is not None:
        from .evolution import derivative_at_infinity
        ratios = tuple(derivative_at_infinity(brfp, s, t) for s, t in pairs)
    return MonotonicityReport(non_decreasing, min_margin, tuple(pairs), ratios)


class RescaledCSBPModel:
    """View of a model under Z -> a(t) Z: v_hat_{s,t} = L_s o v_{s,t} o L_t^{-1}, L_t = id/a(t)."""

    def __init__(self, model, scales):
        scales = tuple(float(a) for a in scales)
        if len(scales) != len(model.field.segments):
            raise ParameterError("need one scale value per field segment")
        if any(a <= 0.0 or not math.isfinite(a) for a in scales):
            raise ParameterError("scales must be positive and finite")
        self.model = model
        self.scales = scales

    def scale_at(self, t):
        return self.scales[self.model.field.segment_index(t)]

    def laplace_exponent(self, s, t, theta):
        if theta <= 0.0:
            raise ParameterError("theta must be positive")
        return self.model.laplace_exponent(s, t, self.scale_at(t) * theta) / self.scale_at(s)

    def transition_laplace(self, s, t, x, theta):
        if x < 0.0:
            raise ParameterError("initial state must be non-negative")
        if x == 0.0:
            return 1.0
        return math.exp(-x * self.laplace_exponent(s, t, theta))


def rescale_state(model, scales):
    """Rescaled-model view; ``scales`` is per-segment on the field's breakpoints."""
    return RescaledCSBPModel(model, scales)
