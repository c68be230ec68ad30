"""Bernstein functions: triplet representation, evaluation, fixed points.

A Bernstein function is f(zeta) = kill + drift*zeta + int (1 - e^{-zeta x}) tau(dx)
with kill, drift >= 0 and int min{1,x} tau(dx) < oo.  The triplet is the
canonical data structure; compositions and closed-form semigroups are handled
through plain evaluation handles (no triplet reconstruction is attempted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousClassification, DomainError, ParameterError
from .measures import DiscretizedMeasure, density_measure, empty_measure, integrate_kernel

__all__ = [
    "BernsteinTriplet",
    "ComposedMap",
    "FellerMap",
    "FixedPointReport",
    "boundary_data",
    "classify_fixed_points",
    "compose",
    "feller_semigroup",
]

# f'(0) is reported as infinite past this guard (the first moment may diverge
# for genuinely heavy-tailed measures approximated by the user)
FIRST_MOMENT_GUARD = 1e12

_THETA_LADDER = 10.0 ** np.arange(0, 9)  # 10^0 .. 10^8
_LADDER_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class BernsteinTriplet:
    """Killing / drift / jump-measure representation of one Bernstein function."""

    kill: float = 0.0
    drift: float = 0.0
    jumps: DiscretizedMeasure = empty_measure()

    def __post_init__(self):
        if self.kill < 0.0 or not math.isfinite(self.kill):
            raise ParameterError("kill must be a finite non-negative real")
        if self.drift < 0.0 or not math.isfinite(self.drift):
            raise ParameterError("drift must be a finite non-negative real")
        # min{1,x}-integrability is enforced by DiscretizedMeasure already

    @property
    def is_zero(self):
        return self.kill == 0.0 and self.drift == 0.0 and self.jumps.total_mass() == 0.0

    def eval(self, zeta):
        """Evaluate at zeta with Re zeta > 0 (complex) or theta > 0 (real)."""
        z = complex(zeta)
        if z.real <= 0.0:
            raise DomainError(f"Bernstein functions live on the open right half-plane, got {zeta}")
        value = self.kill + self.drift * z + integrate_kernel(self.jumps, "one_minus_exp", z)
        if isinstance(zeta, (int, float)):
            return value.real
        return value

    __call__ = eval

    def derivative(self, theta):
        """Analytic f'(theta) = drift + int x e^{-theta x} tau(dx), theta > 0."""
        if theta <= 0.0:
            raise DomainError("derivative defined for theta > 0")
        return self.drift + integrate_kernel(self.jumps, "exp_decay_x", theta).real

    def boundary_data(self):
        """(f(0), f'(0), f'(oo), f(oo)) from the triplet limits."""
        first_moment = self.jumps.moment("x")
        d0 = self.drift + first_moment
        if d0 > FIRST_MOMENT_GUARD:
            d0 = math.inf
        f_inf = math.inf if self.drift > 0.0 else self.kill + self.jumps.total_mass()
        return (self.kill, d0, self.drift, f_inf)


def boundary_data(f):
    """Boundary limits (f(0), f'(0), f'(oo), f(oo)) of a triplet or evaluation handle."""
    if isinstance(f, BernsteinTriplet):
        return f.boundary_data()
    f0 = _limit_at_zero(f)
    d0 = _derivative_at_zero_numeric(f)
    dinf = _derivative_at_infinity_numeric(f)
    finf = math.inf if dinf > 0.0 else _limit_at_infinity(f)
    return (f0, d0, dinf, finf)


class ComposedMap:
    """Numeric composition handle f o g; supports eval and finite-difference derivatives."""

    def __init__(self, outer, inner):
        self.outer = outer
        self.inner = inner

    def __call__(self, theta):
        return _apply(self.outer, _apply(self.inner, theta))

    def derivative(self, theta, rel_step=1e-6):
        h = max(abs(theta), 1.0) * rel_step
        lo = max(theta - h, 0.25 * theta)
        hi = theta + h
        return (self(hi) - self(lo)) / (hi - lo)


def compose(f, g):
    """Composition handle; Bernstein functions are closed under composition."""
    return ComposedMap(f, g)


class FellerMap:
    """Closed-form map of the quadratic mechanism drift*zeta + diff*zeta^2 at time t.

    v_t(zeta) = e^{-a t} zeta / (1 + kappa(t) zeta) with
    kappa(t) = (b/a)(1 - e^{-a t}) for a != 0 and kappa(t) = b t for a = 0.
    """

    def __init__(self, a, b, t):
        if b <= 0.0:
            raise ParameterError("quadratic coefficient must be positive")
        if t < 0.0:
            raise ParameterError("time must be non-negative")
        self.a = float(a)
        self.b = float(b)
        self.t = float(t)
        self.contraction = math.exp(-self.a * self.t)
        if self.a == 0.0:
            self.kappa = self.b * self.t
        else:
            self.kappa = (self.b / self.a) * (1.0 - math.exp(-self.a * self.t))

    def __call__(self, zeta):
        if self.t == 0.0:
            return zeta
        return self.contraction * zeta / (1.0 + self.kappa * zeta)

    def derivative(self, theta):
        if self.t == 0.0:
            return 1.0
        return self.contraction / (1.0 + self.kappa * theta) ** 2

    def as_triplet(self, panels_per_decade=6, nodes_per_panel=16):
        """Triplet with exponential jump density amp*e^{-x/kappa}, amp = e^{-at}/kappa^2."""
        if self.t == 0.0:
            return BernsteinTriplet(kill=0.0, drift=1.0, jumps=empty_measure())
        amp = self.contraction / self.kappa ** 2
        jumps = density_measure(lambda x: amp * math.exp(-x / self.kappa),
                                1e-10 * self.kappa, 60.0 * self.kappa,
                                panels_per_decade=panels_per_decade,
                                nodes_per_panel=nodes_per_panel)
        return BernsteinTriplet(kill=0.0, drift=0.0, jumps=jumps)


def feller_semigroup(a, b, t):
    """Closed-form one-parameter semigroup element of the quadratic mechanism."""
    return FellerMap(a, b, t)


@dataclass(frozen=True)
class FixedPointReport:
    """Denjoy-Wolff location plus boundary fixed-point data of a positive self-map."""

    dw_location: str                    # "zero" | "interior" | "infinity"
    interior_point: float | None        # fixed point when dw_location == "interior"
    interior_derivative: float | None
    brfp_at_zero: bool
    derivative_at_zero: float           # may be math.inf
    brfp_at_infinity: bool
    derivative_at_infinity: float
    fixed_value_at_zero: float          # f(0)
    ladder_converged: bool = True       # infinity-limit ladder met its tolerance


def _apply(f, theta):
    value = f(theta)
    return value.real if isinstance(value, complex) else float(value)


def _limit_at_zero(f):
    # monotone decrease toward 0+; Richardson on the linear term
    v1 = _apply(f, 1e-12)
    v2 = _apply(f, 2e-12)
    return max(0.0, 2.0 * v1 - v2)


def _derivative_at_zero_numeric(f):
    thetas = 10.0 ** np.arange(-6, -12, -2)
    f0 = _limit_at_zero(f)
    slopes = [( _apply(f, th) - f0) / th for th in thetas]
    if slopes[-1] > FIRST_MOMENT_GUARD:
        return math.inf
    return slopes[-1]


def _derivative_at_infinity_numeric(f):
    return _apply(f, 1e8) / 1e8


def _limit_at_infinity(f):
    values = np.array([_apply(f, th) for th in _THETA_LADDER])
    return _monotone_ladder_limit(values)[0]


def _monotone_ladder_limit(values):
    """(limit_or_inf, converged) for a non-decreasing ladder of boundary values."""
    diffs = np.diff(values)
    last, prev = values[-1], values[-2]
    rel_change = abs(last - prev) / max(abs(last), 1e-300)
    if rel_change < _LADDER_RTOL:
        # geometric tail extrapolation when the decay ratio is stable
        if len(diffs) >= 2 and abs(diffs[-2]) > 0.0:
            ratio = diffs[-1] / diffs[-2]
            if 0.0 < ratio < 0.9:
                return float(last + diffs[-1] * ratio / (1.0 - ratio)), True
        return float(last), True
    return math.inf, False


def classify_fixed_points(f, zero_atol=1e-10, tie_tol=1e-12,
                          bracket=(1e-8, 1e8), bisect_rtol=1e-12):
    """Locate the Denjoy-Wolff point of a Bernstein-type self-map of (0, oo).

    Decision order is deterministic: infinity when f(theta) >= theta on the
    probe grid (triplets: drift >= 1), else zero when f(0)=0 and f'(0) <= 1
    (ties at derivative exactly 1 resolve to zero), else an interior root of
    f(theta) - theta located by bracketing bisection.
    """
    ladder_ok = True
    if isinstance(f, BernsteinTriplet):
        if f.is_zero:
            raise ParameterError("the zero map is not a self-map of the half-plane")
        f0, d0, dinf, _finf = f.boundary_data()
        at_infinity = dinf >= 1.0
        deriv = f.derivative
    else:
        f0 = _limit_at_zero(f)
        d0 = _derivative_at_zero_numeric(f)
        dinf = _derivative_at_infinity_numeric(f)
        probes = np.geomspace(bracket[0], bracket[1], 33)
        fvals = np.array([_apply(f, th) for th in probes])
        at_infinity = bool(np.all(fvals >= probes * (1.0 - 1e-12)))
        deriv = getattr(f, "derivative", None)
        if deriv is None:
            def deriv(theta, rel_step=1e-6):
                h = max(abs(theta), 1.0) * rel_step
                return (_apply(f, theta + h) - _apply(f, max(theta - h, 0.25 * theta))) / (
                    theta + h - max(theta - h, 0.25 * theta))

    brfp_zero = (f0 <= zero_atol) and math.isfinite(d0) and d0 > 0.0
    brfp_inf = dinf > 0.0

    if at_infinity:
        return FixedPointReport("infinity", None, None, brfp_zero, d0, True, dinf, f0, ladder_ok)

    if f0 <= zero_atol and d0 <= 1.0 + tie_tol:
        return FixedPointReport("zero", None, None, brfp_zero, d0, brfp_inf, dinf, f0, ladder_ok)

    # interior root of f(theta) - theta
    lo, hi = bracket
    g = lambda th: _apply(f, th) - th
    g_lo, g_hi = g(lo), g(hi)
    if g_lo < 0.0 or g_hi > 0.0:
        raise AmbiguousClassification(
            "no sign change of f(theta) - theta on the bracket",
            diagnostics={"f0": f0, "d0": d0, "dinf": dinf, "g_lo": g_lo, "g_hi": g_hi})
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if g(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= bisect_rtol * hi:
            break
    theta_star = 0.5 * (lo + hi)
    d_star = deriv(theta_star)
    return FixedPointReport("interior", theta_star, float(d_star),
                            brfp_zero, d0, brfp_inf, dinf, f0, ladder_ok)
