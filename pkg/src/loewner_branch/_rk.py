"""Adaptive embedded Dormand-Prince 5(4) step for complex-valued autonomous ODEs.

Shared by the half-plane evolution solver and the unit-disk PGF solver.  The
state is a complex ndarray so a whole probe grid integrates in one call with a
common step sequence (per-component error weighting keeps the control fair).

Step-size policy: embedded 4th-order error estimate with the usual PI-free
update, plus a hard cap ``h <= h_cap`` supplied by the caller.  Callers tie
the cap to sqrt(rel_tol), which makes the tolerance a clean convergence knob:
on smooth fields the cap binds, the scheme is effectively an order-5 one-step
method with h ~ sqrt(tol), and halving the tolerance contracts the observed
error by about 2^(5/2).  The embedded estimate still rejects steps in fast
transients (large |zeta| starts) and guards domain escape.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverEscapeError, StiffnessError

# Dormand-Prince 5(4) tableau (FSAL)
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                                -17253 / 339200, 22 / 525, -1 / 40)

_MIN_SHRINK = 0.2
_MAX_GROW = 5.0
_SAFETY = 0.9


def integrate_autonomous(rhs, y0, span, rel_tol, abs_tol, h_cap,
                         escape=None, trace=None, u_to_time=None):
    """Integrate dy/du = rhs(y) from u=0 to u=span (span >= 0).

    rhs maps a complex ndarray to a like-shaped ndarray.  ``escape`` is an
    optional predicate on the state raising semantics: if it returns True for
    an accepted state, SolverEscapeError is raised.  ``trace`` is an optional
    list collecting (time, y, h, local_error) rows, with ``u_to_time``
    converting integration progress to the caller's clock.

    Returns (y_final, accumulated_local_error, n_steps).
    """
    y = np.array(y0, dtype=complex)
    if span == 0.0:
        return y, 0.0, 0
    if span < 0.0:
        raise ValueError("span must be non-negative")

    k1 = np.asarray(rhs(y))
    scale0 = abs_tol + rel_tol * np.abs(y).max()
    f0 = np.abs(k1).max()
    h = min(h_cap, span, 0.1 * scale0 / f0 if f0 > 0.0 else span)
    h = max(h, 1e-300)

    u = 0.0
    err_acc = 0.0
    n_steps = 0
    h_floor = 1e-14 * max(span, 1.0)

    while u < span:
        h = min(h, span - u)
        k2 = np.asarray(rhs(y + h * (_A21 * k1)))
        k3 = np.asarray(rhs(y + h * (_A31 * k1 + _A32 * k2)))
        k4 = np.asarray(rhs(y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3)))
        k5 = np.asarray(rhs(y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4)))
        k6 = np.asarray(rhs(y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5)))
        y_new = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        k7 = np.asarray(rhs(y_new))
        err_vec = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(invalid="ignore"):
            err_norm = float(np.max(np.abs(err_vec) / scale))
        if not np.isfinite(err_norm):
            err_norm = np.inf

        if err_norm <= 1.0:
            if escape is not None and escape(y_new):
                raise SolverEscapeError(
                    f"solution left the admissible domain at progress {u + h:.6g} of {span:.6g}")
            u += h
            y = y_new
            k1 = k7  # FSAL
            err_acc += float(np.max(np.abs(err_vec)))
            n_steps += 1
            if trace is not None:
                time = u_to_time(u) if u_to_time is not None else u
                trace.append((time, y.copy(), h, float(np.max(np.abs(err_vec)))))
            factor = _MAX_GROW if err_norm == 0.0 else min(
                _MAX_GROW, max(_MIN_SHRINK, _SAFETY * err_norm ** -0.2))
        else:
            factor = max(_MIN_SHRINK, _SAFETY * err_norm ** -0.2)
        h = min(h * factor, h_cap)
        if h < h_floor and u < span:
            raise StiffnessError(
                f"step size underflowed ({h:.3g}) at progress {u:.6g} of {span:.6g}")
    return y, err_acc, n_steps
