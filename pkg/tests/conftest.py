"""Shared builders for the canonical test processes."""

import numpy as np
import pytest

from loewner_branch import (DiscretizedMeasure, FieldSegment, GeneratingFamily,
                            HerglotzFieldBF, LevyFamily, PGFSegment)


def feller_field(a=0.0, b=1.0):
    """Single-segment quadratic mechanism a*zeta + b*zeta^2."""
    return HerglotzFieldBF(LevyFamily((0.0,), (FieldSegment(0.0, a, b),)))


def yule_family():
    """Pure binary fission at unit rate."""
    return GeneratingFamily((0.0,), (PGFSegment(0.0, {2: 1.0}),))


def critical_binary_family():
    """Unit-rate death and binary fission (critical)."""
    return GeneratingFamily((0.0,), (PGFSegment(0.0, {0: 1.0, 2: 1.0}),))


def random_step_field(rng, n_segments=3, n_atoms=2):
    """Random piecewise-constant field with atoms in [0.1, 5] and rates in [0, 2]."""
    cuts = np.sort(rng.uniform(0.2, 1.5, size=n_segments - 1))
    breakpoints = (0.0, *cuts)
    segments = []
    for _ in range(n_segments):
        atoms = tuple((rng.uniform(0.1, 5.0), rng.uniform(0.1, 2.0)) for _ in range(n_atoms))
        segments.append(FieldSegment(rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0),
                                     rng.uniform(0.0, 2.0), DiscretizedMeasure(atoms=atoms)))
    return HerglotzFieldBF(LevyFamily(breakpoints, tuple(segments)))


def random_finite_mean_field(rng, n_segments=3, n_atoms=2):
    """No killing and moderate jump masses: keeps v''(0)/v'(0) small enough for
    a finite-difference probe of v'(0) at theta ~ 1e-6 to resolve it."""
    cuts = np.sort(rng.uniform(0.2, 1.5, size=n_segments - 1))
    breakpoints = (0.0, *cuts)
    segments = []
    for _ in range(n_segments):
        atoms = tuple((rng.uniform(0.1, 5.0), rng.uniform(0.05, 0.4)) for _ in range(n_atoms))
        segments.append(FieldSegment(0.0, rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0),
                                     DiscretizedMeasure(atoms=atoms)))
    return HerglotzFieldBF(LevyFamily(breakpoints, tuple(segments)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
