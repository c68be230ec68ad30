"""Independent statistical oracle: exact path simulation of both process types.

Discrete state: each individual carries total event rate q + sum_n alpha(n);
an event replaces it by n offspring with probability alpha(n)/lambda (n = 0 is
death) or, with probability q/lambda, absorbs the whole path at infinity.
Within a segment rates are constant, so population-level exponential clocks
are exact; crossing a breakpoint resamples the residual clock (memoryless).

Continuous state: per-segment quadratic mechanisms admit an exact transition
Z' = sum of N exponentials, N ~ Poisson(Z c / kappa), jump mean kappa, with
c = e^{-a dt}; pure-drift segments map Z deterministically.  No
time-discretization error anywhere.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ExplosionCapError, ParameterError
from .fields import StepFamily

__all__ = [
    "RNGSeedPlan",
    "MCEstimate",
    "DiscretePath",
    "DiscreteSample",
    "FellerSchedule",
    "simulate_discrete",
    "simulate_feller",
    "estimate_pgf",
    "estimate_laplace",
    "estimate_mean",
]


def _thread_count():
    raw = os.environ.get("LOEWNER_BRANCH_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class RNGSeedPlan:
    """Master seed plus per-path derived streams (reproducible, independent)."""

    master_seed: int

    def generator(self, path_index):
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(path_index,))
        return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class MCEstimate:
    """Point estimate with standard error = sample std / sqrt(n)."""

    value: float
    stderr: float
    n_paths: int
    confidence: float = 3.0

    def interval(self):
        half = self.confidence * self.stderr
        return (self.value - half, self.value + half)

    def covers(self, target):
        lo, hi = self.interval()
        return lo <= target <= hi

    def zscore(self, target):
        if self.stderr == 0.0:
            return 0.0 if self.value == target else math.inf
        return (self.value - target) / self.stderr


def _estimate(weights, confidence=3.0):
    w = np.asarray(weights, dtype=float)
    n = w.size
    stderr = float(w.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MCEstimate(float(w.mean()), stderr, n, confidence)


@dataclass(frozen=True)
class DiscretePath:
    """Event-time record of one discrete path; sizes use math.inf for explosion."""

    times: np.ndarray
    sizes: np.ndarray
    absorbed: float | None      # 0.0, math.inf, or None when still wandering

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=float)
        for state in (0.0, math.inf):
            hits = np.nonzero(sizes == state)[0]
            if hits.size and not np.all(sizes[hits[0]:] == state):
                raise ParameterError(f"path leaves the absorbing state {state}")


@dataclass(frozen=True)
class DiscreteSample:
    """Final states of a discrete simulation; math.inf marks exploded/capped paths."""

    finals: np.ndarray
    n_exploded: int
    n_capped: int
    paths: tuple | None = None

    @property
    def n_paths(self):
        return self.finals.size

    def defect_fraction(self):
        return float(np.isinf(self.finals).mean())


def _segment_tables(gf):
    tables = []
    for seg in gf.segments:
        counts = np.array(sorted(seg.offspring), dtype=int)
        weights = np.array([seg.offspring[int(n)] for n in counts], dtype=float)
        keep = weights > 0.0
        counts, weights = counts[keep], weights[keep]
        cum = np.cumsum(weights)
        tables.append((counts, cum, float(seg.kill),
                       float(cum[-1] if cum.size else 0.0) + float(seg.kill)))
    return tables


def _simulate_discrete_path(gf, tables, n0, s, t, rng, cap, record):
    n = int(n0)
    tau = float(s)
    absorbed = 0.0 if n == 0 else None
    capped = False
    times = [tau] if record else None
    sizes = [float(n)] if record else None

    while absorbed is None and tau < t:
        idx = gf.segment_index(tau)
        counts, cum, kill, lam = tables[idx]
        window_end = t if idx + 1 >= len(gf.breakpoints) else min(t, gf.breakpoints[idx + 1])
        rate = n * lam
        if rate == 0.0:
            tau = window_end
            continue
        wait = rng.exponential(1.0 / rate)
        if tau + wait >= window_end:
            tau = window_end      # residual clock resampled next segment (memoryless)
            continue
        tau += wait
        u = rng.uniform(0.0, lam)
        pick = np.searchsorted(cum, u, side="right")
        if pick >= counts.size:
            absorbed = math.inf   # q-channel: whole path explodes
            n = -1
        else:
            n += int(counts[pick]) - 1
            if n == 0:
                absorbed = 0.0
            elif n > cap:
                capped = True
                absorbed = math.inf
                n = -1
        if record:
            times.append(tau)
            sizes.append(math.inf if absorbed == math.inf else float(n))

    final = math.inf if absorbed == math.inf else float(n)
    path = None
    if record:
        times.append(float(t))
        sizes.append(final)
        path = DiscretePath(np.asarray(times), np.asarray(sizes), absorbed)
    return final, capped, path


def _fan_out(worker, n_paths):
    threads = _thread_count()
    if threads <= 1:
        return [worker(i) for i in range(n_paths)]
    results = [None] * n_paths
    chunk = max(1, n_paths // (4 * threads))
    ranges = [range(a, min(a + chunk, n_paths)) for a in range(0, n_paths, chunk)]

    def run_chunk(idx_range):
        return [(i, worker(i)) for i in idx_range]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for batch in pool.map(run_chunk, ranges):
            for i, res in batch:
                results[i] = res
    return results


def simulate_discrete(gf, n0, s, t, plan, n_paths, cap=1_000_000,
                      on_cap="flag", record_paths=False):
    """Simulate final states N_t of the discrete process started at N_s = n0.

    Capped paths (population beyond ``cap``) count toward the defect like
    explosions and are tallied separately; ``on_cap='raise'`` turns the first
    cap hit into ExplosionCapError.
    """
    if n0 < 0 or int(n0) != n0:
        raise ParameterError("n0 must be a non-negative integer")
    if not 0.0 <= s <= t:
        raise ParameterError(f"need 0 <= s <= t, got ({s}, {t})")
    if n_paths < 1:
        raise ParameterError("need at least one path")
    tables = _segment_tables(gf)

    def worker(i):
        rng = plan.generator(i)
        return _simulate_discrete_path(gf, tables, n0, s, t, rng, cap, record_paths)

    results = _fan_out(worker, n_paths)
    finals = np.array([r[0] for r in results])
    n_capped = sum(1 for r in results if r[1])
    if n_capped and on_cap == "raise":
        raise ExplosionCapError(f"{n_capped} paths exceeded the population cap {cap}")
    n_exploded = int(np.isinf(finals).sum())
    paths = tuple(r[2] for r in results) if record_paths else None
    return DiscreteSample(finals, n_exploded, n_capped, paths)


class FellerSchedule(StepFamily):
    """Piecewise-constant (drift a, diffusion b) mechanism for exact sampling."""

    def __init__(self, breakpoints, drifts, diffusions):
        drifts = tuple(float(a) for a in drifts)
        diffusions = tuple(float(b) for b in diffusions)
        if len(drifts) != len(diffusions):
            raise ParameterError("drifts and diffusions must align")
        if any(b < 0.0 for b in diffusions):
            raise ParameterError("diffusion coefficients must be non-negative")
        super().__init__(breakpoints, tuple(zip(drifts, diffusions)))

    @classmethod
    def from_field(cls, field):
        """Extract (a, b) steps from a field whose segments are purely quadratic."""
        for k, seg in enumerate(field.segments):
            if seg.kill != 0.0 or not seg.jumps.is_empty:
                raise ParameterError(f"segment {k} is not a quadratic mechanism")
        return cls(field.breakpoints,
                   [seg.drift for seg in field.segments],
                   [seg.diffusion for seg in field.segments])


def _feller_transition(rng, z, a, b, dt):
    if z == 0.0 or dt == 0.0:
        return z
    c = math.exp(-a * dt)
    if b == 0.0:
        return z * c
    kappa = b * dt if a == 0.0 else (b / a) * (1.0 - c)
    n_jumps = rng.poisson(z * c / kappa)
    return float(rng.gamma(n_jumps, kappa)) if n_jumps else 0.0


def simulate_feller(schedule, x, s, t, plan, n_paths):
    """Exact-in-law samples of Z_t for the quadratic mechanism started at Z_s = x."""
    if x < 0.0:
        raise ParameterError("initial state must be non-negative")
    if not 0.0 <= s <= t:
        raise ParameterError(f"need 0 <= s <= t, got ({s}, {t})")
    if n_paths < 1:
        raise ParameterError("need at least one path")
    pieces = [(a_b[0], a_b[1], hi - lo) for a_b, lo, hi in schedule.intervals(s, t)]

    def worker(i):
        rng = plan.generator(i)
        z = float(x)
        for a, b, dt in pieces:
            z = _feller_transition(rng, z, a, b, dt)
        return z

    finals = np.array(_fan_out(worker, n_paths))
    return DiscreteSample(finals, 0, 0, None)


def estimate_pgf(sample, z, confidence=3.0):
    """Empirical E[z^{N_t} 1_{N_t < oo}]; exploded paths contribute 0."""
    if not 0.0 <= z < 1.0:
        raise ParameterError("z must lie in [0, 1)")
    with np.errstate(invalid="ignore"):
        weights = np.power(z, sample.finals)   # 0^0 = 1, z^inf = 0
    return _estimate(weights, confidence)


def estimate_laplace(sample, theta, confidence=3.0):
    """Empirical E[e^{-theta Z_t}]; infinite states contribute 0."""
    if theta <= 0.0:
        raise ParameterError("theta must be positive")
    with np.errstate(over="ignore"):
        weights = np.exp(-theta * sample.finals)
    return _estimate(weights, confidence)


def estimate_mean(sample, confidence=3.0):
    """Sample mean of the final states; infinite on any exploded path."""
    if np.isinf(sample.finals).any():
        return MCEstimate(math.inf, math.inf, sample.n_paths, confidence)
    return _estimate(sample.finals, confidence)
