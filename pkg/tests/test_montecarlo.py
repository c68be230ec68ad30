import math

import numpy as np
import pytest

from loewner_branch import (CSBPModel, ExplosionCapError, FellerSchedule, GeneratingFamily,
                            MCEstimate, ParameterError, PGFSegment, RNGSeedPlan,
                            estimate_laplace, estimate_mean, estimate_pgf, evolve_pgf,
                            mean, simulate_discrete, simulate_feller, transition_laplace,
                            variance)
from conftest import critical_binary_family, feller_field, yule_family

N_PATHS = 20_000


@pytest.fixture(scope="module")
def plan():
    return RNGSeedPlan(987654)


class TestReproducibility:
    def test_discrete_bit_identical(self, plan):
        a = simulate_discrete(critical_binary_family(), 1, 0.0, 1.0, plan, 500)
        b = simulate_discrete(critical_binary_family(), 1, 0.0, 1.0, plan, 500)
        assert np.array_equal(a.finals, b.finals)

    def test_feller_bit_identical(self, plan):
        sched = FellerSchedule((0.0,), (0.0,), (1.0,))
        a = simulate_feller(sched, 1.0, 0.0, 1.0, plan, 500)
        b = simulate_feller(sched, 1.0, 0.0, 1.0, plan, 500)
        assert np.array_equal(a.finals, b.finals)

    def test_distinct_seeds_differ(self):
        a = simulate_discrete(yule_family(), 1, 0.0, 1.0, RNGSeedPlan(1), 200)
        b = simulate_discrete(yule_family(), 1, 0.0, 1.0, RNGSeedPlan(2), 200)
        assert not np.array_equal(a.finals, b.finals)

    def test_thread_fanout_is_deterministic(self, plan, monkeypatch):
        serial = simulate_discrete(yule_family(), 1, 0.0, 1.0, plan, 400)
        monkeypatch.setenv("LOEWNER_BRANCH_THREADS", "4")
        threaded = simulate_discrete(yule_family(), 1, 0.0, 1.0, plan, 400)
        assert np.array_equal(serial.finals, threaded.finals)


class TestDegenerateCases:
    def test_frozen_family_keeps_state(self, plan):
        gf = GeneratingFamily((0.0,), (PGFSegment(0.0, {}),))
        sample = simulate_discrete(gf, 3, 0.0, 5.0, plan, 200)
        assert np.all(sample.finals == 3.0)
        est = estimate_pgf(sample, 0.5)
        assert est.value == pytest.approx(0.5 ** 3, abs=1e-15)
        assert est.stderr == 0.0

    def test_pure_drift_is_deterministic(self, plan):
        sched = FellerSchedule((0.0,), (1.0,), (0.0,))
        sample = simulate_feller(sched, 1.0, 0.0, 1.0, plan, 100)
        assert np.allclose(sample.finals, math.exp(-1.0))

    def test_zero_start_stays_zero(self, plan):
        sched = FellerSchedule((0.0,), (0.0,), (1.0,))
        sample = simulate_feller(sched, 0.0, 0.0, 1.0, plan, 50)
        assert np.all(sample.finals == 0.0)
        assert estimate_laplace(sample, 1.0).value == 1.0

    def test_zero_population_absorbed(self, plan):
        sample = simulate_discrete(yule_family(), 0, 0.0, 4.0, plan, 50)
        assert np.all(sample.finals == 0.0)


class TestAbsorption:
    def test_paths_never_leave_absorbing_states(self, plan):
        gf = GeneratingFamily((0.0,), (PGFSegment(0.5, {0: 1.5, 2: 1.0}),))
        sample = simulate_discrete(gf, 2, 0.0, 3.0, plan, 300, record_paths=True)
        # DiscretePath validates the absorbing invariant on construction
        assert sample.paths is not None
        hit_zero = [p for p in sample.paths if p.absorbed == 0.0]
        hit_inf = [p for p in sample.paths if p.absorbed == math.inf]
        assert hit_zero and hit_inf
        for path in hit_inf:
            assert math.isinf(path.sizes[-1])

    def test_explosion_cap_flagging(self, plan):
        sample = simulate_discrete(yule_family(), 1, 0.0, 6.0, plan, 300, cap=8)
        assert sample.n_capped > 0
        assert np.isinf(sample.finals).sum() >= sample.n_capped

    def test_explosion_cap_raise_mode(self, plan):
        with pytest.raises(ExplosionCapError):
            simulate_discrete(yule_family(), 1, 0.0, 6.0, plan, 300, cap=8, on_cap="raise")


class TestAgainstClosedForms:
    def test_critical_binary_extinction(self, plan):
        sample = simulate_discrete(critical_binary_family(), 1, 0.0, 1.0, plan, N_PATHS)
        est = estimate_pgf(sample, 0.0)
        assert est.covers(0.5)
        assert est.stderr < 0.005

    def test_pure_birth_mean_and_pgf(self, plan):
        sample = simulate_discrete(yule_family(), 1, 0.0, 1.0, plan, N_PATHS)
        assert estimate_mean(sample).covers(math.e)
        analytic = evolve_pgf(yule_family(), 0.5, 0.0, 1.0)
        assert estimate_pgf(sample, 0.5).covers(analytic)

    def test_quadratic_mechanism_moments(self, plan):
        sched = FellerSchedule((0.0,), (0.0,), (1.0,))
        sample = simulate_feller(sched, 1.0, 0.0, 1.0, plan, N_PATHS)
        assert estimate_mean(sample).covers(1.0)
        zero_freq = estimate_pgf(sample, 0.0)
        assert zero_freq.covers(math.exp(-1.0))
        assert estimate_laplace(sample, 1.0).covers(math.exp(-0.5))
        # variance with its moment-based standard error
        finals = sample.finals
        var_hat = finals.var(ddof=1)
        m4 = np.mean((finals - finals.mean()) ** 4)
        se_var = math.sqrt((m4 - var_hat ** 2) / finals.size)
        assert abs(var_hat - 2.0) <= 3.0 * se_var

    def test_model_moments_match_simulation(self, plan):
        model = CSBPModel(feller_field(1.0, 1.0))
        sched = FellerSchedule((0.0,), (1.0,), (1.0,))
        sample = simulate_feller(sched, 1.0, 0.0, 1.0, plan, N_PATHS)
        mu = mean(model, 0.0, 1.0, 1.0)
        assert estimate_mean(sample).covers(mu)
        var_exact = variance(model, 0.0, 1.0, 1.0)
        finals = sample.finals
        var_hat = finals.var(ddof=1)
        m4 = np.mean((finals - finals.mean()) ** 4)
        se_var = math.sqrt((m4 - var_hat ** 2) / finals.size)
        assert abs(var_hat - var_exact) <= 3.0 * se_var
        lap = estimate_laplace(sample, 2.0)
        assert lap.covers(transition_laplace(model, 0.0, 1.0, 1.0, 2.0))

    def test_two_segment_schedule(self, plan):
        # drift-only then quadratic: mean is exp(-1) either way
        sched = FellerSchedule((0.0, 0.5), (2.0, 0.0), (0.0, 1.0))
        sample = simulate_feller(sched, 1.0, 0.0, 1.0, plan, N_PATHS)
        assert estimate_mean(sample).covers(math.exp(-1.0))

    def test_inhomogeneous_discrete_rates(self, plan):
        # fission at rate 1 for t<0.5, frozen afterwards: mean e^{0.5}
        gf = GeneratingFamily((0.0, 0.5), (PGFSegment(0.0, {2: 1.0}), PGFSegment(0.0, {})))
        sample = simulate_discrete(gf, 1, 0.0, 1.0, plan, N_PATHS)
        assert estimate_mean(sample).covers(math.exp(0.5))


class TestCoverage:
    def test_three_sigma_band_coverage(self):
        hits = 0
        for rep in range(20):
            plan = RNGSeedPlan(52000 + rep)
            sample = simulate_discrete(critical_binary_family(), 1, 0.0, 1.0, plan, 2500)
            hits += estimate_pgf(sample, 0.0).covers(0.5)
        assert hits >= 19


class TestEstimates:
    def test_estimate_validation(self, plan):
        sample = simulate_discrete(yule_family(), 1, 0.0, 0.5, plan, 100)
        with pytest.raises(ParameterError):
            estimate_pgf(sample, 1.0)
        with pytest.raises(ParameterError):
            estimate_laplace(sample, 0.0)

    def test_interval_and_zscore(self):
        est = MCEstimate(1.0, 0.1, 100, confidence=3.0)
        assert est.interval() == (0.7, 1.3)
        assert est.zscore(0.9) == pytest.approx(1.0)
        assert est.covers(1.25)
        assert not est.covers(1.35)

    def test_exploded_paths_weigh_zero(self, plan):
        gf = GeneratingFamily((0.0,), (PGFSegment(5.0, {}),))
        sample = simulate_discrete(gf, 1, 0.0, 2.0, plan, 400)
        assert sample.n_exploded > 0
        est = estimate_pgf(sample, 0.9)
        expected_survival = math.exp(-10.0)   # exp(-q*(t-s)) survival weight
        assert est.value <= 0.9 * (1 - sample.defect_fraction()) + 1e-12
        assert sample.defect_fraction() == pytest.approx(1.0 - expected_survival, abs=0.01)

    def test_parameter_validation(self, plan):
        with pytest.raises(ParameterError):
            simulate_discrete(yule_family(), -1, 0.0, 1.0, plan, 10)
        with pytest.raises(ParameterError):
            simulate_discrete(yule_family(), 1, 2.0, 1.0, plan, 10)
        with pytest.raises(ParameterError):
            simulate_feller(FellerSchedule((0.0,), (0.0,), (1.0,)), -1.0, 0.0, 1.0, plan, 10)
        with pytest.raises(ParameterError):
            FellerSchedule((0.0,), (0.0,), (-1.0,))
