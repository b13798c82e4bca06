import math

import numpy as np
import pytest
from scipy.stats import norm

from qarlab.dgp import DgpConfig, GaussianInnovations, Sample, ar_recursion, simulate
from qarlab.errors import InvalidConfigError
from qarlab.limits import (
    NEAR_EXPLOSIVE,
    NEAR_STATIONARY,
    UNIT_GAMMA1,
    CauchyLaw,
    EmpiricalLaw,
    NormalLaw,
    bahadur_gap,
    normalize_stat,
    ou_ratio_functional,
    reference_law_near_explosive,
    reference_law_near_stationary,
    regime_for,
    sample_ou_ratio,
)
from qarlab.montecarlo import ks_statistic
from qarlab.rng import derive_seed


class TestNormalizeStat:
    def test_zero_deviation_in_every_regime(self):
        configs = [
            DgpConfig(n=100, c=-1.0, gamma=0.5),
            DgpConfig(n=100, c=1.0, gamma=0.5),
            DgpConfig(n=100, c=0.0, gamma=0.5),
        ]
        for config in configs:
            regime = regime_for(config)
            assert normalize_stat(config.rho, config, regime) == 0.0

    def test_near_stationary_arithmetic(self):
        config = DgpConfig(n=100, c=-1.0, gamma=0.5)  # k_n = 10
        regime = regime_for(config)
        stat = normalize_stat(config.rho + 0.01, config, regime)
        assert stat == pytest.approx(math.sqrt(1000) * 0.01, rel=1e-12)
        assert stat == pytest.approx(0.31623, abs=5e-6)

    def test_near_explosive_arithmetic(self):
        config = DgpConfig(n=4, c=1.0, gamma=0.5)  # k_n = 2, rho = 1.5, rho^4 = 5.0625
        regime = regime_for(config)
        stat = normalize_stat(config.rho + 0.1, config, regime)
        assert stat == pytest.approx(2 * 5.0625 / 2 * 0.1, rel=1e-12)
        assert stat == pytest.approx(0.50625, rel=1e-12)

    def test_unit_gamma1_arithmetic(self):
        config = DgpConfig(n=50, c=-2.0, gamma=1.0)
        regime = regime_for(config)
        assert regime.regime == UNIT_GAMMA1
        assert normalize_stat(config.rho + 0.01, config, regime) == pytest.approx(0.5)

    def test_linearity_in_deviation(self):
        config = DgpConfig(n=200, c=-1.0, gamma=0.7)
        regime = regime_for(config)
        one = normalize_stat(config.rho + 0.003, config, regime)
        two = normalize_stat(config.rho + 0.006, config, regime)
        assert two == pytest.approx(2 * one, rel=1e-14)

    def test_regime_mismatch_rejected(self):
        stationary = DgpConfig(n=100, c=-1.0, gamma=0.5)
        explosive = DgpConfig(n=100, c=1.0, gamma=0.5)
        with pytest.raises(InvalidConfigError):
            normalize_stat(1.0, explosive, regime_for(stationary))
        with pytest.raises(InvalidConfigError):
            normalize_stat(1.0, stationary, regime_for(explosive))

    def test_regime_factory_fields(self):
        config = DgpConfig(n=100, c=-2.0, gamma=0.5, innovation=GaussianInnovations(2.0))
        regime = regime_for(config)
        assert regime.regime == NEAR_STATIONARY
        assert regime.d_mu == 10.0
        assert regime.d_rho == pytest.approx(math.sqrt(1000))
        assert regime.b_rho == pytest.approx(4.0 / 4.0)
        explosive = regime_for(DgpConfig(n=100, c=1.0, gamma=0.5))
        assert explosive.regime == NEAR_EXPLOSIVE
        assert explosive.d_rho == pytest.approx(1.1**100 * 10)
        assert explosive.b_rho is None


class TestReferenceLaws:
    def test_ols_gaussian_limit(self):
        law = reference_law_near_stationary("ols", c=-1.0)
        assert isinstance(law, NormalLaw)
        assert law.variance == 2.0

    def test_quantile_median_gaussian_limit_is_pi(self):
        f = float(norm.pdf(0.0))
        law = reference_law_near_stationary("quantile", c=-1.0, sigma=1.0, f=f, tau=0.5)
        assert law.variance == pytest.approx(math.pi, rel=1e-12)

    def test_requires_negative_c(self):
        with pytest.raises(InvalidConfigError):
            reference_law_near_stationary("quantile", c=0.0, f=0.4, tau=0.5)

    def test_explosive_laws(self):
        assert reference_law_near_explosive("ols") == CauchyLaw(0.0, 1.0)
        law = reference_law_near_explosive("quantile", sigma=1.0, tau=0.5)
        assert law.scale == pytest.approx(0.5, rel=1e-14)
        tiny = reference_law_near_explosive("quantile", sigma=1.0, tau=1e-8)
        assert tiny.scale < 1e-3

    def test_variance_symmetric_in_tau(self):
        innovation = GaussianInnovations(1.0)
        for tau in (0.1, 0.25, 0.4):
            a = reference_law_near_stationary(
                "quantile", -1.0, 1.0, innovation.density_at_quantile(tau), tau)
            b = reference_law_near_stationary(
                "quantile", -1.0, 1.0, innovation.density_at_quantile(1 - tau), 1 - tau)
            assert a.variance == pytest.approx(b.variance, rel=1e-12)


class TestLawCdfs:
    def test_monotone_with_proper_limits(self):
        laws = [NormalLaw(0.5, 2.0), CauchyLaw(-1.0, 0.7),
                EmpiricalLaw(np.random.default_rng(0).normal(size=2000))]
        grid = np.linspace(-50, 50, 401)
        for law in laws:
            values = np.asarray(law.cdf(grid))
            assert np.all(np.diff(values) >= 0)
            assert law.cdf(-1e12) <= 1e-6
            assert law.cdf(1e12) >= 1 - 1e-6

    def test_center_is_median(self):
        assert NormalLaw(3.0, 4.0).cdf(3.0) == pytest.approx(0.5)
        assert CauchyLaw(-2.0, 5.0).cdf(-2.0) == pytest.approx(0.5)

    def test_quantile_inverts_cdf(self):
        for law in (NormalLaw(0.0, 3.0), CauchyLaw(1.0, 2.0)):
            q = np.array([0.05, 0.3, 0.5, 0.9])
            assert np.allclose(law.cdf(law.quantile(q)), q, atol=1e-12)

    def test_empirical_law_validation_and_interp(self):
        with pytest.raises(InvalidConfigError):
            EmpiricalLaw(np.arange(100.0))
        sample = np.random.default_rng(1).normal(size=5000)
        law = EmpiricalLaw(sample)
        assert np.all(np.diff(law.sample) >= 0)
        assert law.cdf(law.sample[0] - 1) == 0.0
        assert law.cdf(law.sample[-1] + 1) == 1.0
        med = law.quantile(0.5)
        assert abs(med - np.median(sample)) < 0.05
        doubled = law.scaled(2.0)
        assert doubled.quantile(0.5) == pytest.approx(2 * med, rel=1e-12)


class TestOuRatio:
    def test_degenerate_increments_detected(self):
        num, den = ou_ratio_functional(np.zeros((3, 1000)), 0.0)
        assert np.all(den == 0.0)
        assert np.all(num == 0.0)

    def test_deterministic_in_seed(self):
        a = sample_ou_ratio(0.0, grid_points=1000, draws=1000, seed=5)
        b = sample_ou_ratio(0.0, grid_points=1000, draws=1000, seed=5)
        assert np.array_equal(a.sample, b.sample)
        c = sample_ou_ratio(0.0, grid_points=1000, draws=1000, seed=6)
        assert not np.array_equal(a.sample, c.sample)

    def test_chunking_does_not_change_the_law(self):
        a = sample_ou_ratio(-1.0, grid_points=1000, draws=1000, seed=5, chunk=64)
        b = sample_ou_ratio(-1.0, grid_points=1000, draws=1000, seed=5, chunk=1000)
        assert np.array_equal(a.sample, b.sample)

    def test_preconditions(self):
        with pytest.raises(InvalidConfigError):
            sample_ou_ratio(0.0, grid_points=100, draws=1000)
        with pytest.raises(InvalidConfigError):
            sample_ou_ratio(0.0, grid_points=1000, draws=100)

    def test_grid_refinement_self_convergence(self):
        # independent second implementation: exact Brownian path at c = 0 via
        # cumulative sums on a 4x finer grid, one long generator stream
        draws, grid = 50_000, 4096
        primary = sample_ou_ratio(0.0, grid_points=grid, draws=draws, seed=2024)

        fine = 4 * grid
        dt = 1.0 / fine
        rng = np.random.default_rng(987654321)
        stats = np.empty(draws)
        for lo in range(0, draws, 1000):
            hi = min(lo + 1000, draws)
            dw = rng.normal(0.0, math.sqrt(dt), (hi - lo, fine))
            w = np.cumsum(dw, axis=1)
            w_left = np.concatenate([np.zeros((hi - lo, 1)), w[:, :-1]], axis=1)
            int_w_dw = np.sum(w_left * dw, axis=1)
            int_w = np.sum(w_left, axis=1) * dt
            int_w2 = np.sum(w_left**2, axis=1) * dt
            w1 = w[:, -1]
            stats[lo:hi] = (int_w_dw - w1 * int_w) / (int_w2 - int_w**2)
        reference = EmpiricalLaw(stats)
        assert ks_statistic(primary.sample, reference) <= 0.02

    def test_median_stable_under_grid_doubling(self):
        base = sample_ou_ratio(0.0, grid_points=1024, draws=4000, seed=3)
        finer = sample_ou_ratio(0.0, grid_points=2048, draws=4000, seed=4)
        # resampling band: spread of the median across 1% subsamples
        rng = np.random.default_rng(0)
        medians = [np.median(rng.choice(base.sample, size=len(base.sample),
                                        replace=True)) for _ in range(200)]
        width = np.quantile(medians, 0.995) - np.quantile(medians, 0.005)
        assert abs(np.median(base.sample) - np.median(finer.sample)) <= max(width, 0.05)


class TestBahadurGap:
    def test_perfect_fit_side_vanishes(self):
        # noiseless line: the fitted side is exactly zero, so the gap equals
        # the linear form built from psi_tau(0 - q_tau)
        config = DgpConfig(n=60, c=-1.0, gamma=0.5, mu=0.4, seed=0)
        values = ar_recursion(config.rho, np.full(60, config.mu))
        sample = Sample(values, config)
        tau = 0.5
        f = config.innovation.density_at_quantile(tau)
        gap = bahadur_gap(sample, tau, f)

        x = values[:-1]
        n, k_n = config.n, config.k_n
        scores = np.full(60, tau - 1.0)  # psi at exactly-zero errors (q_tau = 0)
        b_rho = config.innovation.variance / (-2 * config.c)
        linear = np.array([scores.sum() / math.sqrt(n),
                           (scores @ x) / math.sqrt(n * k_n) / b_rho]) / f
        assert gap == pytest.approx(float(np.max(np.abs(linear))), rel=1e-9)

    def test_invariant_to_cancelling_shift(self):
        config = DgpConfig(n=400, c=-1.0, gamma=0.5, mu=0.0, seed=8)
        sample = simulate(config)
        tau, delta = 0.5, 0.7
        f = config.innovation.density_at_quantile(tau)
        base = bahadur_gap(sample, tau, f)
        shifted_config = DgpConfig(n=400, c=-1.0, gamma=0.5, mu=delta, seed=8)
        shifted = Sample(sample.values, shifted_config)
        moved = bahadur_gap(shifted, tau, f, q_tau=config.innovation.quantile(tau) - delta)
        assert moved == pytest.approx(base, rel=1e-12)

    def test_gap_shrinks_with_n(self):
        medians = []
        for n in (500, 4000):
            gaps = [
                bahadur_gap(simulate(DgpConfig(n=n, c=-1.0, gamma=0.5,
                                               seed=derive_seed(55, r))),
                            0.5, float(norm.pdf(0.0)))
                for r in range(150)
            ]
            medians.append(np.median(gaps))
        assert medians[1] < medians[0]

    def test_requires_near_stationary(self):
        sample = simulate(DgpConfig(n=100, c=1.0, gamma=0.5, seed=1))
        with pytest.raises(InvalidConfigError):
            bahadur_gap(sample, 0.5, 0.4)
