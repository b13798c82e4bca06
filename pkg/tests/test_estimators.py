import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from qarlab.checkfun import check_loss, psi
from qarlab.dgp import DgpConfig, ar_recursion, simulate
from qarlab.errors import (
    InsufficientDataError,
    InvalidConfigError,
    SingularDesignError,
)
from qarlab.estimators import (
    EXACT_ENUMERATION,
    INTERIOR_POINT,
    OLSAR,
    QuantileAR,
    bootstrap_xy,
    estimate_sparsity,
    fit_ols,
    fit_ols_xy,
    fit_quantile,
    fit_quantile_xy,
    hall_sheather_bandwidth,
)
from qarlab.rng import derive_seed

TAUS = (0.05, 0.25, 0.5, 0.75, 0.95)


def random_instance(seed, n=None):
    rng = np.random.default_rng(seed)
    if n is None:
        n = int(rng.integers(20, 201))
    x = np.cumsum(rng.normal(size=n))
    y = 0.2 + 0.8 * x + rng.standard_t(4, size=n)
    return x, y


class TestQuantileFitExamples:
    def test_three_point_median_fit(self):
        # enumerating all 3 bases: the line through (0,0) and (2,1) wins
        x = np.array([0.0, 1.0, 2.0])
        y = np.array([0.0, 1.0, 1.0])
        fit = fit_quantile_xy(x, y, 0.5, include_intercept=True,
                              method=EXACT_ENUMERATION)
        assert fit.mu_hat == 0.0
        assert fit.rho_hat == 0.5
        assert fit.objective == pytest.approx(0.25, abs=0)

        ip = fit_quantile_xy(x, y, 0.5, include_intercept=True)
        assert ip.objective <= fit.objective + 1e-8 * (1 + fit.objective)

    def test_noiseless_series_perfect_fit_exact_arithmetic(self):
        # rho = 0.5 is binary-exact, so the perfect fit is recovered exactly
        series = 0.5 ** np.arange(8)
        for tau in (0.1, 0.5, 0.9):
            fit = fit_quantile(series, tau, include_intercept=False,
                               method=EXACT_ENUMERATION)
            assert fit.rho_hat == 0.5
            assert fit.objective == 0.0

    def test_noiseless_series_perfect_fit(self):
        # consecutive observations of y_t = 0.9 * y_{t-1} starting from 1;
        # 0.9 is not binary-exact, so recovery is exact only up to rounding
        series = 0.9 ** np.arange(8)
        for tau in (0.1, 0.5, 0.9):
            fit = fit_quantile(series, tau, include_intercept=False,
                               method=EXACT_ENUMERATION)
            assert fit.rho_hat == pytest.approx(0.9, abs=1e-12)
            assert fit.objective <= 1e-14
            ip = fit_quantile(series, tau, include_intercept=False)
            assert ip.rho_hat == pytest.approx(0.9, abs=1e-6)
            assert ip.objective <= 1e-8

    def test_objective_is_recomputed_loss(self):
        for seed in range(5):
            x, y = random_instance(seed)
            for method in (INTERIOR_POINT, EXACT_ENUMERATION):
                fit = fit_quantile_xy(x, y, 0.3, method=method)
                resid = y - (fit.mu_hat + fit.rho_hat * x)
                target = float(np.sum(check_loss(resid, 0.3)))
                assert fit.objective == pytest.approx(target, rel=1e-10)

    def test_interior_point_matches_enumeration(self):
        worst = 0.0
        for seed in range(30):
            x, y = random_instance(seed)
            tau = TAUS[seed % len(TAUS)]
            exact = fit_quantile_xy(x, y, tau, method=EXACT_ENUMERATION)
            ip = fit_quantile_xy(x, y, tau, method=INTERIOR_POINT)
            rel = (ip.objective - exact.objective) / (1.0 + exact.objective)
            worst = max(worst, rel)
        assert worst <= 1e-8

    def test_enumeration_is_global_minimum(self):
        # no random parameter probe beats the enumerated optimum
        x, y = random_instance(123, n=60)
        fit = fit_quantile_xy(x, y, 0.25, method=EXACT_ENUMERATION)
        rng = np.random.default_rng(0)
        for _ in range(500):
            mu = fit.mu_hat + rng.normal() * 0.5
            rho = fit.rho_hat + rng.normal() * 0.5
            obj = float(np.sum(check_loss(y - mu - rho * x, 0.25)))
            assert obj >= fit.objective - 1e-12

    def test_subgradient_condition(self):
        for seed in range(8):
            x, y = random_instance(seed)
            tau = TAUS[seed % len(TAUS)]
            for method in (INTERIOR_POINT, EXACT_ENUMERATION):
                fit = fit_quantile_xy(x, y, tau, method=method)
                scores = psi(fit.residuals, tau)
                assert abs(scores.sum()) <= 2.0 + 1e-9
                assert abs(scores @ x) <= 2.0 * np.max(np.abs(x)) + 1e-9

    def test_affine_equivariance(self):
        x, y = random_instance(7, n=80)
        series = np.concatenate([[y[0]], y])  # irrelevant; fit on xy directly
        base = fit_quantile_xy(x, y, 0.5, method=EXACT_ENUMERATION)
        a, b = 2.5, -1.3
        scaled = fit_quantile_xy(a * x + b, a * y + b, 0.5, method=EXACT_ENUMERATION)
        assert scaled.rho_hat == pytest.approx(base.rho_hat, rel=1e-10)
        assert scaled.mu_hat == pytest.approx(a * base.mu_hat + b * (1 - base.rho_hat),
                                              rel=1e-9, abs=1e-9)

    def test_tau_stability_under_symmetric_noise(self):
        sample = simulate(DgpConfig(n=3000, c=-0.5 * 3000**0.5, gamma=0.5, seed=21))
        rhos = [fit_quantile(sample, tau).rho_hat for tau in (0.25, 0.5, 0.75)]
        assert max(rhos) - min(rhos) < 0.1

    def test_degenerate_designs_rejected(self):
        const = np.ones(10)
        y = np.arange(10.0)
        with pytest.raises(SingularDesignError):
            fit_quantile_xy(const, y, 0.5, include_intercept=True)
        with pytest.raises(SingularDesignError):
            fit_quantile_xy(np.zeros(10), y, 0.5, include_intercept=False)
        with pytest.raises(InsufficientDataError):
            fit_quantile(np.array([1.0, 2.0]), 0.5)

    def test_unknown_method_rejected(self):
        x, y = random_instance(0, n=20)
        with pytest.raises(InvalidConfigError):
            fit_quantile_xy(x, y, 0.5, method="simplex")


class TestOlsFit:
    def test_recursion_recovery(self):
        fit = fit_ols(np.array([1.0, 0.9, 0.81]), include_intercept=False)
        assert fit.rho_hat == pytest.approx(1.629 / 1.81, abs=1e-15)
        assert fit.rho_hat == pytest.approx(0.9, abs=1e-12)

    def test_constant_series_singular_under_intercept(self):
        with pytest.raises(SingularDesignError):
            fit_ols(np.full(20, 3.0), include_intercept=True)

    def test_normal_equations(self):
        for seed in range(5):
            x, y = random_instance(seed, n=200)
            fit = fit_ols_xy(x, y, include_intercept=True)
            resid = y - fit.mu_hat - fit.rho_hat * x
            scale = float(np.abs(y) @ np.abs(x))
            assert abs(resid.sum()) <= 1e-10 * len(x) * np.abs(y).max()
            assert abs(resid @ x) <= 1e-10 * scale
            bare = fit_ols_xy(x, y, include_intercept=False)
            resid = y - bare.rho_hat * x
            assert abs(resid @ x) <= 1e-10 * scale

    def test_mc_consistency_three_sigma(self):
        hits = 0
        trials = 500
        for r in range(trials):
            sample = simulate(DgpConfig(n=10_000, c=-1.0, gamma=0.5,
                                        seed=derive_seed(99, r)))
            x, y = sample.values[:-1], sample.values[1:]
            fit = fit_ols_xy(x, y, include_intercept=True)
            sxx = float(np.sum((x - x.mean()) ** 2))
            se = np.sqrt(fit.sigma2_hat / sxx)
            hits += abs(fit.rho_hat - sample.config.rho) <= 3 * se
        assert hits / trials >= 0.99


class TestSparsity:
    def test_uniform_density_recovered(self):
        res = np.random.default_rng(0).uniform(0, 1, 100_000)
        est = estimate_sparsity(res, 0.5)
        assert abs(est.value - 1.0) < 0.05

    def test_gaussian_density_recovered(self):
        res = np.random.default_rng(1).normal(size=100_000)
        est = estimate_sparsity(res, 0.5)
        assert abs(est.value - 0.39894) < 0.05 * 0.39894

    def test_too_few_residuals(self):
        with pytest.raises(InsufficientDataError):
            estimate_sparsity(np.arange(10.0), 0.5)

    def test_bandwidth_clamped_inside_unit_interval(self):
        h = hall_sheather_bandwidth(30, 0.05)
        assert 0 < h < 0.05
        assert 0.05 + h < 1 and 0.05 - h > 0

    def test_positive_even_with_tied_residuals(self):
        est = estimate_sparsity(np.zeros(100), 0.5)
        assert est.value > 0


class TestBootstrap:
    def test_deterministic_in_seed(self):
        sample = simulate(DgpConfig(n=300, c=-1.0, gamma=0.5, seed=5))
        a = bootstrap_xy(sample, 0.5, n_boot=80, seed=17)
        b = bootstrap_xy(sample, 0.5, n_boot=80, seed=17)
        assert a == b
        c = bootstrap_xy(sample, 0.5, n_boot=80, seed=18)
        assert c.se_rho != a.se_rho

    def test_minimum_resamples(self):
        sample = simulate(DgpConfig(n=100, c=-1.0, gamma=0.5, seed=5))
        with pytest.raises(InvalidConfigError):
            bootstrap_xy(sample, 0.5, n_boot=10, seed=0)

    def test_se_matches_mc_spread(self):
        # rho = 0.5 via c = -0.5 * k_n at n = 2000
        n = 2000
        c = -0.5 * n**0.5
        rhos = []
        for r in range(500):
            sample = simulate(DgpConfig(n=n, c=c, gamma=0.5, seed=derive_seed(31, r)))
            rhos.append(fit_quantile(sample, 0.5).rho_hat)
        mc_sd = np.std(rhos, ddof=1)
        sample = simulate(DgpConfig(n=n, c=c, gamma=0.5, seed=derive_seed(31, 1000)))
        boot = bootstrap_xy(sample, 0.5, n_boot=500, seed=3)
        assert abs(boot.se_rho / mc_sd - 1.0) < 0.25


class TestSklearnApi:
    def test_get_params_roundtrip_and_clone(self):
        est = QuantileAR(tau=0.25, fit_intercept=False)
        params = est.get_params()
        assert params["tau"] == 0.25 and params["fit_intercept"] is False
        cloned = clone(est)
        assert cloned.get_params() == params
        est.set_params(tau=0.75)
        assert est.tau == 0.75

    def test_fit_predict(self):
        sample = simulate(DgpConfig(n=500, c=-1.0, gamma=0.5, mu=0.2, seed=9))
        est = QuantileAR(tau=0.5).fit(sample.values)
        direct = fit_quantile(sample, 0.5)
        assert est.coef_[0] == direct.rho_hat
        assert est.intercept_ == direct.mu_hat
        assert est.predict(2.0) == pytest.approx(direct.mu_hat + 2.0 * direct.rho_hat)

    def test_ols_wrapper(self):
        sample = simulate(DgpConfig(n=500, c=-1.0, gamma=0.5, seed=9))
        est = OLSAR().fit(sample.values)
        direct = fit_ols(sample)
        assert est.coef_[0] == direct.rho_hat
        assert est.sigma2_ == direct.sigma2_hat

    def test_not_fitted_error(self):
        with pytest.raises(NotFittedError):
            QuantileAR().predict(1.0)
        with pytest.raises(NotFittedError):
            OLSAR().predict(1.0)
