"""AR(1) estimation by check-loss quantile regression and least squares.

The quantile fit minimizes sum_t rho_tau(y_t - mu - rho * y_{t-1}) over the
intercept+lag design. Two methods are provided:

``interior_point``
    Mehrotra-style primal-dual interior point on the bounded-variable dual
    LP max{y'a : X'a = (1-tau) X'1, a in [0,1]^n}. The dual multiplier of
    the equality constraint is the coefficient vector. Duality-gap
    tolerance 1e-9 (relative), at most 100 iterations. The design columns
    and the response are rescaled by their max-abs first; the check loss is
    positively homogeneous, so this changes nothing but conditioning.

``exact_enumeration``
    Evaluates every candidate basis (each pair of observations for the
    intercept model, each single observation without intercept) and keeps
    the best, ties broken by the lexicographically smallest index pair.
    O(n^2) bases, so only sensible for small n; it is the correctness
    oracle for the interior-point method.

Also here: OLS fitting, the Siddiqui sparsity estimator with Hall-Sheather
bandwidth, the xy (pairs) bootstrap, and sklearn-style wrappers
``QuantileAR`` / ``OLSAR``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .checkfun import check_loss
from .errors import (
    BootstrapFailureError,
    InsufficientDataError,
    InvalidConfigError,
    SingularDesignError,
    SolverFailureError,
)
from .rng import derive_seed, generator

DUALITY_GAP_TOL = 1e-9
MAX_ITERATIONS = 100
ENUMERATION_MAX_N = 3000

INTERIOR_POINT = "interior_point"
EXACT_ENUMERATION = "exact_enumeration"


# ---------------------------------------------------------------------------
# input validation helpers

def as_series(data, min_len: int = 3) -> np.ndarray:
    """Coerce a Sample or 1-D sequence to a float array and validate it."""
    values = np.asarray(getattr(data, "values", data), dtype=float)
    if values.ndim != 1:
        raise InvalidConfigError(f"series must be one-dimensional, got shape {values.shape}")
    if len(values) < min_len:
        raise InsufficientDataError(f"series needs at least {min_len} values, got {len(values)}")
    if not np.all(np.isfinite(values)):
        raise InvalidConfigError("series contains non-finite values")
    return values


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise InvalidConfigError(f"tau must lie in (0, 1), got {tau}")
    return tau


def _lag_pairs(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return values[:-1], values[1:]


def _check_design(x: np.ndarray, y: np.ndarray, include_intercept: bool) -> None:
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidConfigError("x and y must be 1-D arrays of equal length")
    if len(x) < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidConfigError("design contains non-finite values")
    if include_intercept:
        if np.ptp(x) == 0.0:
            raise SingularDesignError("lag values are all identical; intercept design is singular")
    elif np.max(np.abs(x)) == 0.0:
        raise SingularDesignError("lag values are all zero; no-intercept design is singular")


def _design_matrix(x: np.ndarray, include_intercept: bool) -> np.ndarray:
    if include_intercept:
        return np.column_stack([np.ones(len(x)), x])
    return x[:, None]


# ---------------------------------------------------------------------------
# result types

@dataclass(frozen=True)
class SolverInfo:
    iterations: int
    duality_gap: float
    method: str


@dataclass(frozen=True)
class QuantileFit:
    """Check-loss fit: intercept mu_hat (None without intercept), slope rho_hat.

    ``objective`` is sum_t rho_tau(residual_t) recomputed from the returned
    parameters, and ``residuals`` are y_t - mu_hat - rho_hat * y_{t-1}.
    """

    tau: float
    mu_hat: float | None
    rho_hat: float
    objective: float
    residuals: np.ndarray
    solver_info: SolverInfo


@dataclass(frozen=True)
class OlsFit:
    """Least-squares fit; sigma2_hat is the residual variance SSR / (n - p)."""

    mu_hat: float | None
    rho_hat: float
    sigma2_hat: float


@dataclass(frozen=True)
class SparsityEstimate:
    """Estimated density of the residual law at its tau-quantile."""

    value: float
    bandwidth: float

    def __post_init__(self):
        if not self.value > 0:
            raise InvalidConfigError(f"sparsity estimate must be positive, got {self.value}")


@dataclass(frozen=True)
class XyBootstrap:
    """Pairs-bootstrap standard errors for (mu_hat, rho_hat)."""

    se_mu: float | None
    se_rho: float
    n_resamples: int
    n_redraws: int


# ---------------------------------------------------------------------------
# solvers

def _interior_point(X: np.ndarray, y: np.ndarray, tau: float, tol: float,
                    max_iter: int) -> tuple[np.ndarray, int, float]:
    n, p = X.shape
    col_scale = np.abs(X).max(axis=0)
    y_scale = max(float(np.abs(y).max()), 1e-300)
    Xs = X / col_scale
    ys = y / y_scale

    a = np.full(n, 1.0 - tau)
    s = np.full(n, tau)
    beta, *_ = np.linalg.lstsq(Xs, ys, rcond=None)
    r = ys - Xs @ beta
    kappa = max(1e-4 * float(np.mean(np.abs(r))), 1e-8)
    w = np.maximum(r, 0.0) + kappa
    v = np.maximum(-r, 0.0) + kappa
    b0 = (1.0 - tau) * Xs.sum(axis=0)
    dual_shift = (1.0 - tau) * float(ys.sum())

    def step_len(z, dz):
        shrink = dz < 0
        if not np.any(shrink):
            return 1.0
        return min(1.0, 0.9995 * float(np.min(-z[shrink] / dz[shrink])))

    gap = np.inf
    for it in range(1, max_iter + 1):
        g = ys - Xs @ beta
        primal_obj = float(np.sum(g * (tau - (g < 0))))
        gap = primal_obj - (float(ys @ a) - dual_shift)
        if not np.isfinite(gap):
            raise SolverFailureError("interior point diverged (non-finite duality gap)")
        if gap < tol * (1.0 + abs(primal_obj)):
            return beta * (y_scale / col_scale), it - 1, gap

        r_p = b0 - Xs.T @ a
        d = a * s / np.maximum(v * s + w * a, 1e-300)
        XtDX = Xs.T @ (d[:, None] * Xs)

        # predictor: pure Newton step on the KKT system
        rhs = Xs.T @ (d * g) - r_p
        db_aff = np.linalg.solve(XtDX, rhs)
        da_aff = d * (g - Xs @ db_aff)
        dv_aff = -v - (v / a) * da_aff
        dw_aff = -w + (w / s) * da_aff

        ap = min(step_len(a, da_aff), step_len(s, -da_aff))
        ad = min(step_len(v, dv_aff), step_len(w, dw_aff))
        mu = (a @ v + s @ w) / (2 * n)
        mu_aff = ((a + ap * da_aff) @ (v + ad * dv_aff)
                  + (s - ap * da_aff) @ (w + ad * dw_aff)) / (2 * n)
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.1

        # corrector with centering and second-order complementarity terms
        comp_a = sigma * mu - da_aff * dv_aff
        comp_s = sigma * mu + da_aff * dw_aff
        q = comp_a / a - comp_s / s
        rhs = Xs.T @ (d * (g + q)) - r_p
        db = np.linalg.solve(XtDX, rhs)
        da = d * (g + q - Xs @ db)
        dv = -v + comp_a / a - (v / a) * da
        dw = -w + comp_s / s + (w / s) * da

        ap = min(step_len(a, da), step_len(s, -da))
        ad = min(step_len(v, dv), step_len(w, dw))
        a = a + ap * da
        s = s - ap * da
        beta = beta + ad * db
        v = v + ad * dv
        w = w + ad * dw

    raise SolverFailureError(
        f"interior point did not reach gap {tol:g} within {max_iter} iterations "
        f"(last gap {gap:.3e})"
    )


def _enumerate_bases(X: np.ndarray, y: np.ndarray, tau: float) -> tuple[np.ndarray, int]:
    n, p = X.shape
    if n > ENUMERATION_MAX_N:
        raise InvalidConfigError(
            f"exact enumeration is O(n^2) bases; refusing n={n} > {ENUMERATION_MAX_N}"
        )
    if p == 1:
        x = X[:, 0]
        keep = np.flatnonzero(x != 0.0)
        cand = (y[keep] / x[keep])[:, None]
    else:
        x = X[:, 1]
        ii, jj = np.triu_indices(n, k=1)
        ok = x[ii] != x[jj]
        ii, jj = ii[ok], jj[ok]
        if ii.size == 0:
            raise SingularDesignError("no pair of observations with distinct lag values")
        slope = (y[ii] - y[jj]) / (x[ii] - x[jj])
        icept = y[ii] - slope * x[ii]
        cand = np.column_stack([icept, slope])

    best_obj = np.inf
    best = None
    for lo in range(0, len(cand), 4096):
        block = cand[lo:lo + 4096]
        resid = y[None, :] - block @ X.T
        obj = np.sum(resid * (tau - (resid < 0)), axis=1)
        k = int(np.argmin(obj))
        # strict < keeps the earlier (lexicographically smaller) basis on ties
        if obj[k] < best_obj:
            best_obj = float(obj[k])
            best = block[k]
    return np.asarray(best, dtype=float), len(cand)


def fit_quantile_xy(x, y, tau: float, include_intercept: bool = True,
                    method: str = INTERIOR_POINT, tol: float = DUALITY_GAP_TOL,
                    max_iter: int = MAX_ITERATIONS) -> QuantileFit:
    """Fit the conditional tau-quantile line of y on x by check-loss minimization."""
    tau = check_tau(tau)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_design(x, y, include_intercept)
    X = _design_matrix(x, include_intercept)

    if method == INTERIOR_POINT:
        beta, iterations, gap = _interior_point(X, y, tau, tol, max_iter)
    elif method == EXACT_ENUMERATION:
        beta, iterations, gap = *_enumerate_bases(X, y, tau), 0.0
    else:
        raise InvalidConfigError(f"unknown method {method!r}")

    residuals = y - X @ beta
    objective = float(np.sum(check_loss(residuals, tau)))
    mu_hat = float(beta[0]) if include_intercept else None
    rho_hat = float(beta[-1])
    return QuantileFit(tau=tau, mu_hat=mu_hat, rho_hat=rho_hat, objective=objective,
                       residuals=residuals,
                       solver_info=SolverInfo(int(iterations), float(gap), method))


def fit_quantile(series, tau: float, include_intercept: bool = True,
                 method: str = INTERIOR_POINT, tol: float = DUALITY_GAP_TOL,
                 max_iter: int = MAX_ITERATIONS) -> QuantileFit:
    """Quantile-autoregression fit of a series: regress y_t on y_{t-1}."""
    values = as_series(series)
    x, y = _lag_pairs(values)
    return fit_quantile_xy(x, y, tau, include_intercept, method, tol, max_iter)


def fit_ols_xy(x, y, include_intercept: bool = True) -> OlsFit:
    """Least-squares fit of y on x (slope = sum x*y / sum x^2 without intercept)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_design(x, y, include_intercept)
    n = len(x)
    if include_intercept:
        xc = x - x.mean()
        sxx = float(xc @ xc)
        if sxx == 0.0:
            raise SingularDesignError("zero demeaned sum of squares")
        rho_hat = float(xc @ (y - y.mean())) / sxx
        mu_hat = float(y.mean() - rho_hat * x.mean())
        residuals = y - mu_hat - rho_hat * x
        dof = n - 2
    else:
        sxx = float(x @ x)
        rho_hat = float(x @ y) / sxx
        mu_hat = None
        residuals = y - rho_hat * x
        dof = n - 1
    sigma2_hat = float(residuals @ residuals) / max(dof, 1)
    return OlsFit(mu_hat=mu_hat, rho_hat=rho_hat, sigma2_hat=sigma2_hat)


def fit_ols(series, include_intercept: bool = True) -> OlsFit:
    """Least-squares autoregression fit of a series."""
    values = as_series(series)
    x, y = _lag_pairs(values)
    return fit_ols_xy(x, y, include_intercept)


# ---------------------------------------------------------------------------
# sparsity estimation

def hall_sheather_bandwidth(m: int, tau: float, alpha: float = 0.05) -> float:
    """Hall-Sheather bandwidth for quantile density estimation, clamped into (0,1)."""
    z_tau = norm.ppf(tau)
    h = (m ** (-1.0 / 3.0) * norm.ppf(1.0 - alpha / 2.0) ** (2.0 / 3.0)
         * (1.5 * norm.pdf(z_tau) ** 2 / (2.0 * z_tau ** 2 + 1.0)) ** (1.0 / 3.0))
    return float(min(h, 0.99 * tau, 0.99 * (1.0 - tau)))


def estimate_sparsity(residuals, tau: float) -> SparsityEstimate:
    """Siddiqui difference-quotient estimate of the residual density at its tau-quantile.

    f_hat = 2h / (Q(tau+h) - Q(tau-h)) with Q the empirical quantile function
    of the residuals and h the Hall-Sheather bandwidth. The denominator is
    floored at the smallest positive double, so the estimate stays positive.
    """
    tau = check_tau(tau)
    res = np.asarray(residuals, dtype=float)
    if res.ndim != 1 or res.size < 30:
        raise InsufficientDataError(
            f"sparsity estimation needs at least 30 residuals, got {res.size}"
        )
    h = hall_sheather_bandwidth(res.size, tau)
    hi, lo = np.quantile(res, [tau + h, tau - h])
    value = 2.0 * h / max(float(hi - lo), np.finfo(float).tiny)
    return SparsityEstimate(value=value, bandwidth=h)


# ---------------------------------------------------------------------------
# xy bootstrap

def bootstrap_xy(series, tau: float, n_boot: int = 1000, seed: int = 0,
                 include_intercept: bool = True,
                 method: str = INTERIOR_POINT) -> XyBootstrap:
    """Pairs-bootstrap standard errors for the quantile-autoregression coefficients.

    Resamples (y_{t-1}, y_t) pairs with replacement, refits at the same tau,
    and reports the standard deviation of each coefficient across resamples.
    Resample b uses the derived seed ``seed ^ splitmix64(b + attempt * B)``,
    so the result does not depend on execution order; degenerate resamples
    are redrawn, at most 10 attempts per resample (10 * B overall).
    """
    tau = check_tau(tau)
    if n_boot < 50:
        raise InvalidConfigError(f"need at least 50 bootstrap resamples, got {n_boot}")
    values = as_series(series)
    x, y = _lag_pairs(values)
    n = len(x)

    width = 2 if include_intercept else 1
    coefs = np.empty((n_boot, width))
    n_redraws = 0
    for b in range(n_boot):
        for attempt in range(10):
            rng = generator(derive_seed(seed, b + attempt * n_boot))
            idx = rng.integers(0, n, n)
            try:
                fit = fit_quantile_xy(x[idx], y[idx], tau, include_intercept, method)
            except (SingularDesignError, SolverFailureError):
                n_redraws += 1
                continue
            if include_intercept:
                coefs[b] = (fit.mu_hat, fit.rho_hat)
            else:
                coefs[b] = fit.rho_hat
            break
        else:
            raise BootstrapFailureError(
                f"resample {b} stayed degenerate after 10 redraws"
            )
    se = coefs.std(axis=0, ddof=1)
    return XyBootstrap(se_mu=float(se[0]) if include_intercept else None,
                       se_rho=float(se[-1]), n_resamples=n_boot, n_redraws=n_redraws)


# ---------------------------------------------------------------------------
# sklearn-style wrappers

class QuantileAR(BaseEstimator):
    """Conditional-quantile AR(1) estimator with the sklearn parameter protocol.

    fit(y) regresses y_t on y_{t-1} at quantile level ``tau``; fitted
    attributes are ``intercept_``, ``coef_`` (the lag coefficient) and
    ``result_`` (the full QuantileFit). predict(y_prev) evaluates the fitted
    conditional quantile line.
    """

    def __init__(self, tau: float = 0.5, fit_intercept: bool = True,
                 method: str = INTERIOR_POINT, tol: float = DUALITY_GAP_TOL,
                 max_iter: int = MAX_ITERATIONS):
        self.tau = tau
        self.fit_intercept = fit_intercept
        self.method = method
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, y):
        result = fit_quantile(y, self.tau, include_intercept=self.fit_intercept,
                              method=self.method, tol=self.tol, max_iter=self.max_iter)
        self.result_ = result
        self.intercept_ = 0.0 if result.mu_hat is None else result.mu_hat
        self.coef_ = np.array([result.rho_hat])
        return self

    def predict(self, y_prev):
        check_is_fitted(self, "result_")
        return self.intercept_ + self.coef_[0] * np.asarray(y_prev, dtype=float)


class OLSAR(BaseEstimator):
    """Least-squares AR(1) estimator with the sklearn parameter protocol."""

    def __init__(self, fit_intercept: bool = True):
        self.fit_intercept = fit_intercept

    def fit(self, y):
        result = fit_ols(y, include_intercept=self.fit_intercept)
        self.result_ = result
        self.intercept_ = 0.0 if result.mu_hat is None else result.mu_hat
        self.coef_ = np.array([result.rho_hat])
        self.sigma2_ = result.sigma2_hat
        return self

    def predict(self, y_prev):
        check_is_fitted(self, "result_")
        return self.intercept_ + self.coef_[0] * np.asarray(y_prev, dtype=float)
