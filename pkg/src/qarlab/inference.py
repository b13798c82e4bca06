"""t-statistics and confidence intervals for the lag coefficient.

Both statistics scale the centered slope by the square root of the demeaned
sum of squares of the lag values, which makes them asymptotically pivotal:

    quantile:  sqrt(sum (y_{t-1} - ybar)^2) * f_hat * (rho_hat(tau) - rho0)
               / sqrt(tau (1 - tau))
    OLS:       sqrt(sum (y_{t-1} - ybar)^2) * (rho_hat - rho0) / sigma_hat

Under the null both are asymptotically standard normal; rejection compares
|t| against the two-sided normal critical value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import InvalidConfigError, SingularDesignError
from .estimators import OlsFit, QuantileFit, SparsityEstimate, as_series


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    rho0: float
    tau: float  # 1.0 in OLS mode
    critical_value: float
    reject: bool


def _demeaned_lag_norm(series) -> float:
    """sqrt(sum (y_{t-1} - ybar)^2) over the lag values of a series."""
    values = as_series(series)
    x = values[:-1]
    centered = x - x.mean()
    ss = float(centered @ centered)
    if ss <= 0.0:
        raise SingularDesignError("zero demeaned sum of squares in the lag values")
    return math.sqrt(ss)


def _result(statistic: float, rho0: float, tau: float, alpha: float) -> TTestResult:
    if not 0.0 < alpha < 1.0:
        raise InvalidConfigError(f"alpha must lie in (0, 1), got {alpha}")
    critical = float(norm.ppf(1.0 - alpha / 2.0))
    return TTestResult(statistic=float(statistic), rho0=float(rho0), tau=float(tau),
                       critical_value=critical, reject=bool(abs(statistic) > critical))


def t_stat_quantile(sample, fit: QuantileFit, rho0: float,
                    sparsity: SparsityEstimate, alpha: float = 0.05) -> TTestResult:
    """t-statistic for H0: rho(tau) = rho0 from a quantile fit."""
    scale = _demeaned_lag_norm(sample)
    stat = (scale * sparsity.value * (fit.rho_hat - rho0)
            / math.sqrt(fit.tau * (1.0 - fit.tau)))
    return _result(stat, rho0, fit.tau, alpha)


def t_stat_ols(sample, fit: OlsFit, rho0: float, alpha: float = 0.05) -> TTestResult:
    """t-statistic for H0: rho = rho0 from a least-squares fit."""
    scale = _demeaned_lag_norm(sample)
    stat = scale * (fit.rho_hat - rho0) / math.sqrt(fit.sigma2_hat)
    return _result(stat, rho0, 1.0, alpha)


def confidence_interval(sample, fit: QuantileFit | OlsFit, level: float = 0.95,
                        sparsity: SparsityEstimate | None = None) -> tuple[float, float]:
    """Two-sided interval rho_hat +/- z * SE for the lag coefficient.

    The standard error inverts the matching t-statistic:
    sqrt(tau(1-tau)) / (f_hat * scale) for a quantile fit (requires the
    sparsity estimate) and sigma_hat / scale for OLS.
    """
    if not 0.5 < level < 1.0:
        raise InvalidConfigError(f"confidence level must lie in (0.5, 1), got {level}")
    scale = _demeaned_lag_norm(sample)
    if isinstance(fit, QuantileFit):
        if sparsity is None:
            raise InvalidConfigError("quantile confidence interval needs a sparsity estimate")
        se = math.sqrt(fit.tau * (1.0 - fit.tau)) / (sparsity.value * scale)
    elif isinstance(fit, OlsFit):
        se = math.sqrt(fit.sigma2_hat) / scale
    else:
        raise InvalidConfigError(f"unsupported fit type {type(fit).__name__}")
    z = float(norm.ppf((1.0 + level) / 2.0))
    return (fit.rho_hat - z * se, fit.rho_hat + z * se)
