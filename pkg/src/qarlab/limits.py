"""Normalizations and reference limit laws for the centered slope estimator.

Three regimes, selected by the persistence coefficient c and the exponent
rate gamma:

* near-stationary (c < 0): sqrt(n * k_n) * (rho_hat - rho_n) is
  asymptotically normal; N(0, -2c) for least squares and
  N(0, (-2c / sigma^2) * tau(1-tau) / f^2) for the tau-quantile fit with
  residual density f at the tau-quantile.
* near-explosive (c > 0): (k_n * rho_n^n / 2c) * (rho_hat - rho_n) is
  asymptotically standard Cauchy for least squares; scaling the quantile
  deviation by f/(2c) * k_n * rho_n^n gives Cauchy(0, sqrt(tau(1-tau))/sigma).
  Both arise as ratios of independent zero-mean normals.
* gamma = 1 or c = 0: n * (rho_hat - rho_n) converges to the demeaned
  Ornstein-Uhlenbeck ratio functional sampled by ``sample_ou_ratio``.

``bahadur_gap`` measures the remainder of the linear (Bahadur)
approximation to the quantile estimator in the near-stationary regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.stats import norm

from .checkfun import psi
from .dgp import DgpConfig, Sample
from .errors import (
    DiscretizationFailureError,
    ExplosiveOverflowError,
    InvalidConfigError,
)
from .estimators import check_tau, fit_quantile
from .rng import derive_seed, generator

NEAR_STATIONARY = "near_stationary"
NEAR_EXPLOSIVE = "near_explosive"
UNIT_GAMMA1 = "unit_gamma1"

OLS = "ols"
QUANTILE = "quantile"


# ---------------------------------------------------------------------------
# reference laws

@dataclass(frozen=True)
class NormalLaw:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise InvalidConfigError(f"variance must be positive, got {self.variance}")

    def cdf(self, x):
        return norm.cdf(np.asarray(x, dtype=float), loc=self.mean,
                        scale=math.sqrt(self.variance))

    def quantile(self, q):
        return norm.ppf(np.asarray(q, dtype=float), loc=self.mean,
                        scale=math.sqrt(self.variance))


@dataclass(frozen=True)
class CauchyLaw:
    location: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidConfigError(f"scale must be positive, got {self.scale}")

    def cdf(self, x):
        # arctan form is numerically stable far into the tails
        x = np.asarray(x, dtype=float)
        return 0.5 + np.arctan((x - self.location) / self.scale) / np.pi

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        return self.location + self.scale * np.tan(np.pi * (q - 0.5))


class EmpiricalLaw:
    """A limit law represented by a sorted Monte Carlo sample.

    The CDF interpolates linearly between order statistics at plotting
    positions (i - 0.5) / m (binary search via numpy), 0 below the sample
    minimum and 1 above the maximum.
    """

    def __init__(self, sample):
        sample = np.sort(np.asarray(sample, dtype=float))
        if sample.ndim != 1 or sample.size < 1000:
            raise InvalidConfigError(
                f"empirical law needs at least 1000 draws, got {sample.size}"
            )
        if not np.all(np.isfinite(sample)):
            raise InvalidConfigError("empirical law sample contains non-finite values")
        sample.setflags(write=False)
        self.sample = sample
        self._positions = (np.arange(1, sample.size + 1) - 0.5) / sample.size

    def cdf(self, x):
        return np.interp(np.asarray(x, dtype=float), self.sample, self._positions,
                         left=0.0, right=1.0)

    def quantile(self, q):
        return np.interp(np.asarray(q, dtype=float), self._positions, self.sample)

    def scaled(self, factor: float) -> "EmpiricalLaw":
        """The law of factor * X for X distributed as this law."""
        if factor == 0:
            raise InvalidConfigError("scale factor must be nonzero")
        return EmpiricalLaw(self.sample * factor)

    def __eq__(self, other):
        return isinstance(other, EmpiricalLaw) and np.array_equal(self.sample, other.sample)


LimitLaw = NormalLaw | CauchyLaw | EmpiricalLaw


# ---------------------------------------------------------------------------
# regime normalization

@dataclass(frozen=True)
class RegimeNormalization:
    """Scales for the intercept and slope coordinates, plus the slope entry
    of the second-moment limit matrix (None where that entry is random)."""

    regime: str
    d_mu: float
    d_rho: float
    b_rho: float | None


def regime_for(config: DgpConfig) -> RegimeNormalization:
    """The natural normalization for a config: by the sign of c, with gamma = 1
    and c = 0 both mapping to the n-rate regime."""
    n = config.n
    root_n = math.sqrt(n)
    if config.c == 0.0 or config.gamma == 1.0:
        return RegimeNormalization(UNIT_GAMMA1, root_n, float(n), None)
    if config.c < 0:
        b_rho = config.innovation.variance / (-2.0 * config.c)
        return RegimeNormalization(NEAR_STATIONARY, root_n,
                                   math.sqrt(n * config.k_n), b_rho)
    d_rho = config.rho ** n * config.k_n
    if not math.isfinite(d_rho):
        raise ExplosiveOverflowError(f"rho^n overflows for c={config.c}, n={n}")
    return RegimeNormalization(NEAR_EXPLOSIVE, root_n, d_rho, None)


def normalize_stat(rho_hat: float, config: DgpConfig,
                   regime: RegimeNormalization) -> float:
    """Center and scale a slope estimate for its regime.

    near_stationary: sqrt(n k_n) (rho_hat - rho_n)
    near_explosive:  (k_n rho_n^n / 2c) (rho_hat - rho_n)
    unit_gamma1:     n (rho_hat - rho_n)
    """
    deviation = rho_hat - config.rho
    if regime.regime == NEAR_STATIONARY:
        if not config.c < 0:
            raise InvalidConfigError("near_stationary normalization needs c < 0")
        return regime.d_rho * deviation
    if regime.regime == NEAR_EXPLOSIVE:
        if not config.c > 0:
            raise InvalidConfigError("near_explosive normalization needs c > 0")
        if not math.isfinite(regime.d_rho):
            raise ExplosiveOverflowError("rho^n overflowed in the explosive scale")
        return regime.d_rho / (2.0 * config.c) * deviation
    if regime.regime == UNIT_GAMMA1:
        if not (config.c == 0.0 or config.gamma == 1.0):
            raise InvalidConfigError("unit_gamma1 normalization needs c = 0 or gamma = 1")
        return float(config.n) * deviation
    raise InvalidConfigError(f"unknown regime {regime.regime!r}")


def reference_law_near_stationary(estimator: str, c: float, sigma: float = 1.0,
                                  f: float | None = None,
                                  tau: float | None = None) -> NormalLaw:
    """Gaussian limit of the near-stationary normalized slope statistic."""
    if not c < 0:
        raise InvalidConfigError(f"near-stationary reference law needs c < 0, got c={c}")
    if estimator == OLS:
        return NormalLaw(0.0, -2.0 * c)
    if estimator == QUANTILE:
        tau = check_tau(tau)
        if f is None or not f > 0:
            raise InvalidConfigError("quantile reference law needs the density f > 0")
        if not sigma > 0:
            raise InvalidConfigError(f"sigma must be positive, got {sigma}")
        return NormalLaw(0.0, (-2.0 * c / sigma**2) * tau * (1.0 - tau) / f**2)
    raise InvalidConfigError(f"unknown estimator {estimator!r}")


def reference_law_near_explosive(estimator: str, sigma: float = 1.0,
                                 tau: float | None = None) -> CauchyLaw:
    """Cauchy limit of the mildly explosive normalized slope statistic.

    The limit is a ratio of independent zero-mean normals, so its scale is
    the ratio of their standard deviations: 1 for least squares and
    sqrt(tau(1-tau)) / sigma for the tau-quantile fit.
    """
    if not sigma > 0:
        raise InvalidConfigError(f"sigma must be positive, got {sigma}")
    if estimator == OLS:
        return CauchyLaw(0.0, 1.0)
    if estimator == QUANTILE:
        tau = check_tau(tau)
        return CauchyLaw(0.0, math.sqrt(tau * (1.0 - tau)) / sigma)
    raise InvalidConfigError(f"unknown estimator {estimator!r}")


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck ratio functional

def ou_ratio_functional(increments: np.ndarray, c: float) -> tuple[np.ndarray, np.ndarray]:
    """Numerator and denominator of the demeaned OU ratio for given W increments.

    Euler-Maruyama for dJ = c J dr + dW on the unit interval, with the
    stochastic integral evaluated at the left grid point (Ito convention):

        num = int J dW - W(1) int J,    den = int J^2 - (int J)^2.

    ``increments`` has one row per path; returns (num, den) per row.
    The denominator is a path variance, hence nonnegative.
    """
    increments = np.atleast_2d(np.asarray(increments, dtype=float))
    grid = increments.shape[1]
    dt = 1.0 / grid
    stepped = lfilter([1.0], [1.0, -(1.0 + c * dt)], increments, axis=1)
    J = np.concatenate([np.zeros((increments.shape[0], 1)), stepped[:, :-1]], axis=1)
    int_j_dw = np.sum(J * increments, axis=1)
    int_j = np.sum(J, axis=1) * dt
    int_j2 = np.sum(J * J, axis=1) * dt
    w1 = np.sum(increments, axis=1)
    return int_j_dw - w1 * int_j, int_j2 - int_j**2

#: denominators below this are treated as degenerate and the draw is redone
DEGENERATE_DENOMINATOR = 1e-12


def sample_ou_ratio(c: float, grid_points: int = 2048, draws: int = 10_000,
                    seed: int = 0, chunk: int = 1024) -> EmpiricalLaw:
    """Monte Carlo sample of the demeaned OU ratio functional as an EmpiricalLaw.

    Draw d uses the derived seed ``seed ^ splitmix64(d)``, so the law is
    reproducible and independent of chunking. Degenerate draws (denominator
    below 1e-12) are redrawn from substreams d + attempt * draws; more than
    1% redraws raise DiscretizationFailureError.
    """
    if grid_points < 1000:
        raise InvalidConfigError(f"grid_points must be >= 1000, got {grid_points}")
    if draws < 1000:
        raise InvalidConfigError(f"draws must be >= 1000, got {draws}")
    sd = math.sqrt(1.0 / grid_points)

    def draw_rows(indices):
        return np.stack([
            generator(derive_seed(seed, int(d))).normal(0.0, sd, grid_points)
            for d in indices
        ])

    out = np.empty(draws)
    redraws = 0
    budget = max(1, int(0.01 * draws))
    for lo in range(0, draws, chunk):
        idx = np.arange(lo, min(lo + chunk, draws))
        num, den = ou_ratio_functional(draw_rows(idx), c)
        bad = den < DEGENERATE_DENOMINATOR
        for attempt in range(1, 4):
            if not np.any(bad):
                break
            redraws += int(np.sum(bad))
            if redraws > budget:
                raise DiscretizationFailureError(
                    f"{redraws} degenerate OU draws exceed the 1% budget ({budget})"
                )
            retry_idx = idx[bad] + attempt * draws
            num[bad], den[bad] = ou_ratio_functional(draw_rows(retry_idx), c)
            bad = den < DEGENERATE_DENOMINATOR
        if np.any(bad):
            raise DiscretizationFailureError("OU draw stayed degenerate after 3 redraws")
        out[idx] = num / den
    return EmpiricalLaw(out)


# ---------------------------------------------------------------------------
# Bahadur remainder

def bahadur_gap(sample: Sample, tau: float, f: float,
                q_tau: float | None = None) -> float:
    """Max-norm remainder of the linear approximation to the quantile fit.

    Compares the scaled estimation error

        (sqrt(n) (mu_hat(tau) - mu - q_tau), sqrt(n k_n) (rho_hat(tau) - rho_n))

    against the linear form built from the true errors,

        B^{-1} / f * (sum_t psi_tau(eps_t - q_tau) / sqrt(n),
                      sum_t psi_tau(eps_t - q_tau) y_{t-1} / sqrt(n k_n)),

    where B = diag(1, sigma^2 / (-2c)) and q_tau defaults to the innovation
    law's tau-quantile. Near-stationary configs only (c < 0).
    """
    tau = check_tau(tau)
    config = sample.config
    if not config.c < 0:
        raise InvalidConfigError("bahadur_gap needs the near-stationary regime (c < 0)")
    if not f > 0:
        raise InvalidConfigError(f"density f must be positive, got {f}")
    if q_tau is None:
        q_tau = config.innovation.quantile(tau)

    fit = fit_quantile(sample, tau, include_intercept=True)
    n, k_n = config.n, config.k_n
    x, y = sample.values[:-1], sample.values[1:]

    fitted = np.array([
        math.sqrt(n) * (fit.mu_hat - (config.mu + q_tau)),
        math.sqrt(n * k_n) * (fit.rho_hat - config.rho),
    ])
    eps = y - config.mu - config.rho * x
    scores = psi(eps - q_tau, tau)
    b_rho = config.innovation.variance / (-2.0 * config.c)
    linear = np.array([
        np.sum(scores) / math.sqrt(n),
        (scores @ x) / math.sqrt(n * k_n) / b_rho,
    ]) / f
    return float(np.max(np.abs(fitted - linear)))
