"""Autoregressive data generation under moderate deviations from the unit root.

Simulates

    y_0 = 0,    y_t = mu + rho * y_{t-1} + eps_t,    t = 1, ..., n,

with autocorrelation coefficient ``rho = 1 + c / k_n`` and ``k_n = n**gamma``
for ``gamma`` in (0, 1]. The sign of ``c`` selects the regime: ``c < 0`` is
near-stationary, ``c = 0`` a pure unit root, ``c > 0`` mildly explosive.
Innovations are i.i.d., mean zero, with finite variance (Gaussian or
Student-t with more than two degrees of freedom).

Everything is a pure function of the configuration: the same config yields a
bit-identical series. The recursion is evaluated in index order through
``scipy.signal.lfilter``, which applies exactly one multiply and one add per
step (verified bit-identical to the explicit loop).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter
from scipy.stats import norm, t as student_t

from .errors import ExplosiveOverflowError, InvalidConfigError, NumericFailureError
from .rng import generator

#: rho**n ~ exp(c * n**(1-gamma)); doubles overflow near exp(709), and the
#: squared sums used downstream near exp(354). 300 leaves headroom for both.
OVERFLOW_GUARD = 300.0


@dataclass(frozen=True)
class GaussianInnovations:
    """Mean-zero Gaussian innovations with standard deviation ``sigma``."""

    sigma: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidConfigError(f"sigma must be positive, got {self.sigma}")

    @property
    def variance(self) -> float:
        return self.sigma**2

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(0.0, self.sigma, n)

    def quantile(self, tau: float) -> float:
        """Inverse CDF at level ``tau``."""
        return float(self.sigma * norm.ppf(tau))

    def density_at_quantile(self, tau: float) -> float:
        """Density evaluated at the ``tau``-quantile."""
        return float(norm.pdf(norm.ppf(tau)) / self.sigma)


@dataclass(frozen=True)
class StudentTInnovations:
    """Student-t innovations; ``df > 2`` so the variance exists.

    ``scale`` is the t scale parameter, so the variance is
    ``scale**2 * df / (df - 2)``, not ``scale**2``.
    """

    df: float
    scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.df) and self.df > 2):
            raise InvalidConfigError(
                f"Student-t innovations need df > 2 for a finite variance, got df={self.df}"
            )
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise InvalidConfigError(f"scale must be positive, got {self.scale}")

    @property
    def variance(self) -> float:
        return self.scale**2 * self.df / (self.df - 2.0)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.scale * rng.standard_t(self.df, n)

    def quantile(self, tau: float) -> float:
        return float(self.scale * student_t.ppf(tau, self.df))

    def density_at_quantile(self, tau: float) -> float:
        return float(student_t.pdf(student_t.ppf(tau, self.df), self.df) / self.scale)


Innovation = GaussianInnovations | StudentTInnovations


def make_rho(c: float, gamma: float, n: int) -> float:
    """Autocorrelation coefficient ``1 + c / n**gamma``."""
    if n < 1:
        raise InvalidConfigError(f"n must be >= 1, got {n}")
    if not 0 < gamma <= 1:
        raise InvalidConfigError(f"gamma must be in (0, 1], got {gamma}")
    rho = 1.0 + c / float(n) ** gamma
    if not math.isfinite(rho):
        raise InvalidConfigError(f"rho is not finite for c={c}, gamma={gamma}, n={n}")
    return rho


@dataclass(frozen=True)
class DgpConfig:
    """Full specification of one simulated series.

    Attributes
    ----------
    n : int
        Sample length (the series has n + 1 values including y_0 = 0).
    c : float
        Persistence coefficient; rho = 1 + c / n**gamma.
    gamma : float
        Exponent rate in (0, 1].
    mu : float
        Intercept.
    innovation : Innovation
        Innovation law (Gaussian or Student-t with df > 2).
    seed : int
        64-bit unsigned seed; the series is a pure function of the config.
    """

    n: int
    c: float
    gamma: float = 0.5
    mu: float = 0.0
    innovation: Innovation = field(default_factory=GaussianInnovations)
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise InvalidConfigError(f"n must be >= 2, got {self.n}")
        make_rho(self.c, self.gamma, self.n)
        if not np.isfinite(self.mu):
            raise InvalidConfigError(f"mu must be finite, got {self.mu}")
        if not 0 <= self.seed < 1 << 64:
            raise InvalidConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.c > 0:
            growth = self.c * float(self.n) ** (1.0 - self.gamma)
            if growth > OVERFLOW_GUARD:
                raise ExplosiveOverflowError(
                    f"c * n**(1-gamma) = {growth:.1f} exceeds the overflow guard "
                    f"{OVERFLOW_GUARD:g}; rho**n would not be representable"
                )

    @property
    def k_n(self) -> float:
        return float(self.n) ** self.gamma

    @property
    def rho(self) -> float:
        return make_rho(self.c, self.gamma, self.n)


@dataclass(frozen=True)
class Sample:
    """A simulated series y_0, ..., y_n with its generating config."""

    values: np.ndarray
    config: DgpConfig

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or len(values) != self.config.n + 1:
            raise InvalidConfigError(
                f"sample must hold n + 1 = {self.config.n + 1} values, got shape {values.shape}"
            )
        if values[0] != 0.0:
            raise InvalidConfigError(f"y_0 must be exactly 0, got {values[0]}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


def draw_innovations(kind: Innovation, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. innovations; the same seed gives a bit-identical sequence."""
    if n < 1:
        raise InvalidConfigError(f"n must be >= 1, got {n}")
    return kind.draw(n, generator(seed))


def ar_recursion(rho: float, forcing: np.ndarray) -> np.ndarray:
    """y_0 = 0, y_t = forcing_t + rho * y_{t-1}, returned as (y_0, ..., y_n).

    The lfilter form applies exactly one multiply and one add per step, in
    index order, matching the explicit loop bit for bit.
    """
    path = lfilter([1.0], [1.0, -rho], np.asarray(forcing, dtype=float))
    return np.concatenate([[0.0], path])


def simulate(config: DgpConfig) -> Sample:
    """Run the autoregressive recursion for one config.

    rho is computed once per config and reused for every step; the forcing
    sequence is mu + eps_t with innovations drawn from the config seed.
    """
    eps = draw_innovations(config.innovation, config.n, config.seed)
    values = ar_recursion(config.rho, config.mu + eps)
    if not np.all(np.isfinite(values)):
        raise NumericFailureError(
            f"simulation produced non-finite values (c={config.c}, gamma={config.gamma}, "
            f"n={config.n})"
        )
    return Sample(values, config)
