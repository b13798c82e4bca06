"""Replication experiments: empirical size, coverage, limit-law agreement.

An ExperimentSpec pins a DGP template (whose seed field is the master seed),
an estimator, a purpose, and a replication count. Replication r always runs
on the derived seed ``master ^ splitmix64(r + attempt * R)``, so reports are
bit-identical across reruns and worker counts; failed replications are
redrawn from their own substreams, capped at 1% of R overall.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .dgp import DgpConfig, simulate
from .errors import (
    ExperimentFailureError,
    InvalidConfigError,
    NumericFailureError,
    SingularDesignError,
    SolverFailureError,
)
from .estimators import estimate_sparsity, fit_ols, fit_quantile
from .inference import confidence_interval, t_stat_ols, t_stat_quantile
from .limits import (
    NEAR_EXPLOSIVE,
    NEAR_STATIONARY,
    OLS,
    QUANTILE,
    UNIT_GAMMA1,
    LimitLaw,
    RegimeNormalization,
    normalize_stat,
    reference_law_near_explosive,
    reference_law_near_stationary,
    regime_for,
    sample_ou_ratio,
)
from .rng import derive_seed

PURPOSE_SIZE = "size"
PURPOSE_COVERAGE = "coverage"
PURPOSE_LIMIT_LAW = "limit_law"
PURPOSE_MOMENT_CHECK = "moment_check"
PURPOSES = (PURPOSE_SIZE, PURPOSE_COVERAGE, PURPOSE_LIMIT_LAW, PURPOSE_MOMENT_CHECK)

#: substream offset for sampling an OU reference law (far above any rep index)
OU_REFERENCE_SUBSTREAM = 1 << 48

_RETRYABLE = (SingularDesignError, SolverFailureError, NumericFailureError)
_MAX_ATTEMPTS_PER_REP = 10


@dataclass(frozen=True)
class ExperimentSpec:
    """One Monte Carlo experiment.

    ``include_intercept=None`` resolves by purpose: size and coverage fit
    the full intercept model; limit-law and moment experiments fit without
    an intercept except in the unit_gamma1 regime, whose reference
    functional is demeaned.
    """

    dgp: DgpConfig
    estimator: str = OLS
    tau: float | None = None
    replications: int = 1000
    purpose: str = PURPOSE_LIMIT_LAW
    regime: RegimeNormalization | None = None
    reference: LimitLaw | None = None
    include_intercept: bool | None = None
    alpha: float = 0.05
    level: float = 0.95

    def __post_init__(self):
        if self.replications < 100:
            raise InvalidConfigError(
                f"need at least 100 replications, got {self.replications}"
            )
        if self.purpose not in PURPOSES:
            raise InvalidConfigError(f"unknown purpose {self.purpose!r}")
        if self.estimator not in (OLS, QUANTILE):
            raise InvalidConfigError(f"unknown estimator {self.estimator!r}")
        if self.estimator == QUANTILE:
            if self.tau is None or not 0.0 < self.tau < 1.0:
                raise InvalidConfigError(
                    f"quantile estimator needs tau in (0, 1), got {self.tau}"
                )
        if self.purpose == PURPOSE_MOMENT_CHECK and self.dgp.c == 0.0:
            raise InvalidConfigError("moment_check needs c != 0")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.5 < self.level < 1.0:
            raise InvalidConfigError(f"level must lie in (0.5, 1), got {self.level}")


@dataclass
class McReport:
    """Aggregated experiment results; ``stats`` holds the sorted per-replication
    statistics (or 0/1 flags for coverage)."""

    spec: ExperimentSpec
    stats: np.ndarray
    sample_mean: float
    sample_variance: float
    empirical_size: float | None = None
    coverage: float | None = None
    ks_distance: float | None = None
    wall_time: float = 0.0
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class _Resolved:
    """Everything a replication worker needs (small and picklable)."""

    dgp: DgpConfig
    purpose: str
    estimator: str
    tau: float | None
    include_intercept: bool
    regime: RegimeNormalization
    f: float | None
    alpha: float
    level: float


def _resolve(spec: ExperimentSpec) -> _Resolved:
    regime = spec.regime if spec.regime is not None else regime_for(spec.dgp)
    if spec.include_intercept is None:
        if spec.purpose in (PURPOSE_SIZE, PURPOSE_COVERAGE):
            include_intercept = True
        else:
            include_intercept = regime.regime == UNIT_GAMMA1
    else:
        include_intercept = spec.include_intercept
    f = None
    if spec.estimator == QUANTILE:
        f = spec.dgp.innovation.density_at_quantile(spec.tau)
    return _Resolved(dgp=spec.dgp, purpose=spec.purpose, estimator=spec.estimator,
                     tau=spec.tau, include_intercept=include_intercept, regime=regime,
                     f=f, alpha=spec.alpha, level=spec.level)


def _replicate_once(res: _Resolved, rep_seed: int) -> tuple[float, ...]:
    config = replace(res.dgp, seed=rep_seed)
    sample = simulate(config)

    if res.purpose == PURPOSE_MOMENT_CHECK:
        x = sample.values[:-1]
        n, k_n = config.n, config.k_n
        if config.c < 0:
            return (float(x @ x) / (n * k_n),
                    float(x.sum()) / (n * math.sqrt(k_n)))
        scale = config.rho ** n * k_n
        return (float(x @ x) / scale**2,)

    if res.estimator == QUANTILE:
        fit = fit_quantile(sample, res.tau, include_intercept=res.include_intercept)
    else:
        fit = fit_ols(sample, include_intercept=res.include_intercept)

    if res.purpose == PURPOSE_LIMIT_LAW:
        stat = normalize_stat(fit.rho_hat, config, res.regime)
        if res.estimator == QUANTILE and res.regime.regime == NEAR_EXPLOSIVE:
            stat *= res.f
        return (stat,)

    if res.purpose == PURPOSE_SIZE:
        if res.estimator == QUANTILE:
            sparsity = estimate_sparsity(fit.residuals, res.tau)
            t = t_stat_quantile(sample, fit, config.rho, sparsity, res.alpha)
        else:
            t = t_stat_ols(sample, fit, config.rho, res.alpha)
        return (t.statistic,)

    # coverage
    if res.estimator == QUANTILE:
        sparsity = estimate_sparsity(fit.residuals, res.tau)
        lo, hi = confidence_interval(sample, fit, res.level, sparsity)
    else:
        lo, hi = confidence_interval(sample, fit, res.level)
    return (1.0 if lo <= config.rho <= hi else 0.0,)


def _run_block(args) -> tuple[list[tuple[float, ...]], int]:
    res, master, total_reps, indices = args
    out = []
    redraws = 0
    for r in indices:
        for attempt in range(_MAX_ATTEMPTS_PER_REP):
            seed = derive_seed(master, int(r) + attempt * total_reps)
            try:
                out.append(_replicate_once(res, seed))
                break
            except _RETRYABLE:
                redraws += 1
        else:
            raise ExperimentFailureError(
                f"replication {r} failed {_MAX_ATTEMPTS_PER_REP} times in a row"
            )
    return out, redraws


def summarize_size(stats, critical_value: float) -> float:
    """Rejection rate of |t| > critical_value over a vector of t statistics."""
    stats = np.asarray(stats, dtype=float)
    return float(np.mean(np.abs(stats) > critical_value))


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> McReport:
    """Run all replications of an experiment and aggregate.

    ``threads`` sets the number of worker processes; the statistics multiset
    is identical for any worker count because every replication owns its
    derived seed and aggregation sorts the collected values.
    """
    if threads < 1:
        raise InvalidConfigError(f"threads must be >= 1, got {threads}")
    res = _resolve(spec)
    master = spec.dgp.seed
    R = spec.replications

    reference = spec.reference
    if spec.purpose == PURPOSE_LIMIT_LAW and reference is None:
        reference = _auto_reference(spec, res, master)

    start = time.perf_counter()
    if threads == 1:
        rows, redraws = _run_block((res, master, R, range(R)))
    else:
        chunks = np.array_split(np.arange(R), min(threads * 4, R))
        rows, redraws = [], 0
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for block, block_redraws in pool.map(
                    _run_block, [(res, master, R, chunk) for chunk in chunks]):
                rows.extend(block)
                redraws += block_redraws

    budget = max(1, int(0.01 * R))
    if redraws > budget:
        raise ExperimentFailureError(
            f"{redraws} redrawn replications exceed the 1% budget ({budget})"
        )

    columns = np.asarray(rows, dtype=float)
    stats = np.sort(columns[:, 0])
    report = McReport(
        spec=spec,
        stats=stats,
        sample_mean=float(stats.mean()),
        sample_variance=float(stats.var(ddof=1)),
        details={"redraws": redraws, "include_intercept": res.include_intercept},
    )

    if spec.purpose == PURPOSE_LIMIT_LAW:
        report.ks_distance = ks_statistic(stats, reference)
    elif spec.purpose == PURPOSE_SIZE:
        critical = float(norm.ppf(1.0 - spec.alpha / 2.0))
        report.empirical_size = summarize_size(stats, critical)
        report.details["critical_value"] = critical
    elif spec.purpose == PURPOSE_COVERAGE:
        report.coverage = float(stats.mean())
    else:  # moment_check
        if spec.dgp.c < 0:
            report.details["target"] = spec.dgp.innovation.variance / (-2.0 * spec.dgp.c)
            report.details["drift_mean"] = float(columns[:, 1].mean())
        else:
            report.details["min_stat"] = float(stats[0])
    report.wall_time = time.perf_counter() - start
    return report


def moment_check(spec: ExperimentSpec, threads: int = 1) -> McReport:
    """Sample-moment experiment: per replication, (1/(n k_n)) sum y_{t-1}^2 for
    c < 0 (with the drift mean (1/(n sqrt(k_n))) sum y_{t-1} in the details)
    or sum y_{t-1}^2 / (rho^{2n} k_n^2) for c > 0."""
    if spec.purpose != PURPOSE_MOMENT_CHECK:
        raise InvalidConfigError("moment_check needs purpose='moment_check'")
    return run_experiment(spec, threads=threads)


def _auto_reference(spec: ExperimentSpec, res: _Resolved, master: int) -> LimitLaw:
    config = spec.dgp
    sigma = math.sqrt(config.innovation.variance)
    if res.regime.regime == NEAR_STATIONARY:
        return reference_law_near_stationary(spec.estimator, config.c, sigma,
                                             f=res.f, tau=spec.tau)
    if res.regime.regime == NEAR_EXPLOSIVE:
        return reference_law_near_explosive(spec.estimator, sigma, tau=spec.tau)
    if spec.estimator != OLS:
        raise InvalidConfigError(
            "no built-in unit_gamma1 reference for the quantile estimator; "
            "pass an explicit reference law"
        )
    return sample_ou_ratio(config.c, grid_points=2048, draws=20_000,
                           seed=derive_seed(master, OU_REFERENCE_SUBSTREAM))


def ks_statistic(sample, law: LimitLaw) -> float:
    """Kolmogorov-Smirnov distance between a sorted sample and a reference law."""
    s = np.asarray(sample, dtype=float)
    if s.ndim != 1 or s.size < 10:
        raise InvalidConfigError(f"KS needs at least 10 sorted values, got {s.size}")
    if np.any(np.diff(s) < 0):
        raise InvalidConfigError("KS input must be sorted ascending")
    m = s.size
    cdf = np.asarray(law.cdf(s), dtype=float)
    i = np.arange(1, m + 1)
    return float(max(np.max(np.abs(i / m - cdf)), np.max(np.abs(cdf - (i - 1) / m))))


def qq_data(sample, law: LimitLaw) -> np.ndarray:
    """(theoretical, empirical) quantile pairs at plotting positions (i-0.5)/m.

    For Cauchy laws the positions are clipped to [0.01, 0.99] so the pairs
    stay finite.
    """
    from .limits import CauchyLaw

    s = np.asarray(sample, dtype=float)
    if s.ndim != 1 or s.size < 2:
        raise InvalidConfigError(f"QQ data needs at least 2 sorted values, got {s.size}")
    if np.any(np.diff(s) < 0):
        raise InvalidConfigError("QQ input must be sorted ascending")
    positions = (np.arange(1, s.size + 1) - 0.5) / s.size
    if isinstance(law, CauchyLaw):
        keep = (positions >= 0.01) & (positions <= 0.99)
        positions, s = positions[keep], s[keep]
    return np.column_stack([np.asarray(law.quantile(positions), dtype=float), s])
