"""qarlab: a numerical laboratory for quantile autoregression under moderate
deviations from the unit root.

Simulate rho_n = 1 + c / n**gamma autoregressions, estimate them by
check-loss quantile regression and least squares, verify the Gaussian,
Cauchy, and Ornstein-Uhlenbeck limit theories by Monte Carlo, and run
bootstrap-based estimation reports on observed price series.
"""

__version__ = "0.1.0"

from .checkfun import check_loss, knight_gap, psi
from .dgp import (
    DgpConfig,
    GaussianInnovations,
    Sample,
    StudentTInnovations,
    draw_innovations,
    make_rho,
    simulate,
)
from .empirics import PriceSeries, ReportRow, load_csv, render_table, table1_report
from .errors import (
    BootstrapFailureError,
    DiscretizationFailureError,
    ExperimentFailureError,
    ExplosiveOverflowError,
    IngestionError,
    InsufficientDataError,
    InvalidConfigError,
    NumericFailureError,
    QarlabError,
    SingularDesignError,
    SolverFailureError,
)
from .estimators import (
    OLSAR,
    OlsFit,
    QuantileAR,
    QuantileFit,
    SparsityEstimate,
    XyBootstrap,
    bootstrap_xy,
    estimate_sparsity,
    fit_ols,
    fit_ols_xy,
    fit_quantile,
    fit_quantile_xy,
    hall_sheather_bandwidth,
)
from .inference import TTestResult, confidence_interval, t_stat_ols, t_stat_quantile
from .limits import (
    CauchyLaw,
    EmpiricalLaw,
    NormalLaw,
    RegimeNormalization,
    bahadur_gap,
    normalize_stat,
    reference_law_near_explosive,
    reference_law_near_stationary,
    regime_for,
    sample_ou_ratio,
)
from .montecarlo import (
    ExperimentSpec,
    McReport,
    ks_statistic,
    moment_check,
    qq_data,
    run_experiment,
)
from .rng import derive_seed, splitmix64

__all__ = [name for name in dir() if not name.startswith("_")]
