"""Exception types. Each failure mode named by the contract it breaks."""


class QarlabError(Exception):
    """Base class for all qarlab errors."""


class InvalidConfigError(QarlabError, ValueError):
    """A configuration or argument violates its invariants."""


class ExplosiveOverflowError(InvalidConfigError):
    """c > 0 with c * n**(1 - gamma) > 300: rho**n would overflow double precision."""


class NumericFailureError(QarlabError):
    """A computation produced non-finite values."""


class SingularDesignError(QarlabError):
    """Degenerate regression design (lag column constant or all zero)."""


class SolverFailureError(QarlabError):
    """Interior-point solver failed to reach the duality-gap tolerance."""


class InsufficientDataError(InvalidConfigError):
    """Too few observations for the requested operation."""


class BootstrapFailureError(QarlabError):
    """Bootstrap resampling exhausted its redraw budget."""


class DiscretizationFailureError(QarlabError):
    """Too many degenerate draws while sampling a limit functional."""


class ExperimentFailureError(QarlabError):
    """A Monte Carlo experiment exceeded its replication-failure budget."""


class IngestionError(QarlabError):
    """A data file failed to parse; the message names the offending row."""


class MissingColumnError(IngestionError):
    """A required column is absent from the header."""


class DateParseError(IngestionError):
    """A date cell is not a valid ISO-8601 calendar date."""


class PriceValueError(IngestionError):
    """A price cell is empty, non-numeric, non-finite, or not positive."""


class DuplicateDateError(IngestionError):
    """Two rows share the same date."""
