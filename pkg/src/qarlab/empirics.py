"""CSV price ingestion and estimation reports for observed series.

The report fits the linear autoregression and the quantile autoregression at
each requested level, with and without an intercept, on price levels (or
logs). Linear rows carry analytic standard errors; quantile rows carry xy
(pairs) bootstrap standard errors. t statistics are the raw ratios
estimate / s.e. (testing a zero coefficient), which is the convention of
per-asset summary tables; the unit-root test lives in ``qarlab.inference``.

Expected input format: a header row with ISO-8601 dates and decimal prices,
e.g. ``date,price``. Rows may arrive out of order; duplicate dates are
rejected. Output columns: model,tau,intercept,coef,estimate,se,tstat.
"""

from __future__ import annotations

import csv
import datetime
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    DateParseError,
    DuplicateDateError,
    InvalidConfigError,
    MissingColumnError,
    PriceValueError,
)
from .estimators import bootstrap_xy, check_tau, fit_ols_xy, fit_quantile_xy
from .rng import derive_seed

MIN_SERIES_LENGTH = 30


@dataclass(frozen=True)
class PriceSeries:
    """Dated positive price observations, strictly increasing in date."""

    dates: tuple[datetime.date, ...]
    prices: np.ndarray
    name: str

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if len(self.dates) != len(prices):
            raise InvalidConfigError("dates and prices must have equal length")
        if len(prices) < MIN_SERIES_LENGTH:
            raise InvalidConfigError(
                f"price series needs at least {MIN_SERIES_LENGTH} observations, "
                f"got {len(prices)}"
            )
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise InvalidConfigError("prices must be positive and finite")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise InvalidConfigError("dates must be strictly increasing")
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)

    def __len__(self) -> int:
        return len(self.prices)


def load_csv(path, date_column: str = "date", price_column: str = "price",
             name: str | None = None) -> PriceSeries:
    """Read a dated price CSV into a PriceSeries.

    Rows are sorted by date ascending. Every malformed cell raises a distinct
    ingestion error naming the file row (header = row 1).
    """
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for column in (date_column, price_column):
            if column not in header:
                raise MissingColumnError(
                    f"{path}: column {column!r} not found in header {header}"
                )
        rows: list[tuple[datetime.date, float, int]] = []
        for line, row in enumerate(reader, start=2):
            raw_date = (row.get(date_column) or "").strip()
            try:
                parsed = datetime.date.fromisoformat(raw_date)
            except ValueError:
                raise DateParseError(
                    f"{path} row {line}: {raw_date!r} is not an ISO-8601 date"
                ) from None
            raw_price = (row.get(price_column) or "").strip()
            try:
                price = float(raw_price)
            except ValueError:
                raise PriceValueError(
                    f"{path} row {line}: price cell {raw_price!r} is not a number"
                ) from None
            if not math.isfinite(price) or price <= 0:
                raise PriceValueError(
                    f"{path} row {line}: price must be positive and finite, got {price}"
                )
            rows.append((parsed, price, line))

    seen: dict[datetime.date, int] = {}
    for parsed, _, line in rows:
        if parsed in seen:
            raise DuplicateDateError(
                f"{path} row {line}: date {parsed.isoformat()} already appeared "
                f"on row {seen[parsed]}"
            )
        seen[parsed] = line

    rows.sort(key=lambda item: item[0])
    label = name if name is not None else os.path.splitext(os.path.basename(path))[0]
    return PriceSeries(dates=tuple(r[0] for r in rows),
                       prices=np.array([r[1] for r in rows]), name=label)


@dataclass(frozen=True)
class ReportRow:
    model: str  # "linear" or "qr"
    tau: float | None  # None for linear rows
    intercept: bool
    coef: str  # "mu" or "rho"
    estimate: float
    se: float
    tstat: float


def coef_tstat(estimate: float, se: float) -> float:
    """Raw coefficient t ratio (H0: coefficient 0); NaN when the s.e. is zero."""
    return estimate / se if se > 0 else float("nan")


def linear_report_rows(x: np.ndarray, y: np.ndarray, intercept: bool) -> list[ReportRow]:
    fit = fit_ols_xy(x, y, include_intercept=intercept)
    sigma = math.sqrt(fit.sigma2_hat)
    rows = []
    if intercept:
        n = len(x)
        sxx = float(np.sum((x - x.mean()) ** 2))
        se_mu = sigma * math.sqrt(1.0 / n + x.mean() ** 2 / sxx)
        se_rho = sigma / math.sqrt(sxx)
        rows.append(ReportRow("linear", None, True, "mu", fit.mu_hat, se_mu,
                              coef_tstat(fit.mu_hat, se_mu)))
    else:
        se_rho = sigma / math.sqrt(float(x @ x))
    rows.append(ReportRow("linear", None, intercept, "rho", fit.rho_hat, se_rho,
                          coef_tstat(fit.rho_hat, se_rho)))
    return rows


def table1_report(series: PriceSeries, taus=(0.05, 0.5, 0.95), n_boot: int = 1000,
                  seed: int = 0, log_prices: bool = False) -> list[ReportRow]:
    """Per-asset estimation table: linear and QR(tau) rows, both intercept modes.

    Each (model, intercept mode) block lists the intercept row (when present)
    then the slope row. QR standard errors come from the xy bootstrap; each
    (tau, intercept) combination draws from its own substream of ``seed``.
    """
    taus = sorted(check_tau(t) for t in taus)
    values = np.log(series.prices) if log_prices else np.asarray(series.prices)
    x, y = values[:-1], values[1:]

    rows: list[ReportRow] = []
    for intercept in (False, True):
        rows.extend(linear_report_rows(x, y, intercept))

    for k, tau in enumerate(taus):
        for intercept in (False, True):
            fit = fit_quantile_xy(x, y, tau, include_intercept=intercept)
            boot = bootstrap_xy(values, tau, n_boot=n_boot,
                                seed=derive_seed(seed, 2 * k + intercept),
                                include_intercept=intercept)
            if intercept:
                rows.append(ReportRow("qr", tau, True, "mu", fit.mu_hat,
                                      boot.se_mu, coef_tstat(fit.mu_hat, boot.se_mu)))
            rows.append(ReportRow("qr", tau, intercept, "rho", fit.rho_hat,
                                  boot.se_rho, coef_tstat(fit.rho_hat, boot.se_rho)))
    return rows


REPORT_COLUMNS = ("model", "tau", "intercept", "coef", "estimate", "se", "tstat")


def report_to_csv(rows: list[ReportRow], handle) -> None:
    """Write report rows as CSV with full-precision floats."""
    writer = csv.writer(handle)
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        writer.writerow([
            row.model,
            "" if row.tau is None else repr(float(row.tau)),
            "true" if row.intercept else "false",
            row.coef,
            repr(float(row.estimate)),
            repr(float(row.se)),
            repr(float(row.tstat)),
        ])


def _model_label(model: str, tau: float | None) -> str:
    return "linear" if model == "linear" else f"QR(tau={tau:g})"


def render_table(rows: list[ReportRow], name: str = "") -> str:
    """Fixed-width table with one block per model: intercept row then slope
    row, and (estimate, s.e., t) column triples for both intercept modes."""
    groups: dict[tuple[str, float | None], dict] = {}
    for row in rows:
        cell = groups.setdefault((row.model, row.tau), {})
        cell[(row.intercept, row.coef)] = row

    def triple(row: ReportRow | None) -> str:
        if row is None:
            return f"{'':>10} {'':>9} {'':>9}"
        return f"{row.estimate:>10.4f} {row.se:>9.4f} {row.tstat:>9.1f}"

    header_top = (f"{'':<14}{'':<5}{'no intercept':^30} {'intercept':^30}")
    header = (f"{'model':<14}{'coef':<5}"
              f"{'estimate':>10} {'s.e.':>9} {'t-stat':>9} "
              f"{'estimate':>10} {'s.e.':>9} {'t-stat':>9}")
    lines = []
    if name:
        lines.append(name)
    lines.extend([header_top, header, "-" * len(header)])
    for (model, tau), cells in groups.items():
        label = _model_label(model, tau)
        for coef in ("mu", "rho"):
            if (True, coef) not in cells and (False, coef) not in cells:
                continue
            lines.append(f"{label:<14}{coef:<5}"
                         f"{triple(cells.get((False, coef)))} "
                         f"{triple(cells.get((True, coef)))}")
            label = ""
    return "\n".join(lines)
