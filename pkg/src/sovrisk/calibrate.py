"""Fitting the critical debt ratio and heterogeneity to a country series.

Two routes: ordinary least squares of debt ratio on default distance
(``R = r_c - eta * X``), and nonlinear least squares of implied default
probability on debt ratio through the logistic model. A brute-force grid
search serves as an independent check on the nonlinear route.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from sovrisk.errors import DataError, NumericalError
from sovrisk.ingest import CountrySeries, ObservationRow, Period, error_periods, validate_series
from sovrisk.risk_map import (
    ModelParams,
    RecoveryAssumption,
    default_distances,
    implied_probs,
)

log = logging.getLogger(__name__)

MIN_ROWS = 4


@dataclass(frozen=True)
class FitWindow:
    start: Period
    end: Period

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"window start {self.start} after end {self.end}")

    @classmethod
    def years(cls, start: int, end: int) -> FitWindow:
        return cls(Period(start), Period(end))

    @classmethod
    def parse(cls, text: str) -> FitWindow:
        a, _, b = text.partition(":") if ":" in text else text.partition("-")
        return cls(Period.parse(a), Period.parse(b))

    def __str__(self):
        return f"{self.start}:{self.end}"


@dataclass(frozen=True)
class SearchBounds:
    r_c: tuple[float, float] = (0.5, 3.0)
    eta: tuple[float, float] = (0.01, 0.5)

    def contains(self, r_c, eta, margin=0.0):
        return (self.r_c[0] + margin < r_c < self.r_c[1] - margin
                and self.eta[0] + margin < eta < self.eta[1] - margin)


@dataclass(frozen=True)
class FitResult:
    params: ModelParams
    method: str  # "linear" | "sigmoid" | "grid"
    window: FitWindow
    sse: float
    r_squared: float
    residuals: tuple[tuple[Period, float], ...]
    at_boundary: bool = False
    iterations: int = 0
    excluded: tuple[str, ...] = field(default=())

    @property
    def n_obs(self):
        return len(self.residuals)


@dataclass(frozen=True)
class ConsistencyReport:
    fit: FitResult
    max_abs_residual: float
    tolerance: float
    verdict: str  # "consistent" | "inconsistent"
    deviations: tuple[tuple[Period, float], ...]

    @property
    def flagged(self) -> list[Period]:
        return [p for p, d in self.deviations if abs(d) > self.tolerance]


def _window_rows(series: CountrySeries, window: FitWindow) -> tuple[list[ObservationRow], list[str]]:
    bad = error_periods(validate_series(series))
    rows, notes = [], []
    for r in series.between(window.start, window.end):
        if r.period in bad:
            notes.append(f"{r.period}: excluded (validation error)")
            continue
        if r.risk_free_rate is None:
            raise DataError(f"{series.country} {r.period}: no risk-free rate; join a reference series first")
        rows.append(r)
    return rows, notes


def _usable_for_distance(series, window):
    rows, notes = _window_rows(series, window)
    kept = []
    for r in rows:
        if r.long_rate > r.risk_free_rate:
            kept.append(r)
        else:
            notes.append(f"{r.period}: excluded (spread non-positive)")
    return kept, notes


def _usable_for_probability(series, window, recovery):
    rows, notes = _window_rows(series, window)
    kept = []
    for r in rows:
        if r.long_rate < r.risk_free_rate:
            notes.append(f"{r.period}: excluded (spread non-positive)")
            continue
        p = float(implied_probs(r.long_rate, r.risk_free_rate, recovery.rho))
        if p > 1:
            log.warning("%s %s: implied probability %.3f above one, excluded", series.country, r.period, p)
            notes.append(f"{r.period}: excluded (implied probability {p:.3f} above one)")
            continue
        kept.append(r)
    return kept, notes


def _arrays(rows):
    R = np.array([r.debt_ratio for r in rows])
    i = np.array([r.long_rate for r in rows])
    r = np.array([r.risk_free_rate for r in rows])
    return R, i, r


def _r_squared(y, sse):
    sst = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - sse / sst if sst > 0 else (1.0 if sse == 0 else -math.inf)


def fit_linear(series: CountrySeries, window: FitWindow) -> FitResult:
    """OLS of ``R_t`` on ``X_t``: intercept is ``r_c``, minus the slope is ``eta``."""
    rows, notes = _usable_for_distance(series, window)
    if len(rows) < MIN_ROWS:
        raise DataError(f"{series.country}: {len(rows)} usable rows in {window}, need {MIN_ROWS}")
    R, i, r = _arrays(rows)
    X = default_distances(i, r)
    xm = X.mean()
    sxx = float(np.sum((X - xm) ** 2))
    if sxx == 0:
        raise DataError(f"{series.country}: default distance has zero variance in {window}")
    slope = float(np.sum((X - xm) * (R - R.mean())) / sxx)
    intercept = float(R.mean() - slope * xm)
    resid = R - (intercept + slope * X)
    sse = float(resid @ resid)
    n = len(R)
    s2 = sse / (n - 2)
    se_slope = math.sqrt(s2 / sxx)
    se_intercept = math.sqrt(s2 * (1 / n + xm * xm / sxx))
    if not -slope > 0:
        raise DataError(f"{series.country}: fitted slope {slope:.4g} gives non-positive eta")
    params = ModelParams(intercept, -slope, se_intercept, se_slope)
    return FitResult(
        params, "linear", window, sse, _r_squared(R, sse),
        tuple((row.period, float(e)) for row, e in zip(rows, resid)),
        excluded=tuple(notes),
    )


def _sigmoid_problem(series, window, recovery):
    rows, notes = _usable_for_probability(series, window, recovery)
    if len(rows) < MIN_ROWS:
        raise DataError(f"{series.country}: {len(rows)} usable rows in {window}, need {MIN_ROWS}")
    R, i, r = _arrays(rows)
    P = implied_probs(i, r, recovery.rho)
    return rows, notes, R, P


def _residuals_and_jacobian(theta, R, P, scale):
    r_c, eta = theta
    z = (R - r_c) / eta
    L = expit(z)
    res = P - L * scale
    dL = L * (1 - L) * scale
    # derivatives of the model (residual = data - model)
    J = np.column_stack([-dL / eta, -dL * z / eta])
    return res, J


def _levenberg_marquardt(theta, R, P, scale, max_iter):
    lam = 1e-3
    res, J = _residuals_and_jacobian(theta, R, P, scale)
    sse = float(res @ res)
    for it in range(1, max_iter + 1):
        g = J.T @ res
        A = J.T @ J
        if np.max(np.abs(g)) <= 1e-15 * max(1.0, sse) and it > 1:
            return theta, res, J, sse, it
        while True:
            step = np.linalg.solve(A + lam * np.diag(np.diag(A) + 1e-300), g)
            # model-Jacobian sign: residual = data - model, so theta += step
            trial = theta + step
            if trial[1] > 0:
                t_res, t_J = _residuals_and_jacobian(trial, R, P, scale)
                t_sse = float(t_res @ t_res)
                if t_sse <= sse:
                    break
            lam *= 10
            if lam > 1e16:
                return theta, res, J, sse, it
        small = np.all(np.abs(step) <= 1e-13 * (np.abs(theta) + 1e-13))
        flat = sse - t_sse <= 1e-16 * max(sse, 1e-300)
        theta, res, J, sse = trial, t_res, t_J, t_sse
        lam = max(lam / 10, 1e-12)
        if small or (flat and np.all(np.abs(step) <= 1e-9 * np.abs(theta))):
            return theta, res, J, sse, it
    raise NumericalError(f"sigmoid fit did not converge in {max_iter} iterations")


def fit_sigmoid(series: CountrySeries, window: FitWindow, recovery: RecoveryAssumption,
                bounds: SearchBounds = SearchBounds(), max_iter: int = 200,
                start: ModelParams | None = None) -> FitResult:
    """Least squares of implied ``P_t`` against the logistic model in ``R_t``.

    Levenberg-Marquardt with an analytic Jacobian, started from the linear
    fit. Standard errors come from ``s^2 (J^T J)^{-1}`` at the optimum.
    """
    rows, notes, R, P = _sigmoid_problem(series, window, recovery)
    if start is None:
        try:
            lin = fit_linear(series, window)
            start = lin.params
        except DataError:
            start = None
    if start is None or not bounds.contains(start.r_c, start.eta):
        start = ModelParams(sum(bounds.r_c) / 2, sum(bounds.eta) / 2)
    theta0 = np.array([start.r_c, start.eta], dtype=float)
    theta, res, J, sse, iters = _levenberg_marquardt(theta0, R, P, 1 / (1 - recovery.rho), max_iter)
    r_c, eta = float(theta[0]), float(theta[1])
    if not bounds.contains(r_c, eta):
        raise NumericalError(
            f"{series.country}: sigmoid optimum (r_c={r_c:.4g}, eta={eta:.4g}) on or beyond search bounds")
    n = len(R)
    s2 = sse / (n - 2)
    try:
        cov = s2 * np.linalg.inv(J.T @ J)
        se = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        se = np.array([math.nan, math.nan])
    params = ModelParams(r_c, eta, float(se[0]), float(se[1]))
    return FitResult(
        params, "sigmoid", window, sse, _r_squared(P, sse),
        tuple((row.period, float(e)) for row, e in zip(rows, res)),
        iterations=iters, excluded=tuple(notes),
    )


def _centers(lo, hi, step):
    n = max(1, int(round((hi - lo) / step)))
    return lo + (np.arange(n) + 0.5) * step


def grid_oracle(series: CountrySeries, window: FitWindow, recovery: RecoveryAssumption,
                bounds: SearchBounds = SearchBounds(),
                resolution: tuple[float, float] = (5e-3, 5e-3)) -> FitResult:
    """Exhaustive SSE over cell centres of the parameter box.

    Ties go to the smallest ``r_c``, then the smallest ``eta`` (first
    minimum in row-major order). ``at_boundary`` is set when the winning
    cell touches the box edge or the debt ratios carry no variance.
    """
    rows, notes, R, P = _sigmoid_problem(series, window, recovery)
    rc_grid = _centers(*bounds.r_c, resolution[0])
    eta_grid = _centers(*bounds.eta, resolution[1])
    scale = 1 / (1 - recovery.rho)
    sse = np.empty((rc_grid.size, eta_grid.size))
    chunk = max(1, 2_000_000 // max(1, eta_grid.size * R.size))
    for a in range(0, rc_grid.size, chunk):
        rc = rc_grid[a:a + chunk, None, None]
        model = expit((R[None, None, :] - rc) / eta_grid[None, :, None]) * scale
        sse[a:a + chunk] = np.sum((P - model) ** 2, axis=2)
    k = int(np.argmin(sse))
    ki, kj = divmod(k, eta_grid.size)
    r_c, eta = float(rc_grid[ki]), float(eta_grid[kj])
    edge = ki in (0, rc_grid.size - 1) or kj in (0, eta_grid.size - 1)
    flat = float(np.ptp(R)) == 0.0
    best = float(sse[ki, kj])
    model = expit((R - r_c) / eta) * scale
    return FitResult(
        ModelParams(r_c, eta), "grid", window, best, _r_squared(P, best),
        tuple((row.period, float(e)) for row, e in zip(rows, P - model)),
        at_boundary=edge or flat, excluded=tuple(notes),
    )


def consistency_check(series: CountrySeries, fit: FitResult, tolerance: float) -> ConsistencyReport:
    """Test whether every year sits on the fitted equilibrium line.

    Deviations are ``R_t - (r_c - eta X_t)``. A negative deviation means
    rates priced more default risk than the debt ratio warranted.
    """
    rows, _ = _usable_for_distance(series, fit.window)
    R, i, r = _arrays(rows)
    X = default_distances(i, r)
    dev = R - (fit.params.r_c - fit.params.eta * X)
    worst = float(np.max(np.abs(dev))) if dev.size else 0.0
    verdict = "consistent" if worst <= tolerance else "inconsistent"
    return ConsistencyReport(
        fit, worst, tolerance, verdict,
        tuple((row.period, float(d)) for row, d in zip(rows, dev)),
    )
