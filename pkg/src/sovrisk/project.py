"""Debt-ratio trajectories and the date they cross a default threshold."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as P

from sovrisk.calibrate import FitWindow
from sovrisk.errors import DataError
from sovrisk.ingest import CountrySeries, Period
from sovrisk.risk_map import ModelParams, RecoveryAssumption, certain_default_ratio

MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
# below this |i - y| the closed forms switch to their analytic limit
SINGULAR = 1e-12


@dataclass(frozen=True, order=True)
class YearMonth:
    year: int
    month: int

    @classmethod
    def from_time(cls, t: float) -> YearMonth:
        """Calendar month containing decimal-year instant ``t``."""
        year = math.floor(t)
        month = min(12, int((t - year) * 12) + 1)
        return cls(year, month)

    def months_since(self, other: YearMonth) -> int:
        return (self.year - other.year) * 12 + self.month - other.month

    def __str__(self):
        return f"{MONTHS[self.month - 1]} {self.year}"


@dataclass(frozen=True)
class TrendModel:
    """Polynomial in years since the close of the window's first period."""

    coefficients: tuple[float, ...]
    order: int
    window: FitWindow

    def __post_init__(self):
        if not 1 <= self.order <= 3:
            raise ValueError(f"trend order must be 1..3, got {self.order}")
        if len(self.coefficients) != self.order + 1:
            raise ValueError("need order + 1 coefficients")

    @property
    def origin(self) -> float:
        return self.window.start.end_time

    def at_time(self, t):
        return P.polyval(np.asarray(t, dtype=float) - self.origin, self.coefficients)

    def predict(self, period: Period) -> float:
        return float(self.at_time(period.end_time))


@dataclass(frozen=True)
class MacroPath:
    """Per-period inputs of the accumulation equation, starting at ``start``."""

    start: Period
    budget_ratio: tuple[float, ...]
    long_rate: tuple[float, ...]
    gdp_growth: tuple[float, ...]

    def __post_init__(self):
        n = len(self.budget_ratio)
        if len(self.long_rate) != n or len(self.gdp_growth) != n:
            raise ValueError("macro path components must have equal lengths")
        if any(not x > -1 for x in self.long_rate + self.gdp_growth):
            raise ValueError("rates and growth must exceed -1")

    @property
    def frequency(self):
        return self.start.frequency

    @classmethod
    def constant(cls, start: Period, n: int, s: float, i: float, y: float) -> MacroPath:
        return cls(start, (s,) * n, (i,) * n, (y,) * n)

    def __len__(self):
        return len(self.budget_ratio)


@dataclass(frozen=True)
class Trajectory:
    points: tuple[tuple[Period, float], ...]
    source: str  # "trend" | "recursion" | "closed_form" | "scenario"

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        for (a, _), (b, _) in zip(self.points, self.points[1:]):
            if not a < b:
                raise ValueError(f"trajectory periods not increasing at {b}")

    @property
    def ratios(self) -> list[float]:
        return [v for _, v in self.points]

    @property
    def end(self) -> float:
        return self.points[-1][1]

    def normalized(self, scale: float) -> Trajectory:
        return Trajectory(tuple((p, v / scale) for p, v in self.points), self.source)


@dataclass(frozen=True)
class DefaultEvent:
    date: YearMonth
    time: float
    threshold: float
    recovery: RecoveryAssumption | None = None
    band: tuple[YearMonth | None, YearMonth | None] | None = None
    already_beyond: bool = False


def fit_trend(series: CountrySeries, window: FitWindow, order: int) -> TrendModel:
    rows = series.between(window.start, window.end)
    if len(rows) < order + 2:
        raise DataError(f"{series.country}: {len(rows)} rows in {window} cannot fit an order-{order} trend")
    t = np.array([r.period.end_time for r in rows]) - window.start.end_time
    R = np.array([r.debt_ratio for r in rows])
    coef = P.polyfit(t, R, order)
    return TrendModel(tuple(float(c) for c in coef), order, window)


def trend_trajectory(model: TrendModel, horizon: int, through: Period | None = None) -> Trajectory:
    """Trend values from the window start to ``horizon`` periods past ``through``.

    ``through`` defaults to the window end.
    """
    last = (through or model.window.end).shift(horizon)
    points, p = [], model.window.start
    while p <= last:
        points.append((p, model.predict(p)))
        p = p.next()
    return Trajectory(tuple(points), "trend")


def step_accumulation(prev_ratio: float, s: float, i: float, y: float) -> float:
    """One period of ``R_t = s_t + R_{t-1} ((i_t - y_t)/(1 + y_t) + 1)``."""
    if not y > -1:
        raise ValueError("GDP growth must exceed -1")
    return s + prev_ratio * ((i - y) / (1 + y) + 1)


def project_recursion(start_ratio: float, path: MacroPath) -> Trajectory:
    if len(path) == 0:
        raise ValueError("empty macro path")
    points, ratio, period = [], start_ratio, path.start
    for s, i, y in zip(path.budget_ratio, path.long_rate, path.gdp_growth):
        ratio = step_accumulation(ratio, s, i, y)
        points.append((period, ratio))
        period = period.next()
    return Trajectory(tuple(points), "recursion")


def closed_form_path(start_ratio: float, i: float, s: float, y: float, t: float,
                     kind: str = "discrete") -> float:
    """Debt ratio after ``t`` periods of constant ``(s, i, y)``.

    ``discrete`` solves the difference equation exactly; ``continuous``
    solves its smooth approximation. Both reduce to ``R_0 + s t`` at i = y.
    """
    if abs(i - y) < SINGULAR:
        return start_ratio + s * t
    if kind == "discrete":
        g = ((1 + i) / (1 + y)) ** t
    elif kind == "continuous":
        g = math.exp((i - y) / (1 + y) * t)
    else:
        raise ValueError(f"unknown closed form {kind!r}")
    return start_ratio * g + s * (1 + y) / (i - y) * (g - 1)


def closed_form_trajectory(start: Period, start_ratio: float, i: float, s: float, y: float,
                           n: int, kind: str = "discrete") -> Trajectory:
    points = []
    for k in range(n + 1):
        points.append((start.shift(k), closed_form_path(start_ratio, i, s, y, k, kind)))
    return Trajectory(tuple(points), "closed_form")


def default_date(trajectory: Trajectory, threshold: float) -> DefaultEvent | None:
    """First crossing of ``threshold``, interpolated linearly between periods.

    The crossing instant is placed on the decimal-year axis of period
    closes and reported as the calendar month containing it.
    """
    pts = trajectory.points
    if not pts:
        return None
    p0, v0 = pts[0]
    if v0 >= threshold:
        return DefaultEvent(YearMonth.from_time(p0.end_time), p0.end_time, threshold, already_beyond=True)
    for (pa, va), (pb, vb) in zip(pts, pts[1:]):
        if vb >= threshold:
            ta, tb = pa.end_time, pb.end_time
            t = ta + (threshold - va) / (vb - va) * (tb - ta)
            return DefaultEvent(YearMonth.from_time(t), t, threshold)
    return None


def date_default(trajectory: Trajectory, params: ModelParams, recovery: RecoveryAssumption,
                 band: tuple[float, float] | None = (0.2, 0.8)) -> DefaultEvent | None:
    """Default date at ``recovery``'s certain-default ratio, with an optional
    band of dates for a range of recovery rates."""
    threshold = certain_default_ratio(params, recovery)
    event = default_date(trajectory, threshold)
    if event is None:
        return None
    band_dates = None
    if band is not None:
        band_dates = tuple(
            (e.date if (e := default_date(trajectory, certain_default_ratio(params, RecoveryAssumption(rho))))
             else None)
            for rho in band
        )
    return DefaultEvent(event.date, event.time, threshold, recovery, band_dates, event.already_beyond)


def write_trajectory(trajectory: Trajectory, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["period", "debt_ratio", "source"])
        for p, v in trajectory.points:
            w.writerow([str(p), repr(float(v)), trajectory.source])
    return path


def read_trajectory(path: str | Path) -> Trajectory:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    source = rows[1][2] if len(rows) > 1 else "trend"
    return Trajectory(tuple((Period.parse(a), float(b)) for a, b, _ in rows[1:]), source)
