"""Per-country analysis documents and plot-data files.

Documents are JSON with sorted keys; floats are written with ``repr`` so
identical inputs give byte-identical output.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sovrisk import __version__
from sovrisk.calibrate import (
    ConsistencyReport,
    FitResult,
    FitWindow,
    consistency_check,
    fit_linear,
    fit_sigmoid,
)
from sovrisk.countries import defaults_for, scenario_path
from sovrisk.ingest import CountrySeries, Period
from sovrisk.project import (
    DefaultEvent,
    TrendModel,
    Trajectory,
    closed_form_trajectory,
    date_default,
    fit_trend,
    trend_trajectory,
)
from sovrisk.risk_map import (
    ModelParams,
    RecoveryAssumption,
    certain_default_ratio,
    default_distances,
    implied_probs,
    logistic_probs,
)
from sovrisk.scenario import ScenarioOutcome, load_scenario, run_scenario

SCHEMA = "sovrisk.report/1"
BAND_RHOS = (0.2, 0.5, 0.8)
# quarterly constants for the Greek accumulation plot
ACCUMULATION = {"i": 0.021, "s": 0.008, "y": -0.007}


def digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def fit_dict(fit: FitResult) -> dict:
    p = fit.params
    return {
        "method": fit.method,
        "window": str(fit.window),
        "r_c": p.r_c,
        "r_c_stderr": p.r_c_stderr,
        "eta": p.eta,
        "eta_stderr": p.eta_stderr,
        "sse": fit.sse,
        "r_squared": fit.r_squared,
        "n_obs": fit.n_obs,
        "residuals": {str(k): v for k, v in fit.residuals},
        "excluded": list(fit.excluded),
    }


def consistency_dict(rep: ConsistencyReport) -> dict:
    return {
        "verdict": rep.verdict,
        "tolerance": rep.tolerance,
        "max_abs_residual": rep.max_abs_residual,
        "deviations": {str(k): v for k, v in rep.deviations},
        "flagged": [str(p) for p in rep.flagged],
    }


def event_dict(event: DefaultEvent | None) -> dict | None:
    if event is None:
        return None
    out = {
        "date": str(event.date),
        "time": event.time,
        "threshold": event.threshold,
        "already_beyond": event.already_beyond,
    }
    if event.recovery is not None:
        out["rho"] = event.recovery.rho
    if event.band is not None:
        out["band"] = [str(d) if d else None for d in event.band]
    return out


def outcome_dict(o: ScenarioOutcome) -> dict:
    return {
        "label": o.spec.label,
        "bailout": o.spec.bailout,
        "haircut": o.spec.haircut,
        "start_ratio": o.trajectory.points[0][1],
        "projected": {str(p): v for p, v in o.projected},
        "threshold": o.threshold,
        "crossed": o.crossed,
        "margin": o.margin,
        "event": event_dict(o.event),
    }


@dataclass
class CountryAnalysis:
    series: CountrySeries
    window: FitWindow
    recovery: RecoveryAssumption
    linear: FitResult | None = None
    sigmoid: FitResult | None = None
    consistency: ConsistencyReport | None = None
    trend: TrendModel | None = None
    trajectory: Trajectory | None = None
    events: dict = field(default_factory=dict)
    scenarios: list = field(default_factory=list)

    @property
    def params(self) -> ModelParams:
        fit = self.sigmoid or self.linear
        return fit.params


def analyse(series: CountrySeries, window: FitWindow, recovery: RecoveryAssumption,
            method: str = "both", tolerance: float = 0.08) -> CountryAnalysis:
    a = CountryAnalysis(series, window, recovery)
    if method in ("linear", "both"):
        a.linear = fit_linear(series, window)
        a.consistency = consistency_check(series, a.linear, tolerance)
    if method in ("sigmoid", "both"):
        a.sigmoid = fit_sigmoid(series, window, recovery)
    return a


def add_projection(a: CountryAnalysis, order: int, trend_window: FitWindow, horizon: int,
                   params: ModelParams | None = None, band=(0.2, 0.8)) -> None:
    params = params or a.params
    a.trend = fit_trend(a.series, trend_window, order)
    a.trajectory = trend_trajectory(a.trend, horizon, through=a.series.rows[-1].period)
    for rho in BAND_RHOS:
        a.events[rho] = date_default(a.trajectory, params, RecoveryAssumption(rho), band=band)


def add_scenarios(a: CountryAnalysis, names, directory=None, params: ModelParams | None = None):
    params = params or a.params
    for name in names:
        path = Path(name) if Path(name).suffix == ".scn" else scenario_path(name, directory)
        if not path.exists():
            continue
        a.scenarios.append(run_scenario(a.series, params, a.recovery, load_scenario(path)))


def document(a: CountryAnalysis, inputs: dict[str, Path], config: dict) -> dict:
    doc = {
        "schema": SCHEMA,
        "country": a.series.country,
        "fits": {},
        "provenance": {
            "tool_version": __version__,
            "inputs": {k: digest(v) for k, v in sorted(inputs.items())},
            "config": config,
        },
    }
    if a.linear:
        doc["fits"]["linear"] = fit_dict(a.linear)
    if a.sigmoid:
        doc["fits"]["sigmoid"] = fit_dict(a.sigmoid)
    if a.consistency:
        doc["consistency"] = consistency_dict(a.consistency)
    if a.trend:
        doc["trend"] = {
            "order": a.trend.order,
            "window": str(a.trend.window),
            "coefficients": list(a.trend.coefficients),
        }
        doc["default_events"] = {f"{rho:.1f}": event_dict(e) for rho, e in sorted(a.events.items())}
    if a.scenarios:
        doc["scenarios"] = [outcome_dict(o) for o in a.scenarios]
        # market rates held, targets met, no write-down: the recursion route
        # to a default date, reported beside the trend route
        plain = [o for o in a.scenarios if not o.spec.haircut]
        if plain:
            doc["recursion_default"] = event_dict(plain[0].event)
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _write(path: Path, header, rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(c)) if isinstance(c, (float, np.floating)) else c for c in row])
    return path


def write_plot_data(a: CountryAnalysis, out: Path) -> list[Path]:
    """Plot-data files for one country. Returns the paths written."""
    out.mkdir(parents=True, exist_ok=True)
    c = a.series.country
    written = []
    rows = [r for r in a.series.rows if r.risk_free_rate is not None]
    if a.linear:
        p = a.linear.params
        pos = [r for r in rows if r.long_rate > r.risk_free_rate]
        X = default_distances([r.long_rate for r in pos], [r.risk_free_rate for r in pos])
        written.append(_write(out / f"{c}_distance.tsv", ["period", "x_t", "debt_ratio", "fitted_debt_ratio", "in_window"], [
            (str(r.period), float(x), r.debt_ratio, p.r_c - p.eta * float(x),
             int(a.window.start <= r.period <= a.window.end))
            for r, x in zip(pos, X)
        ]))
    if a.sigmoid:
        p = a.sigmoid.params
        rho = a.recovery.rho
        pts = [r for r in rows if r.long_rate >= r.risk_free_rate]
        P = implied_probs([r.long_rate for r in pts], [r.risk_free_rate for r in pts], rho)
        written.append(_write(out / f"{c}_probability.tsv", ["period", "debt_ratio", "p_t", "model_p", "in_window"], [
            (str(r.period), r.debt_ratio, float(q), float(logistic_probs(r.debt_ratio, p.r_c, p.eta, rho)),
             int(a.window.start <= r.period <= a.window.end))
            for r, q in zip(pts, P)
        ]))
        hi = certain_default_ratio(p, RecoveryAssumption(0.2)) if rho > 0 else p.r_c + 4 * p.eta
        grid = np.linspace(0.0, hi, 201)
        curve = logistic_probs(grid, p.r_c, p.eta, rho)
        written.append(_write(out / f"{c}_probability_curve.tsv", ["debt_ratio", "model_p"],
                              [(float(x), float(y)) for x, y in zip(grid, curve) if y <= 1]))
        written.append(_write(out / f"{c}_certain_default_band.tsv", ["rho", "certain_default_ratio"], [
            (rho_, certain_default_ratio(p, RecoveryAssumption(rho_))) for rho_ in BAND_RHOS
        ]))
    if a.trajectory:
        observed = [(str(r.period), r.debt_ratio, "observed") for r in a.series.rows]
        trend = [(str(per), v, "trend") for per, v in a.trajectory.points]
        written.append(_write(out / f"{c}_projection.tsv", ["period", "debt_ratio", "source"], observed + trend))
        written.append(_write(out / f"{c}_default_dates.tsv", ["rho", "threshold", "date"], [
            (rho, e.threshold if e else certain_default_ratio(a.params, RecoveryAssumption(rho)),
             str(e.date) if e else "none")
            for rho, e in sorted(a.events.items())
        ]))
    if a.scenarios:
        written.append(_write(out / f"{c}_scenarios.tsv", ["label", "period", "debt_ratio", "crossed"], [
            (o.spec.label, str(per), v, int(o.crossed)) for o in a.scenarios for per, v in o.projected
        ]))
    return written


def write_timing(analyses: list[CountryAnalysis], out: Path) -> Path:
    """Debt ratios normalised by each country's critical ratio, observed and trend."""
    rows = []
    for a in analyses:
        rc = a.params.r_c
        for r in a.series.rows:
            rows.append((a.series.country, str(r.period), r.period.end_time, r.debt_ratio / rc, "observed"))
        if a.trajectory:
            for per, v in a.trajectory.points:
                rows.append((a.series.country, str(per), per.end_time, v / rc, "trend"))
    return _write(out / "timing_normalized.tsv", ["country", "period", "time", "normalized_ratio", "source"], rows)


def write_accumulation(series: CountrySeries, out: Path, quarters: int = 44) -> Path:
    """Closed-form quarterly paths from the series' first debt ratio."""
    start = series.rows[0]
    q0 = Period(start.period.year, 4) if not start.period.quarter else start.period
    k = ACCUMULATION
    disc = closed_form_trajectory(q0, start.debt_ratio, k["i"], k["s"], k["y"], quarters, "discrete")
    cont = closed_form_trajectory(q0, start.debt_ratio, k["i"], k["s"], k["y"], quarters, "continuous")
    return _write(out / f"{series.country}_accumulation.tsv", ["quarter", "continuous", "discrete"], [
        (str(pd), vc, vd) for (pd, vd), (_, vc) in zip(disc.points, cont.points)
    ])


def write_sigmoid_family(out: Path, r_c: float = 1.0, sigmas=(0.05, 0.1, 0.2)) -> Path:
    """Zero-recovery default probability for several threshold spreads, plus the step limit."""
    grid = np.linspace(0.0, 2 * r_c, 201)
    header = ["debt_ratio", "step"] + [f"sigma_{s}" for s in sigmas]
    rows = []
    for x in grid:
        step = 0.0 if x < r_c else (0.5 if x == r_c else 1.0)
        vals = [float(logistic_probs(x, r_c, s * np.sqrt(2 * np.pi) / 4)) for s in sigmas]
        rows.append((float(x), step, *vals))
    return _write(out / "default_probability_family.tsv", header, rows)


def default_trend(country: str):
    d = defaults_for(country)
    return d.trend_order, d.trend_window
