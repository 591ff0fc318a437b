import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import synthetic_series
from sovrisk.calibrate import (
    FitWindow,
    SearchBounds,
    consistency_check,
    fit_linear,
    fit_sigmoid,
    grid_oracle,
)
from sovrisk.countries import COUNTRIES, preset_window
from sovrisk.errors import DataError, NumericalError
from sovrisk.ingest import CountrySeries, ObservationRow, Period
from sovrisk.risk_map import ModelParams, RecoveryAssumption

HALF = RecoveryAssumption(0.5)
ALL = FitWindow.years(1900, 2100)


def line_series(r_c, eta, xs, r=0.0, start=2001):
    # with r = 0 the default distance is -ln(i), so i = exp(-X)
    rows = [ObservationRow(Period(start + k), r_c - eta * x, math.exp(-x), r) for k, x in enumerate(xs)]
    return CountrySeries("line", tuple(rows))


def test_linear_exact_recovery():
    s = line_series(1.5, 0.10, [1.0, 1.5, 2.2, 3.0, 3.1, 4.0])
    fit = fit_linear(s, ALL)
    assert fit.params.r_c == pytest.approx(1.5, abs=1e-10)
    assert fit.params.eta == pytest.approx(0.10, abs=1e-10)
    assert fit.n_obs == 6


def test_linear_greece(greece):
    fit = fit_linear(greece, FitWindow.years(2001, 2011))
    assert abs(fit.params.r_c - 1.90) <= 0.05
    assert abs(fit.params.eta - 0.15) <= 0.01
    assert fit.params.r_c_stderr == pytest.approx(0.05, abs=0.01)
    assert fit.params.eta_stderr == pytest.approx(0.01, abs=0.002)


def test_linear_portugal(bundled):
    fit = fit_linear(bundled["portugal"], FitWindow.years(2007, 2011))
    assert abs(fit.params.r_c - 1.35) <= 0.05
    assert abs(fit.params.eta - 0.11) <= 0.01


def test_linear_italy(bundled):
    fit = fit_linear(bundled["italy"], FitWindow.years(2007, 2011))
    assert abs(fit.params.r_c - 1.51) <= 0.1
    assert abs(fit.params.eta - 0.08) <= 0.02


def test_linear_needs_four_rows():
    s = line_series(1.5, 0.1, [1.0, 2.0, 3.0])
    with pytest.raises(DataError, match="need 4"):
        fit_linear(s, ALL)


def test_linear_zero_variance():
    s = line_series(1.5, 0.1, [2.0] * 5)
    with pytest.raises(DataError, match="zero variance"):
        fit_linear(s, ALL)


@pytest.mark.parametrize("c", [0.5, 2.0, 3.7])
def test_linear_scale_consistency(c):
    xs = [1.0, 1.4, 2.1, 2.9, 3.3]
    ratios = [1.2, 1.15, 0.98, 0.9, 0.81]
    base = CountrySeries("a", tuple(ObservationRow(Period(2001 + k), R, math.exp(-x), 0.0)
                                    for k, (x, R) in enumerate(zip(xs, ratios))))
    scaled = CountrySeries("a", tuple(ObservationRow(Period(2001 + k), R, math.exp(-c * x), 0.0)
                                      for k, (x, R) in enumerate(zip(xs, ratios))))
    a, b = fit_linear(base, ALL).params, fit_linear(scaled, ALL).params
    assert b.r_c == pytest.approx(a.r_c, rel=1e-12)
    assert b.eta == pytest.approx(a.eta / c, rel=1e-12)


def test_sigmoid_exact_recovery():
    s = synthetic_series(1.8, 0.15, np.linspace(1.0, 1.78, 8))
    fit = fit_sigmoid(s, ALL, HALF)
    assert fit.params.r_c == pytest.approx(1.8, abs=1e-6)
    assert fit.params.eta == pytest.approx(0.15, abs=1e-6)
    assert fit.sse < 1e-20


def test_sigmoid_excludes_rows_above_one():
    s = synthetic_series(1.8, 0.15, np.linspace(1.0, 1.78, 8))
    bad = ObservationRow(Period(2009), 2.3, 3.0, 0.03)
    rows = s.rows + (bad,)
    fit = fit_sigmoid(CountrySeries("x", rows), ALL, HALF)
    assert fit.n_obs == 8
    assert any("2009" in note for note in fit.excluded)


def test_sigmoid_boundary_optimum_is_error():
    s = synthetic_series(1.8, 0.15, np.linspace(1.0, 1.78, 8))
    with pytest.raises(NumericalError):
        fit_sigmoid(s, ALL, HALF, bounds=SearchBounds(r_c=(0.5, 1.5)))


def test_sigmoid_iteration_budget():
    s = synthetic_series(1.8, 0.15, np.linspace(1.0, 1.78, 8), noise=0.01, rng=np.random.default_rng(1))
    with pytest.raises(NumericalError, match="converge"):
        fit_sigmoid(s, ALL, HALF, max_iter=1, start=ModelParams(2.5, 0.4))


def test_sigmoid_independent_of_rho(greece):
    w = preset_window("greece")
    fits = [fit_sigmoid(greece, w, RecoveryAssumption(rho)).params for rho in (0.2, 0.5, 0.8)]
    ref = fits[1]
    for f in fits:
        assert abs(f.r_c - ref.r_c) < ref.r_c_stderr
        assert abs(f.eta - ref.eta) < ref.eta_stderr


def test_linear_has_no_rho(greece):
    w = preset_window("greece")
    assert fit_linear(greece, w) == fit_linear(greece, w)


def test_grid_oracle_synthetic_fine_step():
    s = synthetic_series(1.7, 0.12, np.linspace(1.0, 1.68, 7))
    g = grid_oracle(s, ALL, HALF, resolution=(1e-3, 1e-3))
    assert abs(g.params.r_c - 1.7) <= 1e-3
    assert abs(g.params.eta - 0.12) <= 1e-3
    assert not g.at_boundary


def test_grid_oracle_flat_debt_ratio_flags_boundary():
    rows = tuple(ObservationRow(Period(2001 + k), 1.2, 0.05 + 0.001 * k, 0.03) for k in range(5))
    g = grid_oracle(CountrySeries("flat", rows), ALL, HALF, resolution=(0.05, 0.01))
    assert g.at_boundary


def test_grid_oracle_ties_take_smallest():
    # identical rows make SSE depend on (R - r_c)/eta only: many exact ties
    rows = tuple(ObservationRow(Period(2001 + k), 1.0, 0.05, 0.03) for k in range(4))
    g = grid_oracle(CountrySeries("tie", rows), ALL, HALF, resolution=(0.05, 0.01))
    again = grid_oracle(CountrySeries("tie", rows), ALL, HALF, resolution=(0.05, 0.01))
    assert g == again


@pytest.mark.parametrize("country", COUNTRIES)
def test_sigmoid_not_worse_than_grid(bundled, country):
    s, w = bundled[country], preset_window(country)
    fit, grid = fit_sigmoid(s, w, HALF), grid_oracle(s, w, HALF)
    assert fit.sse <= grid.sse + 1e-9


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.floats(1.0, 2.5), st.floats(0.05, 0.3), st.integers(0, 10_000))
def test_sigmoid_beats_grid_on_noisy_synthetic(r_c, eta, seed):
    rng = np.random.default_rng(seed)
    ratios = np.linspace(r_c - 4 * eta, r_c - 0.2 * eta, 9)
    s = synthetic_series(r_c, eta, ratios, noise=0.02, rng=rng)
    fit, grid = fit_sigmoid(s, ALL, HALF), grid_oracle(s, ALL, HALF, resolution=(1e-2, 1e-2))
    assert fit.sse <= grid.sse + 1e-9


def test_consistency_greece(greece):
    fit = fit_linear(greece, FitWindow.years(2001, 2011))
    rep = consistency_check(greece, fit, 0.08)
    # recompute the line independently
    X = np.array([math.log(1 + r.risk_free_rate) - math.log(r.long_rate - r.risk_free_rate) for r in greece.rows])
    R = np.array([r.debt_ratio for r in greece.rows])
    slope, intercept = np.polyfit(X, R, 1)
    worst = np.max(np.abs(R - (intercept + slope * X)))
    assert rep.max_abs_residual == pytest.approx(worst, rel=1e-9)
    assert rep.verdict == "consistent"


def test_consistency_outlier_flagged():
    xs = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5]
    s = line_series(1.5, 0.1, xs)
    fit = fit_linear(s, ALL)
    rows = list(s.rows)
    rows[3] = ObservationRow(rows[3].period, rows[3].debt_ratio + 0.5, rows[3].long_rate, 0.0)
    rep = consistency_check(CountrySeries("line", tuple(rows)), fit, 0.08)
    assert rep.verdict == "inconsistent"
    assert rep.flagged == [Period(2004)]
    assert dict(rep.deviations)[Period(2004)] == pytest.approx(0.5)


def test_consistency_infinite_tolerance(greece):
    fit = fit_linear(greece, FitWindow.years(2007, 2011))
    assert consistency_check(greece, fit, math.inf).verdict == "consistent"


def test_window_parse():
    assert FitWindow.parse("2001:2011") == FitWindow.years(2001, 2011)
    assert str(FitWindow.years(2007, 2011)) == "2007:2011"
    with pytest.raises(ValueError):
        FitWindow.years(2011, 2001)
