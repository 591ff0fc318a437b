import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sovrisk.countries import COUNTRIES, scenario_path
from sovrisk.errors import DataError, FormatError
from sovrisk.ingest import CountrySeries, ObservationRow, Period
from sovrisk.project import MacroPath, project_recursion
from sovrisk.risk_map import ModelParams, RecoveryAssumption
from sovrisk.scenario import (
    ScenarioSpec,
    ScenarioTarget,
    apply_haircut,
    load_scenario,
    run_scenario,
)

HALF = RecoveryAssumption(0.5)
GR = ModelParams(2.0, 0.18)


def test_apply_haircut():
    assert apply_haircut(1.65, 0.535) == pytest.approx(0.76725, rel=1e-14)
    assert apply_haircut(1.3, 0.0) == 1.3
    assert apply_haircut(2.0, 0.5) == 1.0
    assert apply_haircut(2.0, 0.5, share=0.5) == 1.5
    with pytest.raises(ValueError):
        apply_haircut(1.0, 1.0)


def test_bundled_table_values():
    spec = load_scenario(scenario_path("greece"))
    assert [(str(t.period), t.budget_ratio, t.gdp_growth) for t in spec.targets] == [
        ("2012", 0.073, -0.064), ("2013", 0.047, -0.019)]
    assert spec.haircut == 0.0
    assert load_scenario(scenario_path("greece_haircut")).haircut == 0.535


@pytest.mark.parametrize("country", COUNTRIES)
def test_every_country_has_a_scenario(country):
    spec = load_scenario(scenario_path(country))
    assert spec.country == country and len(spec.targets) == 2


def test_greece_classification(greece):
    plain = run_scenario(greece, GR, HALF, load_scenario(scenario_path("greece")))
    cut = run_scenario(greece, GR, HALF, load_scenario(scenario_path("greece_haircut")))
    assert plain.crossed and plain.event is not None
    assert not cut.crossed and cut.event is None
    assert all(v < 2.0 for _, v in cut.projected)
    assert cut.trajectory.points[0][1] == pytest.approx(apply_haircut(1.653, 0.535))


def test_null_scenario_is_flat():
    s = CountrySeries("x", (ObservationRow(Period(2011), 1.2, 0.0, 0.0),))
    spec = ScenarioSpec("x", tuple(ScenarioTarget(Period(2012 + k), 0.0, 0.0) for k in range(3)))
    out = run_scenario(s, GR, HALF, spec)
    assert [v for _, v in out.projected] == [1.2, 1.2, 1.2]
    assert not out.crossed
    assert out.margin == pytest.approx(0.8)


def test_empty_scenario():
    with pytest.raises(DataError, match="empty scenario"):
        ScenarioSpec("x", ())


def test_not_contiguous(greece):
    spec = ScenarioSpec("greece", (ScenarioTarget(Period(2013), 0.05, 0.0),))
    with pytest.raises(DataError):
        run_scenario(greece, GR, HALF, spec)


def test_explicit_rates_required():
    with pytest.raises(DataError):
        ScenarioSpec("x", (ScenarioTarget(Period(2012), 0.0, 0.0),), rate_rule="explicit")


def test_bad_scenario_file(tmp_path):
    p = tmp_path / "bad.scn"
    p.write_text("country = x\nperiod = 2012\nbudget_ratio = 1\n")
    with pytest.raises(FormatError, match="gdp_growth"):
        load_scenario(p)


def test_matches_recursion(greece):
    spec = load_scenario(scenario_path("greece"))
    out = run_scenario(greece, GR, HALF, spec)
    last = greece.rows[-1]
    path = MacroPath(Period(2012), tuple(t.budget_ratio for t in spec.targets),
                     (last.long_rate,) * 2, tuple(t.gdp_growth for t in spec.targets))
    assert out.trajectory.end == project_recursion(last.debt_ratio, path).end


deficits = st.lists(st.floats(-0.1, 0.1), min_size=1, max_size=5)


@settings(max_examples=200)
@given(deficits, st.integers(0, 4), st.floats(0.0, 0.1), st.floats(0.5, 2.5))
def test_monotone_in_deficit(s, k, bump, start):
    k = k % len(s)
    series = CountrySeries("x", (ObservationRow(Period(2011), start, 0.05, 0.03),))

    def run(ss):
        spec = ScenarioSpec("x", tuple(ScenarioTarget(Period(2012 + j), v, 0.01) for j, v in enumerate(ss)))
        return [v for _, v in run_scenario(series, GR, HALF, spec).projected]

    raised = list(s)
    raised[k] += bump
    base, up = run(s), run(raised)
    assert all(b >= a for a, b in zip(base, up))


@settings(max_examples=200)
@given(deficits, st.floats(0.5, 2.5), st.floats(0.0, 0.3))
def test_crossed_iff_event_iff_nonpositive_margin(s, start, rate):
    series = CountrySeries("x", (ObservationRow(Period(2011), start, rate, 0.0),))
    spec = ScenarioSpec("x", tuple(ScenarioTarget(Period(2012 + j), v, 0.0) for j, v in enumerate(s)))
    out = run_scenario(series, GR, HALF, spec)
    assert out.crossed == (out.event is not None)
    assert out.crossed == (out.margin <= 0)
    peak = max(v for _, v in out.projected)
    assert out.threshold - out.margin == pytest.approx(peak)
    if peak != out.threshold:
        assert (out.margin + out.threshold >= peak) == (not out.crossed)
