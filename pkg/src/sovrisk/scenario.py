"""Austerity and bailout paths run through the accumulation equation.

Scenario files are ``key = value`` text. Header keys come first; each
``period = <year>`` line opens a block holding that period's targets::

    country = greece
    label = austerity targets, no haircut
    bailout = yes
    rate_rule = hold-last
    units = percent
    period = 2012
    budget_ratio = 7.3
    gdp_growth = -6.4

A positive budget ratio is a primary deficit and adds to the debt.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path

from sovrisk.errors import DataError, FormatError
from sovrisk.ingest import CountrySeries, Period, read_keyvalue
from sovrisk.project import DefaultEvent, Trajectory, default_date, step_accumulation
from sovrisk.risk_map import ModelParams, RecoveryAssumption, certain_default_ratio


@dataclass(frozen=True)
class ScenarioTarget:
    period: Period
    budget_ratio: float
    gdp_growth: float
    long_rate: float | None = None


@dataclass(frozen=True)
class ScenarioSpec:
    country: str
    targets: tuple[ScenarioTarget, ...]
    rate_rule: str = "hold-last"
    bailout: bool = False
    label: str = ""
    haircut: float = 0.0
    haircut_share: float = 1.0  # share of the stock the write-down applies to

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if not self.targets:
            raise DataError("empty scenario")
        for a, b in zip(self.targets, self.targets[1:]):
            if not a.period < b.period:
                raise DataError(f"scenario periods not increasing at {b.period}")
        if self.rate_rule not in ("hold-last", "explicit"):
            raise FormatError(f"unknown rate rule {self.rate_rule!r}")
        if self.rate_rule == "explicit" and any(t.long_rate is None for t in self.targets):
            raise DataError("explicit rate rule needs a long_rate in every period")
        if not 0 <= self.haircut < 1:
            raise DataError(f"haircut must lie in [0, 1), got {self.haircut}")
        if not 0 <= self.haircut_share <= 1:
            raise DataError("haircut share must lie in [0, 1]")


@dataclass(frozen=True)
class ScenarioOutcome:
    spec: ScenarioSpec
    trajectory: Trajectory
    threshold: float
    crossed: bool
    event: DefaultEvent | None
    margin: float

    @property
    def projected(self) -> list[tuple[Period, float]]:
        # first point is the (possibly written-down) starting ratio
        return list(self.trajectory.points[1:])


def apply_haircut(series_end_ratio: float, haircut: float, share: float = 1.0) -> float:
    """Debt ratio after writing down ``haircut`` of the affected share of the stock.

    ``share = 1`` treats the whole stock as affected, a simplification when
    the private-sector share is unknown.
    """
    if not 0 <= haircut < 1:
        raise ValueError(f"haircut must lie in [0, 1), got {haircut}")
    return series_end_ratio * (1 - haircut * share)


def run_scenario(series: CountrySeries, params: ModelParams, recovery: RecoveryAssumption,
                 spec: ScenarioSpec) -> ScenarioOutcome:
    last = series.rows[-1]
    if spec.targets[0].period != last.period.next():
        raise DataError(
            f"scenario starts at {spec.targets[0].period}, series ends at {last.period}")
    for a, b in zip(spec.targets, spec.targets[1:]):
        if b.period != a.period.next():
            raise DataError(f"scenario periods not contiguous at {b.period}")
    ratio = last.debt_ratio
    if spec.haircut:
        ratio = apply_haircut(ratio, spec.haircut, spec.haircut_share)
    points = [(last.period, ratio)]
    rate = last.long_rate
    for t in spec.targets:
        if spec.rate_rule == "explicit":
            rate = t.long_rate
        ratio = step_accumulation(ratio, t.budget_ratio, rate, t.gdp_growth)
        points.append((t.period, ratio))
    trajectory = Trajectory(tuple(points), "scenario")
    threshold = certain_default_ratio(params, recovery)
    projected = [v for _, v in points[1:]]
    margin = min(threshold - v for v in projected)
    event = default_date(trajectory, threshold)
    if event is not None:
        event = DefaultEvent(event.date, event.time, threshold, recovery, None, event.already_beyond)
    return ScenarioOutcome(spec, trajectory, threshold, event is not None, event, margin)


def _number(text, percent, key):
    try:
        d = Decimal(text)
    except InvalidOperation:
        raise FormatError(f"{key}: non-numeric value {text!r}") from None
    return float(d / 100 if percent else d)


def load_scenario(path: str | Path) -> ScenarioSpec:
    pairs = read_keyvalue(path)
    header = {}
    blocks = []
    for key, value in pairs:
        if key == "period":
            try:
                blocks.append({"period": Period.parse(value)})
            except ValueError:
                raise FormatError(f"{path}: bad period {value!r}") from None
        elif blocks:
            blocks[-1][key] = value
        else:
            header[key] = value
    units = header.get("units", "percent")
    if units not in ("percent", "fraction"):
        raise FormatError(f"{path}: units must be percent or fraction")
    pct = units == "percent"
    targets = []
    for b in blocks:
        missing = [k for k in ("budget_ratio", "gdp_growth") if k not in b]
        if missing:
            raise FormatError(f"{path}: period {b['period']} lacks {', '.join(missing)}")
        targets.append(ScenarioTarget(
            b["period"],
            _number(b["budget_ratio"], pct, "budget_ratio"),
            _number(b["gdp_growth"], pct, "gdp_growth"),
            _number(b["long_rate"], pct, "long_rate") if "long_rate" in b else None,
        ))
    return ScenarioSpec(
        country=header.get("country", Path(path).stem),
        targets=tuple(targets),
        rate_rule=header.get("rate_rule", "hold-last"),
        bailout=header.get("bailout", "no").lower() in ("yes", "true", "1"),
        label=header.get("label", ""),
        haircut=_number(header["haircut"], pct, "haircut") if "haircut" in header else 0.0,
        haircut_share=float(header.get("haircut_share", "1")),
    )
