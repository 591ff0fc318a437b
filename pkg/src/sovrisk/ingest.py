"""Parsing, validation and alignment of country macro series.

Input files are delimited text (comma or tab) with one header row. A sidecar
``key = value`` config declares the frequency, the unit of every numeric
column and, optionally, header renames::

    country = greece
    frequency = annual
    units.debt_ratio = percent
    units.long_rate = percent
    column.long_rate = yield_10y

Units are never guessed from magnitudes.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path

from sovrisk.errors import DataError, FormatError

FIELDS = (
    "debt_ratio",
    "long_rate",
    "risk_free_rate",
    "budget_ratio",
    "gdp_growth",
    "raw_debt",
    "raw_gdp",
)
MANDATORY = ("period", "debt_ratio", "long_rate")
# raw currency amounts are not rates; percent is meaningless for them
UNITLESS = ("raw_debt", "raw_gdp")

_PERIOD_RE = re.compile(r"^(\d{4})(?:[-\s]?Q([1-4]))?$", re.IGNORECASE)


@dataclass(frozen=True, order=True)
class Period:
    """A calendar year, or a year and quarter (``quarter`` 0 means annual)."""

    year: int
    quarter: int = 0

    @classmethod
    def parse(cls, text: str) -> Period:
        m = _PERIOD_RE.match(text.strip())
        if not m:
            raise ValueError(f"unrecognised period {text!r}")
        return cls(int(m.group(1)), int(m.group(2) or 0))

    @property
    def frequency(self) -> str:
        return "quarterly" if self.quarter else "annual"

    @property
    def end_time(self) -> float:
        """Decimal-year instant at which the period closes (2011 -> 2012.0)."""
        if self.quarter:
            return self.year + self.quarter / 4
        return float(self.year + 1)

    def shift(self, n: int) -> Period:
        if not self.quarter:
            return Period(self.year + n)
        idx = self.year * 4 + (self.quarter - 1) + n
        return Period(idx // 4, idx % 4 + 1)

    def next(self) -> Period:
        return self.shift(1)

    def __str__(self) -> str:
        return f"{self.year}Q{self.quarter}" if self.quarter else str(self.year)


@dataclass(frozen=True)
class ObservationRow:
    period: Period
    debt_ratio: float
    long_rate: float
    risk_free_rate: float | None = None
    budget_ratio: float | None = None
    gdp_growth: float | None = None
    raw_debt: float | None = None
    raw_gdp: float | None = None


@dataclass(frozen=True)
class CountrySeries:
    country: str
    rows: tuple[ObservationRow, ...]
    frequency: str = "annual"

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if self.frequency not in ("annual", "quarterly"):
            raise FormatError(f"unknown frequency {self.frequency!r}")
        for row in self.rows:
            if row.period.frequency != self.frequency:
                raise DataError(
                    f"period {row.period} is {row.period.frequency} in a {self.frequency} series"
                )
        for a, b in zip(self.rows, self.rows[1:]):
            if b.period == a.period:
                raise DataError(f"duplicate period {b.period}")
            if b.period < a.period:
                raise DataError(f"periods out of order at {b.period}")

    def __len__(self):
        return len(self.rows)

    @property
    def periods(self) -> list[Period]:
        return [r.period for r in self.rows]

    def row(self, period: Period) -> ObservationRow:
        for r in self.rows:
            if r.period == period:
                return r
        raise KeyError(str(period))

    def between(self, start: Period, end: Period) -> list[ObservationRow]:
        return [r for r in self.rows if start <= r.period <= end]


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    period: Period
    message: str

    def __str__(self):
        return f"{self.severity}: {self.period}: {self.message}"


@dataclass(frozen=True)
class FormatConfig:
    """Column map and unit declarations for one delimited file."""

    country: str = ""
    frequency: str = "annual"
    delimiter: str | None = None
    units: dict = field(default_factory=dict)
    columns: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def unit(self, name: str) -> str:
        return self.units.get(name, "fraction")

    def header_for(self, name: str) -> str:
        return self.columns.get(name, name)


def read_keyvalue(path: str | Path) -> list[tuple[str, str]]:
    """Ordered ``key = value`` pairs; ``#`` starts a comment."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            pairs.append((key.strip(), value.strip()))
    return pairs


def load_format(path: str | Path) -> FormatConfig:
    units, columns, extra = {}, {}, {}
    country, frequency, delimiter = "", "annual", None
    for key, value in read_keyvalue(path):
        if key.startswith("units."):
            name = key[len("units."):]
            if value not in ("percent", "fraction"):
                raise FormatError(f"{path}: unit for {name} must be percent or fraction")
            if name in UNITLESS and value == "percent":
                raise FormatError(f"{path}: {name} is a currency amount, not a rate")
            units[name] = value
        elif key.startswith("column."):
            columns[key[len("column."):]] = value
        elif key == "country":
            country = value
        elif key == "frequency":
            if value not in ("annual", "quarterly"):
                raise FormatError(f"{path}: frequency must be annual or quarterly")
            frequency = value
        elif key == "delimiter":
            delimiter = {"comma": ",", "tab": "\t"}.get(value, value)
        else:
            extra[key] = value
    return FormatConfig(country, frequency, delimiter, units, columns, extra)


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".cfg")


def _to_float(text: str, unit: str) -> float:
    d = Decimal(text)
    if unit == "percent":
        d = d / 100
    return float(d)


def parse_series(path: str | Path, fmt: FormatConfig | str | Path | None = None) -> CountrySeries:
    """Read a delimited file into a time-ordered :class:`CountrySeries`.

    ``fmt`` may be a config object, a path to a sidecar config, or None to
    use ``<file>.cfg`` when present.
    """
    path = Path(path)
    if fmt is None:
        side = sidecar_path(path)
        fmt = load_format(side) if side.exists() else FormatConfig()
    elif not isinstance(fmt, FormatConfig):
        fmt = load_format(fmt)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise FormatError(f"{path}: missing header row")
    delimiter = fmt.delimiter or ("\t" if "\t" in lines[0] else ",")
    reader = csv.reader(lines, delimiter=delimiter)
    header = [h.strip() for h in next(reader)]

    index = {}
    for name in ("period",) + FIELDS:
        col = fmt.header_for(name)
        if col in header:
            index[name] = header.index(col)
    missing = [fmt.header_for(n) for n in MANDATORY if n not in index]
    if missing:
        raise FormatError(f"{path}: missing mandatory column(s): {', '.join(missing)}")

    rows = []
    seen = set()
    for lineno, cells in enumerate(reader, 2):
        if not any(c.strip() for c in cells):
            continue
        if len(cells) < len(header):
            cells = cells + [""] * (len(header) - len(cells))
        raw = cells[index["period"]].strip()
        try:
            period = Period.parse(raw)
        except ValueError:
            raise DataError(f"{path}: row {lineno}, column period: bad period {raw!r}") from None
        if period in seen:
            raise DataError(f"{path}: row {lineno}: duplicate period {period}")
        seen.add(period)
        values = {}
        for name in FIELDS:
            if name not in index:
                continue
            cell = cells[index[name]].strip()
            if cell == "":
                if name in MANDATORY:
                    raise DataError(f"{path}: row {lineno}, column {fmt.header_for(name)}: empty cell")
                continue
            try:
                values[name] = _to_float(cell, fmt.unit(name))
            except InvalidOperation:
                raise DataError(
                    f"{path}: row {lineno}, column {fmt.header_for(name)}: non-numeric value {cell!r}"
                ) from None
        rows.append(ObservationRow(period=period, **values))

    rows.sort(key=lambda r: r.period)
    country = fmt.country or path.stem
    return CountrySeries(country, tuple(rows), fmt.frequency)


def serialize_series(series: CountrySeries, path: str | Path) -> Path:
    """Write the series as fractions plus a sidecar config.

    ``repr`` of a float round-trips exactly, so parsing the output
    reproduces the series bit for bit.
    """
    path = Path(path)
    present = [f for f in FIELDS if any(getattr(r, f) is not None for r in series.rows)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["period", *present])
        for r in series.rows:
            cells = [str(r.period)]
            for f in present:
                v = getattr(r, f)
                cells.append("" if v is None else repr(v))
            writer.writerow(cells)
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        fh.write(f"country = {series.country}\nfrequency = {series.frequency}\n")
        for f in present:
            if f not in UNITLESS:
                fh.write(f"units.{f} = fraction\n")
    return path


def validate_series(series: CountrySeries) -> list[ValidationIssue]:
    issues = []
    for r in series.rows:
        def err(msg, severity="error"):
            issues.append(ValidationIssue(severity, r.period, msg))

        if not r.debt_ratio > 0:
            err(f"debt ratio {r.debt_ratio} is not positive")
        if r.raw_debt is not None and r.raw_gdp is not None:
            if r.raw_gdp == 0 or abs(r.debt_ratio - r.raw_debt / r.raw_gdp) >= 1e-9:
                err("debt ratio disagrees with raw debt / raw GDP")
        if not r.long_rate > -1:
            err(f"long rate {r.long_rate} is not above -1")
        if r.risk_free_rate is not None and not r.risk_free_rate > -1:
            err(f"risk-free rate {r.risk_free_rate} is not above -1")
        if r.gdp_growth is not None and not r.gdp_growth > -1:
            err(f"GDP growth {r.gdp_growth} is not above -1")
        if r.risk_free_rate is not None and r.long_rate < r.risk_free_rate:
            err("spread non-positive", "warning")
    return issues


def error_periods(issues: list[ValidationIssue]) -> set[Period]:
    return {i.period for i in issues if i.severity == "error"}


def join_risk_free(series: CountrySeries, reference: CountrySeries) -> CountrySeries:
    """Use ``reference``'s long rate as the risk-free rate of every row."""
    ref = {r.period: r.long_rate for r in reference.rows}
    gaps = [str(r.period) for r in series.rows if r.period not in ref]
    if gaps:
        raise DataError(f"no risk-free rate for {', '.join(gaps)}")
    rows = tuple(replace(r, risk_free_rate=ref[r.period]) for r in series.rows)
    return replace(series, rows=rows)
