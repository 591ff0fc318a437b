"""Bundled datasets and per-country defaults."""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from sovrisk.calibrate import FitWindow
from sovrisk.errors import FormatError
from sovrisk.ingest import CountrySeries, join_risk_free, parse_series

DATA_ENV = "SOVRISK_DATA_DIR"
REFERENCE = "germany"


@dataclass(frozen=True)
class CountryDefaults:
    name: str
    fit_window: FitWindow  # default window for each country
    text_window: FitWindow  # alternative, longer span where one is used
    trend_order: int
    trend_window: FitWindow


DEFAULTS = {
    "greece": CountryDefaults("greece", FitWindow.years(2001, 2011), FitWindow.years(2001, 2011),
                              3, FitWindow.years(2001, 2011)),
    "portugal": CountryDefaults("portugal", FitWindow.years(2007, 2011), FitWindow.years(2003, 2011),
                                3, FitWindow.years(2001, 2011)),
    "ireland": CountryDefaults("ireland", FitWindow.years(2007, 2011), FitWindow.years(2007, 2011),
                               1, FitWindow.years(2007, 2011)),
    "spain": CountryDefaults("spain", FitWindow.years(2007, 2011), FitWindow.years(2007, 2011),
                             1, FitWindow.years(2007, 2011)),
    "italy": CountryDefaults("italy", FitWindow.years(2007, 2011), FitWindow.years(2001, 2011),
                             1, FitWindow.years(2007, 2011)),
}
COUNTRIES = tuple(DEFAULTS)
WINDOW_PRESETS = ("figure", "text")


def data_dir(override: str | Path | None = None) -> Path:
    if override:
        return Path(override)
    env = os.environ.get(DATA_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("sovrisk") / "data"))


def defaults_for(country: str) -> CountryDefaults:
    try:
        return DEFAULTS[country.lower()]
    except KeyError:
        raise FormatError(f"unknown country {country!r}; choose from {', '.join(COUNTRIES)}") from None


def preset_window(country: str, preset: str = "figure") -> FitWindow:
    d = defaults_for(country)
    if preset == "figure":
        return d.fit_window
    if preset == "text":
        return d.text_window
    raise FormatError(f"unknown window preset {preset!r}")


def series_path(country: str, directory: Path | None = None) -> Path:
    return data_dir(directory) / f"{country.lower()}.csv"


def scenario_path(name: str, directory: Path | None = None) -> Path:
    return data_dir(directory) / "scenarios" / f"{name}.scn"


def load_country(country: str, directory: Path | None = None) -> CountrySeries:
    """Bundled series with the reference country's yields as risk-free rates."""
    series = parse_series(series_path(country, directory))
    if all(r.risk_free_rate is not None for r in series.rows):
        return series
    reference = parse_series(series_path(REFERENCE, directory))
    return join_risk_free(series, reference)
