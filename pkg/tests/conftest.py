import numpy as np
import pytest

from sovrisk.countries import COUNTRIES, load_country
from sovrisk.ingest import CountrySeries, ObservationRow, Period
from sovrisk.risk_map import RecoveryAssumption, logistic_probs, rate_from_prob


def synthetic_series(r_c, eta, ratios, rho=0.5, risk_free=0.03, noise=0.0, rng=None,
                     start=2001, country="synthetic"):
    """Series whose implied probabilities follow the logistic model exactly,
    optionally with multiplicative noise on the probabilities."""
    recovery = RecoveryAssumption(rho)
    probs = logistic_probs(np.asarray(ratios), r_c, eta, rho)
    if noise:
        probs = probs * (1 + noise * rng.standard_normal(probs.size))
    rows = []
    for k, (R, p) in enumerate(zip(ratios, probs)):
        i = rate_from_prob(float(p), risk_free, recovery)
        rows.append(ObservationRow(Period(start + k), float(R), i, risk_free))
    return CountrySeries(country, tuple(rows))


@pytest.fixture(scope="session")
def bundled():
    return {c: load_country(c) for c in COUNTRIES}


@pytest.fixture(scope="session")
def greece(bundled):
    return bundled["greece"]


_session_start = []


def pytest_sessionstart(session):
    import time
    _session_start.append(time.perf_counter())


def pytest_terminal_summary(terminalreporter):
    import time
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[k])
    elapsed = time.perf_counter() - _session_start[0]
    status = "PASS" if elapsed < 30 else "FAIL"
    terminalreporter.write_line(f"{status}  suite runtime: {elapsed:.1f} s (limit 30 s, part of criterion 8)")
