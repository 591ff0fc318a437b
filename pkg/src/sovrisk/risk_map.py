"""Closed-form maps between interest rates, bond prices, debt ratios and
default probabilities.

Probabilities outside [0, 1] raise :class:`ProbabilityRangeError` instead of
being clamped: an implied probability above one is the signature of pricing
that the equilibrium model cannot produce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from sovrisk.errors import ProbabilityRangeError

# absorbs float rounding at the exact bounds (e.g. P at R = R_d)
_ROUNDING = 1e-12


@dataclass(frozen=True)
class RecoveryAssumption:
    """Share ``rho`` of face value repaid in default."""

    rho: float = 0.5

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise ValueError(f"recovery rate must lie in [0, 1), got {self.rho}")

    @property
    def scale(self) -> float:
        return 1.0 / (1.0 - self.rho)


@dataclass(frozen=True)
class ModelParams:
    """Critical debt ratio ``r_c`` and heterogeneity ``eta``."""

    r_c: float
    eta: float
    r_c_stderr: float | None = None
    eta_stderr: float | None = None

    def __post_init__(self):
        if not self.r_c > 0:
            raise ValueError(f"r_c must be positive, got {self.r_c}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")

    @classmethod
    def from_spread(cls, r_c: float, sigma: float) -> ModelParams:
        """Parameters implied by a normal spread ``sigma`` of lender thresholds."""
        return cls(r_c, sigma * math.sqrt(2 * math.pi) / 4)


@dataclass(frozen=True)
class BondTerms:
    face_value: float = 100.0
    issue_rate: float = 0.0

    def __post_init__(self):
        if not self.face_value > 0:
            raise ValueError("face value must be positive")
        if not self.issue_rate > -1:
            raise ValueError("issue rate must exceed -1")


@dataclass(frozen=True)
class DefaultProbability:
    p: float

    def __post_init__(self):
        p = self.p
        if -_ROUNDING <= p < 0:
            p = 0.0
        elif 1 < p <= 1 + _ROUNDING:
            p = 1.0
        if not 0 <= p <= 1:
            raise ProbabilityRangeError(f"probability {self.p!r} outside [0, 1]", self.p)
        object.__setattr__(self, "p", float(p))

    def __float__(self):
        return self.p


def _check_rate(x, name):
    if not x > -1:
        raise ValueError(f"{name} must exceed -1, got {x}")


def implied_probs(long_rate, risk_free_rate, rho):
    """Vectorised implied probability, no range checks."""
    long_rate = np.asarray(long_rate, dtype=float)
    risk_free_rate = np.asarray(risk_free_rate, dtype=float)
    return (long_rate - risk_free_rate) / (1 + long_rate) / (1 - rho)


def implied_default_prob(long_rate: float, risk_free_rate: float,
                         recovery: RecoveryAssumption) -> DefaultProbability:
    """Probability that equates the risky and risk-free one-period returns.

    ``(1 - (1+r)/(1+i)) / (1 - rho)``, evaluated as ``(i - r)/(1 + i)`` so
    that a zero spread gives exactly zero.
    """
    _check_rate(risk_free_rate, "risk-free rate")
    if long_rate < risk_free_rate:
        raise ProbabilityRangeError("negative spread", long_rate - risk_free_rate)
    p = (long_rate - risk_free_rate) / (1 + long_rate) * recovery.scale
    if p > 1 + _ROUNDING:
        raise ProbabilityRangeError("rate implies probability above one", p)
    return DefaultProbability(p)


def rate_from_prob(prob: float, risk_free_rate: float, recovery: RecoveryAssumption) -> float:
    """Long rate at which :func:`implied_default_prob` returns ``prob``."""
    prob = float(prob)
    if not 0 <= prob <= 1:
        raise ProbabilityRangeError(f"probability {prob!r} outside [0, 1]", prob)
    survival = 1 - prob * (1 - recovery.rho)
    return (1 + risk_free_rate) / survival - 1


def bond_price(current_rate: float, terms: BondTerms) -> float:
    _check_rate(current_rate, "current rate")
    return terms.face_value * (1 + terms.issue_rate) / (1 + current_rate)


def prob_from_bond(price: float, terms: BondTerms, risk_free_rate: float,
                   recovery: RecoveryAssumption) -> DefaultProbability:
    if not price > 0:
        raise ValueError("price must be positive")
    ratio = price / terms.face_value * (1 + risk_free_rate) / (1 + terms.issue_rate)
    p = (1 - ratio) * recovery.scale
    if p > 1 + _ROUNDING:
        raise ProbabilityRangeError(f"price {price} implies probability {p:.4g} above one", p)
    if p < -_ROUNDING:
        raise ProbabilityRangeError(f"price {price} is above the risk-free price", p)
    return DefaultProbability(p)


def default_distance(long_rate: float, risk_free_rate: float) -> float:
    """``ln(1 + r) - ln(i - r)``; zero at the critical rate ``i = 1 + 2r``."""
    spread = long_rate - risk_free_rate
    if not spread > 0:
        raise ValueError(f"default distance needs a positive spread, got {spread}")
    return math.log(1 + risk_free_rate) - math.log(spread)


def default_distances(long_rate, risk_free_rate):
    long_rate = np.asarray(long_rate, dtype=float)
    risk_free_rate = np.asarray(risk_free_rate, dtype=float)
    return np.log(1 + risk_free_rate) - np.log(long_rate - risk_free_rate)


def logistic_probs(debt_ratio, r_c, eta, rho=0.0):
    """Vectorised model probability, no range checks."""
    return expit((np.asarray(debt_ratio, dtype=float) - r_c) / eta) / (1 - rho)


def model_default_prob(debt_ratio: float, params: ModelParams,
                       recovery: RecoveryAssumption) -> DefaultProbability:
    p = float(logistic_probs(debt_ratio, params.r_c, params.eta, recovery.rho))
    if p > 1 + _ROUNDING:
        raise ProbabilityRangeError(
            f"debt ratio {debt_ratio} is beyond certain default", p)
    return DefaultProbability(p)


def certain_default_ratio(params: ModelParams, recovery: RecoveryAssumption) -> float:
    """Debt ratio at which the model probability reaches one.

    Equals ``r_c`` at 50% recovery. Without recovery the probability only
    approaches one asymptotically, so ``rho = 0`` is rejected.
    """
    if recovery.rho == 0:
        raise ValueError("no finite certain-default ratio without recovery (rho = 0)")
    return params.r_c + params.eta * math.log(1 / recovery.rho - 1)


def model_bond_price(debt_ratio: float, params: ModelParams, risk_free_rate: float,
                     terms: BondTerms) -> float:
    """Equilibrium bond price including the ``1 + exp(-r_c/eta)`` normaliser."""
    _check_rate(risk_free_rate, "risk-free rate")
    base = terms.face_value * (1 + terms.issue_rate) / (1 + risk_free_rate)
    z = (debt_ratio - params.r_c) / params.eta
    if z > 700:
        return 0.0
    return base * (1 + math.exp(-params.r_c / params.eta)) / (1 + math.exp(z))


def linear_debt_ratio(x, params: ModelParams):
    """Debt ratio the equilibrium line assigns to default distance ``x``."""
    return params.r_c - params.eta * np.asarray(x, dtype=float)
