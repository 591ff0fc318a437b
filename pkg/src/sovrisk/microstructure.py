"""Supply/demand origin of the logistic default curve.

Lenders hold normally distributed estimates of the critical debt ratio, so
the demand intercept is a Gaussian survival count. Replacing it by a
logistic with the same slope at the mean, clearing a linear market, and
pinning the two free constants with the price limits at zero and infinite
debt gives back the closed-form equilibrium bond price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, expit

from sovrisk.risk_map import BondTerms, ModelParams

# below this spread the population is treated as the step-function limit
STEP_LIMIT = 1e-9


@dataclass(frozen=True)
class LenderPopulation:
    count: float
    mean_threshold: float
    spread: float

    def __post_init__(self):
        if not self.count > 0:
            raise ValueError("lender count must be positive")
        if self.spread < 0:
            raise ValueError("spread must be non-negative")

    @property
    def eta(self) -> float:
        return self.spread * math.sqrt(2 * math.pi) / 4

    @property
    def is_step(self) -> bool:
        return self.spread < STEP_LIMIT

    def params(self) -> ModelParams:
        return ModelParams(self.mean_threshold, self.eta)


@dataclass(frozen=True)
class SupplyDemandParams:
    alpha_s: float
    beta_s: float
    beta_d: float

    def __post_init__(self):
        if not self.beta_s + self.beta_d > 0:
            raise ValueError("beta_s + beta_d must be positive")


@dataclass(frozen=True)
class MarketClearing:
    price: float
    quantity: float


def _step(debt_ratio, pop):
    R = np.asarray(debt_ratio, dtype=float)
    return pop.count * np.where(R < pop.mean_threshold, 1.0,
                                np.where(R > pop.mean_threshold, 0.0, 0.5))


def demand_intercept_exact(debt_ratio, pop: LenderPopulation):
    """Number of lenders whose threshold lies above ``debt_ratio``."""
    if pop.is_step:
        out = _step(debt_ratio, pop)
    else:
        u = (np.asarray(debt_ratio, dtype=float) - pop.mean_threshold) / (pop.spread * math.sqrt(2))
        out = pop.count / 2 * erfc(u)
    return float(out) if np.ndim(out) == 0 else out


def demand_intercept_logistic(debt_ratio, pop: LenderPopulation):
    if pop.is_step:
        out = _step(debt_ratio, pop)
    else:
        z = (np.asarray(debt_ratio, dtype=float) - pop.mean_threshold) / pop.eta
        out = pop.count * expit(-z)
    return float(out) if np.ndim(out) == 0 else out


def approximation_error(pop: LenderPopulation, grid) -> float:
    """Largest gap between the two demand intercepts on ``grid``, per lender."""
    grid = np.asarray(grid, dtype=float)
    lo = pop.mean_threshold - 6 * pop.spread
    hi = pop.mean_threshold + 6 * pop.spread
    if grid.min() > lo or grid.max() < hi:
        raise ValueError("grid must span at least six spreads either side of the mean")
    gap = np.abs(demand_intercept_exact(grid, pop) - demand_intercept_logistic(grid, pop))
    return float(np.max(gap)) / pop.count


def boundary_supply_demand(pop: LenderPopulation, risk_free_rate: float,
                           terms: BondTerms, beta_s_share: float = 0.5) -> SupplyDemandParams:
    """Supply/demand constants that satisfy both price limits.

    Zero price at infinite debt forces ``alpha_s = 0``; the risk-free price
    at zero debt fixes ``beta_s + beta_d``. How the slope splits between the
    two sides does not affect the price.
    """
    risk_free_price = terms.face_value * (1 + terms.issue_rate) / (1 + risk_free_rate)
    beta = demand_intercept_logistic(0.0, pop) / risk_free_price
    return SupplyDemandParams(0.0, beta * beta_s_share, beta * (1 - beta_s_share))


def clearing_price(debt_ratio: float, pop: LenderPopulation, sd: SupplyDemandParams) -> MarketClearing:
    alpha_d = demand_intercept_logistic(debt_ratio, pop)
    price = (alpha_d - sd.alpha_s) / (sd.beta_d + sd.beta_s)
    return MarketClearing(price, sd.alpha_s + sd.beta_s * price)


def supply(price, sd: SupplyDemandParams):
    return sd.alpha_s + sd.beta_s * price


def demand(price, debt_ratio, pop: LenderPopulation, sd: SupplyDemandParams):
    return demand_intercept_logistic(debt_ratio, pop) - sd.beta_d * price
