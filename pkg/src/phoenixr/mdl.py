"""Description length of a fitted model, in bits.

Total cost = cost of the series length + cost of the parameters + cost of
the residuals under a Gaussian code fitted to them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from phoenixr.errors import DataError
from phoenixr.model import PhoenixRModel
from phoenixr.series import PopularitySeries

FLOAT_COST = 64.0
SIGMA_FLOOR = 1e-6
_HALF_LOG2_2PI = 0.5 * math.log2(2.0 * math.pi)


@dataclass(frozen=True)
class MdlBreakdown:
    data_size_cost: float
    param_cost: float
    residual_cost: float
    total: float
    mu: float
    sigma: float

    def to_json(self) -> dict[str, float]:
        return {
            "data_size_cost": self.data_size_cost,
            "param_cost": self.param_cost,
            "residual_cost": self.residual_cost,
            "total": self.total,
            "mu": self.mu,
            "sigma": self.sigma,
        }


def log_star(x: float) -> float:
    """Universal code length: 1 + log*(log2 x) while the argument exceeds 1."""
    if not x >= 1:
        raise DataError(f"log_star is defined for x >= 1, got {x!r}")
    cost = 1.0
    x = float(x)
    while x > 1.0:
        x = math.log2(x)
        cost += 1.0
    return cost


def _population_code(S0: float) -> int:
    return max(1, int(round(S0)))


def param_cost(model: PhoenixRModel, n: int) -> float:
    """Bits for every shock's start, population and three rates, plus |S|.

    Period parameters are shared by all candidate models and are not charged.
    """
    if n < 1:
        raise DataError("n must be at least 1")
    per_start = log_star(n)
    cost = sum(per_start + log_star(_population_code(sh.S0)) + 3.0 * FLOAT_COST
               for sh in model.shocks)
    return cost + log_star(len(model.shocks))


def _as_array(x) -> np.ndarray:
    return np.asarray(x.values if isinstance(x, PopularitySeries) else x, dtype=float)


def residual_cost(observed, modeled) -> tuple[float, float, float]:
    """Gaussian code length of the residuals; returns (bits, mu, sigma)."""
    t, m = _as_array(observed), _as_array(modeled)
    if t.shape != m.shape:
        raise DataError(f"length mismatch: {t.size} observed vs {m.size} modeled")
    resid = t - m
    mu = float(resid.mean())
    sigma = max(float(resid.std()), SIGMA_FLOOR)
    z = (resid - mu) / sigma
    # -log2 pdf = log2(sigma) + log2(sqrt(2 pi)) + z^2 / (2 ln 2)
    bits = float(np.sum(math.log2(sigma) + _HALF_LOG2_2PI + z * z / (2.0 * math.log(2.0))))
    return bits, mu, sigma


def total_cost(observed, modeled, model: PhoenixRModel, n: int | None = None) -> MdlBreakdown:
    t = _as_array(observed)
    n = t.size if n is None else n
    size_bits = log_star(n)
    par_bits = param_cost(model, n)
    res_bits, mu, sigma = residual_cost(t, modeled)
    return MdlBreakdown(size_bits, par_bits, res_bits, size_bits + par_bits + res_bits, mu, sigma)
