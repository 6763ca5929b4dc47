"""Forward simulation of revisit-aware multi-shock SIR popularity.

Each shock is an independent population that starts with ``S0`` susceptible
individuals and a single infected one. Infected individuals visit the object
as a Poisson process with rate ``omega`` per window, so a shock's popularity
in a window is ``omega * I``. The object's popularity is the sum over shocks,
each shifted to its start window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from phoenixr import _kernel
from phoenixr.errors import DataError
from phoenixr.series import PopularitySeries

DAILY_PERIOD = 7.0
HOURLY_PERIOD = 24.0


@dataclass(frozen=True)
class ShockParams:
    s: int
    S0: float
    beta: float
    gamma: float
    omega: float

    def __post_init__(self) -> None:
        if int(self.s) != self.s or self.s < 0:
            raise DataError(f"shock start must be a non-negative integer, got {self.s!r}")
        object.__setattr__(self, "s", int(self.s))
        for name in ("S0", "beta", "gamma", "omega"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DataError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if not self.S0 > 0:
            raise DataError("S0 must be positive")
        if not self.omega > 0:
            raise DataError("omega must be positive")
        if self.beta < 0 or self.gamma < 0:
            raise DataError("beta and gamma must be non-negative")

    @property
    def onset(self) -> int:
        """First global window in which the shock contributes."""
        return 0 if self.s == 0 else self.s + 1

    def to_json(self) -> dict[str, Any]:
        return {"s": self.s, "S0": self.S0, "beta": self.beta,
                "gamma": self.gamma, "omega": self.omega}


@dataclass(frozen=True)
class PeriodParams:
    """Sinusoidal attenuation of the visit rate: amplitude, phase, period."""

    m: float
    h: float = 0.0
    e: float = DAILY_PERIOD

    def __post_init__(self) -> None:
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "e", float(self.e))
        if not 0.0 <= self.m <= 1.0:
            raise DataError("period amplitude m must lie in [0, 1]")
        if not self.e > 0:
            raise DataError("period length e must be positive")
        if not math.isfinite(self.h):
            raise DataError("period phase h must be finite")

    def factor(self, n: int) -> np.ndarray:
        """Multiplier on omega for global windows 0..n-1."""
        t = np.arange(n, dtype=float)
        return 1.0 - self.m / 2.0 * (np.sin(2.0 * np.pi * (t + self.h) / self.e) + 1.0)

    def to_json(self) -> dict[str, float]:
        return {"m": self.m, "h": self.h, "e": self.e}


@dataclass(frozen=True)
class PhoenixRModel:
    shocks: tuple[ShockParams, ...]
    period: PeriodParams | None = None

    def __post_init__(self) -> None:
        shocks = tuple(self.shocks)
        if not shocks:
            raise DataError("a model needs at least one shock")
        object.__setattr__(self, "shocks", shocks)

    @property
    def population(self) -> float:
        return sum(sh.S0 + 1.0 for sh in self.shocks)

    @property
    def starts(self) -> list[int]:
        return [sh.s for sh in self.shocks]

    def factor(self, n: int) -> np.ndarray:
        if self.period is None:
            return np.ones(n)
        return self.period.factor(n)

    def to_json(self) -> dict[str, Any]:
        return {
            "shocks": [sh.to_json() for sh in self.shocks],
            "period": None if self.period is None else self.period.to_json(),
        }

    @classmethod
    def from_json(cls, obj: Any) -> "PhoenixRModel":
        """Build a model from its JSON form; errors name the offending field."""
        if not isinstance(obj, dict):
            raise DataError("model: expected an object")
        raw = obj.get("shocks")
        if not isinstance(raw, list) or not raw:
            raise DataError("model.shocks: expected a non-empty list")
        shocks = []
        for i, item in enumerate(raw):
            where = f"model.shocks[{i}]"
            if not isinstance(item, dict):
                raise DataError(f"{where}: expected an object")
            for key in ("s", "S0", "beta", "gamma", "omega"):
                if key not in item:
                    raise DataError(f"{where}.{key}: missing")
                if not isinstance(item[key], (int, float)) or isinstance(item[key], bool):
                    raise DataError(f"{where}.{key}: expected a number")
            try:
                shocks.append(ShockParams(item["s"], item["S0"], item["beta"],
                                          item["gamma"], item["omega"]))
            except DataError as exc:
                raise DataError(f"{where}: {exc}") from None
        period = obj.get("period")
        if period is not None:
            if not isinstance(period, dict) or "m" not in period:
                raise DataError("model.period: expected an object with m, h, e")
            try:
                period = PeriodParams(period["m"], period.get("h", 0.0),
                                      period.get("e", DAILY_PERIOD))
            except (DataError, TypeError, ValueError) as exc:
                raise DataError(f"model.period: {exc}") from None
        return cls(tuple(shocks), period)


@dataclass(frozen=True)
class ShockState:
    S: float
    I: float
    R: float


@dataclass(frozen=True)
class ShockRun:
    """Output of :func:`simulate_shock`. Arrays are per local window."""

    popularity: PopularitySeries
    audience: PopularitySeries
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray
    clamp_events: int = 0

    def __iter__(self):
        # allows ``p, a, trace = simulate_shock(...)``
        return iter((self.popularity, self.audience, self.state_trace))

    @property
    def state_trace(self) -> list[ShockState]:
        return [ShockState(float(s), float(i), float(r))
                for s, i, r in zip(self.S, self.I, self.R)]


@dataclass(frozen=True)
class ModelRun:
    popularity: PopularitySeries
    audience: PopularitySeries
    revisits: PopularitySeries
    clamp_events: int = 0
    raw_revisits: np.ndarray = field(default=None, repr=False)

    def __iter__(self):
        return iter((self.popularity, self.audience, self.revisits))


def omega_at(base_omega: float, period: PeriodParams, t: float) -> float:
    """Visit rate at window ``t`` under periodic attenuation."""
    return base_omega * (1.0 - period.m / 2.0 * (math.sin(2.0 * math.pi * (t + period.h) / period.e) + 1.0))


def visit_probability(omega: float, tau: float, k: int) -> float:
    """Poisson probability of exactly ``k`` visits in ``tau`` windows."""
    if omega <= 0 or tau < 0 or k < 0 or int(k) != k:
        raise DataError("need omega > 0, tau >= 0 and integer k >= 0")
    lam = omega * tau
    if lam == 0.0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(lam) - lam - math.lgamma(k + 1))


def simulate_shock(
    params: ShockParams,
    n: int,
    period: PeriodParams | None = None,
    offset: int = 0,
) -> ShockRun:
    """Run one shock for ``n`` windows of its own clock.

    ``offset`` is the global window of the shock's first step; it only
    matters for the phase of the periodic visit rate.
    """
    if n < 1:
        raise DataError("n must be at least 1")
    factor = np.ones(offset + n) if period is None else period.factor(offset + n)
    S, I, R, p, a = (np.empty(n) for _ in range(5))
    clamps = _kernel.run_shock(params.S0, params.beta, params.gamma, params.omega,
                               factor, offset, S, I, R, p, a)
    return ShockRun(PopularitySeries(p), PopularitySeries(a), S, I, R, int(clamps))


def simulate(model: PhoenixRModel, n: int) -> ModelRun:
    """Popularity, audience and revisits of a multi-shock model.

    A shock starting at 0 contributes from window 0; a shock starting at
    ``s > 0`` contributes from window ``s + 1`` onward, its own clock at zero
    there. Revisits are popularity minus audience, clamped at zero.
    """
    if n < 1:
        raise DataError("n must be at least 1")
    p_hat = np.zeros(n)
    a_hat = np.zeros(n)
    clamps = 0
    for shock in model.shocks:
        onset = shock.onset
        if onset >= n:
            continue
        run = simulate_shock(shock, n - onset, model.period, onset)
        p_hat[onset:] += run.popularity.values
        a_hat[onset:] += run.audience.values
        clamps += run.clamp_events
    raw = p_hat - a_hat
    return ModelRun(
        PopularitySeries(p_hat),
        PopularitySeries(a_hat),
        PopularitySeries(np.maximum(raw, 0.0)),
        clamps,
        raw,
    )


def popularity_batch(
    params: np.ndarray,
    starts: Sequence[int],
    n: int,
    period: PeriodParams | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Superposed popularity for a (B, K, 4) stack of (S0, beta, gamma, omega).

    Matches :func:`simulate` exactly; used by the fitter to evaluate many
    parameter vectors per compiled call.
    """
    params = np.ascontiguousarray(params, dtype=float)
    onsets = np.array([0 if s == 0 else s + 1 for s in starts], dtype=np.int64)
    factor = np.ones(n) if period is None else period.factor(n)
    out = np.empty((params.shape[0], n))
    clamps = _kernel.batch_popularity(params, onsets, factor, out)
    return out, clamps
