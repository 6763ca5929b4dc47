"""Least-squares fitting of multi-shock models and MDL shock-count selection.

Internally every shock is described by four unconstrained coordinates that
map, through a logistic squash, onto bounded ranges of

    (log S0, log(beta * S0), log gamma, log omega)

so that positivity always holds, the contact rate is expressed relative to
the population it acts on, and the optimizer cannot wander into flat
regions (populations below one individual, recovery above 100% per
window). With a period, the amplitude also enters through a logistic squash
and the phase is left free. Shock start windows are fixed while optimizing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from phoenixr.errors import DataError, FitError
from phoenixr.mdl import MdlBreakdown, total_cost
from phoenixr.model import (
    DAILY_PERIOD,
    PeriodParams,
    PhoenixRModel,
    ShockParams,
    popularity_batch,
    simulate,
)
from phoenixr.peaks import shock_candidates
from phoenixr.series import PopularitySeries

MIN_WINDOWS = 8
BIC_FLOOR = 1e-12
FD_STEP = 1e-6
INIT_REDRAWS = 10


@dataclass(frozen=True)
class FitConfig:
    epsilon: float = 0.05
    s1_grid: tuple[float, ...] = (1e3, 1e4, 1e5, 1e6)
    max_lm_iterations: int = 200
    lm_tolerance: float = 1e-8
    rng_seed: int = 0
    period_enabled: bool = False
    period_e: float = DAILY_PERIOD
    max_damping: float = 1e16
    restarts: int = 1
    start_shifts: int = 3

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise DataError("epsilon must be positive")
        if not self.s1_grid or min(self.s1_grid) <= 0:
            raise DataError("s1_grid must hold positive values")
        if self.max_lm_iterations < 1:
            raise DataError("max_lm_iterations must be at least 1")
        if not self.period_e > 0:
            raise DataError("period_e must be positive")
        if self.restarts < 0:
            raise DataError("restarts must be non-negative")
        if self.start_shifts < 0:
            raise DataError("start_shifts must be non-negative")


@dataclass
class LMOutcome:
    theta: np.ndarray
    objective: float
    iterations: int
    converged: bool
    trace: list[float] = field(default_factory=list)


@dataclass
class ShockFit:
    """A least-squares fit for one fixed list of start windows."""

    model: PhoenixRModel
    objective: float
    iterations: int
    converged: bool
    trace: list[float]


@dataclass(frozen=True)
class CandidateRecord:
    shocks: int
    total_cost: float
    objective: float


@dataclass
class FitResult:
    model: PhoenixRModel
    mdl: MdlBreakdown
    rmse: float
    bic: float
    shocks_tried: int
    converged: bool
    clamp_events: int
    candidate_starts: list[int] = field(default_factory=list)
    history: list[CandidateRecord] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "model": self.model.to_json(),
            "mdl": self.mdl.to_json(),
            "rmse": self.rmse,
            "bic": self.bic,
            "shocks_tried": self.shocks_tried,
            "converged": self.converged,
            "clamp_events": self.clamp_events,
            "diagnostics": {
                "candidate_starts": list(self.candidate_starts),
                "history": [
                    {"shocks": h.shocks, "total_cost": h.total_cost, "objective": h.objective}
                    for h in self.history
                ],
            },
        }


def rmse(observed, modeled) -> float:
    t = np.asarray(getattr(observed, "values", observed), dtype=float)
    m = np.asarray(getattr(modeled, "values", modeled), dtype=float)
    if t.shape != m.shape:
        raise DataError(f"length mismatch: {t.size} vs {m.size}")
    if t.size < 1:
        raise DataError("rmse needs at least one window")
    return float(np.sqrt(np.mean((t - m) ** 2)))


def bic(observed, modeled, k: int) -> float:
    """Gaussian-likelihood BIC: n ln(SSE/n + floor) + k ln n."""
    t = np.asarray(getattr(observed, "values", observed), dtype=float)
    m = np.asarray(getattr(modeled, "values", modeled), dtype=float)
    if t.shape != m.shape:
        raise DataError(f"length mismatch: {t.size} vs {m.size}")
    n = t.size
    if n < 1:
        raise DataError("bic needs at least one window")
    sse = float(np.sum((t - m) ** 2))
    return n * math.log(sse / n + BIC_FLOOR) + k * math.log(n)


def parameter_count(model: PhoenixRModel) -> int:
    return 5 * len(model.shocks) + (2 if model.period is not None else 0)


# ---------------------------------------------------------------- encoding

def _sigmoid(u: float) -> float:
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    z = math.exp(u)
    return z / (1.0 + z)


def _logit(m: float) -> float:
    m = min(max(m, 1e-12), 1.0 - 1e-12)
    return math.log(m / (1.0 - m))


# natural-log ranges for (S0, beta * S0, gamma, omega)
LOG_BOUNDS = np.log(np.array([
    [1.0, 1e10],
    [1e-6, 1e3],
    [1e-6, 1.0],
    [1e-6, 1e6],
]))
_LO = LOG_BOUNDS[:, 0]
_SPAN = LOG_BOUNDS[:, 1] - LOG_BOUNDS[:, 0]


def _squash(u: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def encode(model: PhoenixRModel) -> np.ndarray:
    parts = []
    for sh in model.shocks:
        natural = np.array([sh.S0, sh.beta * sh.S0, sh.gamma, sh.omega])
        frac = (np.log(np.maximum(natural, 1e-300)) - _LO) / _SPAN
        frac = np.clip(frac, 1e-12, 1.0 - 1e-12)
        parts.extend(np.log(frac / (1.0 - frac)))
    if model.period is not None:
        parts += [_logit(model.period.m), model.period.h]
    return np.array(parts, dtype=float)


def _decode_rates(theta: np.ndarray, k: int) -> np.ndarray:
    """(..., P) unconstrained -> (..., k, 4) natural (S0, beta, gamma, omega)."""
    u = theta[..., : 4 * k].reshape(theta.shape[:-1] + (k, 4))
    z = np.exp(_LO + _SPAN * _squash(u))
    z[..., 1] = z[..., 1] / z[..., 0]
    return z


def decode(theta: np.ndarray, starts: Sequence[int], period_e: float | None) -> PhoenixRModel:
    k = len(starts)
    with np.errstate(over="ignore"):
        rates = _decode_rates(theta, k)
    shocks = tuple(ShockParams(s, *rates[i]) for i, s in enumerate(starts))
    period = None
    if period_e is not None:
        period = PeriodParams(_sigmoid(float(theta[4 * k])), float(theta[4 * k + 1]), period_e)
    return PhoenixRModel(shocks, period)


def _predictor(starts: Sequence[int], n: int, period_e: float | None) -> Callable[[np.ndarray], np.ndarray]:
    k = len(starts)

    def predict(thetas: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            rates = _decode_rates(thetas, k)
        if period_e is None:
            out, _ = popularity_batch(rates, starts, n)
            return out
        # the periodic factor differs per row
        out = np.empty((thetas.shape[0], n))
        for b in range(thetas.shape[0]):
            m = _sigmoid(float(thetas[b, 4 * k]))
            h = float(thetas[b, 4 * k + 1])
            if not math.isfinite(h):
                out[b] = np.nan
                continue
            period = PeriodParams(m, h, period_e)
            out[b], _ = popularity_batch(rates[b : b + 1], starts, n, period)
        return out

    return predict


# ---------------------------------------------------------------- optimizer

def levenberg_marquardt(
    predict: Callable[[np.ndarray], np.ndarray],
    y: np.ndarray,
    theta0: np.ndarray,
    max_iterations: int = 200,
    tolerance: float = 1e-8,
    max_damping: float = 1e16,
) -> LMOutcome:
    """Minimize ||y - predict(theta)||^2 by damped Gauss-Newton steps.

    ``predict`` maps a (B, P) stack of parameter vectors to (B, n)
    predictions. The Jacobian comes from forward differences. Damping is
    divided by 10 after an accepted step and multiplied by 10 after a
    rejected one; the loop stops when an accepted step improves the
    objective by less than ``tolerance`` relative, when damping exceeds
    ``max_damping``, or after ``max_iterations`` trial steps.
    """
    theta = np.array(theta0, dtype=float)
    f = predict(theta[None, :])[0]
    r = y - f
    obj = float(r @ r)
    if not math.isfinite(obj):
        raise FitError("objective is not finite at the initial point")
    trace = [obj]
    lam = 1e-3
    converged = False
    iterations = 0
    p = theta.size
    need_jac = True
    A = g = None
    while iterations < max_iterations and obj > 0.0:
        if need_jac:
            steps = FD_STEP * np.maximum(1.0, np.abs(theta))
            probes = theta[None, :] + np.diag(steps)
            fp = predict(probes)
            jac = ((fp - f[None, :]) / steps[:, None]).T
            if not np.all(np.isfinite(jac)):
                jac = np.nan_to_num(jac, nan=0.0, posinf=0.0, neginf=0.0)
            A = jac.T @ jac
            g = jac.T @ r
            need_jac = False
        iterations += 1
        diag = np.diag(A).copy()
        diag = np.maximum(diag, 1e-12 * max(float(diag.max()), 1e-300))
        try:
            delta = np.linalg.solve(A + lam * np.diag(diag), g)
        except np.linalg.LinAlgError:
            delta = None
        accepted = False
        if delta is not None and np.all(np.isfinite(delta)):
            trial = theta + delta
            ft = predict(trial[None, :])[0]
            rt = y - ft
            obj_t = float(rt @ rt)
            if math.isfinite(obj_t) and obj_t < obj:
                accepted = True
                rel = (obj - obj_t) / obj
                theta, f, r, obj = trial, ft, rt, obj_t
                trace.append(obj)
                lam = max(lam / 10.0, 1e-15)
                need_jac = True
                if rel < tolerance:
                    converged = True
                    break
        if not accepted:
            lam *= 10.0
            if lam > max_damping:
                converged = True
                break
    if obj == 0.0:
        converged = True
    return LMOutcome(theta, obj, iterations, converged, trace)


def _draw_rate(rng: np.random.Generator) -> float:
    return 1.0 - rng.random()  # uniform on (0, 1]


def _random_shock(rng: np.random.Generator, s: int, S0: float) -> ShockParams:
    # the uniform draw applies to beta * S0, keeping the first steps unclamped
    contact, gamma, omega = _draw_rate(rng), _draw_rate(rng), _draw_rate(rng)
    return ShockParams(s, S0, contact / S0, gamma, omega)


def _random_period(rng: np.random.Generator, e: float) -> PeriodParams:
    return PeriodParams(_draw_rate(rng), e * rng.random(), e)


def _fresh_model(rng, starts, volumes, S0, config) -> PhoenixRModel:
    shocks = [_random_shock(rng, starts[0], S0)]
    for j in range(1, len(starts)):
        shocks.append(_random_shock(rng, starts[j], max(float(volumes[j]), 1.0)))
    period = _random_period(rng, config.period_e) if config.period_enabled else None
    return PhoenixRModel(tuple(shocks), period)


def lm_fit_detailed(
    series: PopularitySeries | np.ndarray,
    starts: Sequence[int],
    config: FitConfig = FitConfig(),
    init: PhoenixRModel | None = None,
    rng: np.random.Generator | None = None,
) -> ShockFit:
    """Least-squares fit of shocks at fixed ``starts``, with diagnostics."""
    y = np.asarray(getattr(series, "values", series), dtype=float)
    n = y.size
    starts = [int(s) for s in starts]
    if not starts:
        raise DataError("at least one start window is required")
    if min(starts) < 0 or max(starts) >= n:
        raise DataError("start windows must lie inside the series")
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    period_e = config.period_e if config.period_enabled else None
    predict = _predictor(starts, n, period_e)

    for attempt in range(INIT_REDRAWS):
        if init is None or attempt > 0:
            shocks = tuple(_random_shock(rng, s, config.s1_grid[0] if i == 0 else max(float(y[s]), 1.0))
                           for i, s in enumerate(starts))
            period = _random_period(rng, config.period_e) if period_e is not None else None
            model0 = PhoenixRModel(shocks, period)
        else:
            model0 = _align(init, starts, period_e, rng)
        theta0 = encode(model0)
        try:
            out = levenberg_marquardt(predict, y, theta0, config.max_lm_iterations,
                                      config.lm_tolerance, config.max_damping)
            break
        except FitError:
            continue
    else:
        raise FitError(f"no finite starting point after {INIT_REDRAWS} draws")
    model = decode(out.theta, starts, period_e)
    return ShockFit(model, out.objective, out.iterations, out.converged, out.trace)


def _align(init: PhoenixRModel, starts: list[int], period_e: float | None,
           rng: np.random.Generator) -> PhoenixRModel:
    if [sh.s for sh in init.shocks] != starts:
        raise DataError("init model starts do not match the requested starts")
    period = init.period
    if period_e is None:
        period = None
    elif period is None:
        period = _random_period(rng, period_e)
    else:
        period = PeriodParams(period.m, period.h, period_e)
    return PhoenixRModel(init.shocks, period)


def lm_fit(
    series: PopularitySeries | np.ndarray,
    starts: Sequence[int],
    config: FitConfig = FitConfig(),
    init: PhoenixRModel | None = None,
) -> PhoenixRModel:
    """Least-squares parameters for shocks at fixed start windows."""
    return lm_fit_detailed(series, starts, config, init).model


def _start_options(start: int, scale: float, taken: list[int], shifts: int) -> list[int]:
    # a shock seeded by one individual grows unseen for a while, so the peak
    # puts its start too late; earlier starts in steps of the peak half-width
    # are tried as well
    if start == 0:
        return [0]
    step = max(1, int(round(scale)))
    options = []
    for c in range(shifts + 1):
        s = start - c * step
        if s < 1:
            break
        if s not in taken and s not in options:
            options.append(s)
    return options or [start]


def fit_phoenix_r(series: PopularitySeries | np.ndarray, config: FitConfig = FitConfig()) -> FitResult:
    """Fit with automatic shock-count selection.

    Candidate starts come from wavelet peaks (0 first, then by peak volume).
    Shocks are added one at a time, each fit warm-started from the previous
    one, and the description length of every fit is recorded. The loop stops
    once the cost rises more than ``epsilon`` (relative) above the best seen,
    and the cheapest model is returned.
    """
    y = np.asarray(getattr(series, "values", series), dtype=float)
    n = y.size
    if n < MIN_WINDOWS:
        raise DataError(f"need at least {MIN_WINDOWS} windows to fit, got {n}")
    rng = np.random.default_rng(config.rng_seed)
    candidates = shock_candidates(y)
    proposed = list(candidates.starts)
    starts: list[int] = []

    best: tuple[MdlBreakdown, ShockFit] | None = None
    min_cost = math.inf
    history: list[CandidateRecord] = []
    previous: ShockFit | None = None
    tried = 0
    for i in range(1, len(proposed) + 1):
        tried = i
        volume = max(float(candidates.peak_volumes[i - 1]), 1.0)
        fit = None
        for s in _start_options(proposed[i - 1], candidates.scales[i - 1], starts, config.start_shifts):
            trial_starts = starts + [s]
            volumes = list(candidates.peak_volumes[: i - 1]) + [volume]
            if previous is not None:
                grown = previous.model.shocks + (_random_shock(rng, s, volume),)
                trial = lm_fit_detailed(y, trial_starts, config,
                                        PhoenixRModel(grown, previous.model.period), rng)
                if fit is None or trial.objective < fit.objective:
                    fit = trial
            for S0 in config.s1_grid:
                for _ in range(config.restarts if i > 1 else max(config.restarts, 1)):
                    init = _fresh_model(rng, trial_starts, volumes, S0, config)
                    trial = lm_fit_detailed(y, trial_starts, config, init, rng)
                    if fit is None or trial.objective < fit.objective:
                        fit = trial
        assert fit is not None
        starts = fit.model.starts
        modeled = simulate(fit.model, n).popularity.values
        cost = total_cost(y, modeled, fit.model, n)
        history.append(CandidateRecord(i, cost.total, fit.objective))
        if cost.total < min_cost:
            min_cost = cost.total
            best = (cost, fit)
        if cost.total > min_cost + config.epsilon * abs(min_cost):
            break
        previous = fit

    assert best is not None
    cost, fit = best
    run = simulate(fit.model, n)
    return FitResult(
        model=fit.model,
        mdl=cost,
        rmse=rmse(y, run.popularity.values),
        bic=bic(y, run.popularity.values, parameter_count(fit.model)),
        shocks_tried=tried,
        converged=fit.converged,
        clamp_events=run.clamp_events,
        candidate_starts=proposed,
        history=history,
    )
