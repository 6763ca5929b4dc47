"""Forecasting protocol and exponential-smoothing baselines.

A series is cut into a training prefix, a validation block and a test block
of equal horizon. Each model kind proposes an ensemble of forecasts from the
training prefix alone; the member with the lowest validation RMSE is scored
on the test block.

The baseline family ("temporal dynamics") is additive exponential smoothing:
simple, with trend, with trend and season, plus an ordinary least-squares
line. Smoothing constants come from a grid search on one-step-ahead training
error.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from phoenixr.errors import DataError
from phoenixr.fitter import MIN_WINDOWS, FitConfig, fit_phoenix_r, rmse
from phoenixr.model import DAILY_PERIOD, simulate
from phoenixr.series import PopularitySeries

VARIANTS = ("ses", "holt_trend", "holt_winters_seasonal", "linear_trend")
MODEL_KINDS = ("phoenix_r", "temporal_dynamics")
SMOOTHING_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
TRAIN_FRACTIONS = (0.05, 0.25, 0.50)
DELTAS = (1, 7, 30)
Z95 = 1.959963984540054


# ------------------------------------------------------------ smoothing

def _values(series) -> np.ndarray:
    return np.asarray(getattr(series, "values", series), dtype=float)


def _min_train(variant: str, season: int) -> int:
    return 2 * season if variant == "holt_winters_seasonal" else 4


def _ses(y: np.ndarray, alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    level = np.full(alpha.shape, y[0])
    sse = np.zeros(alpha.shape)
    for t in range(1, y.size):
        err = y[t] - level
        sse += err * err
        level = level + alpha * err
    return sse, level


def _holt(y: np.ndarray, alpha: np.ndarray, beta: np.ndarray):
    level = np.full(alpha.shape, y[0])
    trend = np.full(alpha.shape, y[1] - y[0])
    sse = np.zeros(alpha.shape)
    for t in range(1, y.size):
        err = y[t] - (level + trend)
        sse += err * err
        new_level = alpha * y[t] + (1 - alpha) * (level + trend)
        trend = beta * (new_level - level) + (1 - beta) * trend
        level = new_level
    return sse, level, trend


def _holt_winters(y: np.ndarray, alpha: np.ndarray, beta: np.ndarray, gamma: np.ndarray, e: int):
    first, second = y[:e].mean(), y[e : 2 * e].mean()
    level = np.full(alpha.shape, first)
    trend = np.full(alpha.shape, (second - first) / e)
    # seasonal[j] holds the component for windows t with t % e == j
    seasonal = [np.full(alpha.shape, y[j] - first) for j in range(e)]
    sse = np.zeros(alpha.shape)
    for t in range(e, y.size):
        j = t % e
        err = y[t] - (level + trend + seasonal[j])
        sse += err * err
        new_level = alpha * (y[t] - seasonal[j]) + (1 - alpha) * (level + trend)
        trend = beta * (new_level - level) + (1 - beta) * trend
        seasonal[j] = gamma * (y[t] - new_level) + (1 - gamma) * seasonal[j]
        level = new_level
    return sse, level, trend, seasonal


@dataclass(frozen=True)
class SmoothingFit:
    variant: str
    params: tuple[float, ...]
    sse: float
    forecast: np.ndarray = field(repr=False)


def smoothing_fit(train, horizon: int, variant: str, season: int = int(DAILY_PERIOD)) -> SmoothingFit:
    """Grid-searched fit of one variant and its ``horizon``-step forecast."""
    y = _values(train)
    if variant not in VARIANTS:
        raise DataError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    if horizon < 1:
        raise DataError("horizon must be at least 1")
    need = _min_train(variant, season)
    if y.size < need:
        raise DataError(f"{variant} needs at least {need} training windows, got {y.size}")
    h = np.arange(1, horizon + 1, dtype=float)
    T = y.size

    if variant == "linear_trend":
        slope, intercept = np.polyfit(np.arange(T, dtype=float), y, 1)
        fitted = intercept + slope * np.arange(T)
        sse = float(np.sum((y - fitted) ** 2))
        out = intercept + slope * (T - 1 + h)
        params: tuple[float, ...] = (float(intercept), float(slope))
    elif variant == "ses":
        alpha = np.array(SMOOTHING_GRID)
        sse_all, level = _ses(y, alpha)
        b = int(np.argmin(sse_all))
        sse, params = float(sse_all[b]), (SMOOTHING_GRID[b],)
        out = np.full(horizon, level[b])
    elif variant == "holt_trend":
        grid = np.array(list(itertools.product(SMOOTHING_GRID, repeat=2)))
        sse_all, level, trend = _holt(y, grid[:, 0], grid[:, 1])
        b = int(np.argmin(sse_all))
        sse, params = float(sse_all[b]), tuple(float(v) for v in grid[b])
        out = level[b] + h * trend[b]
    else:
        grid = np.array(list(itertools.product(SMOOTHING_GRID, repeat=3)))
        sse_all, level, trend, seasonal = _holt_winters(y, grid[:, 0], grid[:, 1], grid[:, 2], season)
        b = int(np.argmin(sse_all))
        sse, params = float(sse_all[b]), tuple(float(v) for v in grid[b])
        phase = np.array([seasonal[(T + i) % season][b] for i in range(horizon)])
        out = level[b] + h * trend[b] + phase
    return SmoothingFit(variant, params, sse, np.maximum(out, 0.0))


def holt_winters_forecast(train, horizon: int, variant: str = "holt_trend",
                          season: int = int(DAILY_PERIOD)) -> PopularitySeries:
    """Forecast ``horizon`` windows past the training series, clamped at 0."""
    fit = smoothing_fit(train, horizon, variant, season)
    window = getattr(train, "window_length", 86400.0)
    return PopularitySeries(fit.forecast, window)


# ------------------------------------------------------------ protocol

@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    delta: int
    ensemble_size: int = 10

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError("train_fraction must lie in (0, 1)")
        if int(self.delta) != self.delta or self.delta < 1:
            raise DataError("delta must be a positive integer")
        if self.ensemble_size < 1:
            raise DataError("ensemble_size must be at least 1")

    def train_windows(self, n: int) -> int:
        return int(math.ceil(self.train_fraction * n - 1e-9))

    def check(self, n: int) -> int:
        n_train = self.train_windows(n)
        if n_train + 2 * self.delta > n:
            raise DataError(
                f"split {self.train_fraction}/{self.delta} needs {n_train + 2 * self.delta} "
                f"windows, series has {n}"
            )
        return n_train


@dataclass(frozen=True)
class Candidate:
    name: str
    validation_rmse: float
    test_rmse: float


@dataclass(frozen=True)
class ProtocolResult:
    model_kind: str
    split: SplitSpec
    chosen: str
    validation_rmse: float
    test_rmse: float
    candidates: tuple[Candidate, ...]


def _trajectories(y: np.ndarray, kind: str, n_train: int, horizon: int, seed: int,
                  ensemble_size: int, config: FitConfig | None, season: int) -> list[tuple[str, np.ndarray]]:
    """Ensemble forecasts for the ``horizon`` windows after the training prefix."""
    train = y[:n_train]
    if kind == "phoenix_r":
        if n_train < MIN_WINDOWS:
            raise DataError(f"phoenix_r needs at least {MIN_WINDOWS} training windows, got {n_train}")
        base = config or FitConfig()
        out = []
        for j in range(ensemble_size):
            fit = fit_phoenix_r(train, replace(base, rng_seed=seed + j))
            path = simulate(fit.model, n_train + horizon).popularity.values[n_train:]
            out.append((f"seed={seed + j}", path))
        return out
    if kind == "temporal_dynamics":
        out = []
        for variant in VARIANTS:
            if n_train < _min_train(variant, season):
                continue
            fit = smoothing_fit(train, horizon, variant, season)
            out.append((variant, fit.forecast))
        if not out:
            raise DataError(f"temporal_dynamics needs at least 4 training windows, got {n_train}")
        return out[:ensemble_size]
    raise DataError(f"unknown model kind {kind!r}; expected one of {', '.join(MODEL_KINDS)}")


def _select(y: np.ndarray, kind: str, split: SplitSpec, n_train: int,
            paths: list[tuple[str, np.ndarray]]) -> ProtocolResult:
    d = split.delta
    val = y[n_train : n_train + d]
    test = y[n_train + d : n_train + 2 * d]
    candidates = tuple(
        Candidate(name, rmse(val, path[:d]), rmse(test, path[d : 2 * d])) for name, path in paths
    )
    best = min(range(len(candidates)), key=lambda i: candidates[i].validation_rmse)
    chosen = candidates[best]
    return ProtocolResult(kind, split, chosen.name, chosen.validation_rmse, chosen.test_rmse, candidates)


def run_protocol(
    series,
    model_kind: str,
    split: SplitSpec,
    seed: int = 0,
    config: FitConfig | None = None,
    season: int = int(DAILY_PERIOD),
) -> ProtocolResult:
    """Train on a prefix, select on validation, score on the test block.

    Only the training prefix reaches the model; validation and test windows
    are read after the forecasts are made. Validation windows are not folded
    back into training before testing.
    """
    y = _values(series)
    n_train = split.check(y.size)
    paths = _trajectories(y, model_kind, n_train, 2 * split.delta, seed,
                          split.ensemble_size, config, season)
    return _select(y, model_kind, split, n_train, paths)


# ------------------------------------------------------------ comparison

@dataclass(frozen=True)
class ReportRow:
    series_id: str
    model: str
    train_fraction: float
    delta: int
    rmse: float
    chosen: str


@dataclass(frozen=True)
class CellSummary:
    model: str
    train_fraction: float
    delta: int
    mean_rmse: float
    half_width: float
    count: int


@dataclass(frozen=True)
class CellVerdict:
    train_fraction: float
    delta: int
    winner: str
    significant: bool


@dataclass(frozen=True)
class ForecastReport:
    rows: tuple[ReportRow, ...]
    aggregate: tuple[CellSummary, ...]
    verdicts: tuple[CellVerdict, ...]

    @property
    def per_series(self) -> list[tuple[str, str, float]]:
        return [(r.series_id, r.model, r.rmse) for r in self.rows]

    def cell(self, model: str, train_fraction: float, delta: int) -> CellSummary:
        for c in self.aggregate:
            if c.model == model and c.train_fraction == train_fraction and c.delta == delta:
                return c
        raise KeyError((model, train_fraction, delta))

    def to_json(self) -> dict:
        return {
            "per_series": [
                {"series": r.series_id, "model": r.model, "split": r.train_fraction,
                 "delta": r.delta, "rmse": r.rmse, "chosen": r.chosen}
                for r in self.rows
            ],
            "aggregate": [
                {"model": c.model, "split": c.train_fraction, "delta": c.delta,
                 "mean_rmse": c.mean_rmse, "half_width": c.half_width, "count": c.count}
                for c in self.aggregate
            ],
            "cells": [
                {"split": v.train_fraction, "delta": v.delta, "winner": v.winner,
                 "significant": v.significant}
                for v in self.verdicts
            ],
        }

    def csv_rows(self) -> list[tuple]:
        return [(r.series_id, r.model, r.train_fraction, r.delta, r.rmse) for r in self.rows]


def summarize(values: Sequence[float]) -> tuple[float, float]:
    """Mean and normal-approximation 95% half-width."""
    v = np.asarray(values, dtype=float)
    mean = float(v.mean())
    if v.size < 2:
        return mean, 0.0
    return mean, float(Z95 * v.std(ddof=1) / math.sqrt(v.size))


def _series_rows(job) -> list[ReportRow]:
    sid, y, kinds, fractions, deltas, seed, ensemble_size, config, season = job
    rows = []
    for kind in kinds:
        for f in fractions:
            n_train = SplitSpec(f, 1).train_windows(y.size)
            splits = [SplitSpec(f, d, ensemble_size) for d in deltas]
            for sp in splits:
                sp.check(y.size)
            # one ensemble per training prefix, long enough for every delta
            paths = _trajectories(y, kind, n_train, 2 * max(deltas), seed,
                                  ensemble_size, config, season)
            for sp in splits:
                res = _select(y, kind, sp, n_train, paths)
                rows.append(ReportRow(sid, kind, f, sp.delta, res.test_rmse, res.chosen))
    return rows


def compare_models(
    series: Mapping[str, object] | Sequence[object],
    train_fractions: Sequence[float] = TRAIN_FRACTIONS,
    deltas: Sequence[int] = DELTAS,
    model_kinds: Sequence[str] = MODEL_KINDS,
    seed: int = 0,
    ensemble_size: int = 10,
    config: FitConfig | None = None,
    season: int = int(DAILY_PERIOD),
    jobs: int = 1,
) -> ForecastReport:
    """Run the protocol for every series, model kind, split and horizon."""
    items = list(series.items()) if isinstance(series, Mapping) else [
        (str(i), s) for i, s in enumerate(series)]
    if len(items) < 2:
        raise DataError("compare_models needs at least 2 series")
    for kind in model_kinds:
        if kind not in MODEL_KINDS:
            raise DataError(f"unknown model kind {kind!r}; expected one of {', '.join(MODEL_KINDS)}")
    if not train_fractions or not deltas:
        raise DataError("need at least one split and one delta")
    jobs_list = [(sid, _values(s), tuple(model_kinds), tuple(train_fractions), tuple(deltas),
                  seed, ensemble_size, config, season) for sid, s in items]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_series_rows, jobs_list))
    else:
        chunks = [_series_rows(job) for job in jobs_list]
    rows = tuple(r for chunk in chunks for r in chunk)

    aggregate = []
    verdicts = []
    for f in train_fractions:
        for d in deltas:
            cells = []
            for kind in model_kinds:
                vals = [r.rmse for r in rows if r.model == kind and r.train_fraction == f and r.delta == d]
                mean, half = summarize(vals)
                cells.append(CellSummary(kind, f, d, mean, half, len(vals)))
            aggregate.extend(cells)
            verdicts.append(_verdict(f, d, cells))
    return ForecastReport(rows, tuple(aggregate), tuple(verdicts))


def _verdict(f: float, d: int, cells: list[CellSummary]) -> CellVerdict:
    ranked = sorted(cells, key=lambda c: c.mean_rmse)
    if len(ranked) < 2:
        return CellVerdict(f, d, ranked[0].model, False)
    a, b = ranked[0], ranked[1]
    if a.mean_rmse == b.mean_rmse:
        return CellVerdict(f, d, "tie", False)
    separated = a.mean_rmse + a.half_width < b.mean_rmse - b.half_width
    return CellVerdict(f, d, a.model, separated)
