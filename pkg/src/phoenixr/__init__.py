"""Revisit-aware multi-cascade popularity modeling.

Fits SIR-with-revisits cascades to popularity series, picks the number of
shocks by description length, forecasts, and characterizes event logs.
"""

from phoenixr.errors import DataError, FitError, PhoenixError
from phoenixr.series import (
    ActivitySplit,
    EventRecord,
    PopularitySeries,
    load_events,
    load_series,
    window_events,
)
from phoenixr.model import (
    PeriodParams,
    PhoenixRModel,
    ShockParams,
    ShockState,
    omega_at,
    simulate,
    simulate_shock,
    visit_probability,
)
from phoenixr.peaks import cwt, find_peaks, mexican_hat
from phoenixr.mdl import MdlBreakdown, log_star, param_cost, residual_cost, total_cost
from phoenixr.fitter import FitConfig, FitResult, bic, fit_phoenix_r, lm_fit, rmse
from phoenixr.characterize import RatioReport, WindowedQuartiles, long_run_report, windowed_quartiles
from phoenixr.forecast import ForecastReport, SplitSpec, compare_models, holt_winters_forecast, run_protocol
from phoenixr.synthetic import gen_synthetic

__version__ = "0.1.0"

__all__ = [
    "ActivitySplit",
    "ForecastReport",
    "RatioReport",
    "SplitSpec",
    "WindowedQuartiles",
    "compare_models",
    "gen_synthetic",
    "holt_winters_forecast",
    "long_run_report",
    "run_protocol",
    "windowed_quartiles",
    "DataError",
    "EventRecord",
    "FitConfig",
    "FitError",
    "FitResult",
    "MdlBreakdown",
    "PeriodParams",
    "PhoenixError",
    "PhoenixRModel",
    "PopularitySeries",
    "ShockParams",
    "ShockState",
    "bic",
    "cwt",
    "find_peaks",
    "fit_phoenix_r",
    "lm_fit",
    "load_events",
    "load_series",
    "log_star",
    "mexican_hat",
    "omega_at",
    "param_cost",
    "residual_cost",
    "rmse",
    "simulate",
    "simulate_shock",
    "total_cost",
    "visit_probability",
    "window_events",
]
