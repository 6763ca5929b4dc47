"""Noisy series drawn from a known model, for recovery tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from phoenixr.errors import DataError
from phoenixr.model import PhoenixRModel, simulate
from phoenixr.series import PopularitySeries


@dataclass(frozen=True)
class SyntheticSeries:
    series: PopularitySeries
    clean: np.ndarray
    model: PhoenixRModel
    noise: float
    seed: int

    def truth_json(self) -> dict:
        return {
            "model": self.model.to_json(),
            "n": self.series.n,
            "noise": self.noise,
            "seed": self.seed,
            "noise_sigma": self.noise * float(self.clean.max(initial=0.0)),
        }


def gen_synthetic(model: PhoenixRModel, n: int, noise: float = 0.0, seed: int = 0,
                  window_length: float = 86400.0) -> SyntheticSeries:
    """Simulated popularity plus Gaussian noise, floored at zero.

    The noise standard deviation is ``noise`` times the peak of the clean
    series. With ``noise == 0`` the output is the simulation itself.
    """
    if n < 1:
        raise DataError("n must be at least 1")
    if not noise >= 0:
        raise DataError("noise level must be non-negative")
    clean = simulate(model, n).popularity.values.copy()
    if noise == 0:
        values = clean
    else:
        rng = np.random.default_rng(seed)
        sigma = noise * float(clean.max())
        values = np.maximum(clean + rng.normal(0.0, sigma, n), 0.0)
    return SyntheticSeries(PopularitySeries(values, window_length), clean, model, float(noise), int(seed))
