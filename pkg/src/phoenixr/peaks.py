"""Wavelet ridge-line peak detection used to propose shock start times.

The series is convolved with Mexican hat wavelets over a dyadic set of
half-widths. Local maxima are chained across scales into ridge lines, from
the coarsest scale down to the finest; ridges that persist over enough
scales and stand out from the fine-scale noise floor become peaks. A peak at
window ``k`` found best by half-width ``l`` implies a shock starting at
``k - l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from phoenixr.errors import DataError
from phoenixr.series import PopularitySeries

DEFAULT_SCALES: tuple[int, ...] = (1, 2, 4, 8, 16, 32, 64, 128, 256)
KERNEL_SUPPORT = 8.0  # half-support in units of sigma


@dataclass(frozen=True)
class Peak:
    k: int
    l: float
    snr: float
    ridge_length: int

    def to_json(self) -> dict:
        return {"k": self.k, "l": self.l, "snr": self.snr, "ridge_length": self.ridge_length}


@dataclass(frozen=True)
class ShockCandidateList:
    """Candidate shock starts: 0 first, then by descending peak volume.

    ``scales`` holds the half-width of the peak behind each start (0 for a
    leading start that no peak produced).
    """

    starts: tuple[int, ...]
    peak_volumes: tuple[float, ...]
    peaks: tuple[Peak, ...] = field(default=())
    scales: tuple[float, ...] = field(default=())

    def to_json(self) -> dict:
        return {"starts": list(self.starts), "peaks": [p.to_json() for p in self.peaks]}


def mexican_hat(t, sigma: float):
    """Mexican hat wavelet of width ``sigma``, amplitude ``2/(sqrt(3) sigma pi^(1/4))``."""
    if not sigma > 0:
        raise DataError("sigma must be positive")
    x = np.asarray(t, dtype=float) / sigma
    amp = 2.0 / (math.sqrt(3.0) * sigma * math.pi ** 0.25)
    out = amp * (1.0 - x * x) * np.exp(-0.5 * x * x)
    return float(out) if np.ndim(out) == 0 else out


def wavelet_kernel(sigma: float) -> np.ndarray:
    half = int(math.ceil(KERNEL_SUPPORT * sigma))
    return mexican_hat(np.arange(-half, half + 1), sigma)


def cwt(series: PopularitySeries | np.ndarray, scales: Sequence[float]) -> np.ndarray:
    """Wavelet coefficients, one row per scale, each the length of the series.

    Boundaries use symmetric reflection so that edges do not read as steps.
    """
    x = np.asarray(series.values if isinstance(series, PopularitySeries) else series, dtype=float)
    if x.size < 2:
        raise DataError("cwt needs at least 2 points")
    if len(scales) == 0 or min(scales) <= 0:
        raise DataError("scales must be non-empty and positive")
    out = np.empty((len(scales), x.size))
    for j, sigma in enumerate(scales):
        kernel = wavelet_kernel(sigma)
        half = kernel.size // 2
        padded = np.pad(x, half, mode="symmetric")
        out[j] = np.convolve(padded, kernel, mode="valid")
    return out


def _local_maxima(row: np.ndarray) -> np.ndarray:
    inner = (row[1:-1] > row[:-2]) & (row[1:-1] > row[2:])
    return np.flatnonzero(inner) + 1


def _ridge_lines(
    coefs: np.ndarray,
    max_distances: np.ndarray,
    gap_thresh: int,
) -> list[list[tuple[int, int]]]:
    """Chain local maxima from the coarsest row to the finest.

    Each active ridge accepts at most one maximum per row, the nearest one
    within the connection distance of the coarser row it leaves. A ridge
    closes after more than ``gap_thresh`` consecutive rows without a match.
    """
    active: list[tuple[list[tuple[int, int]], int]] = []
    done: list[list[tuple[int, int]]] = []
    for row in range(coefs.shape[0] - 1, -1, -1):
        cols = _local_maxima(coefs[row])
        taken = [False] * len(active)
        fresh = []
        for col in cols:
            best, best_d = -1, math.inf
            for idx, (points, _) in enumerate(active):
                if taken[idx]:
                    continue
                d = abs(points[-1][1] - col)
                if d < best_d:
                    best, best_d = idx, d
            # on a dyadic scale set a peak drifts by about a quarter of the
            # coarser scale between rows
            reach = max_distances[min(row + 1, coefs.shape[0] - 1)]
            if best >= 0 and best_d <= reach:
                active[best][0].append((row, int(col)))
                taken[best] = True
            else:
                fresh.append([(row, int(col))])
        survivors = []
        for idx, (points, gap) in enumerate(active):
            gap = 0 if taken[idx] else gap + 1
            if gap > gap_thresh:
                done.append(points)
            else:
                survivors.append((points, gap))
        active = survivors + [(points, 0) for points in fresh]
    return done + [points for points, _ in active]


def detect_peaks(
    series: PopularitySeries | np.ndarray,
    scales: Sequence[float] = DEFAULT_SCALES,
    min_snr: float = 1.0,
    noise_perc: float = 10.0,
    min_ridge_length: int | None = None,
) -> list[Peak]:
    """Ridge-line peaks of the series, in order of position."""
    x = np.asarray(series.values if isinstance(series, PopularitySeries) else series, dtype=float)
    n = x.size
    used = [s for s in scales if s <= n / 2]
    if n < 2 or not used:
        return []
    coefs = cwt(x, used)
    max_distances = np.asarray(used, dtype=float) / 4.0
    gap_thresh = int(math.ceil(used[0]))
    if min_ridge_length is None:
        min_ridge_length = int(math.ceil(len(used) / 4))

    fine = np.abs(coefs[0])
    floor = 1e-12 * float(np.max(fine)) + 1e-300
    reach = int(math.ceil(max(used)))

    peaks = []
    for ridge in _ridge_lines(coefs, max_distances, gap_thresh):
        if len(ridge) < min_ridge_length:
            continue
        row, col = max(ridge, key=lambda rc: (coefs[rc], -rc[0]))
        strength = coefs[row, col]
        if not strength > 0:
            continue
        lo, hi = max(0, col - reach), min(n, col + reach + 1)
        noise = max(float(np.percentile(fine[lo:hi], noise_perc)), floor)
        snr = float(strength / noise)
        if snr < min_snr:
            continue
        peaks.append(Peak(int(col), float(used[row]), snr, len(ridge)))
    peaks.sort(key=lambda p: (p.k, p.l))
    return peaks


def find_peaks(
    series: PopularitySeries | np.ndarray,
    scales: Sequence[float] = DEFAULT_SCALES,
    min_snr: float = 1.0,
    noise_perc: float = 10.0,
) -> ShockCandidateList:
    """Candidate shock starts from the series alone.

    Each peak ``(k, l)`` proposes the start ``max(0, k - l)``. Start 0 always
    leads the list; the rest follow by descending series value at ``k``.
    Repeated starts keep their strongest peak.
    """
    x = np.asarray(series.values if isinstance(series, PopularitySeries) else series, dtype=float)
    if x.size < 2:
        raise DataError("find_peaks needs at least 2 windows")
    peaks = detect_peaks(x, scales, min_snr, noise_perc)
    ranked = sorted(peaks, key=lambda p: (-x[p.k], p.k))

    starts: list[int] = []
    volumes: list[float] = []
    kept: list[Peak] = []
    origin: tuple[float, Peak] | None = None
    for peak in ranked:
        start = max(0, int(math.floor(peak.k - peak.l)))
        if start == 0:
            if origin is None:
                origin = (float(x[peak.k]), peak)
            continue
        if start in starts:
            continue
        starts.append(start)
        volumes.append(float(x[peak.k]))
        kept.append(peak)
    if origin is None:
        head_volume, head_peaks = float(x[0]), ()
    else:
        head_volume, head_peaks = origin[0], (origin[1],)
    head_scale = origin[1].l if origin is not None else 0.0
    return ShockCandidateList(
        (0, *starts),
        (head_volume, *volumes),
        (*head_peaks, *kept),
        (head_scale, *(p.l for p in kept)),
    )


QUIET_PREFIX = 0.25
QUIET_SMOOTHING = 5


def shock_candidates(
    series: PopularitySeries | np.ndarray,
    scales: Sequence[float] = DEFAULT_SCALES,
    min_snr: float = 1.0,
    noise_perc: float = 10.0,
) -> ShockCandidateList:
    """Start windows to try when growing a model one shock at a time.

    Two clean-ups on top of :func:`find_peaks`:

    * peaks whose spans ``[k - l, k + l]`` overlap describe one cascade seen
      at several scales; only the widest (then highest) is kept;
    * a cascade seeded at window 0 by a single individual stays invisible
      for a while, so its peak yields a start estimate well after 0. The
      highest peak with a quiet prefix (moving average of the series never
      above ``QUIET_PREFIX`` of its volume before ``k - 2 l``) is credited
      to the origin shock instead of becoming a separate candidate.
    """
    x = np.asarray(series.values if isinstance(series, PopularitySeries) else series, dtype=float)
    if x.size < 2:
        raise DataError("need at least 2 windows")
    peaks = sorted(detect_peaks(x, scales, min_snr, noise_perc),
                   key=lambda p: (-p.l, -x[p.k], p.k))
    kept: list[Peak] = []
    for peak in peaks:
        if all(peak.k + peak.l < q.k - q.l or q.k + q.l < peak.k - peak.l for q in kept):
            kept.append(peak)
    kept.sort(key=lambda p: (-x[p.k], p.k))

    def start_of(p: Peak) -> int:
        return max(0, int(math.floor(p.k - p.l)))

    width = min(QUIET_SMOOTHING, x.size)
    smooth = np.convolve(x, np.ones(width) / width, mode="same")
    origin: Peak | None = None
    for peak in kept:
        quiet_until = int(math.floor(peak.k - 2 * peak.l))
        if quiet_until <= 0 or float(np.max(smooth[:quiet_until])) <= QUIET_PREFIX * x[peak.k]:
            origin = peak
            break

    starts: list[int] = []
    volumes: list[float] = []
    rest: list[Peak] = []
    for peak in kept:
        if peak is origin:
            continue
        s = start_of(peak)
        if s == 0 or s in starts:
            continue
        starts.append(s)
        volumes.append(float(x[peak.k]))
        rest.append(peak)
    head_volume = float(x[origin.k]) if origin is not None else float(x[0])
    head = (origin,) if origin is not None else ()
    head_scale = origin.l if origin is not None else 0.0
    return ShockCandidateList((0, *starts), (head_volume, *volumes), (*head, *rest),
                              (head_scale, *(p.l for p in rest)))
