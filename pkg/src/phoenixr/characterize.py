"""Revisit statistics of an event log.

Long-run report: for every sufficiently popular object, revisits over
audience computed on whole-log totals, with its CCDF and medians.
Windowed quartiles: the same ratio per (object, window) cell, pooled over
all objects, for cells above a popularity threshold.
"""

from __future__ import annotations

import math
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from phoenixr.errors import DataError
from phoenixr.series import EventRecord

WINDOW_UNITS = {"s": 1, "h": 3600, "d": 86400, "w": 7 * 86400, "m": 30 * 86400}


def parse_window(text: str) -> float:
    """``"1h"``, ``"2d"``, ``"1w"``, ``"1m"`` (30 days) or plain seconds."""
    match = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([shdwm]?)\s*", text)
    if not match:
        raise DataError(f"bad window length {text!r}; use e.g. 3600, 1h, 1d, 1w, 1m")
    value = float(match.group(1)) * WINDOW_UNITS[match.group(2) or "s"]
    if value <= 0:
        raise DataError(f"window length must be positive, got {text!r}")
    return value


def quantile(sorted_values: Sequence[float], q: float) -> float:
    """Linear interpolation between order statistics; tolerates +inf."""
    m = len(sorted_values)
    if m == 0:
        raise DataError("quantile of an empty sample")
    pos = q * (m - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, m - 1)
    frac = pos - lo
    a, b = float(sorted_values[lo]), float(sorted_values[hi])
    if frac == 0.0 or a == b:
        return a
    if math.isinf(a) or math.isinf(b):
        return math.inf
    return a + frac * (b - a)


def _ratio(revisits: float, audience: float) -> float:
    if audience > 0:
        return revisits / audience
    return math.inf if revisits > 0 else 0.0


def _num(x: float) -> float | str:
    return x if math.isfinite(x) else "inf"


@dataclass(frozen=True)
class RatioReport:
    per_object_ratio: dict[str, float]
    ccdf: tuple[tuple[float, float], ...]
    median_revisits_over_audience: float
    median_revisits_over_popularity: float
    pct_dominated: float
    min_popularity: int

    @property
    def medians(self) -> dict[str, float]:
        return {
            "revisits_over_audience": self.median_revisits_over_audience,
            "revisits_over_popularity": self.median_revisits_over_popularity,
        }

    def to_json(self) -> dict:
        return {
            "min_popularity": self.min_popularity,
            "objects": len(self.per_object_ratio),
            "per_object_ratio": {k: _num(v) for k, v in sorted(self.per_object_ratio.items())},
            "ccdf": [[_num(t), f] for t, f in self.ccdf],
            "medians": {k: _num(v) for k, v in self.medians.items()},
            "pct_dominated": self.pct_dominated,
        }


@dataclass(frozen=True)
class WindowedQuartiles:
    window_length: float
    q25: float
    median: float
    q75: float
    windows_counted: int

    def to_json(self) -> dict:
        return {
            "window_length": self.window_length,
            "q25": _num(self.q25),
            "median": _num(self.median),
            "q75": _num(self.q75),
            "windows_counted": self.windows_counted,
        }


def _by_object(events: Iterable[EventRecord]) -> dict[str, list[tuple[float, int, str]]]:
    grouped: dict[str, list[tuple[float, int, str]]] = defaultdict(list)
    for i, e in enumerate(events):
        grouped[e.object_id].append((e.timestamp, i, e.user_id))
    if not grouped:
        raise DataError("event log is empty")
    return grouped


def ccdf_points(values: Sequence[float]) -> tuple[tuple[float, float], ...]:
    """(x, P(X >= x)) at every distinct sample value, ascending in x."""
    xs = sorted(values)
    m = len(xs)
    points = []
    for i, x in enumerate(xs):
        if i == 0 or x != xs[i - 1]:
            points.append((float(x), (m - i) / m))
    return tuple(points)


def long_run_report(events: Iterable[EventRecord], min_popularity: int = 500) -> RatioReport:
    """Per-object revisits/audience on whole-log totals.

    Objects with total popularity at or below ``min_popularity`` are left out.
    """
    grouped = _by_object(events)
    ratios: dict[str, float] = {}
    over_pop: list[float] = []
    for obj, rows in grouped.items():
        popularity = len(rows)
        if popularity <= min_popularity:
            continue
        audience = len({user for _, _, user in rows})
        revisits = popularity - audience
        ratios[obj] = _ratio(revisits, audience)
        over_pop.append(revisits / popularity)
    if not ratios:
        raise DataError(f"no object has popularity above {min_popularity}")
    values = sorted(ratios.values())
    return RatioReport(
        per_object_ratio=ratios,
        ccdf=ccdf_points(values),
        median_revisits_over_audience=quantile(values, 0.5),
        median_revisits_over_popularity=quantile(sorted(over_pop), 0.5),
        pct_dominated=sum(1 for v in values if v > 1.0) / len(values),
        min_popularity=min_popularity,
    )


def window_ratios(
    events: Iterable[EventRecord],
    window_length: float,
    min_window_popularity: int = 20,
) -> list[float]:
    """Revisits/audience of every (object, window) cell above the threshold.

    Windows are anchored at each object's first event and a user counts as
    audience only in the window of their first event on that object.
    """
    if not window_length > 0:
        raise DataError("window_length must be positive")
    ratios: list[float] = []
    for rows in _by_object(events).values():
        rows.sort()
        t0 = rows[0][0]
        pop: dict[int, int] = defaultdict(int)
        aud: dict[int, int] = defaultdict(int)
        seen: set[str] = set()
        for ts, _, user in rows:
            w = int((ts - t0) // window_length)
            pop[w] += 1
            if user not in seen:
                seen.add(user)
                aud[w] += 1
        for w, count in pop.items():
            if count > min_window_popularity:
                ratios.append(_ratio(count - aud[w], aud[w]))
    return ratios


def windowed_quartiles(
    events: Iterable[EventRecord],
    window_length: float,
    min_window_popularity: int = 20,
) -> WindowedQuartiles:
    ratios = sorted(window_ratios(events, window_length, min_window_popularity))
    if not ratios:
        raise DataError(f"no window has popularity above {min_window_popularity}")
    return WindowedQuartiles(
        window_length=float(window_length),
        q25=quantile(ratios, 0.25),
        median=quantile(ratios, 0.5),
        q75=quantile(ratios, 0.75),
        windows_counted=len(ratios),
    )
