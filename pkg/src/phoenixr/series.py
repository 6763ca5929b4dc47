"""Popularity series, activity records, and windowed audience/revisit counts."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from phoenixr.errors import DataError

SERIES_FORMATS = ("csv_indexed", "plain_lines")
EVENT_HEADER = ("timestamp", "user_id", "object_id")


@dataclass(frozen=True)
class PopularitySeries:
    """Non-negative counts over uniform time windows.

    ``values`` is stored as a read-only float array. ``start_time`` is the
    epoch second of window 0, or None for data that arrived pre-windowed.
    """

    values: np.ndarray
    window_length: float = 86400.0
    start_time: float | None = None

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float).reshape(-1)
        if arr.size < 1:
            raise DataError("a series needs at least one window")
        if not np.all(np.isfinite(arr)):
            raise DataError("series values must be finite")
        if np.any(arr < 0):
            idx = int(np.flatnonzero(arr < 0)[0])
            raise DataError(f"negative value {arr[idx]!r} at window {idx}")
        if not (self.window_length > 0):
            raise DataError("window_length must be positive")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    def head(self, k: int) -> "PopularitySeries":
        return PopularitySeries(self.values[:k], self.window_length, self.start_time)

    def to_json(self) -> dict:
        return {
            "window_length": self.window_length,
            "start_time": self.start_time,
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PopularitySeries":
        try:
            return cls(obj["values"], float(obj["window_length"]), obj.get("start_time"))
        except KeyError as exc:
            raise DataError(f"series JSON missing field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class EventRecord:
    timestamp: float
    user_id: str
    object_id: str

    def __post_init__(self) -> None:
        if not (math.isfinite(self.timestamp) and self.timestamp >= 0):
            raise DataError(f"invalid timestamp {self.timestamp!r}")


@dataclass(frozen=True)
class ActivitySplit:
    """Popularity of one object (or one object-window) split by first visits."""

    popularity: int
    audience: int
    revisits: int

    def __post_init__(self) -> None:
        if min(self.popularity, self.audience, self.revisits) < 0:
            raise DataError("activity counts must be non-negative")
        if self.popularity != self.audience + self.revisits:
            raise DataError("popularity must equal audience + revisits")


def _parse_value(text: str, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"line {lineno}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"line {lineno}: non-finite value {text!r}")
    if value < 0:
        raise DataError(f"line {lineno}: negative value {value!r}")
    return value


def _sniff_format(lines: Sequence[str]) -> str:
    for line in lines:
        if line.strip():
            return "csv_indexed" if "," in line else "plain_lines"
    return "plain_lines"


def load_series(
    path: str | Path,
    format: str | None = None,
    window_length: float = 86400.0,
) -> PopularitySeries:
    """Read a popularity series from disk.

    ``plain_lines`` holds one value per line. ``csv_indexed`` holds
    ``window,value`` rows (header optional, extra columns ignored); rows are
    ordered by window and missing windows are filled with zero. With
    ``format=None`` the layout is guessed from the first non-blank line.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    fmt = format or _sniff_format(lines)
    if fmt not in SERIES_FORMATS:
        raise DataError(f"unknown series format {fmt!r}")

    if fmt == "plain_lines":
        values = [
            _parse_value(line.strip(), i)
            for i, line in enumerate(lines, start=1)
            if line.strip()
        ]
    else:
        cells: dict[int, float] = {}
        for i, row in enumerate(csv.reader(lines), start=1):
            if not row or not "".join(row).strip():
                continue
            if i == 1 and row[0].strip().lower() == "window":
                continue
            if len(row) < 2:
                raise DataError(f"line {i}: expected 'window,value'")
            try:
                window = int(row[0])
            except ValueError:
                raise DataError(f"line {i}: bad window index {row[0]!r}") from None
            if window < 0:
                raise DataError(f"line {i}: negative window index {window}")
            if window in cells:
                raise DataError(f"line {i}: duplicate window index {window}")
            cells[window] = _parse_value(row[1].strip(), i)
        values = []
        if cells:
            values = [0.0] * (max(cells) + 1)
            for window, value in cells.items():
                values[window] = value

    if not values:
        raise DataError(f"{path}: no values found")
    return PopularitySeries(np.asarray(values), window_length)


def save_series(path: str | Path, series: PopularitySeries, **extra: np.ndarray) -> None:
    """Write ``window,popularity[,<extra>...]`` CSV rows."""
    names = ["window", "popularity", *extra]
    columns = [series.values, *(np.asarray(v, dtype=float) for v in extra.values())]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for t in range(series.n):
            writer.writerow([t, *(repr(float(col[t])) for col in columns)])


def iter_events(path: str | Path) -> Iterator[EventRecord]:
    """Stream event records from a ``timestamp,user_id,object_id`` CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != EVENT_HEADER:
            raise DataError(f"line 1: header must be {','.join(EVENT_HEADER)}")
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"line {lineno}: expected 3 columns, got {len(row)}")
            try:
                ts = float(int(row[0]))
            except ValueError:
                raise DataError(f"line {lineno}: bad timestamp {row[0]!r}") from None
            if ts < 0:
                raise DataError(f"line {lineno}: negative timestamp")
            yield EventRecord(ts, row[1], row[2])


def load_events(path: str | Path) -> list[EventRecord]:
    return list(iter_events(path))


def window_events(
    events: Iterable[EventRecord],
    object_id: str,
    window_length: float,
) -> tuple[PopularitySeries, PopularitySeries, PopularitySeries]:
    """Popularity, audience and revisit series for one object.

    Windows are anchored at the object's first event. An event counts as
    audience when it is the user's first event on the object in the whole
    log; ties on timestamp keep input order.
    """
    if not (window_length > 0):
        raise DataError("window_length must be positive")
    own = [(e.timestamp, i, e.user_id) for i, e in enumerate(events) if e.object_id == object_id]
    if not own:
        raise DataError(f"no events for object {object_id!r}")
    own.sort()

    t0 = own[0][0]
    n = int((own[-1][0] - t0) // window_length) + 1
    pop = np.zeros(n)
    aud = np.zeros(n)
    seen: set[str] = set()
    for ts, _, user in own:
        w = int((ts - t0) // window_length)
        pop[w] += 1
        if user not in seen:
            seen.add(user)
            aud[w] += 1
    rev = pop - aud
    return (
        PopularitySeries(pop, window_length, t0),
        PopularitySeries(aud, window_length, t0),
        PopularitySeries(rev, window_length, t0),
    )


def dump_json(obj: object, path: str | Path | None = None) -> str:
    """Deterministic JSON text (sorted keys, fixed indent)."""
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
