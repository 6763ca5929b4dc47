from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phoenixr import DataError
from phoenixr.characterize import (
    ccdf_points,
    long_run_report,
    parse_window,
    quantile,
    window_ratios,
    windowed_quartiles,
)
from phoenixr.series import EventRecord


def programmed_log(objects=100, seed=0):
    """Each object gets a random audience size and a random number of repeat visits."""
    rng = random.Random(seed)
    events = []
    plan = {}
    for o in range(objects):
        users = rng.randint(1, 40)
        repeats = rng.randint(0, 80)
        plan[f"o{o}"] = (users, repeats)
        for u in range(users):
            events.append(EventRecord(rng.uniform(0, 1e6), f"u{u}", f"o{o}"))
        for _ in range(repeats):
            events.append(EventRecord(rng.uniform(0, 1e6), f"u{rng.randrange(users)}", f"o{o}"))
    rng.shuffle(events)
    return events, plan


def brute_median(values):
    v = sorted(values)
    m = len(v)
    return v[m // 2] if m % 2 else (v[m // 2 - 1] + v[m // 2]) / 2


def brute_window_ratios(events, window, threshold):
    # quadratic recount: a user's event is a first visit when no earlier
    # event by them on that object exists
    out = []
    for obj in sorted({e.object_id for e in events}):
        own = sorted((e.timestamp, i, e.user_id) for i, e in enumerate(events) if e.object_id == obj)
        t0 = own[0][0]
        cells = {}
        for t, i, u in own:
            w = int((t - t0) // window)
            first = not any(u2 == u and (t2, i2) < (t, i) for t2, i2, u2 in own)
            p, a = cells.get(w, (0, 0))
            cells[w] = (p + 1, a + first)
        for p, a in cells.values():
            if p > threshold:
                out.append((p - a) / a if a else math.inf)
    return out


def np_quantile_inf(values, q):
    # numpy gives nan next to +inf; stand in a huge finite value instead
    big = 1e300
    v = float(np.quantile([big if math.isinf(x) else x for x in values], q))
    return math.inf if v >= big * 1e-6 else v


# -------------------------------------------------------------- helpers

def test_parse_window():
    assert parse_window("1h") == 3600
    assert parse_window("2d") == 172800
    assert parse_window("1w") == 604800
    assert parse_window("1m") == 30 * 86400
    assert parse_window("90") == 90
    for bad in ("", "1y", "-1h", "0d"):
        with pytest.raises(DataError):
            parse_window(bad)


def test_quantile_matches_numpy():
    rng = np.random.default_rng(0)
    for m in (1, 2, 5, 17):
        v = sorted(rng.random(m))
        for q in (0.25, 0.5, 0.75):
            assert quantile(v, q) == pytest.approx(float(np.quantile(v, q)))


def test_quantile_with_infinity():
    assert quantile([1.0, math.inf], 0.5) == math.inf
    assert quantile([1.0, 2.0, math.inf], 0.5) == 2.0


def test_ccdf_points():
    assert ccdf_points([3, 1, 1, 2]) == ((1.0, 1.0), (2.0, 0.5), (3.0, 0.25))


# -------------------------------------------------------------- long_run_report

def test_single_visits_give_zero_ratios():
    events = [EventRecord(i + j, f"u{i}", f"o{j}") for i in range(10) for j in range(3)]
    rep = long_run_report(events, min_popularity=0)
    assert set(rep.per_object_ratio.values()) == {0.0}
    assert rep.pct_dominated == 0


def test_one_user_many_visits():
    events = [EventRecord(t, "u", "o") for t in range(26)]
    rep = long_run_report(events, min_popularity=0)
    assert rep.per_object_ratio["o"] == 25
    assert rep.median_revisits_over_popularity == pytest.approx(25 / 26)
    assert rep.pct_dominated == 1.0


def test_medians_match_recount():
    events, plan = programmed_log()
    rep = long_run_report(events, min_popularity=0)
    want = {o: r / u for o, (u, r) in plan.items()}
    assert rep.per_object_ratio == pytest.approx(want)
    assert rep.median_revisits_over_audience == pytest.approx(brute_median(want.values()))
    assert rep.median_revisits_over_popularity == pytest.approx(
        brute_median([r / (u + r) for u, r in plan.values()]))
    assert rep.pct_dominated == pytest.approx(sum(r > u for u, r in plan.values()) / len(plan))
    assert 0 <= rep.median_revisits_over_popularity <= 1


def test_popularity_threshold_is_strict_and_monotone():
    events, plan = programmed_log(seed=4)
    counts = [len(rep.per_object_ratio) for rep in
              (long_run_report(events, k) for k in (0, 20, 40, 60))]
    assert counts == sorted(counts, reverse=True)
    edge = sorted(u + r for u, r in plan.values())[50]
    rep = long_run_report(events, edge)
    assert all(plan[o][0] + plan[o][1] > edge for o in rep.per_object_ratio)


def test_no_qualifying_object():
    with pytest.raises(DataError):
        long_run_report([EventRecord(0, "u", "o")], 500)


def test_report_json_handles_infinity():
    # an object can't have zero audience in a real log; infinity only
    # shows up through the quantile helper, so check the encoder directly
    rep = long_run_report([EventRecord(t, "u", "o") for t in range(3)], 0)
    js = rep.to_json()
    assert js["objects"] == 1 and js["medians"]["revisits_over_audience"] == 2.0


# -------------------------------------------------------------- windowed_quartiles

def test_fresh_users_give_zero_quartiles():
    events = [EventRecord(w * 100 + i, f"u{w}-{i}", "o") for w in range(5) for i in range(21)]
    q = windowed_quartiles(events, 100)
    assert (q.q25, q.median, q.q75) == (0, 0, 0)
    assert q.windows_counted == 5


def test_single_window_quartiles():
    events = [EventRecord(i, f"u{i % 6}", "o") for i in range(30)]
    q = windowed_quartiles(events, 1000)
    assert (q.q25, q.median, q.q75) == (4.0, 4.0, 4.0)


def test_window_threshold_is_strict():
    events = [EventRecord(i, f"u{i}", "o") for i in range(20)]
    with pytest.raises(DataError):
        windowed_quartiles(events, 1000)


def test_quartiles_match_brute_force():
    rng = random.Random(8)
    events = [EventRecord(rng.uniform(0, 2 * 86400), f"u{rng.randrange(40)}", f"o{rng.randrange(4)}")
              for _ in range(4000)]
    for window in (3600, 86400):
        got = sorted(window_ratios(events, window, 20))
        want = sorted(brute_window_ratios(events, window, 20))
        assert got == pytest.approx(want)
        q = windowed_quartiles(events, window)
        for got_q, level in ((q.q25, 0.25), (q.median, 0.5), (q.q75, 0.75)):
            assert got_q == pytest.approx(np_quantile_inf(want, level))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 300), st.integers(0, 6), st.integers(0, 2)),
                min_size=1, max_size=80), st.randoms(use_true_random=False))
def test_event_order_does_not_matter(rows, rnd):
    # distinct timestamps per (user, object) keep first visits unambiguous
    events = [EventRecord(t + k * 1e-3, f"u{u}", f"o{o}") for k, (t, u, o) in enumerate(rows)]
    shuffled = list(events)
    rnd.shuffle(shuffled)
    assert long_run_report(events, 0).per_object_ratio == long_run_report(shuffled, 0).per_object_ratio
    assert sorted(window_ratios(events, 50, 0)) == sorted(window_ratios(shuffled, 50, 0))
