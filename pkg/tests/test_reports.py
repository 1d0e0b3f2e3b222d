import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iofm.engine import reports
from iofm.errors import DomainError
from iofm.faultmodel.metrics import MetricVector

spans = st.lists(st.tuples(st.sampled_from(["x", "y", "z"]), st.integers(0, 40), st.integers(0, 15) | st.none()),
                 max_size=8)


def _downtime_oracle(components, failures, window):
    start, end = window
    down = 0
    for tick in range(start, end + 1):
        for f in failures:
            stop = f["end"] if f["end"] is not None else math.inf
            if f["component"] in components and f["start"] <= tick < stop:
                down += 1
                break
    return down


@settings(max_examples=300, deadline=None)
@given(spans, st.integers(0, 30), st.integers(0, 30))
def test_downtime_matches_tick_by_tick_count(raw, a, length):
    failures = [{"component": c, "start": s, "end": None if d is None else s + d} for c, s, d in raw]
    window = (a, a + length)
    assert reports.downtime({"x", "y"}, failures, window) == _downtime_oracle({"x", "y"}, failures, window)


@settings(max_examples=200, deadline=None)
@given(st.integers(-5, 5), st.integers(0, 20), st.integers(2, 10), st.integers(1, 60))
def test_fit_trend_on_exact_lines(m, b, n, threshold):
    points = [(x, m * x + b) for x in range(n)]
    fit = reports.fit_trend(points, threshold, n - 1, n)
    assert fit["slope"] == pytest.approx(m, abs=1e-9)
    assert fit["intercept"] == pytest.approx(b, abs=1e-9)
    if m > 0:
        first = math.ceil((threshold - b) / m)
        expected = max(first, 0) if first <= (n - 1) + n else None
        assert fit["breachTick"] == expected
    elif b >= threshold:
        assert fit["breachTick"] == 0
    else:
        assert fit["breachTick"] is None


def test_fit_trend_needs_points():
    with pytest.raises(DomainError):
        reports.fit_trend([], 1, 0, 1)


def test_part_metrics_under_outage_and_degradation():
    base = MetricVector(owd=2.0, ipdv=0.5, loss=0.01, availability=1.0)
    failures = [{"component": "c", "start": 5, "end": 10}]
    degr = [{"part": "p", "start": 0, "end": 3, "delta": {"owd": 4.0, "loss": 0.5}}]
    m = reports.measured_part_metrics("p", base, ["c"], failures, degr, (0, 49))
    assert m.availability == pytest.approx(0.9, abs=1e-12)
    assert m.owd == pytest.approx(6.0, abs=1e-9)
    assert m.loss == pytest.approx(1 - 0.99 * 0.5, abs=1e-12)
    quiet = reports.measured_part_metrics("p", base, ["c"], failures, degr, (20, 30))
    assert (quiet.owd, quiet.ipdv, quiet.availability) == (base.owd, base.ipdv, base.availability)
    assert quiet.loss == pytest.approx(base.loss, abs=1e-12)


def test_sla_check():
    sla = reports.SlaSpec("s", max_owd=10, max_loss=0.05, min_availability=0.99)
    good = MetricVector(owd=10, ipdv=9, loss=0.05, availability=0.99)
    assert sla.check(good) == []
    bad = MetricVector(owd=11, ipdv=0, loss=0.2, availability=0.5)
    assert [v["metric"] for v in sla.check(bad)] == ["owd", "loss", "availability"]


def test_bucket_counts_cover_the_window():
    class R:
        def __init__(self, t):
            self.origin_domain, self.created_at = "A", t
    recs = [R(t) for t in (0, 1, 1, 4, 9, 10)]
    assert reports.bucket_counts(recs, "A", (0, 9), 5) == [(0, 4), (5, 1)]
    assert reports.bucket_counts(recs, "B", (0, 2)) == [(0, 0), (1, 0), (2, 0)]
