"""Report computations: per-domain statistics, SLA conformance and fault trends.

These are pure functions over records, trace events and measurements so the
same code serves the in-simulation report use cases and offline reporting
from a result directory.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

from ..errors import DomainError
from ..faultmodel.lifecycle import LifecycleState
from ..faultmodel.metrics import MetricVector, aggregate_chain
from ..topology import ProviderNetwork

STATISTICS_COLUMNS = ("domain", "faultsDetected", "faultsIsolated", "mtti", "mttr",
                      "messagesSent", "messagesReceived")
TREND_COLUMNS = ("domain", "points", "slope", "intercept", "threshold", "breachTick")
QOS_COLUMNS = ("service", "metric", "limit", "measured", "violated")


def check_window(window) -> tuple[int, int]:
    start, end = (int(window[0]), int(window[1]))
    if end < start:
        raise DomainError(f"empty report window [{start}, {end}]")
    return start, end


def _mean(values):
    return statistics.fmean(values) if values else None


def domain_statistics(domain: str, records, trace_events, window) -> dict:
    """Statistics row of one domain over the inclusive tick window."""
    start, end = check_window(window)
    inside = lambda t: t is not None and start <= t <= end  # noqa: E731
    detected = [r for r in records if r.origin_domain == domain and inside(r.created_at)]
    isolated, tti, ttr = [], [], []
    for r in records:
        iso = r.isolated_at
        t_iso = r.transition_tick(LifecycleState.ISOLATED)
        if not iso or iso[0] != domain or not inside(t_iso):
            continue
        isolated.append(r)
        tti.append(t_iso - r.created_at)
        t_res = r.transition_tick(LifecycleState.RESOLVED)
        if inside(t_res):
            ttr.append(t_res - t_iso)
    sent = received = 0
    for ev in trace_events:
        if not inside(ev.get("tick")):
            continue
        if ev["event"] == "send" and ev["envelope"]["sender"] == domain:
            sent += 1
        elif ev["event"] == "deliver" and ev["receiver"] == domain:
            received += 1
    return {"domain": domain, "faultsDetected": len(detected), "faultsIsolated": len(isolated),
            "mtti": _mean(tti), "mttr": _mean(ttr), "messagesSent": sent, "messagesReceived": received}


def statistics_report(domains, rows: dict, window, denied=()) -> dict:
    missing = [d for d in domains if d not in rows]
    return {
        "kind": "statistics",
        "window": list(check_window(window)),
        "rows": [rows[d] for d in domains if d in rows],
        "missing": missing,
        "denied": sorted(denied),
        "incomplete": bool(missing),
    }


# --- qos --------------------------------------------------------------------

@dataclass(frozen=True)
class SlaSpec:
    service: str
    max_owd: float | None = None
    max_ipdv: float | None = None
    max_loss: float | None = None
    min_availability: float | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "SlaSpec":
        return cls(d["service"], d.get("maxOwd"), d.get("maxIpdv"), d.get("maxLoss"), d.get("minAvailability"))

    def to_dict(self) -> dict:
        return {"service": self.service, "maxOwd": self.max_owd, "maxIpdv": self.max_ipdv,
                "maxLoss": self.max_loss, "minAvailability": self.min_availability}

    def check(self, measured: MetricVector) -> list[dict]:
        out = []
        for metric, limit, bad in (
            ("owd", self.max_owd, lambda v, lim: v > lim),
            ("ipdv", self.max_ipdv, lambda v, lim: v > lim),
            ("loss", self.max_loss, lambda v, lim: v > lim),
            ("availability", self.min_availability, lambda v, lim: v < lim),
        ):
            if limit is None:
                continue
            value = getattr(measured, metric)
            if bad(value, limit):
                out.append({"service": self.service, "metric": metric, "limit": limit, "measured": value})
        return out


def service_chain(net: ProviderNetwork, service: str) -> list[str]:
    """Part ids of ``service`` and everything it subcontracts, in delivery order."""
    chain = []
    for sid in net.service_closure(service):
        for pid in net.services[sid].parts:
            if pid in net.parts and pid not in chain:
                chain.append(pid)
    return chain


def _overlap(a0, a1, b0, b1) -> int:
    return max(0, min(a1, b1) - max(a0, b0))


def downtime(components, failures, window) -> int:
    """Ticks of the window during which any of ``components`` was failed."""
    start, end = check_window(window)
    stop = end + 1
    spans = sorted((max(f["start"], start), min(f["end"] if f["end"] is not None else stop, stop))
                   for f in failures if f["component"] in components)
    total, cur_s, cur_e = 0, None, None
    for s, e in spans:
        if e <= s:
            continue
        if cur_e is None or s > cur_e:
            if cur_e is not None:
                total += cur_e - cur_s
            cur_s, cur_e = s, e
        else:
            cur_e = max(cur_e, e)
    if cur_e is not None:
        total += cur_e - cur_s
    return total


def measured_part_metrics(part_id: str, baseline: MetricVector, components, failures, degradations,
                          window) -> MetricVector:
    """Baseline metrics of a part adjusted by its outages and degradations in the window."""
    start, end = check_window(window)
    length = end - start + 1
    up = 1.0 - downtime(set(components), failures, window) / length
    owd, ipdv, survive = baseline.owd, baseline.ipdv, 1.0 - baseline.loss
    for d in degradations:
        if d["part"] != part_id:
            continue
        d_end = d["end"] if d["end"] is not None else end + 1
        if _overlap(d["start"], d_end, start, end + 1) == 0:
            continue
        delta = d.get("delta", {})
        owd += delta.get("owd", 0.0)
        ipdv += delta.get("ipdv", 0.0)
        survive *= 1.0 - delta.get("loss", 0.0)
    return MetricVector(owd=max(0.0, owd), ipdv=max(0.0, ipdv), loss=min(1.0, max(0.0, 1.0 - survive)),
                        availability=min(1.0, max(0.0, baseline.availability * up)))


def qos_report(net: ProviderNetwork, slas, part_metrics: dict, window, denied=()) -> dict:
    """Aggregate each SLA'd service over its chain and list every SLA violation."""
    services, violations = [], []
    for sla in sorted(slas, key=lambda s: s.service):
        chain = service_chain(net, sla.service)
        missing = [p for p in chain if p not in part_metrics]
        row = {"service": sla.service, "parts": chain, "incomplete": bool(missing) or not chain, "measured": None}
        if chain and not missing:
            measured = aggregate_chain(part_metrics[p] for p in chain)
            row["measured"] = measured.to_dict()
            violations.extend(sla.check(measured))
        services.append(row)
    return {"kind": "qos", "window": list(check_window(window)), "services": services, "violations": violations,
            "denied": sorted(denied), "incomplete": any(r["incomplete"] for r in services)}


# --- trend ------------------------------------------------------------------

def bucket_counts(records, domain: str, window, bucket: int = 1) -> list[tuple[int, int]]:
    """(bucket start tick, number of faults raised in the domain) for each bucket of the window."""
    start, end = check_window(window)
    bucket = max(1, int(bucket))
    points = {x: 0 for x in range(start, end + 1, bucket)}
    for r in records:
        if r.origin_domain == domain and start <= r.created_at <= end:
            points[start + (r.created_at - start) // bucket * bucket] += 1
    return sorted(points.items())


def fit_trend(points, threshold: float, end: int, horizon: int) -> dict:
    """Least-squares line through ``points`` and the first tick it reaches ``threshold``.

    The breach is only reported if it falls within ``horizon`` ticks past the
    end of the window.
    """
    xs = [float(x) for x, _ in points]
    ys = [float(y) for _, y in points]
    if not xs:
        raise DomainError("no points to fit")
    if len(set(xs)) < 2:
        slope, intercept = 0.0, statistics.fmean(ys)
    else:
        slope, intercept = statistics.linear_regression(xs, ys)
    breach = None
    if slope > 0:
        tick = math.ceil((threshold - intercept) / slope - 1e-9)
        if tick <= end + horizon:
            breach = max(tick, int(xs[0]))
    elif intercept >= threshold:
        breach = int(xs[0])
    return {"slope": slope, "intercept": intercept, "threshold": threshold, "breachTick": breach}


def trend_report(domains, counts: dict, threshold: float, window, denied=()) -> dict:
    start, end = check_window(window)
    horizon = end - start + 1
    rows, missing = [], []
    for d in domains:
        if d not in counts:
            missing.append(d)
            continue
        pts = [tuple(p) for p in counts[d]]
        rows.append({"domain": d, "points": [list(p) for p in pts], **fit_trend(pts, threshold, end, horizon)})
    return {"kind": "trend", "window": [start, end], "rows": rows, "missing": missing,
            "denied": sorted(denied), "incomplete": bool(missing)}
