"""IPPM-style service metrics and their composition along a chain of service parts."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from ..errors import DomainError, RangeError

METRIC_FIELDS = ("owd", "ipdv", "loss", "availability")


@dataclass(frozen=True)
class MetricVector:
    """Delay metrics in milliseconds, loss and availability as ratios."""

    owd: float = 0.0
    ipdv: float = 0.0
    loss: float = 0.0
    availability: float = 1.0

    def __post_init__(self):
        problems = check_metric_ranges(asdict(self))
        if problems:
            raise RangeError("metric out of range: " + ", ".join(problems), problems)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MetricVector":
        unknown = set(data) - set(METRIC_FIELDS)
        if unknown:
            raise RangeError(f"unknown metric fields {sorted(unknown)}", sorted(unknown))
        return cls(**{k: float(v) for k, v in data.items()})


def check_metric_ranges(values: dict) -> list[str]:
    """Names of the metrics in ``values`` that violate their canonical range."""
    bad = []
    for name, value in values.items():
        if value is None:
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)) or math.isnan(value):
            bad.append(name)
        elif name in ("loss", "availability") and not 0.0 <= value <= 1.0:
            bad.append(name)
        elif name in ("owd", "ipdv") and value < 0.0:
            bad.append(name)
    return bad


def aggregate_chain(parts) -> MetricVector:
    """Compose the metrics of concatenated service parts into end-to-end metrics.

    Delays and delay variation add up; a packet survives the chain only if it
    survives every part, and the chain is available only when every part is.
    Summing ipdv is an upper-bound approximation, not an exact composition.
    """
    parts = list(parts)
    if not parts:
        raise DomainError("aggregate_chain needs at least one metric vector")
    survive = 1.0
    up = 1.0
    for p in parts:
        survive *= 1.0 - p.loss
        up *= p.availability
    return MetricVector(
        owd=math.fsum(p.owd for p in parts),
        ipdv=math.fsum(p.ipdv for p in parts),
        loss=min(1.0, max(0.0, 1.0 - survive)),
        availability=min(1.0, max(0.0, up)),
    )
