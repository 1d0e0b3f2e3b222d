"""Use-case support per topology class and life-cycle phase coverage."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from ..errors import CapabilityError
from ..faultmodel.lifecycle import LifecyclePhase
from ..topology import ProviderNetwork, TopologyClass

USE_CASES = ("L01", "L02", "L03", "P01", "P02", "M01", "M02", "M03", "R01", "R02", "R03", "F01", "F02")
COVERAGE_ROWS = USE_CASES + ("FM-01", "FM-02")

_ALL = frozenset(USE_CASES)
SUPPORTED: dict[TopologyClass, frozenset[str]] = {
    TopologyClass.HIERARCHY: _ALL - {"L02", "M02", "F01", "F02"},
    TopologyClass.HETERARCHY: _ALL - {"L03"},
    TopologyClass.MIXED: _ALL,
}

_D, _I, _R, _F = (LifecyclePhase.DETECTION, LifecyclePhase.ISOLATION, LifecyclePhase.REPAIR,
                  LifecyclePhase.FORECAST_PREVENTION)
# phases each use case (and the two FM requirements) is expected to touch
PHASE_COVERAGE: dict[str, frozenset[LifecyclePhase]] = {
    "L01": frozenset({_D, _I}),
    "L02": frozenset({_D, _F}),
    "L03": frozenset({_D, _I}),
    "P01": frozenset({_R}),
    "P02": frozenset({_R}),
    "M01": frozenset({_D, _I, _R, _F}),
    "M02": frozenset({_D, _I, _R, _F}),
    "M03": frozenset({_D, _I, _R, _F}),
    "R01": frozenset({_D, _F}),
    "R02": frozenset({_D, _F}),
    "R03": frozenset({_F}),
    "F01": frozenset({_I, _F}),
    "F02": frozenset({_R, _F}),
    "FM-01": frozenset({_D, _I, _F}),
    "FM-02": frozenset({_I, _R, _F}),
}


@dataclass(frozen=True)
class CapabilityMatrix:
    topology_class: TopologyClass
    supported: dict

    def __getitem__(self, use_case: str) -> bool:
        return self.supported[use_case]

    def to_dict(self) -> dict:
        return {"topologyClass": self.topology_class.value, "supported": dict(self.supported)}


def matrix_for(topology_class: TopologyClass) -> CapabilityMatrix:
    allowed = SUPPORTED[TopologyClass(topology_class)]
    return CapabilityMatrix(TopologyClass(topology_class), {uc: uc in allowed for uc in USE_CASES})


def capability_matrix(net: ProviderNetwork) -> CapabilityMatrix:
    return matrix_for(net.topology_class)


def require(net: ProviderNetwork, use_case: str) -> None:
    if use_case not in SUPPORTED[net.topology_class]:
        raise CapabilityError(f"{use_case} is not available in a {net.topology_class.value} topology")


def observed_coverage(audit_events: Iterable[dict]) -> dict[str, frozenset[LifecyclePhase]]:
    """(use case, phase) cells tagged in an audit log, one entry per coverage row."""
    seen: dict[str, set] = {row: set() for row in COVERAGE_ROWS}
    for ev in audit_events:
        if ev.get("type") == "coverage":
            seen.setdefault(ev["useCase"], set()).add(LifecyclePhase(ev["phase"]))
    return {row: frozenset(phases) for row, phases in seen.items()}


def coverage_table(coverage: dict) -> list[dict]:
    """Rows of observed versus expected phases, for display."""
    rows = []
    for row in COVERAGE_ROWS:
        got = coverage.get(row, frozenset())
        want = PHASE_COVERAGE[row]
        rows.append({"useCase": row, **{p.value: p in got for p in LifecyclePhase},
                     "matches": frozenset(got) == want})
    return rows
