"""Fault life cycle: eight states refining the four phases of fault handling."""

from __future__ import annotations

import enum


class LifecycleState(str, enum.Enum):
    DETECTED = "Detected"
    LOCALIZING = "Localizing"
    ISOLATED = "Isolated"
    REPAIRING = "Repairing"
    RESOLVED = "Resolved"
    CLOSED = "Closed"
    FALSE_POSITIVE = "FalsePositive"
    ESCALATED = "Escalated"


class LifecyclePhase(str, enum.Enum):
    DETECTION = "Detection"
    ISOLATION = "Isolation"
    REPAIR = "Repair"
    FORECAST_PREVENTION = "ForecastPrevention"


S = LifecycleState

LEGAL_TRANSITIONS: dict[LifecycleState, frozenset[LifecycleState]] = {
    S.DETECTED: frozenset({S.LOCALIZING}),
    S.LOCALIZING: frozenset({S.ISOLATED, S.ESCALATED, S.FALSE_POSITIVE}),
    S.ESCALATED: frozenset({S.ISOLATED, S.CLOSED}),
    S.ISOLATED: frozenset({S.REPAIRING}),
    S.REPAIRING: frozenset({S.RESOLVED}),
    S.RESOLVED: frozenset({S.CLOSED}),
    S.FALSE_POSITIVE: frozenset({S.CLOSED}),
    S.CLOSED: frozenset(),
}

PHASE_OF: dict[LifecycleState, LifecyclePhase] = {
    S.DETECTED: LifecyclePhase.DETECTION,
    S.LOCALIZING: LifecyclePhase.ISOLATION,
    S.ISOLATED: LifecyclePhase.ISOLATION,
    S.ESCALATED: LifecyclePhase.ISOLATION,
    S.FALSE_POSITIVE: LifecyclePhase.ISOLATION,
    S.REPAIRING: LifecyclePhase.REPAIR,
    S.RESOLVED: LifecyclePhase.REPAIR,
    # closed records feed trend analysis
    S.CLOSED: LifecyclePhase.FORECAST_PREVENTION,
}


def phase_of(state: LifecycleState) -> LifecyclePhase:
    return PHASE_OF[LifecycleState(state)]


def is_legal(from_state: LifecycleState, to_state: LifecycleState) -> bool:
    return LifecycleState(to_state) in LEGAL_TRANSITIONS[LifecycleState(from_state)]
