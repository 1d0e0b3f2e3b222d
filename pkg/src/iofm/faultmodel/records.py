"""The canonical inter-domain fault record.

Records are immutable values; every change produces a new record with one
more history entry and a refreshed integrity tag. The history alone is enough
to rebuild a record from scratch, see :func:`replay_history`.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

from .. import canonical
from ..errors import IntegrityError, OrderingError, PatchValidationError, AccessDenied, StateMachineViolation
from ..orgmodel import RoleBinding, RoleKind, may_transition
from .lifecycle import LifecyclePhase, LifecycleState, is_legal, phase_of

RECORD_FIELDS = (
    "faultId", "originDomain", "reporterRole", "suspectedService", "symptoms", "state",
    "isFalsePositive", "createdAt", "updatedAt", "history", "integrityTag",
)
MUTABLE_FIELDS = frozenset({"suspectedService", "symptoms"})


class FalsePositiveStatus(str, enum.Enum):
    UNKNOWN = "unknown"
    CONFIRMED_FALSE = "confirmed-false"
    CONFIRMED_REAL = "confirmed-real"


@dataclass(frozen=True)
class Symptom:
    """An observed deviation on a component or a service."""

    kind: str
    reported_by: str
    reported_at: int
    component: str | None = None
    service: str | None = None
    alarm: str | None = None
    metrics: tuple[tuple[str, float], ...] = ()

    @property
    def signature(self) -> tuple[str, str]:
        return (self.component or self.service or "", self.kind)

    def to_dict(self) -> dict:
        return {
            "alarm": self.alarm,
            "component": self.component,
            "kind": self.kind,
            "metrics": dict(self.metrics),
            "reportedAt": self.reported_at,
            "reportedBy": self.reported_by,
            "service": self.service,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Symptom":
        return cls(
            kind=d["kind"], reported_by=d["reportedBy"], reported_at=int(d["reportedAt"]),
            component=d.get("component"), service=d.get("service"), alarm=d.get("alarm"),
            metrics=tuple(sorted((k, float(v)) for k, v in (d.get("metrics") or {}).items())),
        )


def _sort_symptoms(symptoms) -> tuple[Symptom, ...]:
    unique = {canonical.dumps(s.to_dict()): s for s in symptoms}
    return tuple(unique[k] for k in sorted(unique))


@dataclass(frozen=True)
class HistoryEntry:
    """One append-only change to a record: a transition or an in-state annotation."""

    tick: int
    kind: str  # create | transition | attach | flag | patch | import
    from_state: LifecycleState | None
    to_state: LifecycleState
    actor: RoleBinding
    detail: dict = field(default_factory=dict, hash=False)

    def to_dict(self) -> dict:
        return {
            "actor": self.actor.to_dict(),
            "detail": canonical.normalize(self.detail),
            "from": self.from_state.value if self.from_state else None,
            "kind": self.kind,
            "tick": self.tick,
            "to": self.to_state.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HistoryEntry":
        return cls(
            tick=int(d["tick"]), kind=d["kind"],
            from_state=LifecycleState(d["from"]) if d.get("from") else None,
            to_state=LifecycleState(d["to"]), actor=RoleBinding.from_dict(d["actor"]),
            detail=d.get("detail") or {},
        )


# Kept for readers who look for the name used in the data model.
TransitionEvent = HistoryEntry


@dataclass(frozen=True)
class FaultRecord:
    fault_id: str
    origin_domain: str
    reporter_role: RoleKind
    suspected_service: str | None
    symptoms: tuple[Symptom, ...]
    state: LifecycleState
    is_false_positive: FalsePositiveStatus
    created_at: int
    updated_at: int
    history: tuple[HistoryEntry, ...]
    integrity_tag: str = ""
    provenance: str | None = field(default=None, compare=False)

    @property
    def phase(self) -> LifecyclePhase:
        return phase_of(self.state)

    @property
    def isolated_at(self) -> tuple[str, str] | None:
        """(domain, component) named by the latest isolation, if any."""
        for entry in reversed(self.history):
            if entry.kind == "transition" and entry.to_state is LifecycleState.ISOLATED:
                return entry.detail["domain"], entry.detail["component"]
        return None

    def state_at(self, tick: int) -> LifecycleState | None:
        state = None
        for entry in self.history:
            if entry.tick > tick:
                break
            state = entry.to_state
        return state

    def transition_tick(self, to_state: LifecycleState) -> int | None:
        for entry in self.history:
            if entry.kind == "transition" and entry.to_state is to_state:
                return entry.tick
        return None

    def body(self) -> dict:
        """Canonical field-ordered mapping without the integrity tag."""
        return {
            "faultId": self.fault_id,
            "originDomain": self.origin_domain,
            "reporterRole": self.reporter_role.value,
            "suspectedService": self.suspected_service,
            "symptoms": [s.to_dict() for s in self.symptoms],
            "state": self.state.value,
            "isFalsePositive": self.is_false_positive.value,
            "createdAt": self.created_at,
            "updatedAt": self.updated_at,
            "history": [h.to_dict() for h in self.history],
        }

    def to_dict(self) -> dict:
        d = self.body()
        d["integrityTag"] = self.integrity_tag
        return d

    def to_json(self) -> str:
        return canonical.dumps_ordered(self.to_dict())

    def compute_tag(self) -> str:
        return canonical.checksum(canonical.dumps_ordered(self.body()))

    def sealed(self) -> "FaultRecord":
        return replace(self, integrity_tag=self.compute_tag())

    def verify(self) -> "FaultRecord":
        if self.compute_tag() != self.integrity_tag:
            raise IntegrityError(f"integrity tag mismatch on fault {self.fault_id}")
        return self

    @classmethod
    def from_dict(cls, d: dict, verify: bool = True) -> "FaultRecord":
        missing = [f for f in RECORD_FIELDS if f not in d]
        if missing:
            raise PatchValidationError(f"record lacks fields {missing}")
        rec = cls(
            fault_id=d["faultId"], origin_domain=d["originDomain"], reporter_role=RoleKind(d["reporterRole"]),
            suspected_service=d["suspectedService"],
            symptoms=_sort_symptoms(Symptom.from_dict(s) for s in d["symptoms"]),
            state=LifecycleState(d["state"]), is_false_positive=FalsePositiveStatus(d["isFalsePositive"]),
            created_at=int(d["createdAt"]), updated_at=int(d["updatedAt"]),
            history=tuple(HistoryEntry.from_dict(h) for h in d["history"]),
            integrity_tag=d["integrityTag"],
        )
        return rec.verify() if verify else rec

    @classmethod
    def from_json(cls, text: str) -> "FaultRecord":
        return cls.from_dict(json.loads(text))


def new_record(fault_id: str, origin_domain: str, reporter_role: RoleKind, symptoms,
               suspected_service: str | None, tick: int, actor: RoleBinding) -> FaultRecord:
    symptoms = _sort_symptoms(symptoms)
    entry = HistoryEntry(tick, "create", None, LifecycleState.DETECTED, actor, {
        "originDomain": origin_domain,
        "reporterRole": RoleKind(reporter_role).value,
        "suspectedService": suspected_service,
        "symptoms": [s.to_dict() for s in symptoms],
    })
    return FaultRecord(
        fault_id=fault_id, origin_domain=origin_domain, reporter_role=RoleKind(reporter_role),
        suspected_service=suspected_service, symptoms=symptoms, state=LifecycleState.DETECTED,
        is_false_positive=FalsePositiveStatus.UNKNOWN, created_at=tick, updated_at=tick, history=(entry,),
    ).sealed()


def _check_tick(record: FaultRecord, tick: int):
    if tick < record.updated_at:
        raise OrderingError(f"tick {tick} precedes last update {record.updated_at} of {record.fault_id}")


def transition(record: FaultRecord, to: LifecycleState, actor: RoleBinding, tick: int,
               detail: dict | None = None) -> FaultRecord:
    """Move ``record`` to state ``to``; the input record is left untouched."""
    to = LifecycleState(to)
    if not is_legal(record.state, to):
        raise StateMachineViolation(record.state.value, to.value)
    if not may_transition(actor, record.state, to):
        raise AccessDenied(f"{actor.role.value}@{actor.domain} may not move {record.fault_id} "
                           f"from {record.state.value} to {to.value}")
    _check_tick(record, tick)
    detail = dict(detail or {})
    if to is LifecycleState.ISOLATED and not {"domain", "component"} <= set(detail):
        raise PatchValidationError("an isolation must name its domain and component")
    entry = HistoryEntry(tick, "transition", record.state, to, actor, detail)
    return replace(record, state=to, updated_at=tick, history=record.history + (entry,)).sealed()


def attach_symptoms(record: FaultRecord, symptoms, actor: RoleBinding, tick: int) -> FaultRecord:
    _check_tick(record, tick)
    merged = _sort_symptoms(record.symptoms + tuple(symptoms))
    entry = HistoryEntry(tick, "attach", record.state, record.state, actor,
                         {"symptoms": [s.to_dict() for s in symptoms]})
    return replace(record, symptoms=merged, updated_at=tick, history=record.history + (entry,)).sealed()


def set_false_positive(record: FaultRecord, status: FalsePositiveStatus, actor: RoleBinding,
                       tick: int) -> FaultRecord:
    _check_tick(record, tick)
    status = FalsePositiveStatus(status)
    entry = HistoryEntry(tick, "flag", record.state, record.state, actor, {"isFalsePositive": status.value})
    return replace(record, is_false_positive=status, updated_at=tick, history=record.history + (entry,)).sealed()


def apply_patch(record: FaultRecord, patch: dict, actor: RoleBinding, tick: int) -> FaultRecord:
    """Change the mutable fields named in ``patch``; history and state are off limits."""
    bad = sorted(set(patch) - MUTABLE_FIELDS)
    if bad:
        raise PatchValidationError(f"fields {bad} of fault {record.fault_id} are immutable")
    if not patch:
        raise PatchValidationError("empty patch")
    _check_tick(record, tick)
    changes = {}
    detail = {}
    if "suspectedService" in patch:
        changes["suspected_service"] = patch["suspectedService"]
        detail["suspectedService"] = patch["suspectedService"]
    if "symptoms" in patch:
        syms = _sort_symptoms(s if isinstance(s, Symptom) else Symptom.from_dict(s) for s in patch["symptoms"])
        changes["symptoms"] = syms
        detail["symptoms"] = [s.to_dict() for s in syms]
    entry = HistoryEntry(tick, "patch", record.state, record.state, actor, {"set": detail})
    return replace(record, updated_at=tick, history=record.history + (entry,), **changes).sealed()


def replay_history(fault_id: str, history) -> FaultRecord:
    """Rebuild a record by re-applying its history through the record operations."""
    entries = [h if isinstance(h, HistoryEntry) else HistoryEntry.from_dict(h) for h in history]
    if not entries or entries[0].kind != "create":
        raise IntegrityError(f"history of {fault_id} does not start with a create entry")
    first = entries[0]
    d = first.detail
    rec = new_record(fault_id, d["originDomain"], RoleKind(d["reporterRole"]),
                     [Symptom.from_dict(s) for s in d["symptoms"]], d["suspectedService"], first.tick, first.actor)
    for e in entries[1:]:
        rec = apply_entry(rec, e)
    return rec


def apply_entry(rec: FaultRecord, e: HistoryEntry) -> FaultRecord:
    if e.kind == "transition":
        return transition(rec, e.to_state, e.actor, e.tick, e.detail)
    if e.kind == "attach":
        return attach_symptoms(rec, [Symptom.from_dict(s) for s in e.detail["symptoms"]], e.actor, e.tick)
    if e.kind == "flag":
        return set_false_positive(rec, FalsePositiveStatus(e.detail["isFalsePositive"]), e.actor, e.tick)
    if e.kind == "patch":
        return apply_patch(rec, e.detail["set"], e.actor, e.tick)
    if e.kind == "import":
        _check_tick(rec, e.tick)
        return replace(rec, state=e.to_state, updated_at=e.tick, history=rec.history + (e,)).sealed()
    raise IntegrityError(f"unknown history entry kind {e.kind!r}")
