"""Conversion between domain-local fault documents and the canonical record.

A local format is described by a field map (local name -> canonical path),
a unit map (local name -> factor to canonical units) and optional value maps
for enumerated fields. Canonical paths are either top-level record fields or
``symptom.<attr>`` / ``symptom.metrics.<metric>`` for formats that carry a
single flattened symptom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from ..errors import ConversionError, RangeError
from ..orgmodel import RoleBinding, RoleKind
from .lifecycle import LifecycleState
from .metrics import METRIC_FIELDS, check_metric_ranges
from .records import (
    RECORD_FIELDS, FalsePositiveStatus, FaultRecord, HistoryEntry, Symptom, _sort_symptoms,
)

CANONICAL_DECIMALS = 9
SYMPTOM_ATTRS = {"kind": "kind", "component": "component", "service": "service",
                 "reportedBy": "reported_by", "reportedAt": "reported_at", "alarm": "alarm"}


def _valid_path(path: str) -> bool:
    if path in RECORD_FIELDS:
        return True
    parts = path.split(".")
    if parts[0] != "symptom":
        return False
    if len(parts) == 2:
        return parts[1] in SYMPTOM_ATTRS
    return len(parts) == 3 and parts[1] == "metrics" and parts[2] in METRIC_FIELDS


@dataclass(frozen=True)
class LocalDocument:
    data: dict
    dropped: tuple[str, ...] = ()


@dataclass(frozen=True)
class DomainFormatAdapter:
    format_id: str
    field_map: dict[str, str]
    unit_map: dict[str, float] = field(default_factory=dict)
    value_map: dict[str, dict[str, str]] = field(default_factory=dict)
    lossy_fields: tuple[str, ...] = ()

    def __post_init__(self):
        bad = sorted(p for p in self.field_map.values() if not _valid_path(p))
        if bad:
            raise ConversionError(f"format {self.format_id}: unknown canonical paths {bad}", bad)
        targets = list(self.field_map.values())
        if len(set(targets)) != len(targets):
            raise ConversionError(f"format {self.format_id}: field map is not a bijection")
        for local, factor in self.unit_map.items():
            if local not in self.field_map or not factor or not math.isfinite(factor):
                raise ConversionError(f"format {self.format_id}: bad unit factor for {local!r}", [local])
        for path, mapping in self.value_map.items():
            if len(set(mapping.values())) != len(mapping):
                raise ConversionError(f"format {self.format_id}: value map of {path} is not a bijection")
        uncovered = [f for f in RECORD_FIELDS if f not in targets and f not in self.lossy_fields
                     and not (f == "symptoms" and self._flattened)]
        if uncovered:
            raise ConversionError(f"format {self.format_id}: fields {uncovered} neither mapped nor declared lossy",
                                  uncovered)

    @property
    def _flattened(self) -> bool:
        return any(p.startswith("symptom.") for p in self.field_map.values())

    @classmethod
    def identity(cls, format_id: str = "canonical") -> "DomainFormatAdapter":
        return cls(format_id, {f: f for f in RECORD_FIELDS})

    @classmethod
    def from_dict(cls, d: dict) -> "DomainFormatAdapter":
        return cls(d["id"], dict(d["fieldMap"]), {k: float(v) for k, v in d.get("unitMap", {}).items()},
                   {k: dict(v) for k, v in d.get("valueMap", {}).items()}, tuple(d.get("lossyFields", ())))

    def to_dict(self) -> dict:
        return {"id": self.format_id, "fieldMap": dict(self.field_map), "unitMap": dict(self.unit_map),
                "valueMap": {k: dict(v) for k, v in self.value_map.items()}, "lossyFields": list(self.lossy_fields)}


def _to_canonical_units(adapter, local_name, value):
    factor = adapter.unit_map.get(local_name)
    if factor is None or value is None:
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConversionError(f"field {local_name!r} needs a number for unit conversion", [local_name])
    return round(value * factor, CANONICAL_DECIMALS)


def _to_local_units(adapter, local_name, value):
    factor = adapter.unit_map.get(local_name)
    if factor is None or value is None:
        return value
    return value / factor


def convert_inbound(adapter: DomainFormatAdapter, local_record: dict) -> FaultRecord:
    """Canonical record of a local document, in canonical units."""
    missing = sorted(k for k in adapter.field_map if k not in local_record)
    if missing:
        raise ConversionError(f"format {adapter.format_id}: missing fields {missing}", missing)
    top: dict = {}
    sym: dict = {}
    metrics: dict = {}
    for local_name, path in adapter.field_map.items():
        value = _to_canonical_units(adapter, local_name, local_record[local_name])
        inverse = {v: k for k, v in adapter.value_map.get(path, {}).items()}
        if inverse:
            if value not in inverse:
                raise ConversionError(f"field {local_name!r}: unmapped value {value!r}", [local_name])
            value = inverse[value]
        if path.startswith("symptom.metrics."):
            metrics[path.rsplit(".", 1)[1]] = value
        elif path.startswith("symptom."):
            sym[path.split(".", 1)[1]] = value
        else:
            top[path] = value

    bad = check_metric_ranges(metrics)
    for s in top.get("symptoms") or ():
        bad += check_metric_ranges((s.get("metrics") or {}))
    for tick_field in ("createdAt", "updatedAt"):
        if tick_field in top and (not isinstance(top[tick_field], int) or top[tick_field] < 0):
            bad.append(tick_field)
    if bad:
        raise RangeError(f"format {adapter.format_id}: values out of range after conversion: {sorted(set(bad))}",
                         sorted(set(bad)))

    origin = top.get("originDomain", "")
    created = top.get("createdAt", 0)
    if "symptoms" in top:
        symptoms = [Symptom.from_dict(s) for s in top["symptoms"]]
    elif sym or metrics:
        symptoms = [Symptom(
            kind=sym.get("kind", "unspecified"), reported_by=sym.get("reportedBy", origin),
            reported_at=int(sym.get("reportedAt", created)), component=sym.get("component"),
            service=sym.get("service"), alarm=sym.get("alarm"),
            metrics=tuple(sorted((k, float(v)) for k, v in metrics.items())),
        )]
    else:
        symptoms = []

    if "history" in top:
        merged = {**_defaults(top), **top, "symptoms": [s.to_dict() for s in symptoms]}
        rec = FaultRecord.from_dict(merged, verify="integrityTag" in top)
        if "integrityTag" not in top:
            rec = rec.sealed()
        return replace(rec, provenance=adapter.format_id)

    # history not representable: synthesize a minimal one consistent with the state
    d = _defaults(top)
    state = LifecycleState(top.get("state", d["state"]))
    reporter = RoleKind(top.get("reporterRole", d["reporterRole"]))
    actor = RoleBinding(RoleKind.DFM, origin)
    history = [HistoryEntry(created, "create", None, LifecycleState.DETECTED, actor, {
        "originDomain": origin, "reporterRole": reporter.value,
        "suspectedService": top.get("suspectedService"),
        "symptoms": [s.to_dict() for s in _sort_symptoms(symptoms)],
    })]
    updated = top.get("updatedAt", created)
    if state is not LifecycleState.DETECTED:
        history.append(HistoryEntry(updated, "import", LifecycleState.DETECTED, state, actor,
                                    {"format": adapter.format_id}))
    rec = FaultRecord(
        fault_id=top.get("faultId", ""), origin_domain=origin, reporter_role=reporter,
        suspected_service=top.get("suspectedService"), symptoms=_sort_symptoms(symptoms), state=state,
        is_false_positive=FalsePositiveStatus(top.get("isFalsePositive", "unknown")),
        created_at=created, updated_at=history[-1].tick, history=tuple(history),
    ).sealed()
    return replace(rec, provenance=adapter.format_id)


def _defaults(top: dict) -> dict:
    return {"faultId": "", "originDomain": "", "reporterRole": RoleKind.DMS.value, "suspectedService": None,
            "state": LifecycleState.DETECTED.value, "isFalsePositive": FalsePositiveStatus.UNKNOWN.value,
            "createdAt": 0, "updatedAt": top.get("createdAt", 0), "integrityTag": ""}


def convert_outbound(adapter: DomainFormatAdapter, record: FaultRecord) -> LocalDocument:
    """Local document for ``record``; fields the format cannot carry are listed in ``dropped``."""
    full = record.to_dict()
    first = record.symptoms[0] if record.symptoms else None
    data: dict = {}
    for local_name, path in adapter.field_map.items():
        if path in RECORD_FIELDS:
            value = full[path]
        elif first is None:
            value = None
        elif path.startswith("symptom.metrics."):
            value = dict(first.metrics).get(path.rsplit(".", 1)[1])
        else:
            value = getattr(first, SYMPTOM_ATTRS[path.split(".", 1)[1]])
        mapping = adapter.value_map.get(path)
        if mapping:
            value = mapping.get(value, value)
        data[local_name] = _to_local_units(adapter, local_name, value)
    dropped = [f for f in RECORD_FIELDS if f in adapter.lossy_fields]
    if adapter._flattened and "symptoms" not in adapter.field_map.values() and len(record.symptoms) > 1:
        dropped.append(f"symptoms[1:{len(record.symptoms)}]")
    return LocalDocument(data, tuple(dropped))

