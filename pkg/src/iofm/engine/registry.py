"""The common fault database: one authoritative record per fault plus the audit log."""

from __future__ import annotations

import json
from collections import defaultdict

from .. import canonical
from ..errors import IntegrityError, InvalidReference
from ..faultmodel.records import FaultRecord


def dump_registry(records) -> str:
    """registry.json text for ``records`` (any iterable of FaultRecord)."""
    ordered = sorted(records, key=lambda r: r.fault_id)
    return json.dumps({"records": [r.to_dict() for r in ordered]}, indent=2, ensure_ascii=False) + "\n"


class FaultRegistry:
    """Single-writer store of fault records.

    Every mutation goes through :meth:`put`, which appends exactly one
    ``record`` audit event carrying the new history entry and the digest of
    the resulting record. Other audit events are appended with :meth:`note`.
    """

    def __init__(self):
        self.records: dict[str, FaultRecord] = {}
        self.index_by_domain: dict[str, set[str]] = defaultdict(set)
        self.index_by_service: dict[str, set[str]] = defaultdict(set)
        self.audit: list[dict] = []

    def __contains__(self, fault_id) -> bool:
        return fault_id in self.records

    def __len__(self):
        return len(self.records)

    def get(self, fault_id: str) -> FaultRecord:
        try:
            rec = self.records[fault_id]
        except KeyError:
            raise InvalidReference(f"unknown fault {fault_id!r}") from None
        return rec.verify()

    def all(self) -> list[FaultRecord]:
        return [self.records[k] for k in sorted(self.records)]

    def put(self, record: FaultRecord, tick: int, op: str | None = None, **extra) -> FaultRecord:
        old = self.records.get(record.fault_id)
        expected = (old.history if old else ())
        if record.history[:-1] != expected:
            raise IntegrityError(f"registry update of {record.fault_id} does not extend its history by one entry")
        record.verify()
        entry = record.history[-1]
        event = {"seq": len(self.audit), "tick": tick, "type": "record", "op": op or entry.kind,
                 "faultId": record.fault_id, "entry": entry.to_dict()}
        event.update(extra)
        event["digest"] = record.integrity_tag
        self.audit.append(event)
        self.records[record.fault_id] = record
        self._reindex(old, record)
        return record

    def note(self, tick: int, kind: str, **fields) -> dict:
        event = {"seq": len(self.audit), "tick": tick, "type": kind}
        event.update(fields)
        self.audit.append(event)
        return event

    def _reindex(self, old: FaultRecord | None, new: FaultRecord):
        if old is not None and old.suspected_service != new.suspected_service and old.suspected_service:
            self.index_by_service[old.suspected_service].discard(new.fault_id)
        self.index_by_domain[new.origin_domain].add(new.fault_id)
        iso = new.isolated_at
        if iso:
            self.index_by_domain[iso[0]].add(new.fault_id)
        if new.suspected_service:
            self.index_by_service[new.suspected_service].add(new.fault_id)

    def related(self, domain: str) -> list[FaultRecord]:
        """Records raised in or isolated to ``domain``."""
        return [self.records[f] for f in sorted(self.index_by_domain.get(domain, ()))]

    def for_service(self, service: str) -> list[FaultRecord]:
        return [self.records[f] for f in sorted(self.index_by_service.get(service, ()))]

    def to_json(self) -> str:
        return dump_registry(self.records.values())

    def audit_lines(self) -> list[str]:
        return [canonical.dumps_ordered(canonical.normalize_top(e)) for e in self.audit]
