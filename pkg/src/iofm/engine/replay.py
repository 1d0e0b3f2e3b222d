"""Rebuild registry contents and DMS alarm sets from an audit log."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import IntegrityError
from ..faultmodel.records import FaultRecord, HistoryEntry, apply_entry, replay_history
from .registry import dump_registry


@dataclass
class ReplayState:
    records: dict[str, FaultRecord] = field(default_factory=dict)
    alarms: dict[str, dict[str, dict]] = field(default_factory=dict)
    events: int = 0

    def registry_json(self) -> str:
        return dump_registry(self.records.values())

    def alarm_ids(self) -> dict[str, list[str]]:
        return {d: sorted(a) for d, a in sorted(self.alarms.items()) if a}


def _events(source):
    for item in source:
        if isinstance(item, str):
            item = item.strip()
            if not item:
                continue
            item = json.loads(item)
        yield item


def replay_audit(source) -> ReplayState:
    """Apply every audit event in order; ``source`` yields JSON lines or parsed events."""
    state = ReplayState()
    last_seq = -1
    for ev in _events(source):
        if ev["seq"] <= last_seq:
            raise IntegrityError(f"audit sequence goes backwards at {ev['seq']}")
        last_seq = ev["seq"]
        state.events += 1
        kind = ev["type"]
        if kind == "record":
            fid = ev["faultId"]
            entry = HistoryEntry.from_dict(ev["entry"])
            if entry.kind == "create":
                if fid in state.records:
                    raise IntegrityError(f"fault {fid} created twice")
                rec = replay_history(fid, [entry])
            else:
                rec = apply_entry(state.records[fid], entry)
            if rec.integrity_tag != ev["digest"]:
                raise IntegrityError(f"replayed digest of {fid} differs at audit seq {ev['seq']}")
            state.records[fid] = rec
        elif kind == "alarm-raised":
            state.alarms.setdefault(ev["domain"], {})[ev["alarm"]["alarmId"]] = ev["alarm"]
        elif kind == "alarm-cleared":
            state.alarms.get(ev["domain"], {}).pop(ev["alarmId"], None)
    return state
