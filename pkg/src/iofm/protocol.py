"""Inter-domain messages: typed envelopes, integrity checks, push subscriptions.

Envelopes serialize to key-ordered JSON (msgId, sender, receiver, sentAt,
kind, correlationId, checksum, payload). The checksum covers the canonical
payload only.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Protocol

from . import canonical
from .errors import IntegrityError, PreconditionError, RoutingError


class MessageKind(str, enum.Enum):
    FAULT_REPORT = "FaultReport"
    LOCALIZATION_REQUEST = "LocalizationRequest"
    LOCALIZATION_RESPONSE = "LocalizationResponse"
    PROGRESS_QUERY = "ProgressQuery"
    PROGRESS_RESPONSE = "ProgressResponse"
    MONITOR_QUERY = "MonitorQuery"
    MONITOR_RESPONSE = "MonitorResponse"
    REPORT_REQUEST = "ReportRequest"
    REPORT_RESPONSE = "ReportResponse"
    FALSE_POSITIVE_QUERY = "FalsePositiveQuery"
    FALSE_POSITIVE_RESPONSE = "FalsePositiveResponse"
    DATA_CHANGE_REQUEST = "DataChangeRequest"
    DATA_CHANGE_ACK = "DataChangeAck"
    SUBSCRIBE = "Subscribe"
    NOTIFY = "Notify"
    ESCALATION_NOTICE = "EscalationNotice"


K = MessageKind
RESPONSE_FOR: dict[MessageKind, MessageKind] = {
    K.LOCALIZATION_REQUEST: K.LOCALIZATION_RESPONSE,
    K.PROGRESS_QUERY: K.PROGRESS_RESPONSE,
    K.MONITOR_QUERY: K.MONITOR_RESPONSE,
    K.REPORT_REQUEST: K.REPORT_RESPONSE,
    K.FALSE_POSITIVE_QUERY: K.FALSE_POSITIVE_RESPONSE,
    K.DATA_CHANGE_REQUEST: K.DATA_CHANGE_ACK,
}
REQUEST_FOR = {v: k for k, v in RESPONSE_FOR.items()}
RESPONSE_KINDS = frozenset(RESPONSE_FOR.values())


@dataclass(frozen=True)
class Envelope:
    msg_id: str
    sender: str
    receiver: str
    sent_at: int
    kind: MessageKind
    payload: dict = field(hash=False)
    checksum: str = ""
    correlation_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "msgId": self.msg_id,
            "sender": self.sender,
            "receiver": self.receiver,
            "sentAt": self.sent_at,
            "kind": self.kind.value,
            "correlationId": self.correlation_id,
            "checksum": self.checksum,
            "payload": canonical.normalize(self.payload),
        }

    def to_json(self) -> str:
        return canonical.dumps_ordered(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Envelope":
        return cls(d["msgId"], d["sender"], d["receiver"], int(d["sentAt"]), MessageKind(d["kind"]),
                   d["payload"], d["checksum"], d.get("correlationId"))

    @classmethod
    def from_json(cls, line: str) -> "Envelope":
        return cls.from_dict(json.loads(line))

    def verifies(self) -> bool:
        return payload_checksum(self.payload) == self.checksum

    @property
    def is_response(self) -> bool:
        return self.kind in RESPONSE_KINDS


def payload_checksum(payload: dict) -> str:
    return canonical.digest(payload)


def make_envelope(msg_id: str, sender: str, receiver: str, sent_at: int, kind: MessageKind, payload: dict,
                  correlation_id: str | None = None) -> Envelope:
    kind = MessageKind(kind)
    if kind in RESPONSE_KINDS and not correlation_id:
        raise PreconditionError(f"{kind.value} must carry the correlation id of its request")
    payload = canonical.normalize(payload)
    return Envelope(msg_id, sender, receiver, sent_at, kind, payload, payload_checksum(payload), correlation_id)


def verify(env: Envelope) -> Envelope:
    if not env.verifies():
        raise IntegrityError(f"checksum mismatch on message {env.msg_id}")
    return env


class SimNetHandle(Protocol):
    def knows(self, domain: str) -> bool: ...

    def transmit(self, env: Envelope) -> None: ...


def send(env: Envelope, net: SimNetHandle) -> bool:
    """Hand ``env`` to the transport; delivery happens later, FIFO per sender/receiver pair."""
    if env.sender == env.receiver:
        raise RoutingError(f"message {env.msg_id} is addressed to its own sender {env.sender}")
    if not net.knows(env.receiver):
        raise RoutingError(f"unknown receiver {env.receiver!r} for message {env.msg_id}")
    if not env.verifies():
        raise IntegrityError(f"message {env.msg_id} was not sealed with a fresh checksum")
    net.transmit(env)
    return True


class Topic(str, enum.Enum):
    FAULT_STATUS = "fault-status"
    MONITORING = "monitoring"


@dataclass(frozen=True)
class Subscription:
    subscriber: str
    publisher: str
    topic: Topic
    since: int = 0

    @property
    def key(self) -> tuple[str, str, Topic]:
        return (self.subscriber, self.publisher, Topic(self.topic))


class SubscriptionTable:
    def __init__(self):
        self._subs: dict[tuple[str, str, Topic], Subscription] = {}

    def add(self, sub: Subscription) -> Subscription:
        if sub.key in self._subs:
            raise PreconditionError(f"duplicate subscription {sub.subscriber}->{sub.publisher} on {sub.topic}")
        self._subs[sub.key] = sub
        return sub

    def __contains__(self, key) -> bool:
        return key in self._subs

    def __iter__(self):
        return iter(sorted(self._subs.values(), key=lambda s: (s.publisher, s.topic.value, s.subscriber)))

    def __len__(self):
        return len(self._subs)

    def matching(self, publisher: str, topic: Topic) -> list[Subscription]:
        return [s for s in self if s.publisher == publisher and s.topic is Topic(topic)]


def publish(subscriptions: Iterable[Subscription], publisher: str, topic: Topic, event: dict, tick: int,
            next_id) -> list[Envelope]:
    """One Notify per subscriber of (publisher, topic); ``next_id`` yields message ids."""
    topic = Topic(topic)
    out = []
    for sub in subscriptions:
        if sub.publisher != publisher or Topic(sub.topic) is not topic:
            continue
        payload = {"topic": topic.value, "publisher": publisher, "stamp": tick, **event}
        out.append(make_envelope(next_id(), publisher, sub.subscriber, tick, MessageKind.NOTIFY, payload))
    return out


class PublishedState:
    """Publisher-side versioned key/value state that emits deltas."""

    def __init__(self):
        self.version = 0
        self.values: dict[str, object] = {}

    def set(self, key: str, value) -> dict | None:
        if self.values.get(key, _MISSING) == value:
            return None
        self.values[key] = value
        self.version += 1
        return {"op": "set", "key": key, "value": value, "version": self.version}

    def delete(self, key: str) -> dict | None:
        if key not in self.values:
            return None
        del self.values[key]
        self.version += 1
        return {"op": "delete", "key": key, "version": self.version}

    def snapshot(self) -> dict:
        return {"version": self.version, "values": dict(sorted(self.values.items()))}


_MISSING = object()


class SubscriberView:
    """Subscriber-side reconstruction of a publisher's state from Notify deltas."""

    def __init__(self, max_age: int | None = None):
        self.max_age = max_age
        self.values: dict[tuple[str, str], dict] = {}
        self.versions: dict[tuple[str, str], int] = {}
        self.stale: list[str] = []

    def apply(self, env: Envelope, now: int) -> bool:
        p = env.payload
        if self.max_age is not None and now - p["stamp"] > self.max_age:
            self.stale.append(env.msg_id)
            return False
        key = (p["publisher"], p["topic"])
        state = self.values.setdefault(key, {})
        if p.get("op") == "set":
            state[p["key"]] = p["value"]
        elif p.get("op") == "delete":
            state.pop(p["key"], None)
        elif p.get("op") == "snapshot":
            state.clear()
            state.update(p["values"])
        self.versions[key] = p.get("version", self.versions.get(key, 0))
        return True

    def state(self, publisher: str, topic: Topic) -> dict:
        return dict(sorted(self.values.get((publisher, Topic(topic).value), {}).items()))


def is_stale(as_of: int, now: int, max_age: int | None) -> bool:
    return max_age is not None and now - as_of > max_age
