import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iofm.errors import IntegrityError, PreconditionError, RoutingError
from iofm.protocol import (Envelope, MessageKind, PublishedState, Subscription, SubscriberView, SubscriptionTable,
                           Topic, make_envelope, publish, send, verify)


class FakeNet:
    def __init__(self, domains):
        self.domains = set(domains)
        self.sent = []

    def knows(self, d):
        return d in self.domains

    def transmit(self, env):
        self.sent.append(env)


def test_envelope_round_trip_and_checksum():
    env = make_envelope("m1", "A", "B", 3, MessageKind.FAULT_REPORT, {"faultId": "F1", "x": [1, 2]})
    again = Envelope.from_json(env.to_json())
    assert again == env and verify(again) is again
    tampered = Envelope.from_dict(dict(env.to_dict(), payload={"faultId": "F2", "x": [1, 2]}))
    with pytest.raises(IntegrityError):
        verify(tampered)


def test_envelope_json_key_order():
    env = make_envelope("m1", "A", "B", 0, "Notify", {"b": 1, "a": 2})
    assert env.to_json().startswith('{"msgId":"m1","sender":"A","receiver":"B","sentAt":0,"kind":"Notify",'
                                    '"correlationId":null,"checksum":')


def test_response_needs_correlation():
    with pytest.raises(PreconditionError):
        make_envelope("m2", "B", "A", 1, MessageKind.LOCALIZATION_RESPONSE, {})
    env = make_envelope("m2", "B", "A", 1, MessageKind.LOCALIZATION_RESPONSE, {}, "m1")
    assert env.is_response


def test_send_routing_and_integrity():
    net = FakeNet({"A", "B"})
    ok = make_envelope("m1", "A", "B", 0, MessageKind.FAULT_REPORT, {})
    assert send(ok, net) and net.sent == [ok]
    with pytest.raises(RoutingError):
        send(make_envelope("m2", "A", "Z", 0, MessageKind.FAULT_REPORT, {}), net)
    with pytest.raises(RoutingError):
        send(make_envelope("m3", "A", "A", 0, MessageKind.FAULT_REPORT, {}), net)
    stale = Envelope("m4", "A", "B", 0, MessageKind.FAULT_REPORT, {"a": 1}, ok.checksum)
    with pytest.raises(IntegrityError):
        send(stale, net)
    assert len(net.sent) == 1


def test_duplicate_subscription():
    table = SubscriptionTable()
    table.add(Subscription("B", "A", Topic.MONITORING))
    with pytest.raises(PreconditionError):
        table.add(Subscription("B", "A", "monitoring", since=4))
    table.add(Subscription("C", "A", Topic.MONITORING))
    assert [s.subscriber for s in table.matching("A", Topic.MONITORING)] == ["B", "C"]
    assert table.matching("A", Topic.FAULT_STATUS) == []


ops = st.lists(st.tuples(st.sampled_from(["set", "delete"]), st.sampled_from("abcd"), st.integers(0, 3)),
               max_size=40)


@settings(max_examples=200, deadline=None)
@given(ops, st.integers(0, 40))
def test_delta_replay_reconstructs_published_state(script, join_at):
    """A late subscriber starting from a snapshot converges on the publisher state."""
    pub = PublishedState()
    view = SubscriberView()
    subs = [Subscription("S", "P", Topic.MONITORING)]
    ids = iter(f"m{i}" for i in range(10_000))
    joined = False
    for i, (op, key, value) in enumerate(script):
        if i == join_at:
            snap = pub.snapshot()
            for env in publish(subs, "P", Topic.MONITORING, {"op": "snapshot", **snap}, i, lambda: next(ids)):
                view.apply(env, i)
            joined = True
        delta = pub.set(key, value) if op == "set" else pub.delete(key)
        if joined and delta:
            for env in publish(subs, "P", Topic.MONITORING, delta, i, lambda: next(ids)):
                assert view.apply(env, i)
    if not joined:
        for env in publish(subs, "P", Topic.MONITORING, {"op": "snapshot", **pub.snapshot()}, 99, lambda: next(ids)):
            view.apply(env, 99)
    assert view.state("P", Topic.MONITORING) == dict(sorted(pub.values.items()))
    assert view.versions[("P", "monitoring")] == pub.version


def test_stale_notifications_are_rejected():
    view = SubscriberView(max_age=5)
    sub = [Subscription("S", "P", Topic.FAULT_STATUS)]
    env, = publish(sub, "P", Topic.FAULT_STATUS, {"op": "set", "key": "F1", "value": "Isolated", "version": 1}, 10,
                   lambda: "m1")
    assert not view.apply(env, 16)
    assert view.stale == ["m1"] and view.state("P", Topic.FAULT_STATUS) == {}
    assert view.apply(env, 15)
    assert view.state("P", "fault-status") == {"F1": "Isolated"}
