import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import scenario_gen as gen
from iofm import scenario, simnet
from iofm.errors import SchedulerMisuse
from iofm.protocol import MessageKind, make_envelope
from iofm.simnet import (GroundTruth, Injection, InjectionRegistry, LinkModel, LinkParams, Scheduler, Transport,
                         dms_observe)


def _drain(s: Scheduler):
    out = []
    while len(s):
        out.append(s.pop())
    return out


def test_scheduler_orders_by_tick_then_insertion():
    s = Scheduler()
    s.inject(5, "c")
    s.inject(1, "a")
    s.inject(5, "d")
    s.inject(3, "b")
    assert [e.kind for e in _drain(s)] == ["a", "b", "c", "d"]


def test_scheduler_matches_sort_oracle_on_many_events():
    rng = random.Random(11)
    s = Scheduler()
    ticks = [rng.randint(0, 500) for _ in range(100_000)]
    for i, t in enumerate(ticks):
        s.inject(t, "e", {"i": i})
    got = [e.data["i"] for e in _drain(s)]
    assert got == sorted(range(len(ticks)), key=lambda i: (ticks[i], i))


def test_scheduler_misuse():
    s = Scheduler()
    s.inject(4, "x")
    s.pop()
    with pytest.raises(SchedulerMisuse):
        s.inject(9, "late")
    with pytest.raises(SchedulerMisuse):
        s.schedule(3, "past")
    with pytest.raises(SchedulerMisuse):
        s.pop()
    s.schedule(4, "now-is-fine")
    assert s.pop().tick == 4


def test_injection_registry_is_read_only_after_freeze():
    reg = InjectionRegistry()
    reg.add(Injection("fault", 2, component="a1"))
    assert reg.end_fault("a1", 7)
    assert reg.is_faulted("a1", 6) and not reg.is_faulted("a1", 7)
    assert reg.faulted_components(3) == {"a1"}
    reg.freeze()
    with pytest.raises(SchedulerMisuse):
        reg.add(Injection("fault", 9, component="a2"))


def _transport(params: LinkParams, seed=1):
    s = Scheduler()
    trace = []
    got = []
    t = Transport(s, LinkModel(seed, params), {"A", "B", "C"}, trace, on_deliver=got.append)
    return s, t, trace, got


def test_fifo_per_pair():
    s, t, _, got = _transport(LinkParams(delay=3))
    ids = {"n": 0}

    def send_at(ev):
        ids["n"] += 1
        t.transmit(make_envelope(f"m{ids['n']}", "A", "B", s.now, MessageKind.FAULT_REPORT, {"n": ids["n"]}))

    for tick in (0, 0, 1, 2, 2):
        s.inject(tick, "send", action=send_at)
    while len(s):
        ev = s.pop()
        ev.action(ev)
    assert [e.payload["n"] for e in got] == [1, 2, 3, 4, 5]


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 1000))
def test_message_conservation(loss, corrupt, seed):
    s, t, trace, got = _transport(LinkParams(1, loss, corrupt), seed)
    s.inject(0, "go", action=lambda ev: [
        t.transmit(make_envelope(f"m{i}", "A", "BC"[i % 2], 0, MessageKind.FAULT_REPORT, {"i": i}))
        for i in range(200)])
    while len(s):
        ev = s.pop()
        ev.action(ev)
    c = t.counts
    assert c["send"] == 200
    assert c["deliver"] + c["drop"] + c["discard-corrupt"] == 200
    assert t.in_flight() == 0 and len(got) == c["deliver"]
    assert sum(1 for e in trace if e["event"] == "send") == 200


def test_link_streams_are_independent():
    a = LinkModel(42, LinkParams(1, 0.5, 0.0))
    b = LinkModel(42, LinkParams(1, 0.5, 0.0))
    only_ab = [a.sample("A", "B") for _ in range(50)]
    mixed = []
    for _ in range(50):
        b.sample("C", "A")
        mixed.append(b.sample("A", "B"))
    assert only_ab == mixed
    assert [LinkModel(43, LinkParams(1, 0.5, 0.0)).sample("A", "B") for _ in range(50)] != only_ab


def test_link_overrides():
    m = LinkModel.from_config({"delay": 2, "overrides": [{"from": "*", "to": "B", "lossProb": 1.0}]}, 0)
    assert m.params("A", "B") == LinkParams(2, 1.0, 0.0)
    assert m.params("B", "A") == LinkParams(2, 0.0, 0.0)


def test_dms_observe(fig1):
    truth = GroundTruth(fig1.network)
    assert dms_observe(truth, "P4") == frozenset()
    truth.fail("P4-r1", 1, alarmed=False)
    assert dms_observe(truth, "P4") == frozenset()
    loud = truth.fail("P4-r2", 2)
    fake = truth.raise_false_alarm("P4", 3, component="P4-r1")
    assert dms_observe(truth, "P4") == {loud, fake}
    assert dms_observe(truth, "P3") == frozenset()
    truth.repair("P4-r2", 5)
    truth.clear_false_alarm(fake.alarm_id)
    assert dms_observe(truth, "P4") == frozenset()
    assert [(f["component"], f["end"]) for f in truth.failure_log] == [("P4-r1", None), ("P4-r2", 5)]


def test_empty_injection_set_creates_no_records():
    rng = random.Random(3)
    doc = gen.document(*gen.heterarchy(rng, 5)[:4], [])
    res = simnet.run(scenario.build(doc, "quiet"))
    assert '"records":[]' in res.registry.replace(" ", "")
    assert res.outcomes_data["localization"] == []


def test_runs_are_deterministic(fig1):
    a, b = simnet.run(fig1), simnet.run(fig1)
    assert a.trace == b.trace and a.audit == b.audit and a.registry == b.registry and a.outcomes == b.outcomes


def test_result_files(tmp_path, fig1_result):
    fig1_result.write(tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["audit.jsonl", "outcomes.json", "registry.json",
                                                          "trace.jsonl"]
    lines = (tmp_path / "trace.jsonl").read_text().splitlines()
    assert len(lines) == len(fig1_result.trace)
