import random

import pytest

import scenario_gen as gen
from iofm import scenario
from iofm.engine import capability_matrix
from iofm.errors import AccessDenied, CapabilityError, DomainError, PreconditionError
from iofm.faultmodel.lifecycle import LifecycleState as S
from iofm.faultmodel.records import FalsePositiveStatus as FP
from iofm.faultmodel.records import Symptom
from iofm.simnet import Simulation
from iofm.topology import TopologyClass


def sim_of(mode="heterarchy", events=(), **kw) -> Simulation:
    return Simulation(scenario.build(gen.small(mode, events, **kw)))


def grants(requester, targets, cap):
    return [{"requester": requester, "target": t, "capability": cap} for t in targets if t != requester]


BUSY = [
    {"tick": 1, "type": "fault", "component": "b1", "alarm": False},
    {"tick": 2, "type": "customer-report", "customer": "u", "service": "s"},
    {"tick": 4, "type": "fault", "component": "c2"},
    {"tick": 6, "type": "false-alarm", "domain": "D", "component": "d2"},
]


# --- P01 / P02 ----------------------------------------------------------------

@pytest.mark.parametrize("stop", [3, 12, 30])
def test_progress_matches_registry_snapshot(stop):
    sim = sim_of("heterarchy", BUSY, grants=grants("A", "ABCD", "query-progress"), horizon=60)
    sim.drive(lambda: sim.now >= stop)
    res = sim.engine.progress_query("fault-resolution", "A")
    sim.run()
    assert not res.denied and not res.missing
    for domain, reply in res.entries.items():
        as_of = reply["asOf"]
        expected = {r.fault_id: r.state_at(as_of).value for r in sim.engine.registry.related(domain)
                    if r.created_at <= as_of}
        assert {f["faultId"]: f["state"] for f in reply["faults"]} == expected


def test_maintenance_progress_lists_repairs_only():
    sim = sim_of("heterarchy", BUSY, grants=grants("A", "ABCD", "query-progress"), horizon=60)
    sim.drive(lambda: sim.now >= 12)
    res = sim.engine.progress_query("maintenance", "A")
    entries = [f for reply in res.entries.values() for f in reply["faults"]]
    assert entries
    for f in entries:
        rec = sim.engine.registry.get(f["faultId"])
        assert f["state"] in ("Repairing", "Resolved")
        assert f["repairStarted"] == rec.transition_tick(S.REPAIRING)
        assert f["expectedDone"] == f["repairStarted"] + sim.engine.th["repairTicks"]


def test_progress_denials_and_customer_forwarding():
    sim = sim_of("heterarchy", BUSY)
    res = sim.engine.progress_query("fault-resolution", "B")
    assert res.denied == ["A", "C", "D"] and list(res.entries) == ["B"]
    res = sim.engine.progress_query("fault-resolution", "u", service="s")
    assert res.forwarded_by == "A" and list(res.entries) == ["A"]


# --- M01 / M02 / M03 ----------------------------------------------------------

def test_m01_self_view_is_the_dms_alarm_set():
    sim = sim_of("heterarchy", BUSY, horizon=60)
    sim.drive(lambda: sim.now >= 6)
    before = sim.engine.dms_alarms("D")
    res = sim.engine.monitor("domain", "D")
    assert before and res.entries["D"]["alarms"] == before


def test_m01_needs_access():
    sim = sim_of("heterarchy")
    with pytest.raises(AccessDenied):
        sim.engine.monitor("domain", "B", target="C")
    ok = sim_of("heterarchy", grants=grants("B", "C", "monitor"))
    assert list(ok.engine.monitor("domain", "B", target="C").entries) == ["C"]


def test_m02_with_an_unresponsive_domain_is_partial():
    doms = "ABCDE"
    sim = sim_of("heterarchy", extra_domains=("D", "E"), grants=grants("A", doms, "monitor"),
                 link={"delay": 1, "overrides": [{"from": "*", "to": "E", "lossProb": 1.0}]})
    res = sim.engine.monitor("overall", "A")
    assert sorted(res.entries) == ["A", "B", "C", "D"]
    assert res.missing == ["E"] and res.partial


def test_m02_refusals():
    with pytest.raises(CapabilityError):
        sim_of("hierarchy").engine.monitor("overall", "A")
    with pytest.raises(AccessDenied):
        sim_of("heterarchy").engine.monitor("overall", "B")


def test_m03_uses_the_involved_domains(fig1):
    sim = Simulation(fig1)
    sim.run()
    res = sim.engine.monitor("service", "P0", service="S3")
    assert sorted(res.entries) == ["P0", "P3", "P4", "P5"]


# --- R01 / R02 / R03 ----------------------------------------------------------

def test_statistics_with_a_silent_domain_are_incomplete():
    sim = sim_of("heterarchy", BUSY, grants=grants("A", "ABCD", "report-data"), horizon=60,
                 link={"delay": 1, "overrides": [{"from": "A", "to": "D", "lossProb": 1.0}]})
    sim.run()
    res = sim.engine.report("statistics", (0, 60), "A")
    assert res.data["incomplete"] and res.data["missing"] == ["D"]
    rows = {r["domain"]: r for r in res.data["rows"]}
    assert rows["A"]["faultsDetected"] == 1 and rows["B"]["faultsIsolated"] == 1


def test_qos_violation_on_availability():
    events = [{"tick": 10, "type": "fault", "component": "b1"}, {"tick": 12, "type": "repair", "component": "b1"}]
    sla = [{"service": "s", "minAvailability": 0.99, "maxOwd": 10}]
    sim = sim_of("heterarchy", events, grants=grants("A", "ABC", "report-data"), slas=sla, horizon=20,
                 automation={"repair": False})
    sim.run()
    res = sim.engine.report("qos", (0, 99), "A")
    (v,) = res.data["violations"]
    assert (v["service"], v["metric"], v["limit"]) == ("s", "availability", 0.99)
    assert v["measured"] == pytest.approx(0.98, abs=1e-12)
    (row,) = res.data["services"]
    assert row["measured"]["owd"] == pytest.approx(3.0, abs=1e-9)


def test_trend_fit_and_breach():
    events = [{"tick": t, "type": "false-alarm", "domain": "A"}
              for t, n in ((1, 2), (2, 4), (3, 6)) for _ in range(n)]
    sim = sim_of("heterarchy", events, horizon=10)
    sim.run()
    res = sim.engine.report("trend", (1, 3), "A")
    (row,) = res.data["rows"]
    assert row["points"] == [[1, 2], [2, 4], [3, 6]]
    assert row["slope"] == pytest.approx(2.0, abs=1e-9)
    assert row["breachTick"] == 5
    assert res.denied == ["B", "C", "D"]


def test_report_window_must_not_be_empty():
    with pytest.raises(DomainError):
        sim_of("heterarchy").engine.report("statistics", (5, 4), "A")
    with pytest.raises(AccessDenied):
        sim_of("heterarchy").engine.report("statistics", (0, 4), "u")


# --- F01 / F02 ----------------------------------------------------------------

def _reported(sim, component):
    return sim.engine.report_fault("A", [Symptom("down", "A", sim.now, component=component)], localize=False)


def test_false_positive_check_outcomes():
    sim = sim_of("heterarchy")
    sim.truth.fail("b1", 0, alarmed=False)
    real = _reported(sim, "b1")
    fake = _reported(sim, "c1")
    assert sim.engine.false_positive_check(fake.fault_id) is FP.CONFIRMED_FALSE
    assert sim.engine.false_positive_check(real.fault_id) is FP.CONFIRMED_REAL
    asked = sum(1 for e in sim.trace if e["event"] == "send" and e["envelope"]["kind"] == "FalsePositiveQuery")
    assert sim.engine.false_positive_check(real.fault_id) is FP.CONFIRMED_REAL
    again = sum(1 for e in sim.trace if e["event"] == "send" and e["envelope"]["kind"] == "FalsePositiveQuery")
    assert asked == again == 2


def test_false_positive_check_unavailable_in_a_hierarchy():
    sim = sim_of("hierarchy")
    with pytest.raises(CapabilityError):
        sim.engine.false_positive_check(_reported(sim, "c1").fault_id)


def test_false_alarm_is_removed():
    sim = sim_of("heterarchy", [{"tick": 1, "type": "false-alarm", "domain": "B", "component": "b2"}])
    sim.drive(lambda: len(sim.engine.registry) > 0)
    assert len(sim.engine.dms_alarms("B")) == 1
    sim.run()
    (rec,) = sim.engine.registry.all()
    assert rec.state is S.CLOSED and rec.is_false_positive is FP.CONFIRMED_FALSE
    assert sim.engine.dms_alarms("B") == []
    assert [o.result for o in sim.engine.outcomes] == ["false-positive"]


def test_removal_needs_confirmation():
    sim = sim_of("heterarchy")
    rec = _reported(sim, "c1")
    with pytest.raises(PreconditionError):
        sim.engine.false_positive_remove(rec.fault_id)


# --- FM-01 and capability -----------------------------------------------------

def test_fig1_plot_export(fig1_sim):
    (entry,) = [e for e in fig1_sim.engine.use_case_log if e["useCase"] == "FM-01"]
    assert entry["result"]["sections"] == ["alarms", "outcomes", "reports"]
    assert entry["result"]["reports"] == 3


def test_fig1_scripted_use_cases_succeed(fig1_sim):
    failed = [e for e in fig1_sim.engine.use_case_log if "error" in e]
    assert failed == []


ABSENT = {"hierarchy": {"L02", "M02", "F01", "F02"}, "heterarchy": {"L03"}, "mixed": set()}


@pytest.mark.parametrize("shape", sorted(ABSENT))
def test_capability_matrix(shape):
    doc = gen.document(*gen.SHAPES[shape](random.Random(1), 6)[:4], [])
    m = capability_matrix(scenario.build(doc).network)
    assert m.topology_class is TopologyClass(shape)
    assert {uc for uc, ok in m.supported.items() if not ok} == ABSENT[shape]
    assert len(m.supported) == 13
