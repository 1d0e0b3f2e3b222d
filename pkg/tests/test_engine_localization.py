import json

import pytest

import scenario_gen as gen
from conftest import GOLDEN
from iofm import scenario
from iofm.engine.replay import replay_audit
from iofm.errors import (AccessDenied, CapabilityError, InvalidReference, PatchValidationError, PreconditionError,
                         SchedulerMisuse, ScopeError)
from iofm.faultmodel.lifecycle import LifecycleState as S
from iofm.faultmodel.records import FalsePositiveStatus, Symptom
from iofm.orgmodel import RoleKind
from iofm.simnet import Simulation


def sim_of(mode="heterarchy", events=(), **kw) -> Simulation:
    return Simulation(scenario.build(gen.small(mode, events, **kw)))


def sends(sim, kind=None, fault_id=None):
    out = []
    for ev in sim.trace:
        if ev["event"] != "send":
            continue
        env = ev["envelope"]
        if kind and env["kind"] != kind:
            continue
        if fault_id and env["payload"].get("faultId") != fault_id:
            continue
        out.append(env)
    return out


def user_report(sim, service="s", domain="A", **kw):
    sym = Symptom("degraded", "u", sim.now, service=service)
    return sim.engine.report_fault(domain, [sym], service=service, reporter=RoleKind.USER, **kw)


# --- L01 --------------------------------------------------------------------

def test_l01_known_error_skips_the_search():
    known = [{"domain": "A", "target": "a1", "symptom": "flapping", "component": "a1"}]
    doc = gen.small("hierarchy", [{"tick": 1, "type": "fault", "component": "a1", "symptom": "flapping"}])
    doc["information"]["knownErrors"] = known
    sim = Simulation(scenario.build(doc))
    sim.run()
    (o,) = sim.engine.outcomes
    assert (o.result, o.use_case, o.domain, o.component, o.elapsed_ticks) == ("isolated", "L01", "A", "a1", 0)
    assert not [e for e in sim.engine.registry.audit if e["type"] == "dfo-task"]
    rec = sim.engine.registry.get(o.fault_id)
    isolations = [h for h in rec.history if h.kind == "transition" and h.to_state is S.ISOLATED]
    assert [h.detail.get("via") for h in isolations] == ["known-error"]


def test_l01_local_search_finds_alarmed_component():
    sim = sim_of("heterarchy", [{"tick": 1, "type": "fault", "component": "b2"}])
    sim.run()
    (o,) = sim.engine.outcomes
    assert (o.result, o.use_case, o.domain, o.component) == ("isolated", "L01", "B", "b2")
    assert sim.engine.registry.get(o.fault_id).state is S.CLOSED


def test_l01_hands_off_when_nothing_is_found_locally():
    sim = sim_of("heterarchy")
    sim.truth.fail("b1", 0, alarmed=False)
    rec = user_report(sim, localize=False)
    out = sim.engine.localize_own_domain(rec.fault_id)
    assert out.result == "handed-off"
    assert sim.engine.registry.get(rec.fault_id).state is S.LOCALIZING
    with pytest.raises(PreconditionError):
        sim.engine.localize_own_domain(rec.fault_id)


# --- L02 --------------------------------------------------------------------

def test_fig1_l02_message_pattern(fig1_sim):
    golden = json.loads((GOLDEN / "fig1_l02_messages.json").read_text())
    fid = golden["faultId"]
    (o,) = [o for o in fig1_sim.engine.outcomes if o.fault_id == fid]
    assert (o.result, o.use_case, o.domain, o.component) == ("isolated", "L02", "P4", "P4-r1")
    assert o.message_count == 10
    got = [[ev["tick"], ev["envelope"]["kind"], ev["envelope"]["sender"], ev["envelope"]["receiver"]]
           for ev in fig1_sim.trace if ev["event"] == "send" and ev["envelope"]["payload"].get("faultId") == fid]
    assert got[:10] == golden["messages"]


def test_l02_unavailable_in_a_hierarchy():
    sim = sim_of("hierarchy")
    rec = user_report(sim, localize=False)
    with pytest.raises(CapabilityError):
        sim.engine.localize_undefined_domain(rec.fault_id)


def test_l02_escalates_when_the_fault_is_outside_the_coalition():
    sim = sim_of("heterarchy", [{"tick": 1, "type": "fault", "component": "d1", "alarm": False},
                                {"tick": 2, "type": "customer-report", "customer": "u", "service": "s"}])
    sim.run()
    (o,) = sim.engine.outcomes
    rec = sim.engine.registry.get(o.fault_id)
    assert o.result == "escalated" and rec.state is S.ESCALATED
    assert rec.transition_tick(S.ESCALATED) - rec.created_at <= sim.engine.th["isolateTicks"] + 1
    assert [e["level"] for e in sim.engine.registry.audit if e["type"] == "escalation-level"] == [2]


def test_explicit_l02_call():
    sim = sim_of("heterarchy", automation={"handoff": False})
    sim.truth.fail("c1", 0, alarmed=False)
    rec = user_report(sim)
    assert sim.engine.registry.get(rec.fault_id).state is S.LOCALIZING
    out = sim.engine.localize_undefined_domain(rec.fault_id)
    assert (out.result, out.domain, out.component) == ("isolated", "C", "c1")
    targets = sorted(e["receiver"] for e in sends(sim, "LocalizationRequest", rec.fault_id))
    assert targets == ["B", "C"]


def test_concurrent_faults_have_separate_tenures():
    sim = sim_of("heterarchy", [
        {"tick": 1, "type": "fault", "component": "b1", "alarm": False},
        {"tick": 2, "type": "customer-report", "customer": "u", "service": "s", "symptom": "down"},
        {"tick": 3, "type": "customer-report", "customer": "u", "service": "s", "symptom": "slow"},
    ])
    sim.run()
    tenures = [t for t in sim.engine.roles.tenures if t.binding.scope]
    assert [t.binding.scope for t in tenures] == ["F0001", "F0002"]
    first, second = tenures
    assert first.start <= second.start < first.end


# --- L03 --------------------------------------------------------------------

def test_explicit_l03_uses_one_request():
    sim = sim_of("hierarchy", automation={"handoff": False})
    sim.truth.fail("c1", 0, alarmed=False)
    rec = user_report(sim)
    out = sim.engine.localize_specific_domain(rec.fault_id, "C")
    assert (out.result, out.use_case, out.domain, out.component) == ("isolated", "L03", "C", "c1")
    assert len(sends(sim, "LocalizationRequest", rec.fault_id)) == 1


def test_explicit_l03_negative_answer_is_unresolved():
    sim = sim_of("hierarchy", automation={"handoff": False})
    sim.truth.fail("c1", 0, alarmed=False)
    rec = user_report(sim)
    out = sim.engine.localize_specific_domain(rec.fault_id, "B")
    assert out.result == "unresolved"
    assert sim.engine.registry.get(rec.fault_id).state is S.LOCALIZING


def test_explicit_l03_scope_and_capability():
    sim = sim_of("hierarchy", automation={"handoff": False})
    rec = user_report(sim)
    with pytest.raises(ScopeError):
        sim.engine.localize_specific_domain(rec.fault_id, "D")
    het = sim_of("heterarchy", automation={"handoff": False})
    rec = user_report(het)
    with pytest.raises(CapabilityError):
        het.engine.localize_specific_domain(rec.fault_id, "B")


def test_automatic_l03_chain_walks_the_delivery_order():
    sim = sim_of("hierarchy", [{"tick": 1, "type": "fault", "component": "c1", "alarm": False},
                               {"tick": 2, "type": "customer-report", "customer": "u", "service": "s"}])
    sim.run()
    (o,) = sim.engine.outcomes
    assert (o.result, o.use_case, o.domain) == ("isolated", "L03", "C")
    assert [e["receiver"] for e in sends(sim, "LocalizationRequest", o.fault_id)] == ["B", "C"]


# --- intake -----------------------------------------------------------------

def test_customer_reports_are_deduplicated():
    sim = sim_of("heterarchy", automation={"handoff": False})
    a = sim.engine.open_fault_report("u", "s")
    b = sim.engine.open_fault_report("u", "s", tick=3)
    assert a.fault_id == b.fault_id and len(b.symptoms) == 2
    later = sim.engine.open_fault_report("u", "s", tick=3 + sim.engine.th["dedupTicks"] + 1)
    assert later.fault_id != a.fault_id


def test_customer_report_references():
    sim = sim_of("heterarchy")
    with pytest.raises(InvalidReference):
        sim.engine.open_fault_report("u", "nope")
    with pytest.raises(InvalidReference):
        sim.engine.open_fault_report("stranger", "s")


# --- FM-02 data change --------------------------------------------------------

def _isolated(mode="heterarchy"):
    sim = sim_of(mode, [{"tick": 1, "type": "fault", "component": "b1", "alarm": False},
                        {"tick": 2, "type": "customer-report", "customer": "u", "service": "s"}],
                 automation={"repair": False})
    sim.run()
    (rec,) = sim.engine.registry.all()
    assert rec.state is S.ISOLATED
    return sim, rec


def test_data_change_by_acting_gfcm():
    sim, rec = _isolated()
    new = sim.engine.data_change(rec.fault_id, {"symptoms": []}, "A")
    assert new.symptoms == () and new.integrity_tag != rec.integrity_tag
    (ev,) = [e for e in sim.engine.registry.audit if e.get("op") == "data-change"]
    assert (ev["before"], ev["after"], ev["useCase"]) == (rec.integrity_tag, new.integrity_tag, "FM-02")
    replayed = replay_audit(sim.engine.registry.audit_lines())
    assert replayed.registry_json() == sim.engine.registry.to_json()


def test_data_change_refusals():
    sim, rec = _isolated()
    with pytest.raises(AccessDenied):
        sim.engine.data_change(rec.fault_id, {"suspectedService": None}, "B")
    with pytest.raises(PatchValidationError):
        sim.engine.data_change(rec.fault_id, {"isFalsePositive": "ConfirmedFalse"}, "A")
    assert sim.engine.registry.get(rec.fault_id) == rec
    ack = sim.engine.request_data_change(rec.fault_id, {"suspectedService": None}, "C")
    assert ack["accepted"] is True


def test_data_change_needs_a_taken_up_fault():
    sim = sim_of("hierarchy")
    rec = user_report(sim, localize=False)
    with pytest.raises(PreconditionError):
        sim.engine.data_change(rec.fault_id, {"suspectedService": None}, "A")


def test_isolation_confirms_the_fault_as_real():
    _, rec = _isolated()
    assert rec.is_false_positive is FalsePositiveStatus.CONFIRMED_REAL


# --- scheduling discipline ----------------------------------------------------

def test_sync_call_inside_a_handler_is_refused():
    sim = sim_of("heterarchy", automation={"handoff": False})
    rec = user_report(sim)
    sim.scheduler.schedule(sim.now + 1, "probe",
                           action=lambda ev: sim.engine.localize_undefined_domain(rec.fault_id))
    with pytest.raises(SchedulerMisuse):
        sim.run()
