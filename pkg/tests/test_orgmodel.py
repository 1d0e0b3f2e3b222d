import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iofm.errors import PreconditionError
from iofm.faultmodel.lifecycle import LifecycleState
from iofm.faultmodel.records import Symptom, new_record, transition
from iofm.orgmodel import (AccessPolicy, Capability, GfcmPolicy, RoleBinding, RoleBook, RoleKind, assign_gfcm,
                           check_access, validate_policy, validate_staffing)
from iofm.topology import network_from_dict

DOMAINS = ["A", "B", "C"]
caps = st.sampled_from(list(Capability))
doms = st.sampled_from(DOMAINS)
grants = st.frozensets(st.tuples(doms, doms, caps), max_size=9)


def _access_oracle(grants, requester, target, cap, gfcm):
    if requester == target:
        return True
    if (requester, target, cap) in grants:
        return True
    return requester in gfcm and cap in ("monitor", "query-progress", "report-data")


@settings(max_examples=300, deadline=None)
@given(grants, doms, doms, caps, st.frozensets(doms, max_size=2))
def test_check_access_truth_table(g, requester, target, cap, gfcm):
    policy = AccessPolicy(frozenset(g))
    expected = _access_oracle({(r, t, c.value) for r, t, c in g}, requester, target, cap.value, gfcm)
    assert check_access(policy, requester, target, cap, gfcm) is expected


def test_gfcm_role_never_implies_data_change():
    assert not check_access(AccessPolicy(), "A", "B", Capability.CHANGE_FAULT_DATA, {"A"})
    granted = AccessPolicy().with_grant("A", "B", Capability.CHANGE_FAULT_DATA)
    assert check_access(granted, "A", "B", "change-fault-data", ())


def _net(mode):
    return network_from_dict({
        "domains": [{"id": d} for d in DOMAINS],
        "components": [{"id": f"{d.lower()}1", "owner": d} for d in DOMAINS],
        "serviceParts": [{"id": f"p{d}", "provider": d, "realizedBy": [f"{d.lower()}1"]} for d in DOMAINS],
        "services": (
            [{"id": "s", "owner": "A", "deliveryMode": "heterarchical", "parts": ["pA", "pB", "pC"],
              "customers": ["u"]}] if mode == "heterarchy" else
            [{"id": "s", "owner": "A", "deliveryMode": "hierarchical", "parts": ["pA"], "subcontracts": ["t"],
              "customers": ["u"]},
             {"id": "t", "owner": "B", "deliveryMode": "hierarchical", "parts": ["pB"], "subcontracts": ["v"]},
             {"id": "v", "owner": "C", "deliveryMode": "hierarchical", "parts": ["pC"]}]),
    })


def _fault(fid, origin, tick, also=()):
    syms = [Symptom("down", origin, tick, component=f"{origin.lower()}1")]
    syms += [Symptom("down", d, tick, component=f"{d.lower()}1") for d in also]
    rec = new_record(fid, origin, RoleKind.DMS, syms, None, tick, RoleBinding(RoleKind.DMS, origin))
    return rec


def _localizing(rec):
    return transition(rec, LifecycleState.LOCALIZING, RoleBinding(RoleKind.DFM, rec.origin_domain), rec.created_at)


def test_hierarchical_gfcm_is_root_provider():
    net = _net("hierarchy")
    b = assign_gfcm(net, GfcmPolicy.AUTO, _localizing(_fault("F1", "C", 3)), 3)
    assert (b.role, b.domain, b.scope) == (RoleKind.GFCM, "A", None)


def test_heterarchical_gfcm_is_first_reporter_lowest_id_wins():
    net = _net("heterarchy")
    b = assign_gfcm(net, GfcmPolicy.AUTO, _localizing(_fault("F1", "C", 3, also=["B"])), 3)
    assert (b.domain, b.scope, b.since) == ("B", "F1", 3)


def test_gfcm_needs_localizing_fault():
    with pytest.raises(PreconditionError):
        assign_gfcm(_net("heterarchy"), GfcmPolicy.AUTO, _fault("F1", "A", 0), 0)


def test_concurrent_faults_get_separate_tenures():
    net = _net("heterarchy")
    book = RoleBook.staffed(net, GfcmPolicy.AUTO)
    assert book.permanent_gfcm is None
    b1 = book.open_tenure(assign_gfcm(net, GfcmPolicy.AUTO, _localizing(_fault("F1", "B", 1)), 1), 1)
    b2 = book.open_tenure(assign_gfcm(net, GfcmPolicy.AUTO, _localizing(_fault("F2", "C", 2)), 2), 2)
    assert book.gfcm_for("F1") == b1 and book.gfcm_for("F2") == b2
    assert book.gfcm_domains() == {"B", "C"}
    book.close_tenure("F1", 9)
    assert book.gfcm_for("F1") is None
    assert book.gfcm_domains() == {"C"}
    assert [(t.start, t.end) for t in book.tenures] == [(1, 9), (2, None)]


def test_hierarchy_book_has_permanent_gfcm():
    book = RoleBook.staffed(_net("hierarchy"), GfcmPolicy.AUTO)
    assert book.gfcm_for("anything").domain == "A"
    assert book.gfcm_domains() == {"A"}


def test_default_staffing_is_complete():
    net = _net("heterarchy")
    book = RoleBook.staffed(net, GfcmPolicy.AUTO)
    assert validate_staffing(net, book.staffing.values()) == []
    missing = [b for b in book.staffing.values() if not (b.domain == "B" and b.role is RoleKind.DFO)]
    assert [v.code for v in validate_staffing(net, missing)] == ["staffing"]


def test_validate_policy():
    net = _net("hierarchy")
    ok = AccessPolicy.from_list([{"requester": "A", "target": "C", "capability": "change-fault-data"}])
    assert validate_policy(net, ok, GfcmPolicy.AUTO) == []
    bad = ok.with_grant("B", "C", Capability.CHANGE_FAULT_DATA).with_grant("B", "Z", Capability.MONITOR)
    assert {v.code for v in validate_policy(net, bad, GfcmPolicy.AUTO)} == {"change-fault-data", "dangling-reference"}
