"""The fault management engine.

All use cases run as message conversations over the simulated transport.
Each has an event-driven ``begin_*`` form used by scripted scenario events
and a synchronous form that advances the simulation until the conversation
completes; the synchronous form must not be used from inside a handler.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field

from .. import canonical, protocol
from ..errors import (AccessDenied, ConversionError, IntegrityError, InvalidReference, IoFMError, OrderingError,
                      PreconditionError, ScopeError, TopologyError)
from ..faultmodel.adapters import convert_inbound, convert_outbound
from ..faultmodel.lifecycle import LifecyclePhase, LifecycleState, phase_of
from ..faultmodel.records import (FalsePositiveStatus, FaultRecord, Symptom, apply_patch, attach_symptoms,
                                  new_record, set_false_positive, transition)
from ..orgmodel import Capability, RoleBinding, RoleBook, RoleKind, assign_gfcm, check_access
from ..protocol import MessageKind as K
from ..protocol import PublishedState, SubscriberView, Subscription, SubscriptionTable, Topic
from ..simnet import dms_observe
from ..topology import DeliveryMode, involved_domains
from . import reports
from .capability import capability_matrix, observed_coverage, require
from .registry import FaultRegistry

log = logging.getLogger(__name__)

S = LifecycleState
P = LifecyclePhase


@dataclass(frozen=True)
class LocalizationOutcome:
    fault_id: str
    result: str  # isolated | escalated | false-positive | unresolved
    tick: int
    use_case: str
    domain: str | None = None
    component: str | None = None
    elapsed_ticks: int = 0
    message_count: int = 0

    def to_dict(self) -> dict:
        return {"faultId": self.fault_id, "result": self.result, "domain": self.domain,
                "component": self.component, "useCase": self.use_case, "tick": self.tick,
                "elapsedTicks": self.elapsed_ticks, "messageCount": self.message_count}


@dataclass
class UseCaseResult:
    """Outcome of a progress, monitoring or report conversation."""

    use_case: str
    requester: str
    tick: int
    entries: dict = field(default_factory=dict)
    denied: list = field(default_factory=list)
    missing: list = field(default_factory=list)
    stale: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    forwarded_by: str | None = None

    @property
    def partial(self) -> bool:
        return bool(self.missing)

    def to_dict(self) -> dict:
        return {"useCase": self.use_case, "requester": self.requester, "forwardedBy": self.forwarded_by,
                "tick": self.tick, "partial": self.partial, "entries": canonical.normalize(self.entries),
                "denied": sorted(self.denied), "missing": sorted(self.missing), "stale": sorted(self.stale),
                "data": canonical.normalize(self.data)}


@dataclass
class _Gather:
    use_case: str
    requester: str
    targets: list
    on_done: object
    started: int
    pending: dict = field(default_factory=dict)
    replies: dict = field(default_factory=dict)
    received: dict = field(default_factory=dict)
    done: bool = False
    extra: dict = field(default_factory=dict)


@dataclass
class _Loc:
    fault_id: str
    use_case: str
    gfcm: RoleBinding
    explicit: bool = False
    targets: list = field(default_factory=list)
    asked: set = field(default_factory=set)
    answered: dict = field(default_factory=dict)
    level: int = 1
    idx: int = 0
    hop: str | None = None
    done: bool = False
    escalated: bool = False
    on_done: list = field(default_factory=list)


_NOTIFY_FAULT = "fault-notification"


class Engine:
    def __init__(self, scenario, sim):
        self.sc = scenario
        self.net = scenario.network
        self.sim = sim
        self.truth = sim.truth
        self.roles = RoleBook.staffed(self.net, scenario.gfcm_policy, scenario.bindings)
        self.policy = scenario.grants
        self.matrix = capability_matrix(self.net)
        self.registry = FaultRegistry()
        self.th = dict(scenario.thresholds)
        self.auto = dict(scenario.automation)
        self.slas = [reports.SlaSpec.from_dict(s) for s in scenario.slas]
        self.known = {(k["domain"], k["target"], k.get("symptom", "down")): k["component"]
                      for k in scenario.known_errors}
        self.outcomes: list[LocalizationOutcome] = []
        self.use_case_log: list[dict] = []
        self.subs = SubscriptionTable()
        self.published: dict[tuple[str, Topic], PublishedState] = {}
        self.views: dict[str, SubscriberView] = {}
        self._msg_seq = 0
        self._fault_seq = 0
        self._convs: dict[str, object] = {}
        self._delivered_requests: set[str] = set()
        self._locs: dict[str, _Loc] = {}
        self._searched: dict[str, set] = {}
        self._msg_count: Counter = Counter()
        self._repair_started: set[str] = set()
        self._sub_waiters: dict[tuple, list] = {}
        self._dc_waiters: dict[str, object] = {}
        self._pending_attach: dict[str, list] = {}
        self._handlers = {
            K.FAULT_REPORT: self._on_fault_report,
            K.LOCALIZATION_REQUEST: self._on_loc_request,
            K.PROGRESS_QUERY: self._on_progress_query,
            K.MONITOR_QUERY: self._on_monitor_query,
            K.REPORT_REQUEST: self._on_report_request,
            K.FALSE_POSITIVE_QUERY: self._on_fp_query,
            K.DATA_CHANGE_REQUEST: self._on_data_change_request,
            K.SUBSCRIBE: self._on_subscribe,
            K.NOTIFY: self._on_notify,
            K.ESCALATION_NOTICE: self._on_escalation_notice,
        }

    # --- plumbing -------------------------------------------------------

    @property
    def now(self) -> int:
        return self.sim.now

    def _next_msg_id(self) -> str:
        self._msg_seq += 1
        return f"m{self._msg_seq:06d}"

    def _send(self, kind, sender: str, receiver: str, payload: dict, correlation: str | None = None,
              fault_id: str | None = None) -> protocol.Envelope:
        env = protocol.make_envelope(self._next_msg_id(), sender, receiver, self.now, kind, payload, correlation)
        if fault_id:
            self._msg_count[fault_id] += 1
        if sender == receiver:
            self.sim.transport.loopback(env)
        else:
            protocol.send(env, self.sim.transport)
        return env

    def _reply(self, request: protocol.Envelope, kind, payload: dict, fault_id=None):
        return self._send(kind, request.receiver, request.sender, payload, request.msg_id, fault_id)

    def _timer(self, tick: int, owner: str, fn):
        self.sim.scheduler.schedule(max(tick, self.now), "timer", {"owner": owner}, lambda ev: fn())

    def _cover(self, use_case: str, phase: LifecyclePhase, step: str):
        self.registry.note(self.now, "coverage", useCase=use_case, phase=phase.value, step=step)

    def _mutate(self, rec: FaultRecord, op: str | None = None, **extra) -> FaultRecord:
        self.registry.put(rec, self.now, op, **extra)
        self._publish_fault(rec)
        if rec.state is S.CLOSED and rec.history[-1].kind == "transition":
            released = self.roles.close_tenure(rec.fault_id, self.now)
            if released is not None:
                self.registry.note(self.now, "gfcm-tenure", event="release", faultId=rec.fault_id,
                                   domain=released.domain)
        return rec

    def _record_outcome(self, rec: FaultRecord, result: str, use_case: str, domain=None, component=None):
        o = LocalizationOutcome(rec.fault_id, result, self.now, use_case, domain, component,
                                self.now - rec.created_at, self._msg_count[rec.fault_id])
        self.outcomes.append(o)
        return o

    def _dfm(self, domain: str) -> RoleBinding:
        return self.roles.binding(domain, RoleKind.DFM)

    def _dfo(self, domain: str) -> RoleBinding:
        return self.roles.binding(domain, RoleKind.DFO)

    def _guard_sync(self):
        from ..errors import SchedulerMisuse
        if self.sim.dispatching:
            raise SchedulerMisuse("synchronous use-case calls may not be made from inside an event handler")

    def _sync(self, begin, *args, **kwargs):
        self._guard_sync()
        box = []
        begin(*args, on_done=box.append, **kwargs)
        self.sim.drive(lambda: bool(box))
        if not box:
            raise PreconditionError("conversation did not complete")
        return box[0]

    # --- message dispatch -----------------------------------------------

    def on_message(self, env: protocol.Envelope):
        if env.is_response:
            self._on_response(env)
            return
        if env.kind in protocol.RESPONSE_FOR:
            self._delivered_requests.add(env.msg_id)
        self._handlers[env.kind](env)

    def on_corrupt(self, env: protocol.Envelope):
        self.registry.note(self.now, "integrity-violation", msgId=env.msg_id, sender=env.sender,
                           receiver=env.receiver, kind=env.kind.value)

    def _on_response(self, env):
        if env.correlation_id not in self._delivered_requests:
            self.registry.note(self.now, "orphan-response", msgId=env.msg_id, correlationId=env.correlation_id)
            return
        conv = self._convs.get(env.correlation_id)
        if isinstance(conv, _Loc):
            self._on_loc_response(conv, env)
        elif isinstance(conv, _Gather):
            self._on_gather_response(conv, env)
        elif env.kind is K.DATA_CHANGE_ACK:
            cb = self._dc_waiters.pop(env.correlation_id, None)
            if cb:
                cb(dict(env.payload))

    # --- scenario events ------------------------------------------------

    def on_scenario_event(self, ev: dict):
        kind = ev["type"]
        if kind == "fault":
            alarm = self.truth.fail(ev["component"], self.now, ev.get("alarm", True), ev.get("symptom", "down"))
            if alarm is not None:
                self._alarm_raised(alarm)
                self._open_record(alarm.domain, RoleKind.DMS, [self._alarm_symptom(alarm)], None)
        elif kind == "false-alarm":
            alarm = self.truth.raise_false_alarm(ev["domain"], self.now, ev.get("symptom", "down"),
                                                 ev.get("component"), ev.get("service"))
            self._alarm_raised(alarm)
            if ev.get("until") is not None:
                self._timer(ev["until"], "false-alarm-end", lambda a=alarm: self._expire_false_alarm(a.alarm_id))
            self._open_record(alarm.domain, RoleKind.DMS, [self._alarm_symptom(alarm)], ev.get("service"))
        elif kind == "repair":
            self._repair_component(ev["component"])
        elif kind == "degrade":
            self.truth.degrade(ev["part"], self.now, ev.get("until"), ev.get("delta", {}))
        elif kind == "customer-report":
            self._customer_report(ev["customer"], ev["service"], ev.get("symptom", "degraded"))
        elif kind == "use-case":
            self._scripted_use_case(ev)
        elif kind == "data-change":
            self._scripted_data_change(ev)
        elif kind == "subscribe":
            self.begin_subscribe(ev["subscriber"], ev["publisher"], ev["topic"], on_done=lambda _: None)

    def _expire_false_alarm(self, alarm_id):
        alarm = self.truth.clear_false_alarm(alarm_id)
        if alarm is not None:
            self._alarm_cleared(alarm)

    def _alarm_symptom(self, alarm) -> Symptom:
        return Symptom(kind=alarm.kind, reported_by=alarm.domain, reported_at=alarm.raised_at,
                       component=alarm.component, service=alarm.service, alarm=alarm.alarm_id)

    def _alarm_raised(self, alarm):
        self.registry.note(self.now, "alarm-raised", domain=alarm.domain, alarm=alarm.to_dict())
        self._publish(alarm.domain, Topic.MONITORING, self._pub(alarm.domain, Topic.MONITORING)
                      .set(alarm.alarm_id, alarm.to_dict()))

    def _alarm_cleared(self, alarm):
        self.registry.note(self.now, "alarm-cleared", domain=alarm.domain, alarmId=alarm.alarm_id)
        self._publish(alarm.domain, Topic.MONITORING, self._pub(alarm.domain, Topic.MONITORING)
                      .delete(alarm.alarm_id))

    def _repair_component(self, component: str) -> bool:
        repaired, alarm = self.truth.repair(component, self.now)
        if alarm is not None:
            self._alarm_cleared(alarm)
        return repaired

    def dms_alarms(self, domain: str) -> list[dict]:
        """Current alarm set of a domain's monitoring system."""
        return sorted((a.to_dict() for a in dms_observe(self.truth, domain, self.now)), key=lambda a: a["alarmId"])

    # --- intake and L01 -------------------------------------------------

    def _next_fault_id(self) -> str:
        self._fault_seq += 1
        return f"F{self._fault_seq:04d}"

    def _open_record(self, origin: str, reporter: RoleKind, symptoms, service, localize: bool = True):
        actor = self.roles.binding(origin, RoleKind.DMS if reporter is RoleKind.DMS else RoleKind.DFM)
        rec = new_record(self._next_fault_id(), origin, reporter, symptoms, service, self.now, actor)
        self._mutate(rec)
        if localize:
            self._l01(rec.fault_id)
        return self.registry.get(rec.fault_id)

    def report_fault(self, domain: str, symptoms, service: str | None = None,
                     reporter: RoleKind = RoleKind.DMS, localize: bool = True) -> FaultRecord:
        """Enter a fault record at ``domain`` directly, as its monitoring system or users would."""
        if domain not in self.net.domains:
            raise InvalidReference(f"unknown domain {domain!r}")
        if service is not None and service not in self.net.services:
            raise InvalidReference(f"unknown service {service!r}")
        return self._open_record(domain, RoleKind(reporter), list(symptoms), service, localize)

    def _customer_report(self, customer: str, service: str, symptom: str) -> FaultRecord:
        svc = self.net.services.get(service)
        if svc is None:
            raise InvalidReference(f"unknown service {service!r}")
        if customer not in svc.customers:
            raise InvalidReference(f"{customer!r} does not use service {service!r}")
        window = self.th["dedupTicks"]
        for rec in self.registry.for_service(service):
            if rec.state is S.CLOSED or self.now - rec.created_at > window:
                continue
            if any(s.service == service and s.kind == symptom for s in rec.symptoms):
                extra = Symptom(kind=symptom, reported_by=customer, reported_at=self.now, service=service)
                rec = self._mutate(attach_symptoms(rec, [extra], self._dfm(rec.origin_domain), self.now))
                self.registry.note(self.now, "dedup", faultId=rec.fault_id, customer=customer, service=service)
                return rec
        sym = Symptom(kind=symptom, reported_by=customer, reported_at=self.now, service=service)
        return self._open_record(svc.owner, RoleKind.USER, [sym], service)

    def open_fault_report(self, customer: str, service: str, symptom: str = "degraded",
                          tick: int | None = None) -> FaultRecord:
        """Customer-facing trouble report; starts L01 at the service owner."""
        if tick is None or tick == self.now:
            return self._customer_report(customer, service, symptom)
        if tick < self.now:
            raise OrderingError(f"report tick {tick} precedes current tick {self.now}")
        self._guard_sync()
        box = []
        self.sim.scheduler.schedule(tick, "customer-report", {"customer": customer},
                                    lambda ev: box.append(self._customer_report(customer, service, symptom)))
        self.sim.drive(lambda: bool(box))
        return box[0]

    def search_candidates(self, rec: FaultRecord, domain: str) -> list[str]:
        """Components of ``domain`` a DFO inspects for ``rec``."""
        owned = set(self.net.components_by_domain.get(domain, ()))
        named = {s.component for s in rec.symptoms if s.component} & owned
        cands = set(named)
        if rec.suspected_service:
            cands |= self.net.service_components(rec.suspected_service) & owned
        elif not any(s.component for s in rec.symptoms):
            cands = owned
        return sorted(cands)

    def _dfo_search(self, domain: str, rec: FaultRecord, use_case: str) -> str | None:
        cands = self.search_candidates(rec, domain)
        hits = [c for c in cands if self.truth.is_failed(c)]
        found = hits[0] if hits else None
        self.registry.note(self.now, "dfo-task", domain=domain, faultId=rec.fault_id, task="search",
                           useCase=use_case, candidates=len(cands), result=found)
        return found

    def _known_error(self, domain: str, rec: FaultRecord) -> str | None:
        for s in rec.symptoms:
            target = s.component or s.service
            comp = self.known.get((domain, target, s.kind))
            if comp is not None:
                return comp
        return None

    def _l01(self, fault_id: str) -> LocalizationOutcome:
        rec = self.registry.get(fault_id)
        d = rec.origin_domain
        dfm = self._dfm(d)
        rec = self._mutate(transition(rec, S.LOCALIZING, dfm, self.now, {"useCase": "L01"}))
        self._cover("L01", P.DETECTION, "intake")
        comp = self._known_error(d, rec)
        via = "known-error"
        if comp is None:
            self._cover("L01", P.ISOLATION, "local-search")
            comp = self._dfo_search(d, rec, "L01")
            via = "dfo-search"
        self._searched[fault_id] = {d}
        if comp is not None:
            self._isolate(rec, d, comp, dfm, "L01", via)
            self._learned_isolation(fault_id, d, 1)
            return self._record_outcome(self.registry.get(fault_id), "isolated", "L01", d, comp)
        if self.auto["handoff"]:
            self._handoff(rec)
        return LocalizationOutcome(fault_id, "handed-off" if self.auto["handoff"] else "unresolved",
                                   self.now, "L01", elapsed_ticks=self.now - rec.created_at)

    def localize_own_domain(self, fault_id: str) -> LocalizationOutcome:
        """L01 on a record entered without automatic localization."""
        rec = self.registry.get(fault_id)
        if rec.state is not S.DETECTED:
            raise PreconditionError(f"fault {fault_id} is {rec.state.value}, L01 needs Detected")
        if rec.reporter_role not in (RoleKind.USER, RoleKind.DMS):
            raise PreconditionError(f"fault {fault_id} was not reported by a user or monitoring system")
        return self._l01(fault_id)

    def _isolate(self, rec: FaultRecord, domain: str, comp: str, actor: RoleBinding, use_case: str,
                 via: str) -> FaultRecord:
        rec = self._mutate(transition(rec, S.ISOLATED, actor, self.now,
                                      {"domain": domain, "component": comp, "useCase": use_case, "via": via}))
        if rec.is_false_positive is FalsePositiveStatus.UNKNOWN:
            rec = self._mutate(set_false_positive(rec, FalsePositiveStatus.CONFIRMED_REAL, actor, self.now))
        return rec

    # --- handoff, L02, L03 ----------------------------------------------

    def involved(self, rec: FaultRecord) -> frozenset[str]:
        if rec.suspected_service:
            return involved_domains(self.net, rec.suspected_service)
        doms = {self.net.components[s.component].owner for s in rec.symptoms
                if s.component in self.net.components}
        return frozenset(doms | {rec.origin_domain})

    def _route(self, rec: FaultRecord) -> str:
        if not self.matrix["L02"]:
            return "L03"
        if not self.matrix["L03"]:
            return "L02"
        svc = self.net.services.get(rec.suspected_service) if rec.suspected_service else None
        if svc is None or svc.delivery_mode is DeliveryMode.HETERARCHICAL:
            return "L02"
        return "L03"

    def _gfcm(self, rec: FaultRecord) -> RoleBinding:
        current = self.roles.gfcm_for(rec.fault_id)
        if current is not None:
            return current
        binding = self.roles.open_tenure(assign_gfcm(self.net, self.roles.policy, rec, self.now), self.now)
        self.registry.note(self.now, "gfcm-tenure", event="open", faultId=rec.fault_id, domain=binding.domain)
        return binding

    def _handoff(self, rec: FaultRecord, use_case: str | None = None):
        try:
            gfcm = self._gfcm(rec)
        except TopologyError as exc:
            self.registry.note(self.now, "handoff-failed", faultId=rec.fault_id, reason=str(exc))
            return
        if use_case is None and rec.reporter_role is RoleKind.DMS and self.matrix["F01"] and self.auto["falsePositives"]:
            self.begin_false_positive_check(rec.fault_id, on_done=lambda _: None, then_localize=True)
            return
        use_case = use_case or self._route(rec)
        adapter = self.sc.adapter_for(rec.origin_domain)
        doc = convert_outbound(adapter, rec)
        self._send(K.FAULT_REPORT, rec.origin_domain, gfcm.domain,
                   {"faultId": rec.fault_id, "useCase": use_case, "format": adapter.format_id,
                    "document": doc.data, "dropped": list(doc.dropped)}, fault_id=rec.fault_id)

    def _on_fault_report(self, env):
        p = env.payload
        fid = p["faultId"]
        try:
            adapter = self.sc.adapter_for(env.sender)
            inbound = convert_inbound(adapter, p["document"])
            if adapter.format_id == "canonical" and inbound.fault_id != fid:
                raise ConversionError(f"report names fault {inbound.fault_id!r}, envelope says {fid!r}")
        except (ConversionError, IntegrityError) as exc:
            self.registry.note(self.now, "conversion-error", faultId=fid, msgId=env.msg_id, error=str(exc))
            return
        rec = self.registry.get(fid)
        gfcm = self._gfcm(rec)
        use_case = p["useCase"]
        self._cover(use_case, P.DETECTION, "report-received")
        if rec.state is not S.LOCALIZING:
            return
        if use_case == "L02":
            self._begin_l02(rec, gfcm)
        else:
            self._begin_l03_chain(rec, gfcm)

    def _loc_request(self, conv: _Loc, target: str):
        env = self._send(K.LOCALIZATION_REQUEST, conv.gfcm.domain, target,
                         {"faultId": conv.fault_id, "useCase": conv.use_case}, fault_id=conv.fault_id)
        self._convs[env.msg_id] = conv
        conv.asked.add(target)
        return env

    def _begin_l02(self, rec: FaultRecord, gfcm: RoleBinding):
        searched = self._searched.get(rec.fault_id, set())
        conv = _Loc(rec.fault_id, "L02", gfcm)
        conv.targets = sorted(self.involved(rec) - searched)
        conv.on_done.extend(self._pending_attach.pop(rec.fault_id, []))
        self._locs[rec.fault_id] = conv
        T = self.th["isolateTicks"]
        for t in conv.targets:
            self._loc_request(conv, t)
        self._timer(rec.created_at + T // 2, "l02-level", lambda: self._l02_level2(conv))
        self._timer(rec.created_at + T, "l02-escalate", lambda: self._escalate(conv))
        if not conv.targets:
            self._l02_level2(conv)

    def _l02_level2(self, conv: _Loc):
        if conv.done or conv.escalated or conv.level != 1:
            return
        conv.level = 2
        searched = self._searched.get(conv.fault_id, set())
        negative = {d for d, found in conv.answered.items() if not found}
        wider = sorted(set(self.net.domains) - negative - searched)
        self.registry.note(self.now, "escalation-level", faultId=conv.fault_id, level=2, targets=len(wider))
        conv.targets = wider
        for t in wider:
            self._loc_request(conv, t)
        if not wider:
            self._escalate(conv)

    def _begin_l03_chain(self, rec: FaultRecord, gfcm: RoleBinding):
        searched = self._searched.get(rec.fault_id, set())
        if rec.suspected_service:
            order = self.net.delivery_order(rec.suspected_service)
        else:
            order = sorted(self.involved(rec))
        conv = _Loc(rec.fault_id, "L03", gfcm, targets=[d for d in order if d not in searched])
        conv.on_done.extend(self._pending_attach.pop(rec.fault_id, []))
        self._locs[rec.fault_id] = conv
        self._timer(rec.created_at + self.th["isolateTicks"], "l03-escalate", lambda: self._escalate(conv))
        self._l03_next(conv)

    def _l03_next(self, conv: _Loc):
        if conv.done or conv.escalated:
            return
        if conv.idx >= len(conv.targets):
            self._escalate(conv)
            return
        target = conv.targets[conv.idx]
        conv.idx += 1
        self._cover("L03", P.ISOLATION, "targeted-request")
        env = self._loc_request(conv, target)
        conv.hop = env.msg_id
        self._timer(self.now + self.th["queryTicks"], "l03-hop",
                    lambda m=env.msg_id: self._l03_next(conv) if conv.hop == m else None)

    def _escalate(self, conv: _Loc):
        if conv.done or conv.escalated or conv.explicit:
            return
        rec = self.registry.get(conv.fault_id)
        if rec.state is not S.LOCALIZING:
            return
        conv.escalated = True
        rec = self._mutate(transition(rec, S.ESCALATED, conv.gfcm, self.now, {"useCase": conv.use_case}))
        svc = self.net.services.get(rec.suspected_service) if rec.suspected_service else None
        receiver = svc.owner if svc else rec.origin_domain
        self._send(K.ESCALATION_NOTICE, conv.gfcm.domain, receiver,
                   {"faultId": rec.fault_id, "useCase": conv.use_case, "asked": sorted(conv.asked)},
                   fault_id=rec.fault_id)
        if conv.use_case == "L02":
            self._cover("L02", P.FORECAST_PREVENTION, "escalation")
        o = self._record_outcome(rec, "escalated", conv.use_case)
        for cb in conv.on_done:
            cb(o)

    def _on_escalation_notice(self, env):
        self.registry.note(self.now, "escalation-notice", faultId=env.payload["faultId"], receiver=env.receiver)

    def _on_loc_request(self, env):
        fid = env.payload["faultId"]
        rec = self.registry.get(fid)
        found = self._dfo_search(env.receiver, rec, env.payload["useCase"])
        self._reply(env, K.LOCALIZATION_RESPONSE, {"faultId": fid, "found": found is not None, "component": found},
                    fault_id=fid)

    def _on_loc_response(self, conv: _Loc, env):
        p = env.payload
        target = env.sender
        conv.answered[target] = p["found"]
        if conv.done:
            return
        rec = self.registry.get(conv.fault_id)
        if p["found"]:
            if rec.state not in (S.LOCALIZING, S.ESCALATED):
                return
            conv.done = True
            conv.hop = None
            rec = self._isolate(rec, target, p["component"], conv.gfcm, conv.use_case, "coordinator")
            notify = set(conv.asked) if conv.use_case == "L02" else {target}
            if rec.origin_domain != conv.gfcm.domain:
                notify.add(rec.origin_domain)
            for d in sorted(notify):
                self._send(K.NOTIFY, conv.gfcm.domain, d,
                           {"topic": _NOTIFY_FAULT, "faultId": rec.fault_id, "event": "isolated",
                            "domain": target, "component": p["component"]}, fault_id=rec.fault_id)
            if conv.use_case == "L02":
                self._cover("L02", P.FORECAST_PREVENTION, "dissemination")
            o = self._record_outcome(rec, "isolated", conv.use_case, target, p["component"])
            for cb in conv.on_done:
                cb(o)
            return
        if conv.explicit:
            conv.done = True
            o = self._record_outcome(rec, "unresolved", "L03", target)
            for cb in conv.on_done:
                cb(o)
            return
        if conv.escalated:
            return
        if conv.use_case == "L03":
            if env.correlation_id == conv.hop:
                self._l03_next(conv)
        elif all(t in conv.answered and not conv.answered[t] for t in conv.targets):
            if conv.level == 1:
                self._l02_level2(conv)
            else:
                self._escalate(conv)

    def begin_localize_undefined_domain(self, fault_id: str, on_done):
        require(self.net, "L02")
        rec = self.registry.get(fault_id)
        if rec.state is not S.LOCALIZING:
            raise PreconditionError(f"fault {fault_id} is {rec.state.value}, L02 needs Localizing")
        active = self._locs.get(fault_id)
        if active is not None and not (active.done or active.escalated):
            raise PreconditionError(f"fault {fault_id} already has a localization in progress")
        self._searched.setdefault(fault_id, {rec.origin_domain})
        self._after_conv(fault_id, on_done)
        self._handoff(rec, "L02")

    def _after_conv(self, fault_id, on_done):
        # the conversation only exists once the fault report reaches the coordinator
        self._pending_attach.setdefault(fault_id, []).append(on_done)

    def localize_undefined_domain(self, fault_id: str) -> LocalizationOutcome:
        return self._sync(self.begin_localize_undefined_domain, fault_id)

    def begin_localize_specific_domain(self, fault_id: str, target: str, on_done):
        require(self.net, "L03")
        rec = self.registry.get(fault_id)
        if target not in self.involved(rec):
            raise ScopeError(f"{target!r} is not involved in fault {fault_id}")
        if rec.state not in (S.LOCALIZING, S.ESCALATED):
            raise PreconditionError(f"fault {fault_id} is {rec.state.value}, L03 needs Localizing")
        gfcm = self._gfcm(rec)
        conv = _Loc(fault_id, "L03", gfcm, explicit=True, targets=[target])
        conv.on_done.append(on_done)
        self._cover("L03", P.ISOLATION, "targeted-request")
        env = self._loc_request(conv, target)
        conv.hop = env.msg_id

        def timeout():
            if not conv.done:
                conv.done = True
                on_done(self._record_outcome(self.registry.get(fault_id), "unresolved", "L03", target))
        self._timer(self.now + self.th["queryTicks"], "l03-explicit", timeout)

    def localize_specific_domain(self, fault_id: str, target: str) -> LocalizationOutcome:
        return self._sync(self.begin_localize_specific_domain, fault_id, target)

    # --- repair automation ----------------------------------------------

    def _on_notify(self, env):
        p = env.payload
        if p.get("topic") == _NOTIFY_FAULT:
            if p.get("domain") == env.receiver:
                self._learned_isolation(p["faultId"], env.receiver, 0)
            return
        view = self.views.setdefault(env.receiver, SubscriberView())
        view.apply(env, self.now)
        if p.get("op") == "snapshot":
            key = (env.receiver, p["publisher"], p["topic"])
            for cb in self._sub_waiters.pop(key, []):
                cb(view.state(p["publisher"], p["topic"]))

    def _learned_isolation(self, fault_id: str, domain: str, delay: int):
        if not self.auto["repair"] or fault_id in self._repair_started:
            return
        rec = self.registry.get(fault_id)
        if rec.state is not S.ISOLATED or rec.isolated_at[0] != domain:
            return
        self._repair_started.add(fault_id)
        self._timer(self.now + delay, "repair-start", lambda: self._start_repair(fault_id))

    def _start_repair(self, fault_id: str):
        rec = self.registry.get(fault_id)
        if rec.state is not S.ISOLATED:
            return
        domain, comp = rec.isolated_at
        self._mutate(transition(rec, S.REPAIRING, self._dfo(domain), self.now, {"component": comp}))
        self._timer(self.now + self.th["repairTicks"], "repair-done", lambda: self._finish_repair(fault_id))

    def _finish_repair(self, fault_id: str):
        rec = self.registry.get(fault_id)
        domain, comp = rec.isolated_at
        self._repair_component(comp)
        rec = self._mutate(transition(rec, S.RESOLVED, self._dfo(domain), self.now, {"component": comp}))
        self._timer(self.now + self.th["closeTicks"], "close", lambda: self._close_resolved(fault_id))

    def _close_resolved(self, fault_id: str):
        rec = self.registry.get(fault_id)
        if rec.state is S.RESOLVED:
            self._mutate(transition(rec, S.CLOSED, self._dfm(rec.isolated_at[0]), self.now))

    # --- gather conversations (P, M, R, F01) -----------------------------

    def _gather(self, use_case, kind, requester, targets, payload, on_done, fault_id=None, **extra) -> _Gather:
        conv = _Gather(use_case, requester, list(targets), on_done, self.now, extra=extra)
        for t in conv.targets:
            env = self._send(kind, requester, t, payload, fault_id=fault_id)
            self._convs[env.msg_id] = conv
            conv.pending[env.msg_id] = t
        if not conv.targets:
            self._finish_gather(conv)
        else:
            self._timer(self.now + self.th["queryTicks"], f"{use_case}-timeout", lambda: self._finish_gather(conv))
        return conv

    def _on_gather_response(self, conv: _Gather, env):
        target = conv.pending.get(env.correlation_id)
        if conv.done or target is None:
            self.registry.note(self.now, "late-response", msgId=env.msg_id, correlationId=env.correlation_id)
            return
        conv.replies[target] = dict(env.payload)
        conv.received[target] = self.now
        if len(conv.replies) == len(conv.targets):
            self._finish_gather(conv)

    def _finish_gather(self, conv: _Gather):
        if conv.done:
            return
        conv.done = True
        conv.on_done(conv)

    def _targets(self, target) -> list[str]:
        if target in (None, "all"):
            return sorted(self.net.domains)
        if target not in self.net.domains:
            raise InvalidReference(f"unknown domain {target!r}")
        return [target]

    def _acting_domain(self, requester: str, service: str | None = None) -> tuple[str, str | None]:
        """Domain acting for ``requester``; customers are served by their provider's DFM."""
        if requester in self.net.domains:
            return requester, None
        if requester in self.net.customers:
            used = sorted(s.id for s in self.net.service_list if requester in s.customers)
            if service is not None and service not in used:
                raise InvalidReference(f"{requester!r} does not use service {service!r}")
            owner = self.net.services[service or used[0]].owner
            return owner, owner
        raise InvalidReference(f"unknown requester {requester!r}")

    def _stale(self, conv: _Gather) -> list[str]:
        max_age = self.th.get("maxAge")
        return sorted(t for t, r in conv.replies.items()
                      if protocol.is_stale(r.get("asOf", conv.received[t]), conv.received[t], max_age))

    def _log_use_case(self, ev_tick: int, use_case: str, requester, result=None, error=None):
        entry = {"tick": ev_tick, "completedAt": self.now, "useCase": use_case, "requester": requester}
        if error is not None:
            entry["error"] = {"type": type(error).__name__, "message": str(error)}
        else:
            entry["result"] = result
        self.use_case_log.append(entry)

    # P01 / P02

    def begin_progress_query(self, scope: str, requester: str, on_done, target="all", service=None):
        use_case = {"fault-resolution": "P01", "maintenance": "P02"}[scope]
        acting, forwarded = self._acting_domain(requester, service)
        gfcm = self.roles.gfcm_domains()
        denied, allowed = [], []
        for t in self._targets(target):
            (allowed if check_access(self.policy, acting, t, Capability.QUERY_PROGRESS, gfcm) else denied).append(t)
        self._cover(use_case, P.REPAIR, "progress-query")
        tick = self.now

        def done(conv):
            res = UseCaseResult(use_case, requester, tick, forwarded_by=forwarded, denied=denied)
            for t in conv.targets:
                if t in conv.replies:
                    res.entries[t] = conv.replies[t]
                else:
                    res.missing.append(t)
            res.stale = self._stale(conv)
            on_done(res)
        self._gather(use_case, K.PROGRESS_QUERY, acting, allowed, {"scope": scope}, done)

    def progress_query(self, scope: str, requester: str, target="all", service=None) -> UseCaseResult:
        return self._sync(self.begin_progress_query, scope, requester, target=target, service=service)

    def _on_progress_query(self, env):
        scope = env.payload["scope"]
        faults = []
        for rec in self.registry.related(env.receiver):
            if scope == "maintenance" and rec.state not in (S.REPAIRING, S.RESOLVED):
                continue
            entry = {"faultId": rec.fault_id, "state": rec.state.value, "since": rec.history[-1].tick}
            for h in rec.history:
                if h.kind == "transition" and h.to_state is rec.state:
                    entry["since"] = h.tick
            if scope == "maintenance":
                started = rec.transition_tick(S.REPAIRING)
                entry["repairStarted"] = started
                entry["expectedDone"] = started + self.th["repairTicks"]
            faults.append(entry)
        self._reply(env, K.PROGRESS_RESPONSE, {"asOf": self.now, "faults": faults})

    # M01 / M02 / M03

    def begin_monitor(self, scope: str, requester: str, on_done, target=None, service=None):
        gfcm = self.roles.gfcm_domains()
        allowed_fn = lambda t: check_access(self.policy, requester, t, Capability.MONITOR, gfcm)  # noqa: E731
        if requester not in self.net.domains:
            raise AccessDenied(f"{requester!r} is not a provider domain")
        denied: list[str] = []
        if scope == "domain":
            use_case = "M01"
            target = target or requester
            if target not in self.net.domains:
                raise InvalidReference(f"unknown domain {target!r}")
            if not allowed_fn(target):
                raise AccessDenied(f"{requester} may not monitor {target}")
            targets = [target]
        elif scope == "overall":
            use_case = "M02"
            require(self.net, "M02")
            if requester not in gfcm and not all(allowed_fn(t) for t in self.net.domains):
                raise AccessDenied(f"{requester} neither holds the GFCM role nor monitor grants on every domain")
            targets = sorted(self.net.domains)
        elif scope == "service":
            use_case = "M03"
            if service not in self.net.services:
                raise InvalidReference(f"unknown service {service!r}")
            targets = []
            for t in sorted(involved_domains(self.net, service)):
                (targets if allowed_fn(t) else denied).append(t)
        else:
            raise ValueError(f"unknown monitoring scope {scope!r}")
        tick = self.now

        def done(conv):
            res = UseCaseResult(use_case, requester, tick, denied=denied)
            phases = set()
            for t in conv.targets:
                if t not in conv.replies:
                    res.missing.append(t)
                    continue
                r = conv.replies[t]
                res.entries[t] = r
                if r["alarms"]:
                    phases.add(P.DETECTION)
                phases.update(phase_of(S(s)) for s, n in r["faults"].items() if n)
            res.stale = self._stale(conv)
            for ph in sorted(phases, key=list(P).index):
                self._cover(use_case, ph, "view")
            on_done(res)
        self._gather(use_case, K.MONITOR_QUERY, requester, targets, {"scope": scope}, done)

    def monitor(self, scope: str, requester: str, target=None, service=None) -> UseCaseResult:
        return self._sync(self.begin_monitor, scope, requester, target=target, service=service)

    def _on_monitor_query(self, env):
        counts = Counter(r.state.value for r in self.registry.related(env.receiver))
        self._reply(env, K.MONITOR_RESPONSE, {"asOf": self.now, "alarms": self.dms_alarms(env.receiver),
                                              "faults": dict(sorted(counts.items()))})

    # R01 / R02 / R03

    def begin_report(self, kind: str, window, requester: str, on_done):
        use_case = {"statistics": "R01", "qos": "R02", "trend": "R03"}[kind]
        window = reports.check_window(window)
        if requester not in self.net.domains:
            raise AccessDenied(f"reports are requested by provider domains, not {requester!r}")
        if kind == "qos":
            wanted = sorted({self.net.parts[p].provider for s in self.slas for p in reports.service_chain(self.net, s.service)})
        else:
            wanted = sorted(self.net.domains)
        gfcm = self.roles.gfcm_domains()
        allowed, denied = [], []
        for t in wanted:
            (allowed if check_access(self.policy, requester, t, Capability.REPORT_DATA, gfcm) else denied).append(t)
        tick = self.now

        def done(conv):
            replies = conv.replies
            if kind == "statistics":
                data = reports.statistics_report(wanted, {t: r["row"] for t, r in replies.items()}, window, denied)
                self._cover("R01", P.DETECTION, "statistics")
                self._cover("R01", P.FORECAST_PREVENTION, "statistics")
            elif kind == "qos":
                metrics = {}
                for r in replies.values():
                    metrics.update({pid: _mv(m) for pid, m in r["parts"].items()})
                data = reports.qos_report(self.net, self.slas, metrics, window, denied)
                data["missing"] = [t for t in allowed if t not in replies]
                self._cover("R02", P.DETECTION, "qos")
                self._cover("R02", P.FORECAST_PREVENTION, "qos")
            else:
                data = reports.trend_report(wanted, {t: r["points"] for t, r in replies.items()},
                                            self.th["trendThreshold"], window, denied)
                self._cover("R03", P.FORECAST_PREVENTION, "trend")
            res = UseCaseResult(use_case, requester, tick, denied=denied, data=data,
                                missing=[t for t in allowed if t not in replies])
            res.stale = self._stale(conv)
            on_done(res)
        self._gather(use_case, K.REPORT_REQUEST, requester, allowed, {"kind": kind, "window": list(window)}, done)

    def report(self, kind: str, window, requester: str) -> UseCaseResult:
        return self._sync(self.begin_report, kind, window, requester)

    def _on_report_request(self, env):
        kind, window, d = env.payload["kind"], env.payload["window"], env.receiver
        body = {"asOf": self.now, "kind": kind}
        if kind == "statistics":
            body["row"] = reports.domain_statistics(d, self.registry.related(d), self.sim.trace, window)
        elif kind == "qos":
            body["parts"] = {p.id: self.part_metrics(p.id, window).to_dict()
                             for p in self.net.part_list if p.provider == d}
        else:
            body["points"] = [list(p) for p in reports.bucket_counts(self.registry.related(d), d, window,
                                                                     self.th["trendBucket"])]
        self._reply(env, K.REPORT_RESPONSE, body)

    def part_metrics(self, part_id: str, window):
        part = self.net.parts[part_id]
        return reports.measured_part_metrics(part_id, part.metrics, part.realized_by, self.truth.failure_log,
                                             self.truth.degradations, window)

    # F01 / F02

    def begin_false_positive_check(self, fault_id: str, on_done, requester: str | None = None,
                                   then_localize: bool = False):
        require(self.net, "F01")
        rec = self.registry.get(fault_id)
        if rec.is_false_positive is not FalsePositiveStatus.UNKNOWN:
            on_done(rec.is_false_positive)
            return
        gfcm = self.roles.gfcm_for(fault_id)
        actor = gfcm or self._dfm(rec.origin_domain)
        asker = requester or actor.domain
        owners = sorted({self.net.components[s.component].owner for s in rec.symptoms
                         if s.component in self.net.components})
        responsible = owners or sorted(self.involved(rec))
        self._cover("F01", P.ISOLATION, "query")

        def done(conv):
            cur = self.registry.get(fault_id)
            if cur.is_false_positive is not FalsePositiveStatus.UNKNOWN:
                on_done(cur.is_false_positive)
                return
            if any(r["deviates"] for r in conv.replies.values()):
                status = FalsePositiveStatus.CONFIRMED_REAL
            elif len(conv.replies) == len(conv.targets):
                status = FalsePositiveStatus.CONFIRMED_FALSE
            else:
                self.registry.note(self.now, "fp-undetermined", faultId=fault_id,
                                   missing=[t for t in conv.targets if t not in conv.replies])
                on_done(FalsePositiveStatus.UNKNOWN)
                return
            cur = self._mutate(set_false_positive(cur, status, actor, self.now))
            self._cover("F01", P.FORECAST_PREVENTION, "result-recorded")
            if status is FalsePositiveStatus.CONFIRMED_FALSE and cur.state is S.LOCALIZING:
                cur = self._mutate(transition(cur, S.FALSE_POSITIVE, actor, self.now, {"useCase": "F01"}))
                self._record_outcome(cur, "false-positive", "F01")
                if self.auto["falsePositives"] and self.matrix["F02"]:
                    self.false_positive_remove(fault_id)
            elif then_localize and status is FalsePositiveStatus.CONFIRMED_REAL and cur.state is S.LOCALIZING:
                self._handoff(cur, self._route(cur))
            on_done(status)
        self._gather("F01", K.FALSE_POSITIVE_QUERY, asker, responsible, {"faultId": fault_id}, done,
                     fault_id=fault_id)

    def false_positive_check(self, fault_id: str, requester: str | None = None) -> FalsePositiveStatus:
        return self._sync(self.begin_false_positive_check, fault_id, requester=requester)

    def _on_fp_query(self, env):
        fid = env.payload["faultId"]
        rec = self.registry.get(fid)
        cands = self.search_candidates(rec, env.receiver)
        deviates = any(self.truth.is_failed(c) for c in cands)
        self.registry.note(self.now, "dfo-task", domain=env.receiver, faultId=fid, task="check",
                           useCase="F01", candidates=len(cands), result=deviates)
        self._reply(env, K.FALSE_POSITIVE_RESPONSE, {"faultId": fid, "deviates": deviates}, fault_id=fid)

    def false_positive_remove(self, fault_id: str, actor: RoleBinding | None = None) -> FaultRecord:
        """F02: the origin's DFO closes a confirmed false positive and clears its alarm."""
        require(self.net, "F02")
        rec = self.registry.get(fault_id)
        if rec.is_false_positive is not FalsePositiveStatus.CONFIRMED_FALSE or rec.state is not S.FALSE_POSITIVE:
            raise PreconditionError(f"fault {fault_id} has not been confirmed as a false positive")
        actor = actor or self._dfo(rec.origin_domain)
        for s in rec.symptoms:
            if s.alarm:
                alarm = self.truth.clear_false_alarm(s.alarm)
                if alarm is not None:
                    self._alarm_cleared(alarm)
                    self._cover("F02", P.REPAIR, "alarm-removed")
        rec = self._mutate(transition(rec, S.CLOSED, actor, self.now, {"useCase": "F02"}))
        self._cover("F02", P.FORECAST_PREVENTION, "closed")
        self.registry.note(self.now, "fp-removed", faultId=fault_id, domain=rec.origin_domain,
                           reportedTo=self._dfm(rec.origin_domain).role.value)
        return rec

    # FM-02

    def data_change(self, fault_id: str, patch: dict, actor: str) -> FaultRecord:
        """Change mutable fault data; only the fault's acting GFCM may do so."""
        rec = self.registry.get(fault_id)
        gfcm = self.roles.gfcm_for(fault_id)
        if gfcm is None or gfcm.domain != actor:
            raise AccessDenied(f"{actor!r} does not coordinate fault {fault_id} and may not change its data")
        if rec.state is S.DETECTED:
            raise PreconditionError(f"fault {fault_id} has not been taken up yet")
        phase = rec.phase
        new = apply_patch(rec, patch, gfcm, self.now)
        new = self._mutate(new, "data-change", useCase="FM-02", before=rec.integrity_tag, after=new.integrity_tag)
        self._cover("FM-02", phase, "data-change")
        return new

    def begin_data_change_request(self, fault_id: str, patch: dict, requester: str, on_done):
        rec = self.registry.get(fault_id)
        gfcm = self.roles.gfcm_for(fault_id)
        if gfcm is None:
            raise AccessDenied(f"fault {fault_id} has no acting coordinator")
        env = self._send(K.DATA_CHANGE_REQUEST, requester, gfcm.domain, {"faultId": rec.fault_id, "patch": patch})
        self._dc_waiters[env.msg_id] = on_done

    def request_data_change(self, fault_id: str, patch: dict, requester: str) -> dict:
        return self._sync(self.begin_data_change_request, fault_id, patch, requester)

    def _on_data_change_request(self, env):
        fid, patch = env.payload["faultId"], env.payload["patch"]
        try:
            rec = self.data_change(fid, patch, env.receiver)
            body = {"faultId": fid, "accepted": True, "digest": rec.integrity_tag}
        except IoFMError as exc:
            body = {"faultId": fid, "accepted": False, "error": type(exc).__name__}
        self._reply(env, K.DATA_CHANGE_ACK, body)

    # FM-01

    def export_plot_data(self, requester: str | None = None) -> dict:
        """Machine-readable material for plotting: alarms, localization outcomes and reports."""
        data = {
            "alarms": {d: self.dms_alarms(d) for d in sorted(self.net.domains)},
            "outcomes": [o.to_dict() for o in self.outcomes],
            "reports": [e for e in self.use_case_log if e["useCase"] in ("R01", "R02", "R03") and "result" in e],
        }
        if any(data["alarms"].values()):
            self._cover("FM-01", P.DETECTION, "alarms")
        if data["outcomes"]:
            self._cover("FM-01", P.ISOLATION, "outcomes")
        if data["reports"]:
            self._cover("FM-01", P.FORECAST_PREVENTION, "reports")
        self.registry.note(self.now, "plot-export", requester=requester, sections=sorted(data))
        return data

    # --- subscriptions --------------------------------------------------

    def _pub(self, domain: str, topic: Topic) -> PublishedState:
        return self.published.setdefault((domain, Topic(topic)), PublishedState())

    def _publish(self, domain: str, topic: Topic, delta: dict | None):
        if delta is None or not len(self.subs):
            return
        for sub in self.subs.matching(domain, topic):
            payload = {"topic": Topic(topic).value, "publisher": domain, "stamp": self.now, **delta}
            self._send(K.NOTIFY, domain, sub.subscriber, payload)

    def _publish_fault(self, rec: FaultRecord):
        doms = {rec.origin_domain}
        if rec.isolated_at:
            doms.add(rec.isolated_at[0])
        for d in sorted(doms):
            self._publish(d, Topic.FAULT_STATUS, self._pub(d, Topic.FAULT_STATUS).set(rec.fault_id, rec.state.value))

    def begin_subscribe(self, subscriber: str, publisher: str, topic, on_done):
        topic = Topic(topic)
        self._sub_waiters.setdefault((subscriber, publisher, topic.value), []).append(on_done)
        self._send(K.SUBSCRIBE, subscriber, publisher, {"topic": topic.value})

    def subscribe(self, subscriber: str, publisher: str, topic) -> dict:
        return self._sync(self.begin_subscribe, subscriber, publisher, topic)

    def _on_subscribe(self, env):
        topic = Topic(env.payload["topic"])
        sub = Subscription(env.sender, env.receiver, topic, self.now)
        if sub.key in self.subs:
            self.registry.note(self.now, "duplicate-subscription", subscriber=env.sender, publisher=env.receiver,
                               topic=topic.value)
            return
        self.subs.add(sub)
        state = self._pub(env.receiver, topic)
        self._send(K.NOTIFY, env.receiver, env.sender,
                   {"topic": topic.value, "publisher": env.receiver, "stamp": self.now, "op": "snapshot",
                    "values": dict(state.values), "version": state.version})

    def subscriber_state(self, subscriber: str, publisher: str, topic) -> dict:
        view = self.views.get(subscriber)
        return view.state(publisher, topic) if view else {}

    def poll(self, requester: str, publisher: str, topic) -> dict:
        """Pull the publisher's current state through the matching query use case."""
        topic = Topic(topic)
        if topic is Topic.MONITORING:
            res = self.monitor("domain", requester, target=publisher)
            return {a["alarmId"]: a for a in res.entries.get(publisher, {}).get("alarms", [])}
        res = self.progress_query("fault-resolution", requester, target=publisher)
        return {f["faultId"]: f["state"] for f in res.entries.get(publisher, {}).get("faults", [])}

    # --- scripted use cases ---------------------------------------------

    def _pick_fault(self, ev: dict) -> str:
        if "faultId" in ev:
            return ev["faultId"]
        rule = ev.get("pick") or {}
        for rec in self.registry.all():
            if "state" in rule and rec.state.value != rule["state"]:
                continue
            if "origin" in rule and rec.origin_domain != rule["origin"]:
                continue
            if "reporter" in rule and rec.reporter_role.value != rule["reporter"]:
                continue
            return rec.fault_id
        raise InvalidReference(f"no fault matches {rule}")

    def _scripted_use_case(self, ev: dict):
        uc = ev["useCase"]
        requester = ev.get("requester")
        tick = self.now

        def done(result):
            if isinstance(result, (UseCaseResult, LocalizationOutcome)):
                result = result.to_dict()
            elif isinstance(result, FalsePositiveStatus):
                result = {"isFalsePositive": result.value}
            self._log_use_case(tick, uc, requester, result)
        try:
            if uc == "L01":
                done(self.localize_own_domain(self._pick_fault(ev)))
            elif uc == "L02":
                self.begin_localize_undefined_domain(self._pick_fault(ev), on_done=done)
            elif uc == "L03":
                self.begin_localize_specific_domain(self._pick_fault(ev), ev["target"], on_done=done)
            elif uc in ("P01", "P02"):
                scope = "fault-resolution" if uc == "P01" else "maintenance"
                self.begin_progress_query(scope, requester, done, target=ev.get("target", "all"),
                                          service=ev.get("service"))
            elif uc == "M01":
                self.begin_monitor("domain", requester, done, target=ev.get("target"))
            elif uc == "M02":
                self.begin_monitor("overall", requester, done)
            elif uc == "M03":
                self.begin_monitor("service", requester, done, service=ev.get("service"))
            elif uc in ("R01", "R02", "R03"):
                kind = {"R01": "statistics", "R02": "qos", "R03": "trend"}[uc]
                self.begin_report(kind, ev.get("window", [0, self.now]), requester, done)
            elif uc == "F01":
                self.begin_false_positive_check(self._pick_fault(ev), on_done=done, requester=requester)
            elif uc == "F02":
                done({"record": self.false_positive_remove(self._pick_fault(ev)).to_dict()["state"]})
            elif uc == "FM-01":
                data = self.export_plot_data(requester)
                done({"sections": sorted(data), "outcomes": len(data["outcomes"]), "reports": len(data["reports"])})
        except IoFMError as exc:
            log.info("scripted %s at tick %d failed: %s", uc, tick, exc)
            self._log_use_case(tick, uc, requester, error=exc)

    def _scripted_data_change(self, ev: dict):
        tick = self.now
        try:
            fid = self._pick_fault(ev)
            if ev.get("remote"):
                self.begin_data_change_request(fid, ev["patch"], ev["actor"],
                                               on_done=lambda ack: self._log_use_case(tick, "FM-02", ev["actor"], ack))
                return
            rec = self.data_change(fid, ev["patch"], ev["actor"])
            self._log_use_case(tick, "FM-02", ev["actor"], {"faultId": fid, "digest": rec.integrity_tag})
        except IoFMError as exc:
            self._log_use_case(tick, "FM-02", ev.get("actor"), error=exc)

    # --- results --------------------------------------------------------

    def qos_inputs(self) -> dict:
        return {
            "parts": {p.id: {"provider": p.provider, "components": list(p.realized_by), "metrics": p.metrics.to_dict()}
                      for p in self.net.part_list},
            "chains": {s.service: reports.service_chain(self.net, s.service) for s in self.slas},
            "slas": [s.to_dict() for s in self.slas],
            "failures": [dict(f) for f in self.truth.failure_log],
            "degradations": [dict(d) for d in self.truth.degradations],
        }

    def outcomes_data(self) -> dict:
        cov = observed_coverage(self.registry.audit)
        return {
            "scenario": self.sc.name,
            "seed": self.sc.seed,
            "topologyClass": self.net.topology_class.value,
            "domains": sorted(self.net.domains),
            "capabilities": self.matrix.to_dict()["supported"],
            "localization": [o.to_dict() for o in self.outcomes],
            "useCases": self.use_case_log,
            "coverage": {row: sorted(p.value for p in phases) for row, phases in cov.items()},
            "config": {"thresholds": self.th, "automation": self.auto},
            "qosInputs": self.qos_inputs(),
        }

    def outcomes_json(self) -> str:
        return json.dumps(canonical.normalize_top(self.outcomes_data()), indent=2, ensure_ascii=False) + "\n"


def _mv(d: dict):
    from ..faultmodel.metrics import MetricVector
    return MetricVector.from_dict(d)
