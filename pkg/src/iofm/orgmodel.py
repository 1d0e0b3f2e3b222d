"""Organizational model: roles, GFCM assignment and inter-domain access control."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

from .errors import PreconditionError
from .faultmodel.lifecycle import LifecycleState
from .topology import ProviderNetwork, TopologyClass, Violation


class RoleKind(str, enum.Enum):
    USER = "User"
    SERVICE_PROVIDER = "ServiceProvider"
    DFM = "DFM"
    DFO = "DFO"
    GFCM = "GFCM"
    DMS = "DMS"


STAFFED_ROLES = (RoleKind.DFM, RoleKind.DFO, RoleKind.DMS)


@dataclass(frozen=True)
class RoleBinding:
    role: RoleKind
    domain: str
    scope: str | None = None
    since: int = 0

    def to_dict(self) -> dict:
        return {"role": self.role.value, "domain": self.domain, "scope": self.scope, "since": self.since}

    @classmethod
    def from_dict(cls, data: dict) -> "RoleBinding":
        return cls(RoleKind(data["role"]), data["domain"], data.get("scope"), int(data.get("since", 0)))


class Capability(str, enum.Enum):
    MONITOR = "monitor"
    QUERY_PROGRESS = "query-progress"
    REPORT_DATA = "report-data"
    CHANGE_FAULT_DATA = "change-fault-data"


GFCM_CAPABILITIES = frozenset({Capability.MONITOR, Capability.QUERY_PROGRESS, Capability.REPORT_DATA})


class GfcmPolicy(str, enum.Enum):
    HIERARCHICAL = "hierarchical"
    HETERARCHICAL = "heterarchical"
    AUTO = "auto"

    def resolve(self, net: ProviderNetwork) -> "GfcmPolicy":
        if self is not GfcmPolicy.AUTO:
            return self
        if net.topology_class is TopologyClass.HIERARCHY:
            return GfcmPolicy.HIERARCHICAL
        return GfcmPolicy.HETERARCHICAL


@dataclass(frozen=True)
class AccessPolicy:
    grants: frozenset[tuple[str, str, Capability]] = frozenset()

    @classmethod
    def from_list(cls, items: Iterable[dict]) -> "AccessPolicy":
        return cls(frozenset((g["requester"], g["target"], Capability(g["capability"])) for g in items))

    def with_grant(self, requester: str, target: str, capability: Capability) -> "AccessPolicy":
        return AccessPolicy(self.grants | {(requester, target, Capability(capability))})

    def to_list(self) -> list[dict]:
        return [{"requester": r, "target": t, "capability": c.value} for r, t, c in sorted(self.grants)]


def check_access(policy: AccessPolicy, requester: str, target: str, capability,
                 gfcm_domains: Iterable[str] = ()) -> bool:
    """Whether ``requester`` may exercise ``capability`` on ``target``.

    Self-access is always allowed. A domain currently holding the GFCM role
    may monitor, query progress and collect report data everywhere; changing
    fault data is never implied by the role and needs its own grant.
    """
    capability = Capability(capability)
    if requester == target:
        return True
    if (requester, target, capability) in policy.grants:
        return True
    return requester in set(gfcm_domains) and capability in GFCM_CAPABILITIES


# which role kinds may drive each life-cycle transition
_T = LifecycleState
TRANSITION_ROLES: dict[tuple[LifecycleState, LifecycleState], frozenset[RoleKind]] = {
    (_T.DETECTED, _T.LOCALIZING): frozenset({RoleKind.DFM, RoleKind.GFCM}),
    (_T.LOCALIZING, _T.ISOLATED): frozenset({RoleKind.DFM, RoleKind.GFCM}),
    (_T.LOCALIZING, _T.ESCALATED): frozenset({RoleKind.GFCM}),
    (_T.LOCALIZING, _T.FALSE_POSITIVE): frozenset({RoleKind.DFM, RoleKind.GFCM}),
    (_T.ESCALATED, _T.ISOLATED): frozenset({RoleKind.GFCM}),
    (_T.ESCALATED, _T.CLOSED): frozenset({RoleKind.GFCM}),
    (_T.ISOLATED, _T.REPAIRING): frozenset({RoleKind.DFO, RoleKind.DFM}),
    (_T.REPAIRING, _T.RESOLVED): frozenset({RoleKind.DFO}),
    (_T.RESOLVED, _T.CLOSED): frozenset({RoleKind.DFM, RoleKind.GFCM}),
    (_T.FALSE_POSITIVE, _T.CLOSED): frozenset({RoleKind.DFO}),
}


def may_transition(actor: RoleBinding, from_state, to_state) -> bool:
    allowed = TRANSITION_ROLES.get((LifecycleState(from_state), LifecycleState(to_state)), frozenset())
    return actor.role in allowed


def assign_gfcm(net: ProviderNetwork, policy: GfcmPolicy, fault, tick: int) -> RoleBinding:
    """GFCM binding responsible for ``fault``.

    Under the hierarchical policy the root provider's DFM acts as GFCM for
    every fault. Under the heterarchical policy the first reporting domain
    takes the role for this fault only; concurrent first reports are resolved
    in favour of the lowest domain id.
    """
    if LifecycleState(fault.state) is LifecycleState.DETECTED:
        raise PreconditionError(f"fault {fault.fault_id} has not entered localization yet")
    policy = policy.resolve(net)
    if policy is GfcmPolicy.HIERARCHICAL:
        return RoleBinding(RoleKind.GFCM, net.root_provider(), None, 0)
    first = {fault.origin_domain}
    first.update(s.reported_by for s in fault.symptoms
                 if s.reported_at == fault.created_at and s.reported_by in net.domains)
    return RoleBinding(RoleKind.GFCM, min(first), fault.fault_id, tick)


@dataclass
class Tenure:
    binding: RoleBinding
    start: int
    end: int | None = None

    def active_at(self, tick: int) -> bool:
        return self.start <= tick and (self.end is None or tick < self.end)


@dataclass
class RoleBook:
    """Live role state of one simulation: staffing, users and GFCM tenures."""

    net: ProviderNetwork
    policy: GfcmPolicy
    staffing: dict[tuple[str, RoleKind], RoleBinding] = field(default_factory=dict)
    tenures: list[Tenure] = field(default_factory=list)
    _by_fault: dict[str, Tenure] = field(default_factory=dict)
    _open_count: dict[str, int] = field(default_factory=dict)

    @classmethod
    def staffed(cls, net: ProviderNetwork, policy: GfcmPolicy, bindings: Iterable[RoleBinding] | None = None):
        book = cls(net, policy.resolve(net))
        if bindings is None:
            bindings = [RoleBinding(r, d) for d in sorted(net.domains) for r in STAFFED_ROLES]
            bindings += [RoleBinding(RoleKind.SERVICE_PROVIDER, s.owner) for s in net.service_list]
            bindings += [RoleBinding(RoleKind.USER, c) for c in sorted(net.customers)]
        for b in bindings:
            book.staffing.setdefault((b.domain, b.role), b)
        if book.policy is GfcmPolicy.HIERARCHICAL and net.service_list:
            root = RoleBinding(RoleKind.GFCM, net.root_provider(), None, 0)
            book.tenures.append(Tenure(root, 0))
        return book

    def binding(self, domain: str, role: RoleKind) -> RoleBinding:
        return self.staffing[(domain, RoleKind(role))]

    @property
    def permanent_gfcm(self) -> RoleBinding | None:
        for t in self.tenures:
            if t.binding.scope is None:
                return t.binding
        return None

    def gfcm_for(self, fault_id: str) -> RoleBinding | None:
        if self.permanent_gfcm is not None:
            return self.permanent_gfcm
        tenure = self._by_fault.get(fault_id)
        if tenure is None or tenure.end is not None:
            return None
        return tenure.binding

    def open_tenure(self, binding: RoleBinding, tick: int) -> RoleBinding:
        if binding.scope is None:
            return binding
        current = self._by_fault.get(binding.scope)
        if current is not None and current.end is None:
            return current.binding
        tenure = Tenure(binding, tick)
        self.tenures.append(tenure)
        self._by_fault[binding.scope] = tenure
        self._open_count[binding.domain] = self._open_count.get(binding.domain, 0) + 1
        return binding

    def close_tenure(self, fault_id: str, tick: int) -> RoleBinding | None:
        tenure = self._by_fault.get(fault_id)
        if tenure is None or tenure.end is not None:
            return None
        tenure.end = tick
        self._open_count[tenure.binding.domain] -= 1
        return tenure.binding

    def gfcm_domains(self) -> frozenset[str]:
        """Domains holding the GFCM role right now."""
        out = {d for d, n in self._open_count.items() if n > 0}
        if self.permanent_gfcm is not None:
            out.add(self.permanent_gfcm.domain)
        return frozenset(out)


def validate_staffing(net: ProviderNetwork, bindings: Iterable[RoleBinding]) -> list[Violation]:
    out = []
    counts: dict[tuple[str, RoleKind], int] = {}
    for b in bindings:
        if b.role is RoleKind.GFCM:
            out.append(Violation("static-gfcm", f"GFCM is assigned at run time, not declared ({b.domain})"))
            continue
        if b.role is RoleKind.USER:
            if b.domain not in net.domains and b.domain not in net.customers:
                out.append(Violation("dangling-reference", f"user binding on unknown entity {b.domain!r}"))
            continue
        if b.domain not in net.domains:
            out.append(Violation("dangling-reference", f"{b.role.value} binding on unknown domain {b.domain!r}"))
            continue
        counts[(b.domain, b.role)] = counts.get((b.domain, b.role), 0) + 1
    for d in sorted(net.domains):
        for r in STAFFED_ROLES:
            n = counts.get((d, r), 0)
            if n != 1:
                out.append(Violation("staffing", f"domain {d!r} has {n} {r.value} bindings, expected exactly 1"))
    return out


def validate_policy(net: ProviderNetwork, policy: AccessPolicy, gfcm_policy: GfcmPolicy) -> list[Violation]:
    out = []
    resolved = gfcm_policy.resolve(net)
    root = None
    if resolved is GfcmPolicy.HIERARCHICAL:
        try:
            root = net.root_provider()
        except Exception as exc:
            out.append(Violation("gfcm-root", str(exc)))
    for requester, target, cap in sorted(policy.grants):
        for who in (requester, target):
            if who not in net.domains:
                out.append(Violation("dangling-reference", f"grant names unknown domain {who!r}"))
        if cap is Capability.CHANGE_FAULT_DATA and requester != root:
            out.append(Violation("change-fault-data",
                                 f"change-fault-data may only be held by the acting GFCM, not {requester!r}"))
    return out
