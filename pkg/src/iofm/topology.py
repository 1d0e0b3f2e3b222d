"""Provider networks: domains, components, service parts and services.

A network is immutable once built. Heterarchical services are chains of
service parts delivered by peer providers; hierarchical services may carry
parts of their own owner and subcontract other services. The subcontract
relation forms a DAG.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .errors import InvalidReference, TopologyError
from .faultmodel.metrics import MetricVector


class ComponentKind(str, enum.Enum):
    NETWORK_ELEMENT = "network-element"
    HOST = "host"
    SOFTWARE = "software"
    LINK_SEGMENT = "link-segment"


class DeliveryMode(str, enum.Enum):
    HIERARCHICAL = "hierarchical"
    HETERARCHICAL = "heterarchical"


class TopologyClass(str, enum.Enum):
    HIERARCHY = "hierarchy"
    HETERARCHY = "heterarchy"
    MIXED = "mixed"


@dataclass(frozen=True)
class Domain:
    id: str
    name: str = ""
    local_format: str = "canonical"


@dataclass(frozen=True)
class Component:
    id: str
    owner: str
    kind: ComponentKind = ComponentKind.NETWORK_ELEMENT


@dataclass(frozen=True)
class ServicePart:
    id: str
    provider: str
    realized_by: tuple[str, ...]
    metrics: MetricVector = field(default_factory=MetricVector)


@dataclass(frozen=True)
class Service:
    id: str
    owner: str
    delivery_mode: DeliveryMode
    parts: tuple[str, ...] = ()
    subcontracts: tuple[str, ...] = ()
    customers: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class ProviderNetwork:
    domain_list: tuple[Domain, ...]
    component_list: tuple[Component, ...]
    part_list: tuple[ServicePart, ...]
    service_list: tuple[Service, ...]

    @classmethod
    def build(cls, domains: Iterable[Domain], components: Iterable[Component],
              parts: Iterable[ServicePart] = (), services: Iterable[Service] = ()) -> "ProviderNetwork":
        return cls(tuple(domains), tuple(components), tuple(parts), tuple(services))

    @cached_property
    def domains(self) -> dict[str, Domain]:
        return {d.id: d for d in self.domain_list}

    @cached_property
    def components(self) -> dict[str, Component]:
        return {c.id: c for c in self.component_list}

    @cached_property
    def parts(self) -> dict[str, ServicePart]:
        return {p.id: p for p in self.part_list}

    @cached_property
    def services(self) -> dict[str, Service]:
        return {s.id: s for s in self.service_list}

    @cached_property
    def components_by_domain(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {d: [] for d in self.domains}
        for c in self.component_list:
            out.setdefault(c.owner, []).append(c.id)
        return {d: tuple(sorted(ids)) for d, ids in out.items()}

    @cached_property
    def customers(self) -> frozenset[str]:
        return frozenset(c for s in self.service_list for c in s.customers)

    @cached_property
    def topology_class(self) -> TopologyClass:
        has_heterarchical = any(s.delivery_mode is DeliveryMode.HETERARCHICAL for s in self.service_list)
        has_subcontracting = any(s.subcontracts for s in self.service_list)
        if not has_heterarchical:
            return TopologyClass.HIERARCHY
        if not has_subcontracting:
            return TopologyClass.HETERARCHY
        return TopologyClass.MIXED

    # reverse dependency indexes, used by affected_services
    @cached_property
    def _services_by_part(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {}
        for s in self.service_list:
            for p in s.parts:
                out.setdefault(p, []).append(s.id)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def _parents(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {}
        for s in self.service_list:
            for sub in s.subcontracts:
                out.setdefault(sub, []).append(s.id)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def _parts_by_component(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {}
        for p in self.part_list:
            for c in p.realized_by:
                out.setdefault(c, []).append(p.id)
        return {k: tuple(v) for k, v in out.items()}

    def service_closure(self, service_id: str) -> list[str]:
        """The service followed by every transitively subcontracted service, breadth first."""
        self._require_service(service_id)
        seen = [service_id]
        queue = deque([service_id])
        while queue:
            for sub in self.services[queue.popleft()].subcontracts:
                if sub not in seen and sub in self.services:
                    seen.append(sub)
                    queue.append(sub)
        return seen

    def service_components(self, service_id: str) -> frozenset[str]:
        """All components whose failure makes ``service_id`` fail."""
        cache = self.__dict__.setdefault("_service_components_cache", {})
        if service_id not in cache:
            comps = set()
            for sid in self.service_closure(service_id):
                for pid in self.services[sid].parts:
                    part = self.parts.get(pid)
                    if part is not None:
                        comps.update(part.realized_by)
            cache[service_id] = frozenset(comps)
        return cache[service_id]

    def delivery_order(self, service_id: str) -> list[str]:
        """Involved domains in the order a coordinator would walk the delivery chain."""
        order: list[str] = []
        for sid in self.service_closure(service_id):
            svc = self.services[sid]
            for dom in (svc.owner, *(self.parts[p].provider for p in svc.parts if p in self.parts)):
                if dom not in order:
                    order.append(dom)
        return order

    def root_provider(self) -> str:
        """The unique owner of the top-level services of a hierarchy."""
        top = [s for s in self.service_list if s.id not in self._parents]
        owners = sorted({s.owner for s in top})
        if len(owners) != 1:
            raise TopologyError(f"no unique root provider (top-level owners: {owners or 'none'})")
        return owners[0]

    def _require_service(self, service_id):
        if service_id not in self.services:
            raise InvalidReference(f"unknown service {service_id!r}")


def validate_network(net: ProviderNetwork) -> list[Violation]:
    """Every violated invariant of ``net``; an empty list means the network is valid."""
    out: list[Violation] = []

    def dup(kind, items):
        seen = set()
        for item in items:
            if item.id in seen:
                out.append(Violation("duplicate-id", f"{kind} id {item.id!r} is not unique"))
            seen.add(item.id)

    dup("domain", net.domain_list)
    dup("component", net.component_list)
    dup("service part", net.part_list)
    dup("service", net.service_list)
    owners: dict[str, str] = {}
    for c in net.component_list:
        if c.owner not in net.domains:
            out.append(Violation("dangling-reference", f"component {c.id!r} owner {c.owner!r} is not a domain"))
        if c.id in owners and owners[c.id] != c.owner:
            out.append(Violation("component-disjoint", f"component {c.id!r} belongs to {owners[c.id]!r} and {c.owner!r}"))
        owners.setdefault(c.id, c.owner)

    for p in net.part_list:
        if p.provider not in net.domains:
            out.append(Violation("dangling-reference", f"service part {p.id!r} provider {p.provider!r} is not a domain"))
        if not p.realized_by:
            out.append(Violation("empty-realization", f"service part {p.id!r} is realized by no component"))
        for cid in p.realized_by:
            comp = net.components.get(cid)
            if comp is None:
                out.append(Violation("dangling-reference", f"service part {p.id!r} references unknown component {cid!r}"))
            elif comp.owner != p.provider:
                out.append(Violation("part/provider ownership",
                                     f"service part {p.id!r} of {p.provider!r} is realized by {cid!r} owned by {comp.owner!r}"))

    for s in net.service_list:
        if s.owner not in net.domains:
            out.append(Violation("dangling-reference", f"service {s.id!r} owner {s.owner!r} is not a domain"))
        for pid in s.parts:
            if pid not in net.parts:
                out.append(Violation("dangling-reference", f"service {s.id!r} references unknown part {pid!r}"))
        for sub in s.subcontracts:
            if sub not in net.services:
                out.append(Violation("dangling-reference", f"service {s.id!r} subcontracts unknown service {sub!r}"))
            elif sub == s.id:
                out.append(Violation("subcontract-cycle", f"service {s.id!r} subcontracts itself"))
        providers = {net.parts[p].provider for p in s.parts if p in net.parts}
        if s.delivery_mode is DeliveryMode.HETERARCHICAL:
            if len(s.parts) < 2 or len(providers) < 2:
                out.append(Violation("heterarchical-parts",
                                     f"heterarchical service {s.id!r} needs >= 2 parts from >= 2 providers"))
        elif providers - {s.owner}:
            out.append(Violation("hierarchical-part-owner",
                                 f"hierarchical service {s.id!r} includes parts of {sorted(providers - {s.owner})}; "
                                 "foreign providers must be subcontracted"))

    cycle = _find_cycle(net)
    if cycle:
        out.append(Violation("subcontract-cycle", "subcontracting is cyclic: " + " -> ".join(cycle)))
    return out


def _find_cycle(net: ProviderNetwork) -> list[str] | None:
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(sid):
        state[sid] = 1
        stack.append(sid)
        for sub in net.services[sid].subcontracts:
            if sub not in net.services or sub == sid:
                continue
            if state.get(sub) == 1:
                return stack[stack.index(sub):] + [sub]
            if sub not in state:
                found = visit(sub)
                if found:
                    return found
        stack.pop()
        state[sid] = 2
        return None

    for sid in sorted(net.services):
        if sid not in state:
            found = visit(sid)
            if found:
                return found
    return None


def affected_services(net: ProviderNetwork, failed: str) -> frozenset[str]:
    """Services that fail when component ``failed`` fails."""
    if failed not in net.components:
        raise InvalidReference(f"unknown component {failed!r}")
    result: set[str] = set()
    queue = deque(s for p in net._parts_by_component.get(failed, ()) for s in net._services_by_part.get(p, ()))
    while queue:
        sid = queue.popleft()
        if sid in result:
            continue
        result.add(sid)
        queue.extend(net._parents.get(sid, ()))
    return frozenset(result)


def involved_domains(net: ProviderNetwork, service: str) -> frozenset[str]:
    """The owner plus every provider of a transitively included part or subcontract."""
    return frozenset(net.delivery_order(service))


def network_from_dict(data: dict) -> ProviderNetwork:
    """Build a network from the ``topology`` section of a scenario document."""
    domains = [Domain(d["id"], d.get("name", d["id"]), d.get("localFormat", "canonical"))
               for d in data.get("domains", [])]
    components = [Component(c["id"], c["owner"], ComponentKind(c.get("kind", "network-element")))
                  for c in data.get("components", [])]
    parts = [ServicePart(p["id"], p["provider"], tuple(p.get("realizedBy", ())),
                         MetricVector.from_dict(p.get("metrics", {})))
             for p in data.get("serviceParts", [])]
    services = [Service(s["id"], s["owner"], DeliveryMode(s.get("deliveryMode", "hierarchical")),
                        tuple(s.get("parts", ())), tuple(s.get("subcontracts", ())),
                        frozenset(s.get("customers", ())))
                for s in data.get("services", [])]
    return ProviderNetwork.build(domains, components, parts, services)


def network_to_dict(net: ProviderNetwork) -> dict:
    return {
        "domains": [{"id": d.id, "name": d.name, "localFormat": d.local_format} for d in net.domain_list],
        "components": [{"id": c.id, "owner": c.owner, "kind": c.kind.value} for c in net.component_list],
        "serviceParts": [{"id": p.id, "provider": p.provider, "realizedBy": list(p.realized_by),
                          "metrics": p.metrics.to_dict()} for p in net.part_list],
        "services": [{"id": s.id, "owner": s.owner, "deliveryMode": s.delivery_mode.value,
                      "parts": list(s.parts), "subcontracts": list(s.subcontracts),
                      "customers": sorted(s.customers)} for s in net.service_list],
    }
