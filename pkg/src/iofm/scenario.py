"""Scenario documents: one JSON file with topology, organization, information,
simulation and management sections."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConversionError, IoFMError, ScenarioError
from .faultmodel.adapters import DomainFormatAdapter
from .faultmodel.metrics import METRIC_FIELDS
from .faultmodel.records import MUTABLE_FIELDS
from .orgmodel import AccessPolicy, GfcmPolicy, RoleBinding, RoleKind, validate_policy, validate_staffing
from .protocol import Topic
from .topology import ProviderNetwork, Violation, network_from_dict, validate_network

SECTIONS = ("topology", "organization", "information", "simulation", "management")

DEFAULT_THRESHOLDS = {
    "isolateTicks": 50,
    "queryTicks": 10,
    "dedupTicks": 10,
    "repairTicks": 20,
    "closeTicks": 5,
    "maxAge": None,
    "trendThreshold": 10,
    "trendBucket": 1,
}
DEFAULT_AUTOMATION = {"handoff": True, "falsePositives": True, "repair": True}
SCRIPTED_USE_CASES = ("L01", "L02", "L03", "P01", "P02", "M01", "M02", "M03", "R01", "R02", "R03",
                      "F01", "F02", "FM-01")
BUNDLED = ("fig1-mixed", "integratum-hierarchy", "geant-heterarchy")


@dataclass
class Scenario:
    name: str
    network: ProviderNetwork
    gfcm_policy: GfcmPolicy
    bindings: list[RoleBinding] | None
    grants: AccessPolicy
    formats: dict[str, DomainFormatAdapter]
    known_errors: list[dict]
    seed: int
    horizon: int
    link: dict
    events: list[dict]
    slas: list[dict]
    thresholds: dict
    automation: dict
    raw: dict = field(default_factory=dict, repr=False)

    def with_seed(self, seed: int) -> "Scenario":
        from dataclasses import replace
        return replace(self, seed=int(seed))

    def adapter_for(self, domain: str) -> DomainFormatAdapter:
        fmt = self.network.domains[domain].local_format
        return self.formats.get(fmt) or DomainFormatAdapter.identity(fmt)


def parse_text(text: str, source: str = "<scenario>") -> dict:
    if not text.strip():
        raise ScenarioError(f"{source}: empty scenario document")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {context}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{source}: top level must be a JSON object")
    return doc


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _v(code, msg) -> Violation:
    return Violation(code, msg)


def validate_document(doc: dict) -> list[Violation]:
    """Every problem with a parsed scenario document; empty means it can be run."""
    out: list[Violation] = []
    for s in SECTIONS:
        if not isinstance(doc.get(s), dict):
            out.append(_v("missing-section", f"section {s!r} is missing or not an object"))
    if out:
        return out
    try:
        net = network_from_dict(doc["topology"])
    except (KeyError, ValueError, TypeError, IoFMError) as exc:
        return [_v("topology", f"cannot read topology: {exc!r}")]
    out += validate_network(net)
    if out:
        return out

    org = doc["organization"]
    try:
        policy = GfcmPolicy(org.get("gfcmPolicy", "auto"))
    except ValueError:
        out.append(_v("organization", f"unknown gfcmPolicy {org.get('gfcmPolicy')!r}"))
        policy = GfcmPolicy.AUTO
    if "roles" in org:
        try:
            bindings = [RoleBinding(RoleKind(r["role"]), r["domain"]) for r in org["roles"]]
            out += validate_staffing(net, bindings)
        except (KeyError, ValueError, TypeError) as exc:
            out.append(_v("organization", f"bad role binding: {exc!r}"))
    try:
        grants = AccessPolicy.from_list(org.get("grants", []))
        out += validate_policy(net, grants, policy)
    except (KeyError, ValueError, TypeError) as exc:
        out.append(_v("organization", f"bad grant: {exc!r}"))

    info = doc["information"]
    formats = {}
    for f in info.get("formats", []):
        try:
            a = DomainFormatAdapter.from_dict(f)
            formats[a.format_id] = a
        except (KeyError, TypeError, ValueError, ConversionError) as exc:
            out.append(_v("format", f"bad format definition: {exc}"))
    for d in net.domain_list:
        if d.local_format != "canonical" and d.local_format not in formats:
            out.append(_v("dangling-reference", f"domain {d.id!r} uses undeclared format {d.local_format!r}"))
    for k in info.get("knownErrors", []):
        comp = net.components.get(k.get("component"))
        if k.get("domain") not in net.domains:
            out.append(_v("dangling-reference", f"known error names unknown domain {k.get('domain')!r}"))
        elif comp is None or comp.owner != k["domain"]:
            out.append(_v("dangling-reference", f"known error component {k.get('component')!r} is not in {k['domain']!r}"))

    sim = doc["simulation"]
    if not _is_int(sim.get("seed")):
        out.append(_v("seed", "simulation.seed must be an integer"))
    horizon = sim.get("horizon")
    if not _is_int(horizon) or horizon <= 0:
        out.append(_v("horizon", "simulation.horizon must be a positive integer"))
        horizon = None
    link = sim.get("link", {})
    for o in [link] + list(link.get("overrides", [])):
        for p in ("lossProb", "corruptProb"):
            if p in o and not 0.0 <= float(o[p]) <= 1.0:
                out.append(_v("link", f"{p} must lie in [0, 1]"))
        if "delay" in o and (not _is_int(o["delay"]) or o["delay"] < 0):
            out.append(_v("link", "delay must be a non-negative integer"))
        for end in ("from", "to"):
            if end in o and o[end] != "*" and o[end] not in net.domains:
                out.append(_v("dangling-reference", f"link override names unknown domain {o[end]!r}"))
    for i, ev in enumerate(sim.get("events", [])):
        out += [_v(v.code, f"event #{i}: {v.message}") for v in _check_event(net, ev, horizon)]

    mgmt = doc["management"]
    for s in mgmt.get("slas", []):
        if s.get("service") not in net.services:
            out.append(_v("dangling-reference", f"SLA for unknown service {s.get('service')!r}"))
    for k in mgmt.get("thresholds", {}):
        if k not in DEFAULT_THRESHOLDS:
            out.append(_v("thresholds", f"unknown threshold {k!r}"))
    for k in mgmt.get("automation", {}):
        if k not in DEFAULT_AUTOMATION:
            out.append(_v("automation", f"unknown automation switch {k!r}"))
    return out


def _check_event(net: ProviderNetwork, ev: dict, horizon) -> list[Violation]:
    out = []
    tick = ev.get("tick")
    if not _is_int(tick) or tick < 0 or (horizon is not None and tick > horizon):
        out.append(_v("event-tick", f"tick {tick!r} outside [0, horizon]"))
    kind = ev.get("type")

    def need_component(key="component", required=True):
        c = ev.get(key)
        if c is None and not required:
            return
        if c not in net.components:
            out.append(_v("dangling-reference", f"{kind} names unknown component {c!r}"))

    def need_domain(key):
        if ev.get(key) not in net.domains:
            out.append(_v("dangling-reference", f"{kind} names unknown domain {ev.get(key)!r}"))

    if kind in ("fault", "repair"):
        need_component()
    elif kind == "false-alarm":
        need_domain("domain")
        need_component(required=False)
        c = net.components.get(ev.get("component"))
        if c is not None and c.owner != ev.get("domain"):
            out.append(_v("dangling-reference", f"false alarm component {c.id!r} is not owned by {ev.get('domain')!r}"))
    elif kind == "degrade":
        if ev.get("part") not in net.parts:
            out.append(_v("dangling-reference", f"degrade names unknown part {ev.get('part')!r}"))
        bad = set(ev.get("delta", {})) - set(METRIC_FIELDS)
        if bad:
            out.append(_v("degrade", f"unknown metrics {sorted(bad)}"))
    elif kind == "customer-report":
        svc = net.services.get(ev.get("service"))
        if svc is None:
            out.append(_v("dangling-reference", f"customer report on unknown service {ev.get('service')!r}"))
        elif ev.get("customer") not in svc.customers:
            out.append(_v("dangling-reference", f"{ev.get('customer')!r} is not a customer of {svc.id!r}"))
    elif kind == "use-case":
        uc = ev.get("useCase")
        if uc not in SCRIPTED_USE_CASES:
            out.append(_v("use-case", f"unknown use case {uc!r}"))
        req = ev.get("requester")
        if req is not None and req not in net.domains and req not in net.customers:
            out.append(_v("dangling-reference", f"requester {req!r} is neither a domain nor a customer"))
        if ev.get("service") is not None and ev["service"] not in net.services:
            out.append(_v("dangling-reference", f"use case names unknown service {ev['service']!r}"))
        if ev.get("target") not in (None, "all") and ev["target"] not in net.domains:
            out.append(_v("dangling-reference", f"use case names unknown domain {ev['target']!r}"))
    elif kind == "data-change":
        need_domain("actor")
        bad = set(ev.get("patch", {})) - MUTABLE_FIELDS
        if bad:
            out.append(_v("data-change", f"patch touches immutable fields {sorted(bad)}"))
        if "faultId" not in ev and "pick" not in ev:
            out.append(_v("data-change", "data change needs a faultId or a pick rule"))
    elif kind == "subscribe":
        need_domain("subscriber")
        need_domain("publisher")
        if ev.get("topic") not in {t.value for t in Topic}:
            out.append(_v("subscribe", f"unknown topic {ev.get('topic')!r}"))
    else:
        out.append(_v("event-type", f"unknown event type {kind!r}"))
    return out


def build(doc: dict, name: str = "scenario") -> Scenario:
    violations = validate_document(doc)
    if violations:
        raise ScenarioError(f"{name}: {len(violations)} validation problem(s)", violations)
    org, info, sim, mgmt = doc["organization"], doc["information"], doc["simulation"], doc["management"]
    formats = {}
    for f in info.get("formats", []):
        a = DomainFormatAdapter.from_dict(f)
        formats[a.format_id] = a
    bindings = None
    if "roles" in org:
        bindings = [RoleBinding(RoleKind(r["role"]), r["domain"]) for r in org["roles"]]
    return Scenario(
        name=doc.get("name", name),
        network=network_from_dict(doc["topology"]),
        gfcm_policy=GfcmPolicy(org.get("gfcmPolicy", "auto")),
        bindings=bindings,
        grants=AccessPolicy.from_list(org.get("grants", [])),
        formats=formats,
        known_errors=list(info.get("knownErrors", [])),
        seed=sim["seed"],
        horizon=sim["horizon"],
        link=dict(sim.get("link", {})),
        events=[dict(e) for e in sim.get("events", [])],
        slas=list(mgmt.get("slas", [])),
        thresholds={**DEFAULT_THRESHOLDS, **mgmt.get("thresholds", {})},
        automation={**DEFAULT_AUTOMATION, **mgmt.get("automation", {})},
        raw=doc,
    )


def load(path) -> Scenario:
    """Parse, validate and build the scenario at ``path`` or a bundled scenario name."""
    text, source = read_source(path)
    return build(parse_text(text, source), Path(source).stem)


def read_source(path) -> tuple[str, str]:
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        res = resources.files("iofm.scenarios").joinpath(f"{path}.json")
        return res.read_text(encoding="utf-8"), f"{path}.json"
    try:
        return p.read_text(encoding="utf-8"), str(p)
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror})") from None


def bundled(name: str) -> Scenario:
    return load(name)
