"""Discrete-event simulation harness.

Virtual integer ticks, a (tick, seq) ordered event queue, a seeded lossy
transport with per-pair FIFO delivery, the ground truth of injected faults and
the per-domain monitoring systems that turn it into alarms.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import logging
import os
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from . import canonical
from .errors import SchedulerMisuse
from .protocol import Envelope
from .topology import ProviderNetwork

log = logging.getLogger(__name__)


# --- scheduler ---------------------------------------------------------------

@dataclass(frozen=True)
class SimEvent:
    tick: int
    seq: int
    kind: str
    data: dict = field(default_factory=dict, hash=False, compare=False)
    action: Callable | None = field(default=None, hash=False, compare=False, repr=False)


class Scheduler:
    """Priority queue of events ordered by (tick, seq).

    ``inject`` is reserved for scenario input and is refused once the run has
    started; ``schedule`` is what handlers use while the run is in progress.
    """

    def __init__(self):
        self._heap: list[tuple[int, int, SimEvent]] = []
        self._seq = 0
        self.now = 0
        self.started = False

    def __len__(self):
        return len(self._heap)

    def _push(self, tick: int, kind: str, data, action) -> SimEvent:
        ev = SimEvent(int(tick), self._seq, kind, data or {}, action)
        self._seq += 1
        heapq.heappush(self._heap, (ev.tick, ev.seq, ev))
        return ev

    def inject(self, tick: int, kind: str, data: dict | None = None, action=None) -> SimEvent:
        if self.started:
            raise SchedulerMisuse(f"cannot inject {kind!r} after the run has started")
        return self._push(tick, kind, data, action)

    def schedule(self, tick: int, kind: str, data: dict | None = None, action=None) -> SimEvent:
        if tick < self.now:
            raise SchedulerMisuse(f"event {kind!r} at tick {tick} lies in the past (now {self.now})")
        return self._push(tick, kind, data, action)

    def peek_tick(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> SimEvent:
        if not self._heap:
            raise SchedulerMisuse("pop from an empty scheduler")
        _, _, ev = heapq.heappop(self._heap)
        self.started = True
        # the clock never runs backwards; scheduling guards against past ticks
        self.now = ev.tick
        return ev

    def advance(self, until: int) -> int:
        """Pop and execute every event with tick <= ``until``; returns how many ran."""
        n = 0
        while self._heap and self._heap[0][0] <= until:
            ev = self.pop()
            if ev.action:
                ev.action(ev)
            n += 1
        return n


# --- links ------------------------------------------------------------------

@dataclass(frozen=True)
class LinkParams:
    delay: int = 1
    loss_prob: float = 0.0
    corrupt_prob: float = 0.0


class LinkModel:
    """Per domain-pair delay, loss and corruption, each pair with its own seeded stream."""

    def __init__(self, seed: int, default: LinkParams = LinkParams(), overrides=()):
        self.seed = int(seed)
        self.default = default
        self.overrides = list(overrides)
        self._rngs: dict[tuple[str, str], random.Random] = {}

    @classmethod
    def from_config(cls, cfg: dict, seed: int) -> "LinkModel":
        default = LinkParams(int(cfg.get("delay", 1)), float(cfg.get("lossProb", 0.0)),
                             float(cfg.get("corruptProb", 0.0)))
        return cls(seed, default, cfg.get("overrides", ()))

    def params(self, sender: str, receiver: str) -> LinkParams:
        p = self.default
        for o in self.overrides:
            if o.get("from", "*") in ("*", sender) and o.get("to", "*") in ("*", receiver):
                p = LinkParams(int(o.get("delay", p.delay)), float(o.get("lossProb", p.loss_prob)),
                               float(o.get("corruptProb", p.corrupt_prob)))
        return p

    def rng(self, sender: str, receiver: str) -> random.Random:
        key = (sender, receiver)
        if key not in self._rngs:
            h = hashlib.sha256(f"{self.seed}|{sender}|{receiver}".encode()).hexdigest()
            self._rngs[key] = random.Random(int(h[:16], 16))
        return self._rngs[key]

    def sample(self, sender: str, receiver: str) -> tuple[int, bool, bool]:
        """(delay, lost, corrupted) for the next message on the pair."""
        p = self.params(sender, receiver)
        rng = self.rng(sender, receiver)
        # always draw both numbers so one pair's stream does not depend on outcomes
        r_loss, r_corrupt = rng.random(), rng.random()
        lost = r_loss < p.loss_prob
        return p.delay, lost, (not lost) and r_corrupt < p.corrupt_prob


# --- ground truth -----------------------------------------------------------

@dataclass(frozen=True)
class Injection:
    kind: str  # fault | false-alarm | degrade
    start: int
    end: int | None = None
    component: str | None = None
    domain: str | None = None
    part: str | None = None
    symptom: str = "down"
    alarm: bool = True
    delta: dict = field(default_factory=dict, hash=False)

    def active_at(self, tick: int) -> bool:
        return self.start <= tick and (self.end is None or tick < self.end)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "start": self.start, "end": self.end, "component": self.component,
                "domain": self.domain, "part": self.part, "symptom": self.symptom, "alarm": self.alarm,
                "delta": dict(self.delta)}


class InjectionRegistry:
    """Scripted ground truth: filled while a scenario loads, read-only afterwards."""

    def __init__(self):
        self._items: list[Injection] = []
        self.frozen = False

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def _check(self):
        if self.frozen:
            raise SchedulerMisuse("the injection registry is read-only once the run starts")

    def add(self, inj: Injection) -> Injection:
        self._check()
        self._items.append(inj)
        return inj

    def end_fault(self, component: str, tick: int) -> bool:
        """Close the latest open fault on ``component`` started at or before ``tick``."""
        self._check()
        for i in range(len(self._items) - 1, -1, -1):
            inj = self._items[i]
            if inj.kind == "fault" and inj.component == component and inj.end is None and inj.start <= tick:
                self._items[i] = replace(inj, end=tick)
                return True
        return False

    def freeze(self):
        self.frozen = True

    def faults(self) -> list[Injection]:
        return [i for i in self._items if i.kind == "fault"]

    def false_alarms(self) -> list[Injection]:
        return [i for i in self._items if i.kind == "false-alarm"]

    def is_faulted(self, component: str, tick: int) -> bool:
        return any(i.component == component and i.active_at(tick) for i in self.faults())

    def faulted_components(self, tick: int) -> frozenset[str]:
        return frozenset(i.component for i in self.faults() if i.active_at(tick))

    def ground_truth(self) -> list[dict]:
        return [i.to_dict() for i in self._items]


@dataclass(frozen=True)
class Alarm:
    alarm_id: str
    domain: str
    kind: str
    raised_at: int
    component: str | None = None
    service: str | None = None

    def to_dict(self) -> dict:
        return {"alarmId": self.alarm_id, "component": self.component, "domain": self.domain,
                "kind": self.kind, "raisedAt": self.raised_at, "service": self.service}


class GroundTruth:
    """Live state of the simulated infrastructure, changed by injections and repairs."""

    def __init__(self, net: ProviderNetwork):
        self.net = net
        self.failed: dict[str, tuple[int, Alarm | None]] = {}
        self.false_alarms: dict[str, Alarm] = {}
        self.failure_log: list[dict] = []
        self.degradations: list[dict] = []
        self._alarm_seq = 0

    def _next_alarm(self) -> str:
        self._alarm_seq += 1
        return f"A{self._alarm_seq:04d}"

    def is_failed(self, component: str) -> bool:
        return component in self.failed

    def fail(self, component: str, tick: int, alarmed: bool = True, kind: str = "down") -> Alarm | None:
        if component in self.failed:
            return None
        owner = self.net.components[component].owner
        alarm = Alarm(self._next_alarm(), owner, kind, tick, component) if alarmed else None
        self.failed[component] = (tick, alarm)
        self.failure_log.append({"component": component, "start": tick, "end": None})
        return alarm

    def repair(self, component: str, tick: int) -> tuple[bool, Alarm | None]:
        if component not in self.failed:
            return False, None
        _, alarm = self.failed.pop(component)
        for f in reversed(self.failure_log):
            if f["component"] == component and f["end"] is None:
                f["end"] = tick
                break
        return True, alarm

    def raise_false_alarm(self, domain: str, tick: int, kind: str = "down", component: str | None = None,
                          service: str | None = None) -> Alarm:
        alarm = Alarm(self._next_alarm(), domain, kind, tick, component, service)
        self.false_alarms[alarm.alarm_id] = alarm
        return alarm

    def clear_false_alarm(self, alarm_id: str) -> Alarm | None:
        return self.false_alarms.pop(alarm_id, None)

    def degrade(self, part: str, start: int, end: int | None, delta: dict):
        self.degradations.append({"part": part, "start": start, "end": end, "delta": dict(delta)})


def dms_observe(truth: GroundTruth, domain: str, tick: int | None = None) -> frozenset[Alarm]:
    """Alarms the monitoring system of ``domain`` shows right now.

    Failed owned components that raise alarms, plus active false alarms.
    Silent failures stay invisible to monitoring.
    """
    out = {a for _, a in truth.failed.values() if a is not None and a.domain == domain}
    out.update(a for a in truth.false_alarms.values() if a.domain == domain)
    return frozenset(out)


# --- transport --------------------------------------------------------------

class Transport:
    """Lossy, delaying message transport honouring FIFO order per sender/receiver pair."""

    def __init__(self, scheduler: Scheduler, links: LinkModel, domains, trace: list, on_deliver=None,
                 on_corrupt=None):
        self.scheduler = scheduler
        self.links = links
        self.domains = frozenset(domains)
        self.trace = trace
        self.on_deliver = on_deliver
        self.on_corrupt = on_corrupt
        self._last: dict[tuple[str, str], int] = {}
        self.counts = {"send": 0, "deliver": 0, "drop": 0, "discard-corrupt": 0}

    def knows(self, domain: str) -> bool:
        return domain in self.domains

    def _trace(self, event: dict):
        self.trace.append(event)

    def transmit(self, env: Envelope) -> None:
        now = self.scheduler.now
        self.counts["send"] += 1
        self._trace({"tick": now, "event": "send", "loopback": False, "envelope": env.to_dict()})
        delay, lost, corrupted = self.links.sample(env.sender, env.receiver)
        if lost:
            self.counts["drop"] += 1
            self._trace({"tick": now, "event": "drop", "msgId": env.msg_id, "sender": env.sender,
                         "receiver": env.receiver})
            return
        pair = (env.sender, env.receiver)
        at = max(now + delay, self._last.get(pair, now))
        self._last[pair] = at
        if corrupted:
            env = replace(env, payload={**env.payload, "_bitflip": True})
        self.scheduler.schedule(at, "deliver", {"msgId": env.msg_id}, lambda ev, e=env: self._arrive(e))

    def loopback(self, env: Envelope) -> None:
        """Hand a message between two roles of the same domain: same tick, never lost."""
        now = self.scheduler.now
        self.counts["send"] += 1
        self._trace({"tick": now, "event": "send", "loopback": True, "envelope": env.to_dict()})
        self.scheduler.schedule(now, "deliver", {"msgId": env.msg_id}, lambda ev, e=env: self._arrive(e))

    def _arrive(self, env: Envelope):
        now = self.scheduler.now
        base = {"tick": now, "msgId": env.msg_id, "sender": env.sender, "receiver": env.receiver,
                "kind": env.kind.value}
        if not env.verifies():
            self.counts["discard-corrupt"] += 1
            self._trace({"tick": now, "event": "discard-corrupt", **{k: v for k, v in base.items() if k != "tick"}})
            if self.on_corrupt:
                self.on_corrupt(env)
            return
        self.counts["deliver"] += 1
        self._trace({"tick": now, "event": "deliver", **{k: v for k, v in base.items() if k != "tick"}})
        if self.on_deliver:
            self.on_deliver(env)

    def in_flight(self) -> int:
        c = self.counts
        return c["send"] - c["deliver"] - c["drop"] - c["discard-corrupt"]


# --- simulation run ---------------------------------------------------------

@dataclass(frozen=True)
class SimResult:
    registry: str
    trace: tuple[str, ...]
    audit: tuple[str, ...]
    outcomes: str

    FILES = ("registry.json", "trace.jsonl", "audit.jsonl", "outcomes.json")

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"output directory {out} is not writable")
        (out / "registry.json").write_text(self.registry, encoding="utf-8")
        (out / "trace.jsonl").write_text("".join(t + "\n" for t in self.trace), encoding="utf-8")
        (out / "audit.jsonl").write_text("".join(a + "\n" for a in self.audit), encoding="utf-8")
        (out / "outcomes.json").write_text(self.outcomes, encoding="utf-8")
        return out

    @property
    def outcomes_data(self) -> dict:
        return json.loads(self.outcomes)

    def trace_events(self) -> list[dict]:
        return [json.loads(t) for t in self.trace]

    def audit_events(self) -> list[dict]:
        return [json.loads(a) for a in self.audit]


SCENARIO_EVENT_KINDS = ("fault", "false-alarm", "repair", "degrade", "customer-report", "use-case",
                        "data-change", "subscribe")


class Simulation:
    """One isolated run: scheduler, transport, ground truth and the engine on top."""

    def __init__(self, scenario):
        from .engine.core import Engine

        self.scenario = scenario
        self.scheduler = Scheduler()
        self.links = LinkModel.from_config(scenario.link, scenario.seed)
        self.injections = InjectionRegistry()
        self.truth = GroundTruth(scenario.network)
        self.trace: list[dict] = []
        self.dispatching = False
        self.transport = Transport(self.scheduler, self.links, scenario.network.domains, self.trace)
        self.engine = Engine(scenario, self)
        self.transport.on_deliver = self.engine.on_message
        self.transport.on_corrupt = self.engine.on_corrupt
        self._load()

    def _load(self):
        for ev in sorted(self.scenario.events, key=lambda e: e["tick"]):
            kind = ev["type"]
            if kind == "fault":
                self.injections.add(Injection("fault", ev["tick"], component=ev["component"],
                                              symptom=ev.get("symptom", "down"), alarm=ev.get("alarm", True)))
            elif kind == "false-alarm":
                self.injections.add(Injection("false-alarm", ev["tick"], ev.get("until"), ev.get("component"),
                                              ev["domain"], symptom=ev.get("symptom", "down")))
            elif kind == "repair":
                self.injections.end_fault(ev["component"], ev["tick"])
            elif kind == "degrade":
                self.injections.add(Injection("degrade", ev["tick"], ev.get("until"), part=ev["part"],
                                              delta=dict(ev.get("delta", {}))))
            self.scheduler.inject(ev["tick"], kind, ev, self._run_scenario_event)
        self.injections.freeze()

    def _run_scenario_event(self, ev: SimEvent):
        self.trace.append({"tick": ev.tick, "seq": ev.seq, "event": ev.kind, "data": canonical.normalize(ev.data)})
        self.engine.on_scenario_event(ev.data)

    @property
    def now(self) -> int:
        return self.scheduler.now

    def step(self) -> SimEvent:
        ev = self.scheduler.pop()
        self.dispatching = True
        try:
            if ev.action:
                ev.action(ev)
        finally:
            self.dispatching = False
        return ev

    def run(self) -> SimResult:
        """Execute every scenario event up to the horizon, then run in-flight work to quiescence."""
        horizon = self.scenario.horizon
        while len(self.scheduler) and self.scheduler.peek_tick() <= horizon:
            self.step()
        while len(self.scheduler):
            self.step()
        log.info("run finished at tick %d: %d trace events, %d audit events",
                 self.now, len(self.trace), len(self.engine.registry.audit))
        return self.result()

    def drive(self, done: Callable[[], bool]) -> None:
        """Run events until ``done()`` holds or nothing is left to do."""
        if self.dispatching:
            raise SchedulerMisuse("synchronous use-case calls may not be made from inside an event handler")
        while not done() and len(self.scheduler):
            self.step()

    def result(self) -> SimResult:
        trace = tuple(canonical.dumps_ordered(canonical.normalize_top(t)) for t in self.trace)
        return SimResult(self.engine.registry.to_json(), trace, tuple(self.engine.registry.audit_lines()),
                         self.engine.outcomes_json())


def run(scenario) -> SimResult:
    return Simulation(scenario).run()
