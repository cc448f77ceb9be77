"""Flow-level discrete-event network simulator.

Flows are fluid: at every instant each active flow holds a rate from a
max-min fair allocation (progressive filling) over the links it crosses.
Elastic flows carry a fixed byte volume and complete; inelastic flows are
demand-capped background processes that exist between explicit start/stop
events. Time advances only through the event queue, and simultaneous events
pop in insertion order, which makes runs bit-reproducible.

Link loss degrades goodput multiplicatively: a flow's delivered rate is its
allocated rate times (1 - path_loss). This is a deliberate stand-in for
transport-level behavior, chosen for determinism; see README notes.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

from .errors import StalledSimulation
from .topology import LinkSpec, Topology, path_delay_ms, path_loss_frac

BITS_PER_MBPS = 1e6
_EPS = 1e-12


class FlowKind(Enum):
    ELASTIC = "elastic"
    INELASTIC = "inelastic"


@dataclass
class Flow:
    """A unidirectional transfer routed over a fixed path."""

    id: str
    src: str
    dst: str
    path: tuple[LinkSpec, ...]
    kind: FlowKind
    bytes_total: float = 0.0
    bytes_remaining: float = 0.0
    demand_mbps: float = 0.0
    start_s: float | None = None
    tx_end_s: float | None = None
    done_s: float | None = None

    def __post_init__(self):
        self.path = tuple(self.path)
        if self.kind is FlowKind.ELASTIC:
            self.bytes_remaining = self.bytes_total

    @property
    def propagation_s(self) -> float:
        return path_delay_ms(self.path) / 1000.0

    @property
    def path_loss(self) -> float:
        return path_loss_frac(self.path)


def elastic_flow(fid: str, src: str, dst: str, path, bytes_total: float) -> Flow:
    return Flow(fid, src, dst, tuple(path), FlowKind.ELASTIC, bytes_total=float(bytes_total))


def inelastic_flow(fid: str, src: str, dst: str, path, demand_mbps: float = 0.0) -> Flow:
    return Flow(fid, src, dst, tuple(path), FlowKind.INELASTIC, demand_mbps=float(demand_mbps))


def allocate_rates(flows: Iterable[Flow], topo: Topology) -> dict[str, float]:
    """Max-min fair rates via progressive filling, demands as caps.

    All unfrozen flows rise at the same speed; a flow freezes when a link on
    its path saturates or (inelastic only) its demand is met. Deterministic
    for a given flow set.
    """
    flows = list(flows)
    rates = {f.id: 0.0 for f in flows}
    capacity = {link.pair: link.attrs.bandwidth_mbps for f in flows for link in f.path}
    load = {pair: 0.0 for pair in capacity}

    unfrozen = {f.id: f for f in flows if not (f.kind is FlowKind.INELASTIC and f.demand_mbps <= 0.0)}
    while unfrozen:
        on_link: dict[tuple[str, str], int] = {}
        for f in unfrozen.values():
            for link in f.path:
                on_link[link.pair] = on_link.get(link.pair, 0) + 1

        delta = math.inf
        for pair, n in on_link.items():
            delta = min(delta, (capacity[pair] - load[pair]) / n)
        for f in unfrozen.values():
            if f.kind is FlowKind.INELASTIC:
                delta = min(delta, f.demand_mbps - rates[f.id])
        delta = max(delta, 0.0)

        for f in unfrozen.values():
            rates[f.id] += delta
        for pair, n in on_link.items():
            load[pair] += n * delta

        frozen = set()
        for fid, f in unfrozen.items():
            if f.kind is FlowKind.INELASTIC and rates[fid] >= f.demand_mbps - _EPS:
                frozen.add(fid)
                continue
            for link in f.path:
                if capacity[link.pair] - load[link.pair] <= _EPS * max(1.0, capacity[link.pair]):
                    frozen.add(fid)
                    break
        if not frozen:  # cannot happen with positive capacities; guards the loop
            frozen = set(unfrozen)
        for fid in frozen:
            del unfrozen[fid]
    return rates


class EventKind(Enum):
    FLOW_START = "flow_start"
    FLOW_COMPLETE = "flow_complete"
    RATE_CHANGE = "rate_change"
    METRIC_SAMPLE = "metric_sample"
    ROUND_PHASE = "round_phase"


@dataclass
class Event:
    kind: EventKind
    time_s: float = 0.0
    flow_id: str | None = None
    demand_mbps: float | None = None
    tag: Any = None
    _version: int = field(default=-1, repr=False)


class FlowSim:
    """Single-threaded event loop owning all flow state.

    The clock never regresses; rate reallocation happens only when the
    active flow set or an inelastic demand changes. After every change the
    earliest projected elastic completion is (re)scheduled as a
    FLOW_COMPLETE event; completions scheduled under an older allocation are
    skipped when popped.
    """

    def __init__(self, topo: Topology):
        self.topo = topo
        self.now_s = 0.0
        self.flows: dict[str, Flow] = {}
        self._active: dict[str, Flow] = {}
        self._heap: list[tuple[float, int, Event]] = []
        self._seq = itertools.count()
        self._rates: dict[str, float] = {}
        self._version = 0
        self._tx_bytes: dict[str, float] = {n: 0.0 for n in topo.nodes}
        self._rx_bytes: dict[str, float] = {n: 0.0 for n in topo.nodes}

    # -- scheduling ---------------------------------------------------------

    def _push(self, time_s: float, event: Event) -> None:
        if time_s < self.now_s - 1e-12:
            raise ValueError(f"cannot schedule event at {time_s} before now {self.now_s}")
        event.time_s = time_s
        heapq.heappush(self._heap, (time_s, next(self._seq), event))

    def start_flow(self, flow: Flow, at: float | None = None) -> None:
        if flow.id in self.flows:
            raise ValueError(f"duplicate flow id {flow.id!r}")
        self.flows[flow.id] = flow
        self._push(self.now_s if at is None else at, Event(EventKind.FLOW_START, flow_id=flow.id))

    def set_demand(self, flow_id: str, demand_mbps: float, at: float | None = None) -> None:
        self._push(
            self.now_s if at is None else at,
            Event(EventKind.RATE_CHANGE, flow_id=flow_id, demand_mbps=demand_mbps),
        )

    def schedule_phase(self, at: float, tag: Any) -> None:
        self._push(at, Event(EventKind.ROUND_PHASE, tag=tag))

    def schedule_sample(self, at: float, tag: Any = None) -> None:
        self._push(at, Event(EventKind.METRIC_SAMPLE, tag=tag))

    def has_events(self) -> bool:
        return bool(self._heap)

    def peek_time(self) -> float:
        return self._heap[0][0]

    # -- event loop ---------------------------------------------------------

    def advance(self) -> Event:
        """Pop and process the earliest event; returns it. Queue must be non-empty."""
        while True:
            if not self._heap:
                raise IndexError("advance() on empty event queue")
            time_s, _, event = heapq.heappop(self._heap)
            if event.kind is EventKind.FLOW_COMPLETE and event._version != self._version:
                continue  # superseded by a newer allocation
            break

        self._integrate(time_s)
        self.now_s = time_s

        dirty = False
        if event.kind is EventKind.FLOW_START:
            flow = self.flows[event.flow_id]
            flow.start_s = time_s
            self._active[flow.id] = flow
            dirty = True
        elif event.kind is EventKind.FLOW_COMPLETE:
            flow = self._active.pop(event.flow_id)
            flow.bytes_remaining = 0.0
            flow.tx_end_s = time_s
            flow.done_s = time_s + flow.propagation_s
            dirty = True
        elif event.kind is EventKind.RATE_CHANGE:
            flow = self.flows[event.flow_id]
            if flow.demand_mbps != event.demand_mbps:
                flow.demand_mbps = event.demand_mbps
                dirty = flow.id in self._active

        if dirty:
            self._reallocate()
        return event

    def _integrate(self, until_s: float) -> None:
        dt = until_s - self.now_s
        if dt <= 0:
            return
        for fid, flow in self._active.items():
            rate = self._rates.get(fid, 0.0)
            if rate <= 0:
                continue
            injected = rate * BITS_PER_MBPS / 8.0 * dt
            delivered = injected * (1.0 - flow.path_loss)
            self._tx_bytes[flow.src] += injected
            self._rx_bytes[flow.dst] += delivered
            if flow.kind is FlowKind.ELASTIC:
                flow.bytes_remaining = max(flow.bytes_remaining - delivered, 0.0)

    def _reallocate(self) -> None:
        live = [f for f in self._active.values()]
        self._rates = allocate_rates(live, self.topo)
        self._version += 1

        best: tuple[float, str] | None = None
        for flow in live:
            if flow.kind is not FlowKind.ELASTIC:
                continue
            eff = self._rates[flow.id] * (1.0 - flow.path_loss) * BITS_PER_MBPS / 8.0
            if eff <= 0:
                t_done = math.inf
            else:
                t_done = self.now_s + flow.bytes_remaining / eff
            if best is None or (t_done, flow.id) < best:
                best = (t_done, flow.id)
        if best is None:
            return
        t_done, fid = best
        if math.isinf(t_done):
            if not self._heap:
                raise StalledSimulation(fid)
            return
        self._push(t_done, Event(EventKind.FLOW_COMPLETE, flow_id=fid, _version=self._version))

    # -- read-only views ----------------------------------------------------

    def allocation(self) -> dict[str, float]:
        return dict(self._rates)

    def active_flows(self) -> list[Flow]:
        return list(self._active.values())

    def link_loads(self) -> dict[tuple[str, str], tuple[float, float]]:
        """Current (load_mbps, capacity_mbps) per link that carries traffic."""
        loads: dict[tuple[str, str], float] = {}
        caps: dict[tuple[str, str], float] = {}
        for fid, flow in self._active.items():
            for link in flow.path:
                loads[link.pair] = loads.get(link.pair, 0.0) + self._rates.get(fid, 0.0)
                caps[link.pair] = link.attrs.bandwidth_mbps
        return {pair: (loads[pair], caps[pair]) for pair in loads}

    def link_counters(self) -> dict[str, tuple[float, float, float, float]]:
        """Per-node (tx_bytes, rx_bytes, tx_bps, rx_bps), endpoints attribution.

        TX counts injected bytes at the source; RX counts delivered bytes at
        the destination (injected scaled by path loss). Rates reflect the
        current allocation.
        """
        tx_bps = {n: 0.0 for n in self.topo.nodes}
        rx_bps = {n: 0.0 for n in self.topo.nodes}
        for fid, flow in self._active.items():
            rate = self._rates.get(fid, 0.0)
            tx_bps[flow.src] += rate * BITS_PER_MBPS
            rx_bps[flow.dst] += rate * (1.0 - flow.path_loss) * BITS_PER_MBPS
        return {
            n: (self._tx_bytes[n], self._rx_bytes[n], tx_bps[n], rx_bps[n])
            for n in self.topo.nodes
        }


def transfer_time_components(flow: Flow) -> tuple[float, float]:
    """(propagation_s, transmission_s) of a completed elastic flow.

    Completion time decomposes as start + propagation + transmission, where
    transmission is the time the allocated (loss-degraded) rate needed to
    deliver bytes_total.
    """
    if flow.done_s is None or flow.start_s is None:
        raise ValueError(f"flow {flow.id!r} has not completed")
    return flow.propagation_s, flow.tx_end_s - flow.start_s
