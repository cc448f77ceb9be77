"""Experiment driver: federated rounds co-simulated with the network.

Each round runs three client phases on the simulated clock. S2C: the server
broadcasts the global model as one unicast elastic flow per selected client,
all started at the round boundary (this reproduces server-uplink
contention). Compute: starts when a client's payload lands, with duration
from the synthetic compute model. C2S: the client uploads its update, and
stragglers' flows overlap naturally. Aggregation is modeled as zero server
time. Learning is deliberately decoupled from timing: training consumes
seeds derived only from (fl.seed, round, client slot), so traffic schedules
change round durations but never loss or accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import (
    CsvSink,
    ExperimentConfig,
    LogfileSink,
    StreamSink,
    resolve_topology,
    validate,
)
from .errors import ValidationError
from .fl import (
    ClientState,
    FedAvgM,
    FedAvgMState,
    FedYogi,
    FedYogiState,
    aggregate_fedavg,
    evaluate,
    init_params,
    local_train,
    make_synthetic_dataset,
    partition,
    select_clients,
    server_update_fedavgm,
    server_update_fedyogi,
    train_eval_split,
)
from .metrics import CsvWriter, LogfileWriter, MetricEnvelope, MetricsHub, TcpPublisher
from .netsim import EventKind, FlowSim, elastic_flow, inelastic_flow
from .topology import NodeKind, NodeRole, shortest_path
from .traffic import iter_demand_changes

IDLE_CPU_PCT = 2.0
BUSY_CPU_PCT = 100.0
IDLE_MEM_MB = 64.0

_DATA, _PARTITION, _SELECT, _TRAIN = 1, 2, 3, 4


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from integer parts (seed tree for sub-streams)."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


@dataclass
class ClientRoundTiming:
    client_id: str
    s2c_s: float
    compute_s: float
    c2s_s: float

    @property
    def span_s(self) -> float:
        return self.s2c_s + self.compute_s + self.c2s_s


@dataclass
class RoundRecord:
    round: int
    selected: tuple[str, ...]
    timings: list[ClientRoundTiming]
    round_duration_s: float
    global_loss: float
    global_accuracy: float


@dataclass
class ExperimentResult:
    rounds: list[RoundRecord]
    final_loss: float
    final_accuracy: float
    out_dir: Path | None = None
    csv_dir: Path | None = None
    stream_drops: int = 0

    @property
    def accuracy_trajectory(self) -> list[float]:
        return [r.global_accuracy for r in self.rounds]


class Experiment:
    """One configured run; create, then call run() exactly once."""

    def __init__(self, cfg: ExperimentConfig, out_dir=None, extra_sinks=(), round_callback=None):
        self.cfg = cfg
        self.round_callback = round_callback
        self.topo = resolve_topology(cfg.net)
        problems = validate(cfg, self.topo)
        if problems:
            raise ValidationError(problems)

        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.csv_dir: Path | None = None
        self.publisher: TcpPublisher | None = None
        sinks = list(extra_sinks)
        for sink_cfg in cfg.general.sinks:
            if isinstance(sink_cfg, CsvSink):
                if self.out_dir is None:
                    raise ValueError("csv sink configured but no output directory given")
                self.csv_dir = (self.out_dir / sink_cfg.dir).resolve()
                sinks.append(CsvWriter(self.csv_dir))
            elif isinstance(sink_cfg, LogfileSink):
                if self.out_dir is None:
                    raise ValueError("logfile sink configured but no output directory given")
                sinks.append(LogfileWriter(self.out_dir / sink_cfg.path))
            elif isinstance(sink_cfg, StreamSink):
                self.publisher = TcpPublisher(sink_cfg.bind)
                sinks.append(self.publisher)
        self.hub = MetricsHub(sinks)

        self.server = cfg.net.server_node
        self.clients = sorted(self.topo.nodes_with_role(NodeRole.CLIENT))
        self.client_slot = {cid: i for i, cid in enumerate(self.clients)}
        self.client_states = {
            cid: ClientState(self.topo.nodes[cid].resources) for cid in self.clients
        }
        self.paths = {cid: tuple(shortest_path(self.topo, self.server, cid)) for cid in self.clients}

        fl = cfg.fl
        full = make_synthetic_dataset(
            derive_seed(fl.seed, _DATA),
            n=fl.dataset.n,
            n_classes=fl.dataset.n_classes,
            dim=fl.dataset.dim,
            class_sep=fl.dataset.class_sep,
        )
        self.train_ds, self.eval_ds = train_eval_split(full, fl.dataset.eval_fraction)
        self.partition = partition(
            self.train_ds, fl.partition, fl.n_clients, derive_seed(fl.seed, _PARTITION)
        )
        self.params = init_params(fl.model, fl.dataset.dim, fl.dataset.n_classes, fl.train.seed)
        self.agg_state = None
        if isinstance(fl.aggregator, FedAvgM):
            self.agg_state = FedAvgMState.zeros(self.params.values.size)
        elif isinstance(fl.aggregator, FedYogi):
            self.agg_state = FedYogiState.zeros(self.params.values.size)

        self.sim = FlowSim(self.topo)
        self._traffic_iters = {}
        for i, spec in enumerate(cfg.net.traffic):
            fid = f"bg{i}"
            path = shortest_path(self.topo, spec.src, spec.dst)
            self.sim.start_flow(inelastic_flow(fid, spec.src, spec.dst, path, 0.0), at=spec.start_s)
            changes = iter_demand_changes(spec)
            self._traffic_iters[fid] = changes
            first = next(changes, None)
            if first is not None:
                self.sim.set_demand(fid, first[1], at=first[0])

        self._sample_period = cfg.general.metric_sample_period_s
        self.sim.schedule_sample(self._sample_period)
        self._compute_windows: dict[str, tuple[float, float]] = {}
        self._mem_during_compute = {
            cid: IDLE_MEM_MB
            + self.params.values.size * 8 / 1e6
            + len(self.partition[self.client_slot[cid]]) * fl.dataset.dim * 8 / 1e6
            for cid in self.clients
        }
        self.records: list[RoundRecord] = []
        self._ran = False

    # -- metric emission ----------------------------------------------------

    def _emit_samples(self, t: float) -> None:
        counters = self.sim.link_counters()
        for node in sorted(self.topo.nodes):
            if self.topo.nodes[node].kind is not NodeKind.HOST:
                continue
            tx_bytes, rx_bytes, tx_bps, rx_bps = counters[node]
            self.hub.emit(
                MetricEnvelope(
                    t,
                    node,
                    "net.sample",
                    {
                        "tx_bytes": tx_bytes,
                        "rx_bytes": rx_bytes,
                        "tx_bps": tx_bps,
                        "rx_bps": rx_bps,
                    },
                )
            )
            window = self._compute_windows.get(node)
            busy = window is not None and window[0] <= t < window[1]
            self.hub.emit(
                MetricEnvelope(
                    t,
                    node,
                    "sys.sample",
                    {
                        "cpu_pct": BUSY_CPU_PCT if busy else IDLE_CPU_PCT,
                        "mem_mb": self._mem_during_compute[node] if busy else IDLE_MEM_MB,
                    },
                )
            )
        self.sim.schedule_sample(t + self._sample_period)

    def system_metrics_at(self, t: float) -> dict[str, tuple[float, float]]:
        """Synthesized (cpu_pct, mem_mb) per client under the phase rule."""
        out = {}
        for cid in self.clients:
            window = self._compute_windows.get(cid)
            busy = window is not None and window[0] <= t < window[1]
            out[cid] = (
                BUSY_CPU_PCT if busy else IDLE_CPU_PCT,
                self._mem_during_compute[cid] if busy else IDLE_MEM_MB,
            )
        return out

    # -- round machinery ----------------------------------------------------

    def _simulate_round(self, round_no: int) -> RoundRecord:
        cfg = self.cfg.fl
        round_start = self.sim.now_s
        rng = np.random.default_rng(derive_seed(cfg.seed, _SELECT, round_no))
        selected = select_clients(
            cfg.selection_strategy, self.client_states, cfg.clients_per_round_fraction, rng
        )
        wire = self.params.wire_bytes

        s2c_flows = {}
        c2s_flows = {}
        for cid in selected:
            flow = elastic_flow(f"r{round_no}.s2c.{cid}", self.server, cid, self.paths[cid], wire)
            self.sim.start_flow(flow, at=round_start)
            s2c_flows[flow.id] = cid

        s2c_s: dict[str, float] = {}
        compute_s: dict[str, float] = {}
        compute_end: dict[str, float] = {}
        c2s_s: dict[str, float] = {}
        round_end = round_start
        pending = set(selected)

        while True:
            event = self.sim.advance()
            if event.kind is EventKind.METRIC_SAMPLE:
                self._emit_samples(event.time_s)
            elif event.kind is EventKind.RATE_CHANGE:
                self._on_traffic_change(event)
            elif event.kind is EventKind.FLOW_COMPLETE and event.flow_id in s2c_flows:
                cid = s2c_flows[event.flow_id]
                flow = self.sim.flows[event.flow_id]
                s2c_s[cid] = flow.done_s - round_start
                n_samples = len(self.partition[self.client_slot[cid]])
                cpu = self.client_states[cid].resources.cpu_units
                duration = self.cfg.fl.compute.compute_s(cfg.train.local_epochs, n_samples, cpu)
                compute_s[cid] = duration
                compute_end[cid] = flow.done_s + duration
                self._compute_windows[cid] = (flow.done_s, compute_end[cid])
                self.sim.schedule_phase(compute_end[cid], tag=("compute_end", round_no, cid))
            elif event.kind is EventKind.ROUND_PHASE and event.tag[0] == "compute_end":
                _, _, cid = event.tag
                flow = elastic_flow(
                    f"r{round_no}.c2s.{cid}", cid, self.server, self.paths[cid], wire
                )
                self.sim.start_flow(flow)
                c2s_flows[flow.id] = cid
            elif event.kind is EventKind.FLOW_COMPLETE and event.flow_id in c2s_flows:
                cid = c2s_flows[event.flow_id]
                flow = self.sim.flows[event.flow_id]
                c2s_s[cid] = flow.done_s - compute_end[cid]
                round_end = max(round_end, flow.done_s)
                pending.discard(cid)
                if not pending:
                    self.sim.schedule_phase(round_end, tag=("round_end", round_no))
            elif event.kind is EventKind.ROUND_PHASE and event.tag[0] == "round_end":
                break

        timings = [
            ClientRoundTiming(cid, s2c_s[cid], compute_s[cid], c2s_s[cid]) for cid in selected
        ]
        duration = max(t.span_s for t in timings)

        # Learning step: independent of everything above except the round index
        updates = []
        for cid in selected:
            slot = self.client_slot[cid]
            idx = self.partition[slot]
            train_rng = np.random.default_rng(derive_seed(cfg.seed, _TRAIN, round_no, slot))
            trained, _ = local_train(
                self.params,
                self.train_ds.features[idx],
                self.train_ds.labels[idx],
                local_epochs=cfg.train.local_epochs,
                batch_size=cfg.train.batch_size,
                lr=cfg.train.lr,
                mu=cfg.train.mu,
                rng=train_rng,
            )
            updates.append((trained, len(idx)))
        fedavg_result = aggregate_fedavg(updates)
        if isinstance(cfg.aggregator, FedAvgM):
            self.params, self.agg_state = server_update_fedavgm(
                self.agg_state,
                self.params,
                fedavg_result,
                cfg.aggregator.server_lr,
                cfg.aggregator.beta,
            )
        elif isinstance(cfg.aggregator, FedYogi):
            self.params, self.agg_state = server_update_fedyogi(
                self.agg_state,
                self.params,
                fedavg_result,
                cfg.aggregator.eta,
                cfg.aggregator.beta1,
                cfg.aggregator.beta2,
                cfg.aggregator.tau,
            )
        else:
            self.params = fedavg_result
        loss, accuracy = evaluate(self.params, self.eval_ds)

        record = RoundRecord(round_no, selected, timings, duration, loss, accuracy)
        for t in timings:
            self.hub.emit(
                MetricEnvelope(
                    round_end,
                    "server",
                    "fl.round",
                    {
                        "round": round_no,
                        "client_id": t.client_id,
                        "s2c_s": t.s2c_s,
                        "compute_s": t.compute_s,
                        "c2s_s": t.c2s_s,
                        "round_duration_s": duration,
                        "global_loss": loss,
                        "global_accuracy": accuracy,
                    },
                )
            )
        return record

    def _on_traffic_change(self, event) -> None:
        self.hub.emit(
            MetricEnvelope(
                event.time_s,
                event.flow_id,
                "traffic.event",
                {"flow_id": event.flow_id, "demand_mbps": event.demand_mbps},
            )
        )
        nxt = next(self._traffic_iters[event.flow_id], None)
        if nxt is not None:
            self.sim.set_demand(event.flow_id, nxt[1], at=nxt[0])

    def run(self) -> ExperimentResult:
        if self._ran:
            raise RuntimeError("Experiment.run() may only be called once")
        self._ran = True
        try:
            for round_no in range(1, self.cfg.fl.rounds + 1):
                record = self._simulate_round(round_no)
                self.records.append(record)
                if self.round_callback is not None:
                    self.round_callback(record)
        finally:
            drops = self.publisher.dropped_total if self.publisher else 0
            self.hub.close()
        last = self.records[-1]
        return ExperimentResult(
            rounds=self.records,
            final_loss=last.global_loss,
            final_accuracy=last.global_accuracy,
            out_dir=self.out_dir,
            csv_dir=self.csv_dir,
            stream_drops=drops,
        )


def run_experiment(
    cfg: ExperimentConfig, out_dir=None, extra_sinks=(), round_callback=None
) -> ExperimentResult:
    """Run the full experiment described by cfg; deterministic given cfg.

    out_dir anchors the file sinks (csv_dir and logfile paths from
    general.toml are resolved beneath it). Raises ValidationError when cfg
    and its topology disagree.
    """
    return Experiment(
        cfg, out_dir=out_dir, extra_sinks=extra_sinks, round_callback=round_callback
    ).run()
