"""Three-file TOML experiment configuration.

fl.toml, net.toml, and general.toml each own a disjoint namespace and merge
into one immutable ExperimentConfig. Loading is strict: unknown keys are
rejected (typo protection), and every violated invariant is reported in a
single ValidationError rather than one at a time. Defaults are compiled in,
so `default_config()` works in an empty directory; the same values ship as
TOML files for reference. All key names are documented in docs/config.md.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Union

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import MissingFile, ParseError, ValidationError
from .fl.aggregate import AggregatorSpec, FedAvg, FedAvgM, FedYogi
from .fl.models import ModelSpec
from .fl.partition import IID, Dirichlet, PartitionSpec, Shards
from .fl.selection import Random, ResourceAware, SelectionStrategy
from .topology import (
    LinkAttrs,
    NodeKind,
    NodeRole,
    TopoShape,
    Topology,
    generate,
    parse_graphml,
    parse_topohub_json,
)
from .traffic import (
    Bursty,
    Normal,
    Poisson,
    SineWave,
    TraceReplay,
    TrafficFlowSpec,
    Uniform,
)

FL_FILE = "fl.toml"
NET_FILE = "net.toml"
GENERAL_FILE = "general.toml"
CONFIG_FILES = (FL_FILE, NET_FILE, GENERAL_FILE)

MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass(frozen=True)
class TrainConfig:
    local_epochs: int
    batch_size: int
    lr: float
    mu: float
    seed: int  # seeds the initial global model parameters


@dataclass(frozen=True)
class DatasetSpec:
    n: int
    n_classes: int
    dim: int
    class_sep: float
    eval_fraction: float

    @property
    def eval_n(self) -> int:
        return int(round(self.n * self.eval_fraction))

    @property
    def train_n(self) -> int:
        return self.n - self.eval_n


@dataclass(frozen=True)
class ComputeModel:
    """Synthetic client compute cost: reference-core seconds per sample per epoch."""

    work_per_sample_s: float

    def compute_s(self, local_epochs: int, n_samples: int, cpu_units: float) -> float:
        return local_epochs * n_samples * self.work_per_sample_s / cpu_units


@dataclass(frozen=True)
class FlConfig:
    n_clients: int
    rounds: int
    clients_per_round_fraction: float
    selection_strategy: SelectionStrategy
    aggregator: AggregatorSpec
    model: ModelSpec
    train: TrainConfig
    dataset: DatasetSpec
    compute: ComputeModel
    partition: PartitionSpec
    seed: int


@dataclass(frozen=True)
class TopohubJson:
    path: str


@dataclass(frozen=True)
class GraphML:
    path: str


@dataclass(frozen=True)
class Generated:
    shape: TopoShape
    n_hosts: int


TopologySource = Union[TopohubJson, GraphML, Generated]


@dataclass(frozen=True)
class NetConfig:
    topology_source: TopologySource
    default_link: LinkAttrs
    traffic: tuple[TrafficFlowSpec, ...]
    server_node: str


@dataclass(frozen=True)
class CsvSink:
    dir: str


@dataclass(frozen=True)
class LogfileSink:
    path: str


@dataclass(frozen=True)
class StreamSink:
    bind: str  # "host:port"


Sink = Union[CsvSink, LogfileSink, StreamSink]


@dataclass(frozen=True)
class GeneralConfig:
    sinks: tuple[Sink, ...]
    metric_sample_period_s: float
    report: bool

    def sink(self, kind):
        for s in self.sinks:
            if isinstance(s, kind):
                return s
        return None


@dataclass(frozen=True)
class ExperimentConfig:
    fl: FlConfig
    net: NetConfig
    general: GeneralConfig


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


class _Table:
    """Strict reader over one parsed TOML table.

    Typed accessors record range/type problems as violations instead of
    raising, so one load reports everything wrong at once. Keys not consumed
    by the schema are collected as unknown.
    """

    def __init__(self, filename: str, data: dict, prefix: str, violations: list[Violation]):
        self.filename = filename
        self.data = dict(data)
        self.prefix = prefix
        self.violations = violations
        self.unknown: list[str] = []

    def _path(self, key: str) -> str:
        return f"{self.prefix}.{key}" if self.prefix else key

    def violate(self, key: str, message: str) -> None:
        self.violations.append(Violation(self._path(key), message))

    def _take(self, key, types, default, type_name):
        if key not in self.data:
            return default
        value = self.data.pop(key)
        if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
            self.violate(key, f"expected {type_name}, got a boolean")
            return default
        if not isinstance(value, types):
            self.violate(key, f"expected {type_name}, got {type(value).__name__}")
            return default
        return value

    def integer(self, key, default, minimum=None, maximum=None):
        value = self._take(key, int, default, "an integer")
        if value is not None:
            if minimum is not None and value < minimum:
                self.violate(key, f"must be >= {minimum}, got {value}")
                return default
            if maximum is not None and value > maximum:
                self.violate(key, f"must be <= {maximum}, got {value}")
                return default
        return value

    def number(self, key, default, minimum=None, exclusive_minimum=None, maximum=None, below_one=False):
        value = self._take(key, (int, float), default, "a number")
        if value is None:
            return value
        value = float(value)
        if not math.isfinite(value):
            self.violate(key, "must be finite")
            return default
        if minimum is not None and value < minimum:
            self.violate(key, f"must be >= {minimum}, got {value}")
            return default
        if exclusive_minimum is not None and value <= exclusive_minimum:
            self.violate(key, f"must be > {exclusive_minimum}, got {value}")
            return default
        if maximum is not None and value > maximum:
            self.violate(key, f"must be <= {maximum}, got {value}")
            return default
        if below_one and value >= 1.0:
            self.violate(key, f"must be < 1, got {value}")
            return default
        return value

    def string(self, key, default, choices=None):
        value = self._take(key, str, default, "a string")
        if value is not None and choices is not None and value not in choices:
            self.violate(key, f"must be one of {sorted(choices)}, got {value!r}")
            return default
        return value

    def boolean(self, key, default):
        return self._take(key, bool, default, "a boolean")

    def table(self, key) -> "_Table":
        raw = self.data.pop(key, {})
        if not isinstance(raw, dict):
            self.violate(key, f"expected a table, got {type(raw).__name__}")
            raw = {}
        return _Table(self.filename, raw, self._path(key), self.violations)

    def table_array(self, key) -> list["_Table"]:
        raw = self.data.pop(key, [])
        if not isinstance(raw, list) or not all(isinstance(item, dict) for item in raw):
            self.violate(key, "expected an array of tables")
            return []
        return [
            _Table(self.filename, item, f"{self._path(key)}[{i}]", self.violations)
            for i, item in enumerate(raw)
        ]

    def finish(self) -> list[str]:
        return [self._path(key) for key in self.data]


def _parse_file(path: Path) -> dict:
    try:
        text = path.read_bytes()
    except FileNotFoundError:
        raise MissingFile(path.name) from None
    try:
        return tomllib.loads(text.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        match = re.search(r"line (\d+)", str(exc))
        line = int(match.group(1)) if match else None
        raise ParseError(path.name, str(exc), line=line) from None


def _read_fl(table: _Table) -> FlConfig:
    d = _defaults_fl()
    n_clients = table.integer("n_clients", d.n_clients, minimum=1)
    rounds = table.integer("rounds", d.rounds, minimum=1)
    fraction = table.number(
        "clients_per_round_fraction", d.clients_per_round_fraction, exclusive_minimum=0.0, maximum=1.0
    )
    seed = table.integer("seed", d.seed, minimum=0, maximum=MAX_SEED)

    sel = table.table("selection")
    strategy_name = sel.string("strategy", "random", choices={"random", "resource_aware"})
    if strategy_name == "resource_aware":
        strategy: SelectionStrategy = ResourceAware(top_k_by_cpu=sel.boolean("top_k_by_cpu", True))
    else:
        strategy = Random()
    unknown = sel.finish()

    agg = table.table("aggregator")
    kind = agg.string("kind", "fedavg", choices={"fedavg", "fedavgm", "fedyogi"})
    if kind == "fedavgm":
        aggregator: AggregatorSpec = FedAvgM(
            server_lr=agg.number("server_lr", 1.0, exclusive_minimum=0.0),
            beta=agg.number("beta", 0.9, minimum=0.0, below_one=True),
        )
    elif kind == "fedyogi":
        aggregator = FedYogi(
            eta=agg.number("eta", 0.01, exclusive_minimum=0.0),
            beta1=agg.number("beta1", 0.9, minimum=0.0, below_one=True),
            beta2=agg.number("beta2", 0.99, minimum=0.0, below_one=True),
            tau=agg.number("tau", 1e-3, exclusive_minimum=0.0),
        )
    else:
        aggregator = FedAvg()
    unknown += agg.finish()

    model_table = table.table("model")
    model_kind = model_table.string("kind", "logreg", choices={"logreg", "mlp"})
    if model_kind == "mlp":
        model = ModelSpec("mlp", hidden_units=model_table.integer("hidden_units", 32, minimum=1))
    else:
        model = ModelSpec("logreg")
    unknown += model_table.finish()

    train_table = table.table("train")
    train = TrainConfig(
        local_epochs=train_table.integer("local_epochs", d.train.local_epochs, minimum=1),
        batch_size=train_table.integer("batch_size", d.train.batch_size, minimum=1),
        lr=train_table.number("lr", d.train.lr, exclusive_minimum=0.0),
        mu=train_table.number("mu", d.train.mu, minimum=0.0),
        seed=train_table.integer("seed", d.train.seed, minimum=0, maximum=MAX_SEED),
    )
    unknown += train_table.finish()

    ds = table.table("dataset")
    dataset = DatasetSpec(
        n=ds.integer("n", d.dataset.n, minimum=4),
        n_classes=ds.integer("n_classes", d.dataset.n_classes, minimum=2),
        dim=ds.integer("dim", d.dataset.dim, minimum=2),
        class_sep=ds.number("class_sep", d.dataset.class_sep, minimum=0.0),
        eval_fraction=ds.number("eval_fraction", d.dataset.eval_fraction, exclusive_minimum=0.0, below_one=True),
    )
    unknown += ds.finish()

    comp = table.table("compute")
    compute = ComputeModel(
        work_per_sample_s=comp.number("work_per_sample_s", d.compute.work_per_sample_s, exclusive_minimum=0.0)
    )
    unknown += comp.finish()

    part = table.table("partition")
    part_kind = part.string("kind", "iid", choices={"iid", "shards", "dirichlet"})
    if part_kind == "shards":
        partition: PartitionSpec = Shards(classes_per_client=part.integer("classes_per_client", 2, minimum=1))
    elif part_kind == "dirichlet":
        partition = Dirichlet(alpha=part.number("alpha", 0.5, exclusive_minimum=0.0))
    else:
        partition = IID()
    unknown += part.finish()

    unknown += table.finish()
    if unknown:
        raise ParseError(table.filename, f"unknown keys: {', '.join(sorted(unknown))}")
    return FlConfig(
        n_clients=n_clients,
        rounds=rounds,
        clients_per_round_fraction=fraction,
        selection_strategy=strategy,
        aggregator=aggregator,
        model=model,
        train=train,
        dataset=dataset,
        compute=compute,
        partition=partition,
        seed=seed,
    )


def _read_pattern(table: _Table):
    kind = table.string(
        "kind",
        None,
        choices={"poisson", "bursty", "uniform", "normal", "sine_wave", "trace_replay"},
    )
    if kind is None:
        table.violate("kind", "traffic pattern needs a kind")
        return Uniform(0.0)
    if kind == "poisson":
        return Poisson(
            lambda_events_per_s=table.number("lambda_events_per_s", 1.0, exclusive_minimum=0.0),
            event_bytes=table.number("event_bytes", 12500.0, exclusive_minimum=0.0),
        )
    if kind == "bursty":
        return Bursty(
            burst_rate_mbps=table.number("burst_rate_mbps", 10.0, minimum=0.0),
            burst_s=table.number("burst_s", 1.0, exclusive_minimum=0.0),
            idle_s=table.number("idle_s", 1.0, minimum=0.0),
        )
    if kind == "uniform":
        return Uniform(rate_mbps=table.number("rate_mbps", 10.0, minimum=0.0))
    if kind == "normal":
        return Normal(
            mean_mbps=table.number("mean_mbps", 10.0, minimum=0.0),
            std_mbps=table.number("std_mbps", 1.0, minimum=0.0),
            step_s=table.number("step_s", 0.1, exclusive_minimum=0.0),
        )
    if kind == "sine_wave":
        return SineWave(
            base_mbps=table.number("base_mbps", 10.0, minimum=0.0),
            amplitude_mbps=table.number("amplitude_mbps", 5.0, minimum=0.0),
            period_s=table.number("period_s", 60.0, exclusive_minimum=0.0),
        )
    return TraceReplay(
        path=table.string("path", ""),
        time_scale=table.number("time_scale", 1.0, exclusive_minimum=0.0),
    )


def _read_net(table: _Table, base_dir: Path) -> NetConfig:
    d = _defaults_net()
    server_node = table.string("server_node", d.server_node)

    topo_table = table.table("topology")
    source_kind = topo_table.string("source", "generated", choices={"generated", "topohub_json", "graphml"})
    if source_kind == "generated":
        shape_name = topo_table.string("shape", "star", choices={"star", "full_mesh", "line"})
        source: TopologySource = Generated(
            shape=TopoShape(shape_name),
            n_hosts=topo_table.integer("n_hosts", 5, minimum=2),
        )
    else:
        rel = topo_table.string("path", "")
        if not rel:
            topo_table.violate("path", f"{source_kind} topology needs a path")
        resolved = str((base_dir / rel).resolve()) if rel else ""
        source = TopohubJson(resolved) if source_kind == "topohub_json" else GraphML(resolved)
    unknown = topo_table.finish()

    link_table = table.table("default_link")
    bandwidth = link_table.number("bandwidth_mbps", d.default_link.bandwidth_mbps, exclusive_minimum=0.0)
    delay = link_table.number("delay_ms", d.default_link.delay_ms, minimum=0.0)
    loss = link_table.number("loss_frac", d.default_link.loss_frac, minimum=0.0, below_one=True)
    default_link = LinkAttrs(bandwidth, delay, loss)
    unknown += link_table.finish()

    flows = []
    for i, flow_table in enumerate(table.table_array("traffic")):
        src = flow_table.string("src", "")
        dst = flow_table.string("dst", "")
        if not src or not dst:
            flow_table.violate("src" if not src else "dst", "traffic flows need src and dst")
        cap = flow_table.number("cap_mbps", 50.0, exclusive_minimum=0.0)
        start = flow_table.number("start_s", 0.0, minimum=0.0)
        stop = flow_table.number("stop_s", start + 1.0)
        seed = flow_table.integer("seed", i, minimum=0, maximum=MAX_SEED)
        pattern_table = flow_table.table("pattern")
        pattern = _read_pattern(pattern_table)
        if isinstance(pattern, TraceReplay) and pattern.path:
            pattern = TraceReplay(str((base_dir / pattern.path).resolve()), pattern.time_scale)
        spec = TrafficFlowSpec(src, dst, pattern, cap, start, stop, seed)
        for problem in spec.problems():
            flow_table.violate("pattern", problem)
        flows.append(spec)
        unknown += pattern_table.finish()
        unknown += flow_table.finish()

    unknown += table.finish()
    if unknown:
        raise ParseError(table.filename, f"unknown keys: {', '.join(sorted(unknown))}")
    return NetConfig(
        topology_source=source,
        default_link=default_link,
        traffic=tuple(flows),
        server_node=server_node,
    )


def _read_general(table: _Table, base_dir: Path) -> GeneralConfig:
    d = _defaults_general()
    period = table.number("metric_sample_period_s", d.metric_sample_period_s, exclusive_minimum=0.0)
    report = table.boolean("report", d.report)

    sinks_table = table.table("sinks")
    sinks: list[Sink] = []
    csv_dir = sinks_table.string("csv_dir", None)
    if csv_dir is not None:
        sinks.append(CsvSink(csv_dir))
    logfile = sinks_table.string("logfile", None)
    if logfile is not None:
        sinks.append(LogfileSink(logfile))
    stream_bind = sinks_table.string("stream_bind", None)
    if stream_bind is not None:
        if ":" not in stream_bind:
            sinks_table.violate("stream_bind", 'expected "host:port"')
        sinks.append(StreamSink(stream_bind))
    if not sinks:
        table.violate("sinks", "at least one sink must be enabled")
    unknown = sinks_table.finish() + table.finish()
    if unknown:
        raise ParseError(table.filename, f"unknown keys: {', '.join(sorted(unknown))}")
    return GeneralConfig(sinks=tuple(sinks), metric_sample_period_s=period, report=report)


def load_config(config_dir, use_defaults: bool = False) -> ExperimentConfig:
    """Load and fully validate fl.toml, net.toml, general.toml from config_dir.

    A missing file is an error unless use_defaults is set, in which case the
    compiled-in defaults stand in for it. Cross-file checks run against the
    resolved topology, so any config this returns passes validate() with zero
    violations. Raises MissingFile, ParseError, or ValidationError (carrying
    every violation found, not just the first).
    """
    base_dir = Path(config_dir)
    raw: dict[str, dict | None] = {}
    for name in CONFIG_FILES:
        path = base_dir / name
        if not path.exists() and use_defaults:
            raw[name] = None
            continue
        raw[name] = _parse_file(path)

    violations: list[Violation] = []
    if raw[FL_FILE] is None:
        fl = _defaults_fl()
    else:
        fl = _read_fl(_Table(FL_FILE, raw[FL_FILE], "", violations))
    if raw[NET_FILE] is None:
        net = _defaults_net()
    else:
        net = _read_net(_Table(NET_FILE, raw[NET_FILE], "", violations), base_dir)
    if raw[GENERAL_FILE] is None:
        general = _defaults_general()
    else:
        general = _read_general(_Table(GENERAL_FILE, raw[GENERAL_FILE], "", violations), base_dir)
    if violations:
        raise ValidationError(violations)

    cfg = ExperimentConfig(fl=fl, net=net, general=general)
    cross = validate(cfg, resolve_topology(cfg.net))
    if cross:
        raise ValidationError(cross)
    return cfg


# ---------------------------------------------------------------------------
# Defaults
# ---------------------------------------------------------------------------


def _defaults_fl() -> FlConfig:
    return FlConfig(
        n_clients=4,
        rounds=3,
        clients_per_round_fraction=1.0,
        selection_strategy=Random(),
        aggregator=FedAvg(),
        model=ModelSpec("logreg"),
        train=TrainConfig(local_epochs=1, batch_size=32, lr=0.1, mu=0.0, seed=7),
        dataset=DatasetSpec(n=500, n_classes=2, dim=2, class_sep=4.0, eval_fraction=0.2),
        compute=ComputeModel(work_per_sample_s=0.0002),
        partition=IID(),
        seed=42,
    )


def _defaults_net() -> NetConfig:
    return NetConfig(
        topology_source=Generated(shape=TopoShape.STAR, n_hosts=5),
        default_link=LinkAttrs(100.0, 1.0, 0.0),
        traffic=(),
        server_node="h1",
    )


def _defaults_general() -> GeneralConfig:
    return GeneralConfig(
        sinks=(CsvSink("."),),
        metric_sample_period_s=0.01,
        report=True,
    )


def default_config() -> ExperimentConfig:
    """Complete runnable defaults: star of 4 clients, FedAvg, IID, no traffic."""
    return ExperimentConfig(fl=_defaults_fl(), net=_defaults_net(), general=_defaults_general())


# ---------------------------------------------------------------------------
# Cross-file validation
# ---------------------------------------------------------------------------


def resolve_topology(net: NetConfig) -> Topology:
    """Load or generate the topology and mark the server node's role."""
    source = net.topology_source
    if isinstance(source, Generated):
        topo = generate(source.shape, source.n_hosts, net.default_link)
    else:
        path = Path(source.path)
        if not path.exists():
            raise MissingFile(str(path))
        if isinstance(source, TopohubJson):
            topo = parse_topohub_json(path.read_bytes(), net.default_link)
        else:
            topo = parse_graphml(path.read_bytes(), net.default_link)
    spec = topo.nodes.get(net.server_node)
    if spec is not None and spec.kind is NodeKind.HOST:
        topo = topo.with_roles({net.server_node: NodeRole.SERVER})
    return topo


def validate(cfg: ExperimentConfig, topo: Topology) -> list[Violation]:
    """Cross-file consistency checks; empty list means the pair is runnable."""
    violations: list[Violation] = []

    server = topo.nodes.get(cfg.net.server_node)
    if server is None:
        violations.append(Violation("net.server_node", f"{cfg.net.server_node!r} is not in the topology"))
    elif server.kind is not NodeKind.HOST:
        violations.append(Violation("net.server_node", f"{cfg.net.server_node!r} is not a host"))

    clients = topo.nodes_with_role(NodeRole.CLIENT)
    if cfg.fl.n_clients != len(clients):
        violations.append(
            Violation(
                "fl.n_clients vs topology client hosts",
                f"fl.toml declares {cfg.fl.n_clients} clients but the topology has {len(clients)}",
            )
        )

    if math.ceil(cfg.fl.clients_per_round_fraction * cfg.fl.n_clients) < 1:
        violations.append(
            Violation("fl.clients_per_round_fraction", "selects no clients per round")
        )

    for i, flow in enumerate(cfg.net.traffic):
        for endpoint, value in (("src", flow.src), ("dst", flow.dst)):
            if value not in topo.nodes:
                violations.append(
                    Violation(f"net.traffic[{i}].{endpoint}", f"node {value!r} is not in the topology")
                )
        if flow.src == flow.dst:
            violations.append(Violation(f"net.traffic[{i}]", "src and dst must differ"))

    ds = cfg.fl.dataset
    if ds.train_n < cfg.fl.n_clients:
        violations.append(
            Violation("fl.dataset.n", f"{ds.train_n} training samples cannot cover {cfg.fl.n_clients} clients")
        )
    if ds.train_n < ds.n_classes or ds.eval_n < ds.n_classes:
        violations.append(
            Violation("fl.dataset.eval_fraction", "split leaves a side without every class")
        )
    part = cfg.fl.partition
    if isinstance(part, Shards):
        total = cfg.fl.n_clients * part.classes_per_client
        if part.classes_per_client > ds.n_classes:
            violations.append(
                Violation("fl.partition.classes_per_client", f"exceeds n_classes={ds.n_classes}")
            )
        elif total % ds.n_classes != 0:
            violations.append(
                Violation(
                    "fl.partition",
                    f"n_clients*classes_per_client={total} must divide evenly by n_classes={ds.n_classes}",
                )
            )
        elif total // ds.n_classes > ds.train_n // ds.n_classes:
            violations.append(
                Violation("fl.partition", "some shard would be empty at this dataset size")
            )
    return violations


# ---------------------------------------------------------------------------
# Serialization (round-trip stable)
# ---------------------------------------------------------------------------


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        # ensure the token parses back as a TOML float
        return text if ("." in text or "e" in text or "inf" in text or "nan" in text) else text + ".0"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    raise TypeError(f"cannot serialize {value!r}")


def _emit(entries, header: str | None = None, array_header: str | None = None) -> list[str]:
    lines = []
    if header:
        lines.append(f"[{header}]")
    if array_header:
        lines.append(f"[[{array_header}]]")
    for key, value in entries:
        lines.append(f"{key} = {_toml_scalar(value)}")
    lines.append("")
    return lines


def _pattern_entries(pattern) -> list[tuple[str, object]]:
    if isinstance(pattern, Poisson):
        return [
            ("kind", "poisson"),
            ("lambda_events_per_s", pattern.lambda_events_per_s),
            ("event_bytes", pattern.event_bytes),
        ]
    if isinstance(pattern, Bursty):
        return [
            ("kind", "bursty"),
            ("burst_rate_mbps", pattern.burst_rate_mbps),
            ("burst_s", pattern.burst_s),
            ("idle_s", pattern.idle_s),
        ]
    if isinstance(pattern, Uniform):
        return [("kind", "uniform"), ("rate_mbps", pattern.rate_mbps)]
    if isinstance(pattern, Normal):
        return [
            ("kind", "normal"),
            ("mean_mbps", pattern.mean_mbps),
            ("std_mbps", pattern.std_mbps),
            ("step_s", pattern.step_s),
        ]
    if isinstance(pattern, SineWave):
        return [
            ("kind", "sine_wave"),
            ("base_mbps", pattern.base_mbps),
            ("amplitude_mbps", pattern.amplitude_mbps),
            ("period_s", pattern.period_s),
        ]
    return [("kind", "trace_replay"), ("path", pattern.path), ("time_scale", pattern.time_scale)]


def serialize_config(cfg: ExperimentConfig) -> dict[str, str]:
    """Render the three TOML files; load_config on the result equals cfg."""
    fl = cfg.fl
    lines = _emit(
        [
            ("n_clients", fl.n_clients),
            ("rounds", fl.rounds),
            ("clients_per_round_fraction", fl.clients_per_round_fraction),
            ("seed", fl.seed),
        ]
    )
    if isinstance(fl.selection_strategy, ResourceAware):
        lines += _emit(
            [("strategy", "resource_aware"), ("top_k_by_cpu", fl.selection_strategy.top_k_by_cpu)],
            header="selection",
        )
    else:
        lines += _emit([("strategy", "random")], header="selection")
    if isinstance(fl.aggregator, FedAvgM):
        agg_entries = [("kind", "fedavgm"), ("server_lr", fl.aggregator.server_lr), ("beta", fl.aggregator.beta)]
    elif isinstance(fl.aggregator, FedYogi):
        agg_entries = [
            ("kind", "fedyogi"),
            ("eta", fl.aggregator.eta),
            ("beta1", fl.aggregator.beta1),
            ("beta2", fl.aggregator.beta2),
            ("tau", fl.aggregator.tau),
        ]
    else:
        agg_entries = [("kind", "fedavg")]
    lines += _emit(agg_entries, header="aggregator")
    if fl.model.kind == "mlp":
        lines += _emit([("kind", "mlp"), ("hidden_units", fl.model.hidden_units)], header="model")
    else:
        lines += _emit([("kind", "logreg")], header="model")
    lines += _emit(
        [
            ("local_epochs", fl.train.local_epochs),
            ("batch_size", fl.train.batch_size),
            ("lr", fl.train.lr),
            ("mu", fl.train.mu),
            ("seed", fl.train.seed),
        ],
        header="train",
    )
    lines += _emit(
        [
            ("n", fl.dataset.n),
            ("n_classes", fl.dataset.n_classes),
            ("dim", fl.dataset.dim),
            ("class_sep", fl.dataset.class_sep),
            ("eval_fraction", fl.dataset.eval_fraction),
        ],
        header="dataset",
    )
    lines += _emit([("work_per_sample_s", fl.compute.work_per_sample_s)], header="compute")
    if isinstance(fl.partition, Shards):
        part_entries = [("kind", "shards"), ("classes_per_client", fl.partition.classes_per_client)]
    elif isinstance(fl.partition, Dirichlet):
        part_entries = [("kind", "dirichlet"), ("alpha", fl.partition.alpha)]
    else:
        part_entries = [("kind", "iid")]
    lines += _emit(part_entries, header="partition")
    fl_text = "\n".join(lines)

    net = cfg.net
    lines = _emit([("server_node", net.server_node)])
    source = net.topology_source
    if isinstance(source, Generated):
        lines += _emit(
            [("source", "generated"), ("shape", source.shape.value), ("n_hosts", source.n_hosts)],
            header="topology",
        )
    else:
        kind = "topohub_json" if isinstance(source, TopohubJson) else "graphml"
        lines += _emit([("source", kind), ("path", source.path)], header="topology")
    lines += _emit(
        [
            ("bandwidth_mbps", net.default_link.bandwidth_mbps),
            ("delay_ms", net.default_link.delay_ms),
            ("loss_frac", net.default_link.loss_frac),
        ],
        header="default_link",
    )
    for flow in net.traffic:
        lines += _emit(
            [
                ("src", flow.src),
                ("dst", flow.dst),
                ("cap_mbps", flow.cap_mbps),
                ("start_s", flow.start_s),
                ("stop_s", flow.stop_s),
                ("seed", flow.seed),
            ],
            array_header="traffic",
        )
        lines += _emit(_pattern_entries(flow.pattern), header="traffic.pattern")
    net_text = "\n".join(lines)

    general = cfg.general
    lines = _emit(
        [
            ("metric_sample_period_s", general.metric_sample_period_s),
            ("report", general.report),
        ]
    )
    sink_entries = []
    csv = general.sink(CsvSink)
    if csv is not None:
        sink_entries.append(("csv_dir", csv.dir))
    log = general.sink(LogfileSink)
    if log is not None:
        sink_entries.append(("logfile", log.path))
    stream = general.sink(StreamSink)
    if stream is not None:
        sink_entries.append(("stream_bind", stream.bind))
    lines += _emit(sink_entries, header="sinks")
    general_text = "\n".join(lines)

    return {FL_FILE: fl_text, NET_FILE: net_text, GENERAL_FILE: general_text}


def write_config(cfg: ExperimentConfig, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in serialize_config(cfg).items():
        (directory / name).write_text(text, encoding="utf-8")
