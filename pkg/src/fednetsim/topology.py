"""Network topology model: parsing, synthesis, and static routing.

Topologies come from three sources: a JSON schema (documented in
docs/topology.md), GraphML imports, or built-in generators (star, full mesh,
line). All three produce the same validated, immutable `Topology` value.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from xml.etree import ElementTree

from .errors import (
    DisconnectedGraph,
    DuplicateLink,
    InvalidCount,
    NoPath,
    SchemaError,
)

DEFAULT_CPU_UNITS = 1.0
DEFAULT_MEM_MB = 1024.0

GRAPHML_NS = "{http://graphml.graphdrawing.org/xmlns}"


class NodeKind(str, Enum):
    HOST = "host"
    SWITCH = "switch"


class NodeRole(str, Enum):
    SERVER = "server"
    CLIENT = "client"
    TRAFFIC = "traffic"
    TRANSIT = "transit"


class TopoShape(str, Enum):
    STAR = "star"
    FULL_MESH = "full_mesh"
    LINE = "line"


@dataclass(frozen=True)
class NodeResources:
    cpu_units: float = DEFAULT_CPU_UNITS  # 1.0 = reference core
    mem_mb: float = DEFAULT_MEM_MB

    def __post_init__(self):
        if self.cpu_units <= 0 or self.mem_mb <= 0:
            raise SchemaError(f"node resources must be positive, got {self}")


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: NodeKind = NodeKind.HOST
    role: NodeRole = NodeRole.TRANSIT
    resources: NodeResources | None = None

    def __post_init__(self):
        if self.kind is NodeKind.SWITCH:
            # Switches carry no resources and no FL role.
            if self.resources is not None:
                raise SchemaError(f"switch {self.id!r} must not carry resources")
            if self.role in (NodeRole.SERVER, NodeRole.CLIENT):
                raise SchemaError(f"switch {self.id!r} cannot take FL role {self.role.value}")
        elif self.resources is None:
            object.__setattr__(self, "resources", NodeResources())


@dataclass(frozen=True)
class LinkAttrs:
    bandwidth_mbps: float
    delay_ms: float  # one-way propagation
    loss_frac: float

    def __post_init__(self):
        if self.bandwidth_mbps <= 0:
            raise SchemaError(f"bandwidth must be positive, got {self.bandwidth_mbps}")
        if self.delay_ms < 0:
            raise SchemaError(f"delay must be non-negative, got {self.delay_ms}")
        if not 0.0 <= self.loss_frac < 1.0:
            raise SchemaError(f"loss fraction must be in [0, 1), got {self.loss_frac}")


@dataclass(frozen=True)
class LinkSpec:
    a: str
    b: str
    attrs: LinkAttrs

    def __post_init__(self):
        if self.a == self.b:
            raise SchemaError(f"self-loop on node {self.a!r}")
        # Canonical endpoint order makes link identity independent of file order.
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @property
    def pair(self) -> tuple[str, str]:
        return (self.a, self.b)

    def other(self, node: str) -> str:
        return self.b if node == self.a else self.a


@dataclass(frozen=True)
class Topology:
    """Validated undirected graph of hosts and switches.

    Immutable after construction; adjacency is derived and sorted so equal
    node/link sets compare equal regardless of input order.
    """

    nodes: dict[str, NodeSpec]
    links: tuple[LinkSpec, ...]
    adjacency: dict[str, tuple[str, ...]] = field(default=None, compare=False, repr=False)
    _by_pair: dict[tuple[str, str], LinkSpec] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        nodes = {nid: self.nodes[nid] for nid in sorted(self.nodes)}
        links = tuple(sorted(self.links, key=lambda l: l.pair))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "links", links)

        by_pair: dict[tuple[str, str], LinkSpec] = {}
        adj: dict[str, list[str]] = {nid: [] for nid in nodes}
        for link in links:
            for end in link.pair:
                if end not in nodes:
                    raise SchemaError(f"link endpoint {end!r} is not a declared node")
            if link.pair in by_pair:
                raise DuplicateLink(*link.pair)
            by_pair[link.pair] = link
            adj[link.a].append(link.b)
            adj[link.b].append(link.a)
        object.__setattr__(self, "adjacency", {n: tuple(sorted(v)) for n, v in adj.items()})
        object.__setattr__(self, "_by_pair", by_pair)

        if not any(spec.kind is NodeKind.HOST for spec in nodes.values()):
            raise SchemaError("topology has no host nodes")
        self._check_connected()

    def _check_connected(self):
        start = next(iter(self.nodes))
        seen = {start}
        stack = [start]
        while stack:
            for nb in self.adjacency[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != len(self.nodes):
            raise DisconnectedGraph(set(self.nodes) - seen)

    def hosts(self) -> list[str]:
        return [n for n, s in self.nodes.items() if s.kind is NodeKind.HOST]

    def nodes_with_role(self, role: NodeRole) -> list[str]:
        return [n for n, s in self.nodes.items() if s.role is role]

    def link_between(self, a: str, b: str) -> LinkSpec:
        pair = (a, b) if a < b else (b, a)
        link = self._by_pair.get(pair)
        if link is None:
            raise NoPath(a, b)
        return link

    def with_roles(self, roles: dict[str, NodeRole]) -> "Topology":
        """Return a copy with the given nodes reassigned to new roles."""
        nodes = dict(self.nodes)
        for nid, role in roles.items():
            spec = nodes[nid]
            nodes[nid] = NodeSpec(spec.id, spec.kind, role, spec.resources)
        return Topology(nodes, self.links)


def _link_attrs(bw, delay, loss, default: LinkAttrs) -> LinkAttrs:
    return LinkAttrs(
        bandwidth_mbps=default.bandwidth_mbps if bw is None else float(bw),
        delay_ms=default.delay_ms if delay is None else float(delay),
        loss_frac=default.loss_frac if loss is None else float(loss),
    )


def parse_topohub_json(data: bytes, default_link: LinkAttrs) -> Topology:
    """Parse the JSON topology schema (see docs/topology.md).

    Node order in the file does not affect the result. Link fields bw/delay/loss
    fall back to ``default_link`` when absent.
    """
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("top-level value must be an object")
    for section in ("nodes", "links"):
        if not isinstance(doc.get(section), list):
            raise SchemaError("expected an array", path=section)

    nodes: dict[str, NodeSpec] = {}
    for i, raw in enumerate(doc["nodes"]):
        path = f"nodes[{i}]"
        if not isinstance(raw, dict) or "id" not in raw:
            raise SchemaError("node entries need an 'id'", path=path)
        nid = str(raw["id"])
        if nid in nodes:
            raise SchemaError(f"duplicate node id {nid!r}", path=path)
        try:
            kind = NodeKind(raw.get("kind", "host"))
            role = NodeRole(raw.get("role", "transit"))
        except ValueError as exc:
            raise SchemaError(str(exc), path=path) from exc
        resources = None
        if "resources" in raw:
            if kind is NodeKind.SWITCH:
                raise SchemaError(f"switch {nid!r} must not carry resources", path=path)
            res = raw["resources"]
            resources = NodeResources(
                cpu_units=float(res.get("cpu_units", DEFAULT_CPU_UNITS)),
                mem_mb=float(res.get("mem_mb", DEFAULT_MEM_MB)),
            )
        nodes[nid] = NodeSpec(nid, kind, role, resources)

    links = []
    for i, raw in enumerate(doc["links"]):
        path = f"links[{i}]"
        if not isinstance(raw, dict) or "a" not in raw or "b" not in raw:
            raise SchemaError("link entries need 'a' and 'b'", path=path)
        attrs = _link_attrs(raw.get("bw"), raw.get("delay"), raw.get("loss"), default_link)
        links.append(LinkSpec(str(raw["a"]), str(raw["b"]), attrs))

    return Topology(nodes, tuple(links))


def parse_graphml(data: bytes, default_link: LinkAttrs) -> Topology:
    """Parse GraphML bytes into a Topology.

    Recognized data keys: ``bandwidth`` (Mbps), ``delay`` (ms), ``loss``
    (fraction) on edges and ``role`` on nodes; everything else is ignored.
    Nodes become kind=host, role=transit unless a role key says otherwise.
    """
    try:
        root = ElementTree.fromstring(data)
    except ElementTree.ParseError as exc:
        raise SchemaError(f"malformed XML: {exc}") from exc

    ns = GRAPHML_NS if root.tag.startswith(GRAPHML_NS) else ""
    graph = root.find(f"{ns}graph")
    if graph is None:
        raise SchemaError("no <graph> element")

    # Map <key id> -> attr.name so <data key="d3"> resolves to a named attribute;
    # files without <key> declarations may use the attribute name directly.
    key_names = {}
    for key in root.findall(f"{ns}key"):
        if "id" in key.attrib and "attr.name" in key.attrib:
            key_names[key.attrib["id"]] = key.attrib["attr.name"]

    def data_values(elem) -> dict[str, str]:
        out = {}
        for d in elem.findall(f"{ns}data"):
            name = key_names.get(d.attrib.get("key"), d.attrib.get("key"))
            if name is not None and d.text is not None:
                out[name] = d.text.strip()
        return out

    nodes: dict[str, NodeSpec] = {}
    for el in graph.findall(f"{ns}node"):
        nid = el.attrib.get("id")
        if nid is None:
            raise SchemaError("node without id")
        values = data_values(el)
        role = NodeRole.TRANSIT
        if "role" in values:
            try:
                role = NodeRole(values["role"])
            except ValueError as exc:
                raise SchemaError(f"unknown role {values['role']!r}", path=nid) from exc
        nodes[nid] = NodeSpec(nid, NodeKind.HOST, role)

    links = []
    for el in graph.findall(f"{ns}edge"):
        src, dst = el.attrib.get("source"), el.attrib.get("target")
        if src not in nodes or dst not in nodes:
            raise SchemaError(f"edge references unknown node ({src!r}, {dst!r})")
        values = data_values(el)

        def num(name):
            if name not in values:
                return None
            try:
                return float(values[name])
            except ValueError as exc:
                raise SchemaError(f"non-numeric {name} on edge {src}-{dst}") from exc

        attrs = _link_attrs(num("bandwidth"), num("delay"), num("loss"), default_link)
        links.append(LinkSpec(src, dst, attrs))

    return Topology(nodes, tuple(links))


def generate(shape: TopoShape, n_hosts: int, default_link: LinkAttrs) -> Topology:
    """Generate a synthetic topology with hosts h1..hN (and switch s1 for star).

    Hosts start as role=client; the experiment config reassigns the server.
    """
    if n_hosts < 2:
        raise InvalidCount(f"need at least 2 hosts, got {n_hosts}")

    host_ids = [f"h{i}" for i in range(1, n_hosts + 1)]
    nodes = {h: NodeSpec(h, NodeKind.HOST, NodeRole.CLIENT) for h in host_ids}
    links = []
    if shape is TopoShape.STAR:
        nodes["s1"] = NodeSpec("s1", NodeKind.SWITCH)
        links = [LinkSpec(h, "s1", default_link) for h in host_ids]
    elif shape is TopoShape.FULL_MESH:
        links = [
            LinkSpec(host_ids[i], host_ids[j], default_link)
            for i in range(n_hosts)
            for j in range(i + 1, n_hosts)
        ]
    elif shape is TopoShape.LINE:
        links = [LinkSpec(host_ids[i], host_ids[i + 1], default_link) for i in range(n_hosts - 1)]
    else:
        raise InvalidCount(f"unknown shape {shape!r}")
    return Topology(nodes, tuple(links))


def shortest_path(topo: Topology, src: str, dst: str) -> list[LinkSpec]:
    """Deterministic minimum-hop path from src to dst.

    Ties break by minimum total delay, then by the lexicographically smallest
    node-id sequence read from the smaller endpoint. Evaluating the tie-break
    from the smaller endpoint makes both directions traverse the same links.
    """
    if src == dst or src not in topo.nodes or dst not in topo.nodes:
        raise NoPath(src, dst)
    start, goal = (src, dst) if src < dst else (dst, src)

    # Dijkstra over the priority (hops, delay, node sequence); appending a node
    # preserves lexicographic order of prefixes, so the heap invariant holds.
    best: dict[str, tuple] = {}
    heap = [(0, 0.0, (start,))]
    while heap:
        hops, delay, path = heapq.heappop(heap)
        node = path[-1]
        if node in best and best[node] <= (hops, delay, path):
            continue
        best[node] = (hops, delay, path)
        if node == goal:
            break
        for nb in topo.adjacency[node]:
            if nb in path:
                continue
            link = topo.link_between(node, nb)
            cand = (hops + 1, delay + link.attrs.delay_ms, path + (nb,))
            if nb not in best or cand < best[nb]:
                heapq.heappush(heap, cand)
    if goal not in best:
        raise NoPath(src, dst)

    seq = best[goal][2]
    if src != start:
        seq = tuple(reversed(seq))
    return [topo.link_between(seq[i], seq[i + 1]) for i in range(len(seq) - 1)]


def path_delay_ms(path: list[LinkSpec]) -> float:
    return sum(link.attrs.delay_ms for link in path)


def path_loss_frac(path: list[LinkSpec]) -> float:
    """Compound loss over a path: 1 - prod(1 - loss_i)."""
    keep = 1.0
    for link in path:
        keep *= 1.0 - link.attrs.loss_frac
    return 1.0 - keep
