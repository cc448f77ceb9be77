"""File sinks: fixed-schema CSV archive and a human-readable logfile.

CSV schemas are part of the public contract. Reals are rendered with six
significant digits so byte-identical output is a meaningful determinism
check; rows are ordered by their natural keys.
"""

from __future__ import annotations

from pathlib import Path

from ..errors import SchemaError

ROUNDS_HEADER = "round,client_id,s2c_s,compute_s,c2s_s,round_duration_s,global_loss,global_accuracy"
SYS_HEADER = "t_s,node,cpu_pct,mem_mb"
NET_HEADER = "t_s,node,tx_bytes,rx_bytes,tx_bps,rx_bps"
TRAFFIC_HEADER = "t_s,flow_id,demand_mbps"

CSV_FILES = {
    "rounds.csv": ROUNDS_HEADER,
    "sys_metrics.csv": SYS_HEADER,
    "net_metrics.csv": NET_HEADER,
    "traffic.csv": TRAFFIC_HEADER,
}


def fmt(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


class CsvWriter:
    """Buffers envelopes and writes the four-file CSV archive on close."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self._rounds: list[tuple] = []
        self._sys: list[tuple] = []
        self._net: list[tuple] = []
        self._traffic: list[tuple] = []
        self.paths: list[Path] = []

    def accept(self, env) -> None:
        p = env.payload
        if env.topic == "fl.round":
            self._rounds.append(
                (
                    p["round"],
                    p["client_id"],
                    p["s2c_s"],
                    p["compute_s"],
                    p["c2s_s"],
                    p["round_duration_s"],
                    p["global_loss"],
                    p["global_accuracy"],
                )
            )
        elif env.topic == "sys.sample":
            self._sys.append((env.t_sim_s, env.source, p["cpu_pct"], p["mem_mb"]))
        elif env.topic == "net.sample":
            self._net.append(
                (env.t_sim_s, env.source, p["tx_bytes"], p["rx_bytes"], p["tx_bps"], p["rx_bps"])
            )
        elif env.topic == "traffic.event":
            self._traffic.append((env.t_sim_s, p["flow_id"], p["demand_mbps"]))

    def close(self) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        tables = (
            ("rounds.csv", ROUNDS_HEADER, sorted(self._rounds, key=lambda r: (r[0], r[1]))),
            ("sys_metrics.csv", SYS_HEADER, sorted(self._sys, key=lambda r: (r[0], r[1]))),
            ("net_metrics.csv", NET_HEADER, sorted(self._net, key=lambda r: (r[0], r[1]))),
            ("traffic.csv", TRAFFIC_HEADER, sorted(self._traffic, key=lambda r: (r[0], r[1]))),
        )
        self.paths = []
        for name, header, rows in tables:
            path = self.directory / name
            lines = [header] + [",".join(fmt(v) for v in row) for row in rows]
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            self.paths.append(path)


def write_csv(envelopes, directory) -> list[Path]:
    """One-shot CSV archive from an envelope stream; returns the file paths."""
    writer = CsvWriter(directory)
    for env in envelopes:
        writer.accept(env)
    writer.close()
    return writer.paths


def read_csv(path) -> list[dict[str, str]]:
    """Read one archive file back, checking its header against the schema."""
    path = Path(path)
    expected = CSV_FILES.get(path.name)
    lines = path.read_text(encoding="utf-8").splitlines()
    if expected is not None and (not lines or lines[0] != expected):
        got = lines[0] if lines else ""
        raise SchemaError(f"header mismatch: expected {expected!r}, got {got!r}", path=str(path))
    columns = lines[0].split(",")
    return [dict(zip(columns, line.split(","))) for line in lines[1:] if line]


class LogfileWriter:
    """Plain-text log of every envelope, one line each."""

    def __init__(self, path):
        self.path = Path(path)
        self._lines: list[str] = []

    def accept(self, env) -> None:
        fields = " ".join(f"{k}={fmt(v)}" for k, v in env.payload.items())
        self._lines.append(f"t={env.t_sim_s:.6f} topic={env.topic} source={env.source} {fields}".rstrip())

    def close(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("\n".join(self._lines) + ("\n" if self._lines else ""), encoding="utf-8")
