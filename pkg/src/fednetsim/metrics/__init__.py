"""Metrics collection: envelopes, sinks, streaming, and offline reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

TOPICS = ("fl.round", "sys.sample", "net.sample", "traffic.event", "log")

Scalar = Union[str, int, float]


@dataclass(frozen=True)
class MetricEnvelope:
    """One immutable metric sample, routed by topic."""

    t_sim_s: float
    source: str  # node id, "server", or "experiment"
    topic: str
    payload: Mapping[str, Scalar] = field(default_factory=dict)

    def __post_init__(self):
        if self.topic not in TOPICS:
            raise ValueError(f"unknown topic {self.topic!r}; expected one of {TOPICS}")
        object.__setattr__(self, "payload", dict(self.payload))


class MetricsHub:
    """Fans envelopes out to the attached sinks, preserving emission order.

    The simulation thread is the only producer. Sinks must never block it:
    file sinks buffer and write on close, the stream sink hands off to its
    own writer threads through a bounded drop-oldest buffer.
    """

    def __init__(self, sinks=()):
        self.sinks = list(sinks)
        self._last_t: dict[tuple[str, str], float] = {}

    def emit(self, envelope: MetricEnvelope) -> None:
        key = (envelope.source, envelope.topic)
        last = self._last_t.get(key)
        if last is not None and envelope.t_sim_s < last:
            raise ValueError(
                f"time regressed for {key}: {envelope.t_sim_s} after {last}"
            )
        self._last_t[key] = envelope.t_sim_s
        for sink in self.sinks:
            sink.accept(envelope)

    def close(self) -> None:
        for sink in self.sinks:
            sink.close()


from .report import ReportSummary, render_text, summarize, summary_to_dict  # noqa: E402
from .sinks import CsvWriter, LogfileWriter, write_csv  # noqa: E402
from .stream import TcpPublisher  # noqa: E402

__all__ = [
    "MetricEnvelope",
    "MetricsHub",
    "TOPICS",
    "CsvWriter",
    "LogfileWriter",
    "write_csv",
    "TcpPublisher",
    "ReportSummary",
    "summarize",
    "render_text",
    "summary_to_dict",
]
