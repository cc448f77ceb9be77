"""Background traffic demand processes.

Five statistical patterns plus trace replay, each compiled into a
deterministic piecewise-constant demand schedule for one inelastic flow.
Rates are always clamped to [0, cap_mbps]; demand is zero outside the
flow's [start_s, stop_s) window. Every flow owns an independent seeded
stream, so schedules can be generated in any order.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Union

import numpy as np

from .errors import NonMonotonicTime, TraceFormatError, ValidationError

# Sine demands are stepped at this resolution; left-endpoint samples over a
# full period sum to zero, so the empirical mean stays at the base rate.
SINE_STEPS_PER_PERIOD = 32
NORMAL_DEFAULT_STEP_S = 0.1


@dataclass(frozen=True)
class Poisson:
    lambda_events_per_s: float
    event_bytes: float

    def problems(self) -> list[str]:
        out = []
        if self.lambda_events_per_s <= 0:
            out.append("poisson lambda_events_per_s must be > 0")
        if self.event_bytes <= 0:
            out.append("poisson event_bytes must be > 0")
        return out


@dataclass(frozen=True)
class Bursty:
    burst_rate_mbps: float
    burst_s: float
    idle_s: float

    def problems(self) -> list[str]:
        out = []
        if self.burst_rate_mbps < 0:
            out.append("bursty burst_rate_mbps must be >= 0")
        if self.burst_s <= 0:
            out.append("bursty burst_s must be > 0")
        if self.idle_s < 0:
            out.append("bursty idle_s must be >= 0")
        return out


@dataclass(frozen=True)
class Uniform:
    rate_mbps: float

    def problems(self) -> list[str]:
        return ["uniform rate_mbps must be >= 0"] if self.rate_mbps < 0 else []


@dataclass(frozen=True)
class Normal:
    mean_mbps: float
    std_mbps: float
    step_s: float = NORMAL_DEFAULT_STEP_S

    def problems(self) -> list[str]:
        out = []
        if self.mean_mbps < 0:
            out.append("normal mean_mbps must be >= 0")
        if self.std_mbps < 0:
            out.append("normal std_mbps must be >= 0")
        if self.step_s <= 0:
            out.append("normal step_s must be > 0")
        return out


@dataclass(frozen=True)
class SineWave:
    base_mbps: float
    amplitude_mbps: float
    period_s: float

    def problems(self) -> list[str]:
        out = []
        if self.base_mbps < 0:
            out.append("sine_wave base_mbps must be >= 0")
        if self.amplitude_mbps < 0:
            out.append("sine_wave amplitude_mbps must be >= 0")
        if self.period_s <= 0:
            out.append("sine_wave period_s must be > 0")
        return out


@dataclass(frozen=True)
class TraceReplay:
    path: str
    time_scale: float = 1.0

    def problems(self) -> list[str]:
        return ["trace_replay time_scale must be > 0"] if self.time_scale <= 0 else []


TrafficPattern = Union[Poisson, Bursty, Uniform, Normal, SineWave, TraceReplay]


@dataclass(frozen=True)
class TrafficFlowSpec:
    src: str
    dst: str
    pattern: TrafficPattern
    cap_mbps: float
    start_s: float
    stop_s: float
    seed: int

    def problems(self) -> list[str]:
        out = list(self.pattern.problems())
        if self.cap_mbps <= 0:
            out.append("cap_mbps must be > 0")
        if self.start_s < 0:
            out.append("start_s must be >= 0")
        if not self.start_s < self.stop_s:
            out.append("start_s must be < stop_s")
        if not math.isfinite(self.stop_s):
            out.append("stop_s must be finite")
        return out


def _require_valid(spec: TrafficFlowSpec) -> None:
    problems = spec.problems()
    if problems:
        raise ValidationError(problems)


def _clamp(value: float, cap: float) -> float:
    return min(max(value, 0.0), cap)


def _normal_step_value(seed: int, step: int, mean: float, std: float) -> float:
    # Counter-style derivation: each step draws from its own substream so
    # demand_at is random-access and agrees with the sequential schedule.
    rng = np.random.default_rng((seed, step))
    return rng.normal(mean, std)


def poisson_arrivals(spec: TrafficFlowSpec) -> np.ndarray:
    """Event arrival times in [start_s, stop_s) with Exp(1/lambda) gaps."""
    _require_valid(spec)
    pattern = spec.pattern
    if not isinstance(pattern, Poisson):
        raise ValueError("poisson_arrivals needs a Poisson pattern")
    rng = np.random.default_rng(spec.seed)
    mean_gap = 1.0 / pattern.lambda_events_per_s
    chunks = []
    t = spec.start_s
    while t < spec.stop_s:
        gaps = rng.exponential(mean_gap, size=4096)
        arrivals = t + np.cumsum(gaps)
        chunks.append(arrivals)
        t = arrivals[-1]
    times = np.concatenate(chunks)
    return times[times < spec.stop_s]


def _busy_changes(events: list[tuple[float, float]], drain_mbps: float, stop_s: float) -> Iterator[tuple[float, float]]:
    """Turn (time, bytes) bursts into on/off demand changes at the drain rate.

    Bursts accumulate in a backlog drained at drain_mbps; demand is
    drain_mbps while the backlog is non-empty.
    """
    busy_start = None
    busy_until = -math.inf
    for t, nbytes in events:
        if t >= stop_s:
            break
        drain_s = nbytes * 8.0 / (drain_mbps * 1e6)
        if t >= busy_until:
            if busy_start is not None:
                yield busy_start, drain_mbps
                yield min(busy_until, stop_s), 0.0
            busy_start = t
            busy_until = t + drain_s
        else:
            busy_until += drain_s
    if busy_start is not None:
        yield busy_start, drain_mbps
        yield min(busy_until, stop_s), 0.0


def iter_demand_changes(spec: TrafficFlowSpec) -> Iterator[tuple[float, float]]:
    """Lazily yield (time_s, demand_mbps) changes; always ends at (stop_s, 0).

    Deterministic for a given spec (including its seed). Consecutive equal
    demands are merged.
    """
    _require_valid(spec)
    last = None
    for t, demand in _raw_changes(spec):
        if t >= spec.stop_s:
            break
        if demand != last:
            yield t, demand
            last = demand
    yield spec.stop_s, 0.0


def _raw_changes(spec: TrafficFlowSpec) -> Iterator[tuple[float, float]]:
    pattern = spec.pattern
    cap = spec.cap_mbps
    if isinstance(pattern, Uniform):
        yield spec.start_s, _clamp(pattern.rate_mbps, cap)
    elif isinstance(pattern, SineWave):
        step = pattern.period_s / SINE_STEPS_PER_PERIOD
        k = 0
        while True:
            t = spec.start_s + k * step
            if t >= spec.stop_s:
                return
            yield t, demand_at(spec, t)
            k += 1
    elif isinstance(pattern, Normal):
        k = 0
        while True:
            t = spec.start_s + k * pattern.step_s
            if t >= spec.stop_s:
                return
            value = _normal_step_value(spec.seed, k, pattern.mean_mbps, pattern.std_mbps)
            yield t, _clamp(value, cap)
            k += 1
    elif isinstance(pattern, Bursty):
        cycle = pattern.burst_s + pattern.idle_s
        burst = _clamp(pattern.burst_rate_mbps, cap)
        if pattern.idle_s <= 0:  # degenerate cycle: constant rate
            yield spec.start_s, burst
            return
        k = 0
        while True:
            t_on = spec.start_s + k * cycle
            if t_on >= spec.stop_s:
                return
            yield t_on, burst
            t_off = t_on + pattern.burst_s
            if t_off >= spec.stop_s:
                return
            yield t_off, 0.0
            k += 1
    elif isinstance(pattern, Poisson):
        events = [(t, pattern.event_bytes) for t in poisson_arrivals(spec)]
        yield from _busy_changes(events, cap, spec.stop_s)
    elif isinstance(pattern, TraceReplay):
        entries = load_trace(Path(pattern.path).read_bytes())
        events = [(spec.start_s + off * pattern.time_scale, nbytes) for off, nbytes in entries]
        yield from _busy_changes(events, cap, spec.stop_s)
    else:
        raise TypeError(f"unknown pattern {pattern!r}")


def schedule_events(spec: TrafficFlowSpec, horizon_s: float) -> list[tuple[float, float]]:
    """Materialize the full demand schedule; horizon_s must cover stop_s."""
    if horizon_s < spec.stop_s:
        raise ValueError(f"horizon {horizon_s} ends before stop_s {spec.stop_s}")
    return list(iter_demand_changes(spec))


@lru_cache(maxsize=128)
def _compiled(spec: TrafficFlowSpec) -> tuple[tuple[float, ...], tuple[float, ...]]:
    changes = list(iter_demand_changes(spec))
    return tuple(t for t, _ in changes), tuple(d for _, d in changes)


def demand_at(spec: TrafficFlowSpec, t: float) -> float:
    """Demand in Mbps at simulation time t, clamped to [0, cap_mbps].

    Closed-form patterns evaluate directly; Poisson and trace replay report
    the compiled schedule's current rate (the drain-window rate).
    """
    if not spec.start_s <= t < spec.stop_s:
        return 0.0
    pattern = spec.pattern
    if isinstance(pattern, Uniform):
        return _clamp(pattern.rate_mbps, spec.cap_mbps)
    if isinstance(pattern, SineWave):
        value = pattern.base_mbps + pattern.amplitude_mbps * math.sin(2.0 * math.pi * t / pattern.period_s)
        return _clamp(value, spec.cap_mbps)
    if isinstance(pattern, Normal):
        step = int((t - spec.start_s) / pattern.step_s)
        return _clamp(_normal_step_value(spec.seed, step, pattern.mean_mbps, pattern.std_mbps), spec.cap_mbps)
    if isinstance(pattern, Bursty):
        phase = math.fmod(t - spec.start_s, pattern.burst_s + pattern.idle_s)
        return _clamp(pattern.burst_rate_mbps, spec.cap_mbps) if phase < pattern.burst_s else 0.0
    times, demands = _compiled(spec)
    idx = bisect.bisect_right(times, t) - 1
    return demands[idx] if idx >= 0 else 0.0


def mean_offered_mbps(spec: TrafficFlowSpec) -> float:
    """Time-average of the demand schedule over [start_s, stop_s]."""
    times, demands = _compiled(spec)
    total = 0.0
    for i in range(len(times) - 1):
        total += demands[i] * (times[i + 1] - times[i])
    return total / (spec.stop_s - spec.start_s)


def load_trace(data: bytes) -> list[tuple[float, float]]:
    """Parse a "time_s,bytes" CSV trace into (offset_s, bytes) entries."""
    text = data.decode("utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != "time_s,bytes":
        raise TraceFormatError(1, 'expected header "time_s,bytes"')
    entries: list[tuple[float, float]] = []
    prev_t = -math.inf
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceFormatError(lineno, f"expected 2 fields, got {len(parts)}")
        try:
            t, nbytes = float(parts[0]), float(parts[1])
        except ValueError:
            raise TraceFormatError(lineno, f"non-numeric field in {line!r}") from None
        if t < prev_t:
            raise NonMonotonicTime(lineno)
        if nbytes < 0:
            raise TraceFormatError(lineno, "bytes must be >= 0")
        prev_t = t
        entries.append((t, nbytes))
    return entries
