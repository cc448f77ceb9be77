"""Per-round client selection strategies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..topology import NodeResources


@dataclass(frozen=True)
class Random:
    pass


@dataclass(frozen=True)
class ResourceAware:
    # True selects the k best-provisioned clients; False the k weakest,
    # which is handy for deliberately stressing stragglers.
    top_k_by_cpu: bool = True


SelectionStrategy = Union[Random, ResourceAware]


@dataclass
class ClientState:
    resources: NodeResources
    available: bool = True


def select_clients(
    strategy: SelectionStrategy,
    states: dict[str, ClientState],
    fraction: float,
    rng: np.random.Generator,
) -> tuple[str, ...]:
    """Pick ceil(fraction * n_clients) clients, deterministically given rng/states."""
    k = max(1, math.ceil(fraction * len(states)))
    candidates = sorted(cid for cid, st in states.items() if st.available)
    k = min(k, len(candidates))
    if isinstance(strategy, Random):
        picked = rng.choice(len(candidates), size=k, replace=False)
        return tuple(sorted(candidates[i] for i in picked))
    if isinstance(strategy, ResourceAware):
        sign = -1.0 if strategy.top_k_by_cpu else 1.0
        ranked = sorted(candidates, key=lambda cid: (sign * states[cid].resources.cpu_units, cid))
        return tuple(sorted(ranked[:k]))
    raise TypeError(f"unknown strategy {strategy!r}")
