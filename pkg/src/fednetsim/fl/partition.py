"""Client data partitioning: IID, pathological shards, and Dirichlet."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import ValidationError
from .datasets import Dataset


@dataclass(frozen=True)
class IID:
    pass


@dataclass(frozen=True)
class Shards:
    classes_per_client: int


@dataclass(frozen=True)
class Dirichlet:
    alpha: float


PartitionSpec = Union[IID, Shards, Dirichlet]


def partition(dataset: Dataset, spec: PartitionSpec, n_clients: int, seed: int) -> dict[int, np.ndarray]:
    """Assign every sample index to exactly one client slot (0..n_clients-1).

    Assignments are disjoint, cover the index set, and leave no client empty.
    Deterministic for a given (dataset, spec, n_clients, seed).
    """
    if n_clients < 1:
        raise ValidationError(["n_clients must be >= 1"])
    n = len(dataset)
    if n_clients > n:
        raise ValidationError([f"n_clients={n_clients} exceeds dataset size {n}"])
    rng = np.random.default_rng(seed)

    if isinstance(spec, IID):
        perm = rng.permutation(n)
        return {i: perm[i::n_clients] for i in range(n_clients)}
    if isinstance(spec, Shards):
        return _partition_shards(dataset, spec, n_clients, rng)
    if isinstance(spec, Dirichlet):
        return _partition_dirichlet(dataset, spec, n_clients, rng)
    raise ValidationError([f"unknown partition spec {spec!r}"])


def _partition_shards(dataset: Dataset, spec: Shards, n_clients: int, rng) -> dict[int, np.ndarray]:
    k = dataset.n_classes
    cpc = spec.classes_per_client
    problems = []
    if not 1 <= cpc <= k:
        problems.append(f"classes_per_client={cpc} must be in [1, n_classes={k}]")
    else:
        total_shards = n_clients * cpc
        if total_shards % k != 0:
            problems.append(
                f"n_clients*classes_per_client={total_shards} must divide evenly by n_classes={k}"
            )
    if problems:
        raise ValidationError(problems)

    shards_per_class = (n_clients * cpc) // k
    shards = []
    for c in range(k):
        idx = np.flatnonzero(dataset.labels == c)
        if len(idx) < shards_per_class:
            raise ValidationError(
                [f"class {c} has {len(idx)} samples, fewer than {shards_per_class} shards"]
            )
        shards.extend(np.array_split(idx, shards_per_class))

    order = rng.permutation(len(shards))
    return {
        i: np.concatenate([shards[j] for j in order[i::n_clients]])
        for i in range(n_clients)
    }


def _partition_dirichlet(dataset: Dataset, spec: Dirichlet, n_clients: int, rng) -> dict[int, np.ndarray]:
    if spec.alpha <= 0:
        raise ValidationError([f"dirichlet alpha must be > 0, got {spec.alpha}"])
    parts: dict[int, list[np.ndarray]] = {i: [] for i in range(n_clients)}
    for c in range(dataset.n_classes):
        idx = np.flatnonzero(dataset.labels == c)
        proportions = rng.dirichlet(np.full(n_clients, spec.alpha))
        cuts = (np.cumsum(proportions) * len(idx)).astype(int)[:-1]
        for client, chunk in enumerate(np.split(idx, cuts)):
            parts[client].append(chunk)
    assignments = {i: np.concatenate(parts[i]) for i in range(n_clients)}

    # Repair empty clients: move one sample from the currently largest client.
    while True:
        empty = sorted(i for i, a in assignments.items() if len(a) == 0)
        if not empty:
            break
        target = empty[0]
        donor = max(assignments, key=lambda i: (len(assignments[i]), -i))
        assignments[target] = assignments[donor][-1:]
        assignments[donor] = assignments[donor][:-1]
    return assignments
