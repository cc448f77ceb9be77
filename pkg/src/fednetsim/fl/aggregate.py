"""Server-side aggregation rules: FedAvg, FedAvgM, FedYogi."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import ShapeMismatch
from .models import ModelParams


@dataclass(frozen=True)
class FedAvg:
    pass


@dataclass(frozen=True)
class FedAvgM:
    server_lr: float = 1.0
    beta: float = 0.9


@dataclass(frozen=True)
class FedYogi:
    eta: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99
    tau: float = 1e-3


AggregatorSpec = Union[FedAvg, FedAvgM, FedYogi]


def _check_same_layout(a: ModelParams, b: ModelParams) -> None:
    if a.layout != b.layout or a.values.size != b.values.size:
        raise ShapeMismatch("parameter layouts differ")


def aggregate_fedavg(updates: list[tuple[ModelParams, int]]) -> ModelParams:
    """Sample-weighted mean of client parameters: sum(n_k w_k) / sum(n_k)."""
    if not updates:
        raise ShapeMismatch("no updates to aggregate")
    first = updates[0][0]
    total = 0
    acc = np.zeros_like(first.values)
    for params, n_samples in updates:
        _check_same_layout(first, params)
        acc += params.values * n_samples
        total += n_samples
    return first.replace(acc / total)


@dataclass
class FedAvgMState:
    momentum: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "FedAvgMState":
        return cls(np.zeros(n))


def server_update_fedavgm(
    state: FedAvgMState,
    w_prev: ModelParams,
    fedavg_result: ModelParams,
    server_lr: float,
    beta: float,
) -> tuple[ModelParams, FedAvgMState]:
    """Server momentum on the pseudo-gradient w_prev - fedavg_result.

    m <- beta*m + (w_prev - f); w_next = w_prev - server_lr*m. The update is
    computed in the expanded form (1-lr)*w_prev + lr*f - lr*beta*m_prev so
    beta=0, lr=1 reproduces plain FedAvg exactly, bit for bit.
    """
    _check_same_layout(w_prev, fedavg_result)
    delta = w_prev.values - fedavg_result.values
    momentum = beta * state.momentum + delta
    w_next = (
        (1.0 - server_lr) * w_prev.values
        + server_lr * fedavg_result.values
        - server_lr * beta * state.momentum
    )
    return w_prev.replace(w_next), FedAvgMState(momentum)


@dataclass
class FedYogiState:
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "FedYogiState":
        return cls(np.zeros(n), np.zeros(n))


def server_update_fedyogi(
    state: FedYogiState,
    w_prev: ModelParams,
    fedavg_result: ModelParams,
    eta: float,
    beta1: float,
    beta2: float,
    tau: float,
) -> tuple[ModelParams, FedYogiState]:
    """Sign-corrected adaptive second moment on the pseudo-gradient.

    delta = f - w_prev; m <- beta1*m + (1-beta1)*delta;
    v <- v - (1-beta2)*delta^2*sign(v - delta^2);
    w_next = w_prev + eta*m / (sqrt(v) + tau), with v floored at tau^2 in
    the denominator.
    """
    _check_same_layout(w_prev, fedavg_result)
    delta = fedavg_result.values - w_prev.values
    m = beta1 * state.m + (1.0 - beta1) * delta
    d2 = delta * delta
    v = state.v - (1.0 - beta2) * d2 * np.sign(state.v - d2)
    w_next = w_prev.values + eta * m / (np.sqrt(np.maximum(v, tau * tau)) + tau)
    return w_prev.replace(w_next), FedYogiState(m, v)
