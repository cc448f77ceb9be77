"""Numerical federated-learning core: data, partitioning, training, aggregation."""

from .aggregate import (
    AggregatorSpec,
    FedAvg,
    FedAvgM,
    FedAvgMState,
    FedYogi,
    FedYogiState,
    aggregate_fedavg,
    server_update_fedavgm,
    server_update_fedyogi,
)
from .datasets import Dataset, make_synthetic_dataset, train_eval_split
from .models import ModelParams, ModelSpec, evaluate, init_params, local_train
from .partition import IID, Dirichlet, PartitionSpec, Shards, partition
from .selection import ClientState, Random, ResourceAware, select_clients

__all__ = [
    "AggregatorSpec",
    "FedAvg",
    "FedAvgM",
    "FedYogi",
    "Dataset",
    "make_synthetic_dataset",
    "train_eval_split",
    "IID",
    "Shards",
    "Dirichlet",
    "PartitionSpec",
    "partition",
    "ModelParams",
    "ModelSpec",
    "init_params",
    "local_train",
    "evaluate",
    "aggregate_fedavg",
    "server_update_fedavgm",
    "server_update_fedyogi",
    "FedAvgMState",
    "FedYogiState",
    "Random",
    "ResourceAware",
    "ClientState",
    "select_clients",
]
