"""Federated training engine."""

from .algorithms import (
    ALGORITHMS,
    ClientState,
    HyperParams,
    LocalUpdate,
    local_train_fedavg,
    local_train_fedprox,
    local_train_moon,
    local_train_scaffold,
    scaffold_control_update,
)
from .model import ModelParams, forward, init_params, loss_and_grad
from .server import ServerState, aggregate_weighted, evaluate, rounds_to_target, scaffold_server_update
from .training import RoundLog, run_federated

__all__ = [
    "ALGORITHMS",
    "ClientState",
    "HyperParams",
    "LocalUpdate",
    "ModelParams",
    "RoundLog",
    "ServerState",
    "aggregate_weighted",
    "evaluate",
    "forward",
    "init_params",
    "local_train_fedavg",
    "local_train_fedprox",
    "local_train_moon",
    "local_train_scaffold",
    "loss_and_grad",
    "rounds_to_target",
    "run_federated",
    "scaffold_control_update",
    "scaffold_server_update",
]
