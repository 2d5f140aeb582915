"""Round loop: select clients, train locally, aggregate, evaluate."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ExperimentError, FedImbError, InvalidParameterError
from ..imbalance import imbalance_degree
from ..partition import ClientShards, shard_class_matrix
from .algorithms import (
    ALGORITHMS,
    ClientState,
    HyperParams,
    local_train_fedavg,
    local_train_fedprox,
    local_train_moon,
    local_train_scaffold,
)
from .model import init_params
from .server import ServerState, aggregate_weighted, evaluate, scaffold_server_update

log = logging.getLogger(__name__)


@dataclass
class RoundLog:
    round: int
    test_accuracy: float
    mean_train_loss: float
    selected_clients: list = field(default_factory=list)
    grouped_delta: float = 0.0


def client_seed(seed, round_index, client):
    return int(np.random.SeedSequence([seed, round_index, client]).generate_state(1)[0])


def select_clients(rng, eligible, k):
    keys = rng.random(eligible.size)
    return np.sort(eligible[np.argsort(keys, kind="stable")[:k]])


def run_federated(
    train_ds,
    test_ds,
    shards: ClientShards,
    algorithm="fedavg",
    hp: HyperParams | None = None,
    rounds=100,
    clients_per_round=10,
    hidden=128,
    seed=0,
):
    """Train a global model for ``rounds`` rounds and return one RoundLog per round.

    Clients with empty shards are never selected. A numeric failure aborts the
    run with the round index attached.
    """
    if algorithm not in ALGORITHMS:
        raise InvalidParameterError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    hp = hp or HyperParams()
    counts = shard_class_matrix(shards, train_ds)
    eligible = np.flatnonzero(counts.sum(axis=1) > 0)
    if eligible.size < shards.n_clients:
        log.warning("%d of %d clients hold no data and are excluded from selection",
                    shards.n_clients - eligible.size, shards.n_clients)
    if not 1 <= clients_per_round <= eligible.size:
        raise InvalidParameterError(
            f"clients_per_round={clients_per_round} must lie in [1, {eligible.size}] (non-empty clients)"
        )
    params = init_params(train_ds.dim, hidden, train_ds.num_classes, seed)
    server = ServerState(params, params.zeros_like(), 0)
    states = {}
    local_data = {}
    logs = []
    for r in range(rounds):
        rng = np.random.default_rng([seed, r])
        selected = select_clients(rng, eligible, clients_per_round)
        x = server.global_params
        updates = []
        try:
            for cid in selected:
                cid = int(cid)
                if cid not in local_data:
                    local_data[cid] = train_ds.subset(shards.shards[cid])
                st = states.setdefault(cid, ClientState())
                cs = client_seed(seed, r, cid)
                if algorithm == "fedavg":
                    up = local_train_fedavg(x, local_data[cid], hp, cs)
                elif algorithm == "fedprox":
                    up = local_train_fedprox(x, local_data[cid], hp, cs)
                elif algorithm == "moon":
                    up = local_train_moon(x, local_data[cid], hp, st.prev_local, cs)
                else:
                    up = local_train_scaffold(x, local_data[cid], hp, server.global_control, st.control, cs)
                updates.append((cid, up))
        except FedImbError as exc:
            raise ExperimentError(f"{algorithm} local training failed: {exc}", seed, r) from exc

        # client state writes only after every local update of the round is done
        for cid, up in updates:
            if algorithm == "scaffold":
                states[cid].control = up.control
            elif algorithm == "moon":
                states[cid].prev_local = up.params
        if algorithm == "scaffold":
            server = scaffold_server_update(
                server,
                [up.params for _, up in updates],
                [up.delta_control for _, up in updates],
                shards.n_clients,
                hp.server_lr,
            )
        else:
            agg = aggregate_weighted([(up.params, up.n_samples) for _, up in updates])
            server = ServerState(agg, server.global_control, server.round_index + 1)
        if not np.all(np.isfinite(server.global_params.vec)):
            raise ExperimentError(f"{algorithm} global model diverged", seed, r)

        grouped = counts[selected].sum(axis=0)
        logs.append(
            RoundLog(
                round=r,
                test_accuracy=evaluate(server.global_params, test_ds),
                mean_train_loss=float(np.mean([up.mean_loss for _, up in updates])),
                selected_clients=[int(c) for c in selected],
                grouped_delta=imbalance_degree(grouped / grouped.sum()),
            )
        )
    return logs
