"""Client-side local training for FedAvg, FedProx, Scaffold and MOON."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from ..dataset import LabeledDataset
from ..errors import EmptyShardError, InvalidParameterError
from .model import ContrastiveTerm, LinearCorrection, ModelParams, ProximalTerm, forward, loss_and_grad

ALGORITHMS = ("fedavg", "fedprox", "scaffold", "moon")


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float = 0.05
    local_epochs: int = 2
    batch_size: int = 32
    prox_mu: float = 0.01
    moon_mu: float = 1.0
    moon_tau: float = 0.5
    server_lr: float = 1.0

    def __post_init__(self):
        checks = {
            "learning_rate >= 0": self.learning_rate >= 0,
            "local_epochs >= 1": self.local_epochs >= 1,
            "batch_size >= 1": self.batch_size >= 1,
            "prox_mu >= 0": self.prox_mu >= 0,
            "moon_mu >= 0": self.moon_mu >= 0,
            "moon_tau > 0": self.moon_tau > 0,
            "server_lr >= 0": self.server_lr >= 0,
        }
        for rule, ok in checks.items():
            if not ok:
                raise InvalidParameterError(f"hyperparameter constraint violated: {rule}")
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise InvalidParameterError(f"{f.name} must be finite")


@dataclass
class ClientState:
    control: ModelParams | None = None
    prev_local: ModelParams | None = None


@dataclass
class LocalUpdate:
    params: ModelParams
    n_samples: int
    mean_loss: float
    steps: int
    control: ModelParams | None = None
    delta_control: ModelParams | None = None


def minibatches(n, batch_size, rng):
    """Seeded shuffle into batches; rows inside a batch stay in ascending order."""
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield np.sort(perm[start : start + batch_size])


def _local_sgd(global_params, data: LabeledDataset, hp: HyperParams, seed, make_terms):
    if len(data) == 0:
        raise EmptyShardError("cannot train on an empty shard")
    if data.dim != global_params.d:
        raise InvalidParameterError(f"data has {data.dim} features, model expects {global_params.d}")
    rng = np.random.default_rng(seed)
    w = global_params.copy()
    losses = []
    steps = 0
    for _ in range(hp.local_epochs):
        for batch in minibatches(len(data), hp.batch_size, rng):
            xb, yb = data.features[batch], data.labels[batch]
            loss, grad = loss_and_grad(w, xb, yb, make_terms(xb))
            w.vec -= hp.learning_rate * grad.vec
            losses.append(loss)
            steps += 1
    return w, steps, float(np.mean(losses))


def local_train_fedavg(global_params, data, hp, seed=0) -> LocalUpdate:
    """``local_epochs`` epochs of mini-batch gradient descent from the global model."""
    w, steps, loss = _local_sgd(global_params, data, hp, seed, lambda xb: ())
    return LocalUpdate(w, len(data), loss, steps)


def local_train_fedprox(global_params, data, hp, seed=0) -> LocalUpdate:
    if hp.prox_mu == 0:
        return local_train_fedavg(global_params, data, hp, seed)
    terms = (ProximalTerm(global_params, hp.prox_mu),)
    w, steps, loss = _local_sgd(global_params, data, hp, seed, lambda xb: terms)
    return LocalUpdate(w, len(data), loss, steps)


def scaffold_control_update(client_control, global_control, global_vec, local_vec, steps, lr):
    """c_i+ = c_i - c + (x - y_i) / (steps * lr), on flat vectors."""
    if steps < 1 or lr <= 0:
        raise InvalidParameterError("control update needs steps >= 1 and learning_rate > 0")
    return client_control - global_control + (global_vec - local_vec) / (steps * lr)


def local_train_scaffold(global_params, data, hp, global_control, client_control=None, seed=0) -> LocalUpdate:
    """Local steps with gradient g - c_i + c; returns the refreshed client control and its change."""
    if client_control is None:
        client_control = global_params.zeros_like()
    global_params.check_compatible(global_control)
    global_params.check_compatible(client_control)
    terms = (LinearCorrection(global_control.vec - client_control.vec),)
    w, steps, loss = _local_sgd(global_params, data, hp, seed, lambda xb: terms)
    new_c = scaffold_control_update(
        client_control.vec, global_control.vec, global_params.vec, w.vec, steps, hp.learning_rate
    )
    return LocalUpdate(
        w,
        len(data),
        loss,
        steps,
        control=global_params.with_vec(new_c),
        delta_control=global_params.with_vec(new_c - client_control.vec),
    )


def local_train_moon(global_params, data, hp, prev_local=None, seed=0) -> LocalUpdate:
    """Cross-entropy plus the model-contrastive term; skipped on a client's first participation."""
    if hp.moon_mu == 0 or prev_local is None:
        return local_train_fedavg(global_params, data, hp, seed)
    global_params.check_compatible(prev_local)

    def terms(xb):
        z_global = forward(global_params, xb)[1]
        z_prev = forward(prev_local, xb)[1]
        return (ContrastiveTerm(z_global, z_prev, hp.moon_mu, hp.moon_tau),)

    w, steps, loss = _local_sgd(global_params, data, hp, seed, terms)
    return LocalUpdate(w, len(data), loss, steps)
