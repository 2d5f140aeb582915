"""Server-side aggregation, evaluation and convergence bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError
from .model import ModelParams, forward


@dataclass
class ServerState:
    global_params: ModelParams
    global_control: ModelParams
    round_index: int = 0


def aggregate_weighted(updates) -> ModelParams:
    """Sample-weighted average of ``(params, n_samples)`` pairs.

    Updates are reduced in the order given (callers pass ascending client id)
    as first + sum_i w_i * (x_i - first), which returns identical inputs
    exactly.
    """
    updates = list(updates)
    if not updates:
        raise InvalidParameterError("nothing to aggregate")
    first = updates[0][0]
    for p, _ in updates[1:]:
        first.check_compatible(p)
    counts = np.array([n for _, n in updates], dtype=np.float64)
    total = counts.sum()
    if not total > 0:
        raise InvalidParameterError("total sample count must be positive")
    weights = counts / total
    out = first.vec.copy()
    for (p, _), w in zip(updates[1:], weights[1:]):
        out += w * (p.vec - first.vec)
    return first.with_vec(out)


def scaffold_server_update(server: ServerState, local_params, delta_controls, n_clients_total, server_lr=1.0) -> ServerState:
    """Scaffold global step: x += server_lr * mean(y_i - x); c += (|S|/N) * mean(delta_c_i)."""
    local_params = list(local_params)
    delta_controls = list(delta_controls)
    if not local_params or len(local_params) != len(delta_controls):
        raise InvalidParameterError("need one control delta per local model")
    x = server.global_params
    for p in local_params + delta_controls:
        x.check_compatible(p)
    s = len(local_params)
    drift = np.zeros_like(x.vec)
    for p in local_params:
        drift += p.vec - x.vec
    dc = np.zeros_like(x.vec)
    for p in delta_controls:
        dc += p.vec
    new_x = x.vec + server_lr * (drift / s)
    new_c = server.global_control.vec + (s / n_clients_total) * (dc / s)
    return ServerState(x.with_vec(new_x), x.with_vec(new_c), server.round_index + 1)


def predict(params: ModelParams, x) -> np.ndarray:
    # argmax returns the lowest index among ties
    return np.argmax(forward(params, x)[0], axis=1)


def evaluate(params: ModelParams, test_ds) -> float:
    if len(test_ds) == 0:
        raise InvalidParameterError("test set is empty")
    return float(np.mean(predict(params, test_ds.features) == test_ds.labels))


def rounds_to_target(accuracy_series, target, smoothing_window=1):
    """First 0-based round whose trailing mean over a full window reaches ``target``; None if never."""
    acc = np.asarray(accuracy_series, dtype=np.float64)
    if acc.size == 0:
        raise InvalidParameterError("accuracy series is empty")
    if not 0 < target <= 1:
        raise InvalidParameterError(f"target must lie in (0, 1], got {target}")
    if smoothing_window < 1:
        raise InvalidParameterError("smoothing_window must be >= 1")
    for t in range(smoothing_window - 1, acc.size):
        if acc[t - smoothing_window + 1 : t + 1].mean() >= target:
            return t
    return None
