"""Grouped-dataset distribution, the imbalance degree, and Monte Carlo sweeps over selections."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .dataset import LabeledDataset
from .errors import EmptyGroupError, InvalidParameterError
from .partition import ClientShards, PartitionSpec, dirichlet_partition, shard_class_matrix


@dataclass(frozen=True)
class GroupedSelection:
    selected: tuple
    round_tag: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "selected", tuple(int(i) for i in self.selected))
        if len(set(self.selected)) != len(self.selected):
            raise InvalidParameterError(f"duplicate client ids in selection {self.selected}")

    def check(self, n_clients: int):
        bad = [i for i in self.selected if not 0 <= i < n_clients]
        if bad:
            raise InvalidParameterError(f"client id {bad[0]} out of range [0, {n_clients})")


@dataclass
class DeltaSummary:
    mean_delta: float
    trials: int
    per_trial: np.ndarray | None = field(default=None, repr=False)


def imbalance_degree(p) -> float:
    """max(p) - min(p)."""
    p = np.asarray(p, dtype=np.float64)
    return float(p.max() - p.min())


def grouped_distribution(shards: ClientShards, ds: LabeledDataset, selected) -> np.ndarray:
    """Label distribution of the union of the selected clients' shards."""
    if not isinstance(selected, GroupedSelection):
        selected = GroupedSelection(tuple(selected))
    if not selected.selected:
        raise EmptyGroupError("selection is empty")
    selected.check(shards.n_clients)
    counts = np.zeros(ds.num_classes, dtype=np.int64)
    for i in selected.selected:
        s = shards.shards[i]
        if len(s):
            counts += np.bincount(ds.labels[s], minlength=ds.num_classes)
    total = counts.sum()
    if total == 0:
        raise EmptyGroupError(f"clients {selected.selected} hold no samples")
    return counts / total


def draw_selections(rng: np.random.Generator, n_clients: int, k: int, rows: int) -> np.ndarray:
    """``rows`` independent uniform k-subsets of range(n_clients), one per row.

    Each row is the k smallest of n_clients uniform keys, so for a fixed stream
    a smaller k selects a prefix of a larger k's selection.
    """
    keys = rng.random((rows, n_clients))
    return np.argsort(keys, axis=1, kind="stable")[:, :k]


def block_seeds(seed: int, block: int):
    """Independent (partition seed, selection generator) for one trial block."""
    part_ss, sel_ss = np.random.SeedSequence([seed, block]).spawn(2)
    return int(part_ss.generate_state(1)[0]), np.random.default_rng(sel_ss)


def _deltas(counts, selections, window=1):
    out = kernels.window_deltas(counts, selections, window)
    if np.isnan(out).any():
        raise EmptyGroupError("a selected group holds no samples")
    return out


def mean_delta_random_selection(
    shards: ClientShards | None,
    ds: LabeledDataset,
    k: int,
    trials: int = 10_000,
    seed: int = 0,
    resample: PartitionSpec | None = None,
    resample_every: int = 100,
    keep_trials: bool = False,
) -> DeltaSummary:
    """Average imbalance degree of k uniformly selected clients over ``trials`` draws.

    Trials run in blocks of ``resample_every``; each block's randomness derives
    from ``(seed, block)`` only. With ``resample`` set, every block draws a fresh
    partition from that spec (its seed is replaced per block) and ``shards`` is
    ignored.
    """
    if trials < 1:
        raise InvalidParameterError(f"trials must be >= 1, got {trials}")
    if resample_every < 1:
        raise InvalidParameterError(f"resample_every must be >= 1, got {resample_every}")
    n_clients = resample.n_clients if resample is not None else shards.n_clients
    if not 1 <= k <= n_clients:
        raise InvalidParameterError(f"k={k} must lie in [1, {n_clients}]")
    fixed = shard_class_matrix(shards, ds) if resample is None else None
    parts = []
    for block, start in enumerate(range(0, trials, resample_every)):
        rows = min(resample_every, trials - start)
        part_seed, rng = block_seeds(seed, block)
        if resample is None:
            counts = fixed
        else:
            counts = shard_class_matrix(dirichlet_partition(ds, replace(resample, seed=part_seed)), ds)
        parts.append(_deltas(counts, draw_selections(rng, n_clients, k, rows)))
    per_trial = np.concatenate(parts)
    return DeltaSummary(float(per_trial.mean()), trials, per_trial if keep_trials else None)


def delta_vs_selection_size(shards, ds, k_values, trials=10_000, seed=0, keep_trials=False):
    """One DeltaSummary per k on the same fixed partition and common random keys."""
    for k in k_values:
        if not 1 <= k <= shards.n_clients:
            raise InvalidParameterError(f"k={k} must lie in [1, {shards.n_clients}]")
    return [
        (k, mean_delta_random_selection(shards, ds, k, trials, seed, keep_trials=keep_trials))
        for k in k_values
    ]
