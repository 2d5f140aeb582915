"""Label-skew partitioning of a dataset across clients."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset, class_counts
from .errors import EmptyShardError, InfeasiblePartitionError, InvalidParameterError

SCHEMES = ("client", "class")


@dataclass(frozen=True)
class PartitionSpec:
    """Dirichlet partition parameters.

    ``scheme="client"`` draws one class-proportion vector per client and gives
    every client an equal share of samples; ``scheme="class"`` draws, for each
    class, a proportion vector over clients.
    """

    n_clients: int
    alpha: float
    seed: int = 0
    scheme: str = "client"

    def __post_init__(self):
        if self.n_clients < 1:
            raise InvalidParameterError(f"n_clients must be >= 1, got {self.n_clients}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise InvalidParameterError(f"alpha > 0 and finite required, got {self.alpha}")
        if self.scheme not in SCHEMES:
            raise InvalidParameterError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")


@dataclass
class ClientShards:
    shards: list
    num_classes: int

    def __len__(self):
        return len(self.shards)

    @property
    def n_clients(self) -> int:
        return len(self.shards)

    def sizes(self) -> np.ndarray:
        return np.array([len(s) for s in self.shards], dtype=np.int64)


def largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Round ``weights * total`` (weights summing to 1) to integers summing to ``total``.

    Ties in the fractional part go to the lowest index.
    """
    raw = weights * total
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    elif short < 0:
        # float drift can overshoot by one; take back from the smallest remainders
        order = np.argsort(raw - counts, kind="stable")
        for i in order:
            if short == 0:
                break
            if counts[i] > 0:
                counts[i] -= 1
                short += 1
    return counts


def _fill_client(weights, need, supply):
    got = np.zeros_like(supply)
    while need > 0:
        avail = supply - got
        w = np.where(avail > 0, weights, 0.0)
        if not w.sum() > 0:
            w = avail.astype(np.float64)
        take = np.minimum(largest_remainder(w / w.sum(), need), avail)
        got += take
        need -= int(take.sum())
    return got


def _client_scheme_counts(class_sizes, n_clients, alpha, rng):
    n = int(class_sizes.sum())
    B = class_sizes.size
    props = rng.dirichlet(np.full(B, alpha), size=n_clients)
    base, extra = divmod(n, n_clients)
    supply = class_sizes.copy()
    counts = np.zeros((n_clients, B), dtype=np.int64)
    for i in range(n_clients):
        need = base + (1 if i < extra else 0)
        counts[i] = _fill_client(props[i], need, supply)
        supply -= counts[i]
    return counts


def _class_scheme_counts(class_sizes, n_clients, alpha, rng):
    counts = np.zeros((n_clients, class_sizes.size), dtype=np.int64)
    for c, size in enumerate(class_sizes):
        props = rng.dirichlet(np.full(n_clients, alpha))
        counts[:, c] = largest_remainder(props, int(size))
    return counts


def _assign(ds, counts, rng):
    """Hand out each class's shuffled sample indices according to a client x class count matrix."""
    n_clients, B = counts.shape
    parts = [[] for _ in range(n_clients)]
    for c in range(B):
        members = np.flatnonzero(ds.labels == c)
        members = members[rng.permutation(members.size)]
        bounds = np.concatenate(([0], np.cumsum(counts[:, c])))
        for i in range(n_clients):
            if counts[i, c]:
                parts[i].append(members[bounds[i] : bounds[i + 1]])
    return ClientShards(
        [np.sort(np.concatenate(p)) if p else np.empty(0, np.int64) for p in parts],
        B,
    )


def dirichlet_partition(ds: LabeledDataset, spec: PartitionSpec) -> ClientShards:
    """Split ``ds`` across ``spec.n_clients`` clients with Dirichlet(alpha) label skew."""
    n = len(ds)
    if n == 0:
        raise InvalidParameterError("cannot partition an empty dataset")
    if spec.n_clients > n:
        raise InfeasiblePartitionError(f"{spec.n_clients} clients exceed {n} samples")
    rng = np.random.default_rng(spec.seed)
    sizes = class_counts(ds)
    if spec.scheme == "client":
        counts = _client_scheme_counts(sizes, spec.n_clients, spec.alpha, rng)
    else:
        counts = _class_scheme_counts(sizes, spec.n_clients, spec.alpha, rng)
    return _assign(ds, counts, rng)


def homogeneous_partition(ds: LabeledDataset, n_clients: int, seed: int = 0) -> ClientShards:
    """Stratified split: every class dealt round-robin over clients after a seeded shuffle."""
    if n_clients < 1:
        raise InvalidParameterError(f"n_clients must be >= 1, got {n_clients}")
    rng = np.random.default_rng(seed)
    parts = [[] for _ in range(n_clients)]
    offset = 0
    for c in range(ds.num_classes):
        members = np.flatnonzero(ds.labels == c)
        members = members[rng.permutation(members.size)]
        # rotating the start keeps total shard sizes within one of each other
        for j in range(n_clients):
            parts[(j + offset) % n_clients].append(members[j::n_clients])
        offset = (offset + members.size) % n_clients
    return ClientShards([np.sort(np.concatenate(p)) for p in parts], ds.num_classes)


def shard_class_matrix(shards: ClientShards, ds: LabeledDataset) -> np.ndarray:
    """Client x class count matrix."""
    out = np.zeros((shards.n_clients, ds.num_classes), dtype=np.int64)
    for i, s in enumerate(shards.shards):
        if len(s):
            out[i] = np.bincount(ds.labels[s], minlength=ds.num_classes)
    return out


def client_label_distribution(shards: ClientShards, ds: LabeledDataset, client: int) -> np.ndarray:
    if not 0 <= client < shards.n_clients:
        raise InvalidParameterError(f"client {client} out of range [0, {shards.n_clients})")
    counts = class_counts(ds, shards.shards[client])
    total = counts.sum()
    if total == 0:
        raise EmptyShardError(f"client {client} has an empty shard")
    return counts / total


def sorted_mean_distribution(shards: ClientShards, ds: LabeledDataset) -> np.ndarray:
    """Mean over non-empty clients of each client's label distribution sorted in descending order."""
    counts = shard_class_matrix(shards, ds)
    totals = counts.sum(axis=1)
    keep = totals > 0
    if not keep.any():
        raise EmptyShardError("all shards are empty")
    p = counts[keep] / totals[keep, None]
    return (-np.sort(-p, axis=1)).mean(axis=0)


def write_manifest(shards: ClientShards, path) -> None:
    """CSV manifest with one (client_id, sample_index) row per assigned sample."""
    with open(os.fspath(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["client_id", "sample_index"])
        for cid, s in enumerate(shards.shards):
            for idx in s:
                w.writerow([cid, int(idx)])


def read_manifest(path, n_clients=None, num_classes=0) -> ClientShards:
    with open(os.fspath(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    n = n_clients if n_clients is not None else 1 + max((int(r["client_id"]) for r in rows), default=-1)
    parts = [[] for _ in range(n)]
    for r in rows:
        parts[int(r["client_id"])].append(int(r["sample_index"]))
    return ClientShards([np.array(sorted(p), dtype=np.int64) for p in parts], num_classes)
