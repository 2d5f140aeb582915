"""Battery-constrained availability: a rotating queue of charged devices.

The ring is the battery-ordered queue. The ``pool_size`` devices starting at
``head`` have enough charge to be selected; every round the head moves forward
by ``step_size`` devices (fractional steps accumulate), so devices at the front
drain out of the pool while recharged ones enter at the back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyGroupError, InvalidParameterError
from .imbalance import GroupedSelection
from .partition import shard_class_matrix


@dataclass(frozen=True)
class FleetConfig:
    n_devices: int = 100
    pool_size: int = 50
    select_k: int = 10
    step_size: float = 1.0
    window_size: int = 1
    rounds: int = 200

    def __post_init__(self):
        if not 1 <= self.select_k <= self.pool_size <= self.n_devices:
            raise InvalidParameterError(
                f"need 1 <= select_k ({self.select_k}) <= pool_size ({self.pool_size})"
                f" <= n_devices ({self.n_devices})"
            )
        if not (self.step_size >= 0 and math.isfinite(self.step_size)):
            raise InvalidParameterError(f"step_size must be >= 0, got {self.step_size}")
        if self.window_size < 1:
            raise InvalidParameterError(f"window_size must be >= 1, got {self.window_size}")
        if self.rounds < self.window_size:
            raise InvalidParameterError(
                f"rounds ({self.rounds}) must be >= window_size ({self.window_size})"
            )


@dataclass(frozen=True)
class PoolState:
    ring: np.ndarray
    head: int = 0
    frac_accum: float = 0.0

    @property
    def n_devices(self) -> int:
        return self.ring.shape[0]


@dataclass
class WindowedDelta:
    window_deltas: np.ndarray
    mean_delta: float


def init_pool(n_devices: int, seed) -> PoolState:
    if n_devices < 1:
        raise InvalidParameterError(f"n_devices must be >= 1, got {n_devices}")
    ring = np.random.default_rng(seed).permutation(n_devices).astype(np.int64)
    return PoolState(ring, 0, 0.0)


def available_pool(state: PoolState, pool_size: int) -> np.ndarray:
    """The ``pool_size`` ring entries starting at the head, wrapping around."""
    n = state.n_devices
    if not 0 <= pool_size <= n:
        raise InvalidParameterError(f"pool_size {pool_size} must lie in [0, {n}]")
    return state.ring[(state.head + np.arange(pool_size)) % n]


def advance_pool(state: PoolState, step_size: float) -> PoolState:
    if not step_size >= 0:
        raise InvalidParameterError(f"step_size must be >= 0, got {step_size}")
    if step_size == 0:
        return state
    acc = state.frac_accum + step_size
    whole = math.floor(acc)
    return PoolState(state.ring, (state.head + whole) % state.n_devices, acc - whole)


def select_from_pool(pool, k: int, rng: np.random.Generator) -> GroupedSelection:
    """k ids uniformly without replacement: the pool members with the k smallest random keys."""
    pool = np.asarray(pool, dtype=np.int64)
    if not 0 <= k <= pool.size:
        raise InvalidParameterError(f"cannot select {k} devices from a pool of {pool.size}")
    keys = rng.random(pool.size)
    return GroupedSelection(pool[np.argsort(keys, kind="stable")[:k]])


def head_trajectory(state: PoolState, step_size: float, rounds: int) -> np.ndarray:
    heads = np.empty(rounds, dtype=np.int64)
    for t in range(rounds):
        heads[t] = state.head
        state = advance_pool(state, step_size)
    return heads


def simulate_selections(cfg: FleetConfig, seed) -> np.ndarray:
    """rounds x select_k device ids chosen under the rotating pool.

    Vectorised form of: pool = available_pool; select_from_pool; advance_pool,
    consuming the generator stream identically.
    """
    ring_ss, sel_ss = np.random.SeedSequence(seed).spawn(2)
    state = init_pool(cfg.n_devices, ring_ss)
    rng = np.random.default_rng(sel_ss)
    heads = head_trajectory(state, cfg.step_size, cfg.rounds)
    keys = rng.random((cfg.rounds, cfg.pool_size))
    offsets = np.argsort(keys, axis=1, kind="stable")[:, : cfg.select_k]
    return state.ring[(heads[:, None] + offsets) % cfg.n_devices]


def simulate_windowed_delta(shards, ds, cfg: FleetConfig, seed) -> WindowedDelta:
    """Imbalance degree of each tumbling window of ``window_size`` rounds' merged selections."""
    if shards.n_clients != cfg.n_devices:
        raise InvalidParameterError(
            f"partition has {shards.n_clients} clients but fleet has {cfg.n_devices} devices"
        )
    selections = simulate_selections(cfg, seed)
    deltas = kernels.window_deltas(shard_class_matrix(shards, ds), selections, cfg.window_size)
    if np.isnan(deltas).any():
        raise EmptyGroupError("a window's merged selection holds no samples")
    return WindowedDelta(deltas, float(deltas.mean()))
