"""Config-driven experiments: parsing, dispatch and deterministic CSV output.

Config files are YAML. Keys may be written flat (``partition.alpha: 0.1``) or
nested (``partition: {alpha: 0.1}``); both flatten to the same dotted keys.
See ``SCHEMA`` for every key, its default and its constraint, and ``COLUMNS``
for the CSV schema of each output table.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from .battery import FleetConfig, simulate_windowed_delta
from .dataset import load_cifar10_binary, make_synthetic_blobs
from .errors import ConfigError, ExperimentError, FedImbError
from .flcore import ALGORITHMS, HyperParams, rounds_to_target, run_federated
from .imbalance import delta_vs_selection_size, mean_delta_random_selection
from .partition import SCHEMES, PartitionSpec, dirichlet_partition, homogeneous_partition

KINDS = ("imbalance_sweep", "selection_size_sweep", "battery_sweep", "fl_train")
HOMOGENEOUS = "homogeneous"

_REQUIRED = object()


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _alpha_ok(a):
    return a == HOMOGENEOUS or (isinstance(a, (int, float)) and a > 0 and math.isfinite(a))


# key -> (default, type tag, constraint, constraint text)
SCHEMA = {
    "kind": (_REQUIRED, "str", lambda v: v in KINDS, f"kind in {KINDS}"),
    "seeds": ([0], "int_list", lambda v: len(v) >= 1, "at least one seed"),
    "output": ("results", "str", None, None),
    "dataset.source": ("synthetic", "str", lambda v: v in ("synthetic", "cifar10"), "source in (synthetic, cifar10)"),
    "dataset.paths": ([], "str_list", None, None),
    "dataset.test_paths": ([], "str_list", None, None),
    "dataset.n_per_class": (500, "int", lambda v: v >= 1, "n_per_class >= 1"),
    "dataset.test_per_class": (50, "int", lambda v: v >= 1, "test_per_class >= 1"),
    "dataset.num_classes": (10, "int", lambda v: v >= 2, "num_classes >= 2"),
    "dataset.dim": (16, "int", lambda v: v >= 2, "dim >= 2"),
    "dataset.spread": (0.25, "float", _nonneg, "spread >= 0"),
    "dataset.seed": (0, "int", None, None),
    "partition.n_clients": (100, "int", lambda v: v >= 1, "n_clients >= 1"),
    "partition.alphas": ([1.0, 0.1, 0.01], "alpha_list", lambda v: len(v) >= 1 and all(map(_alpha_ok, v)),
                         "alpha > 0 (or 'homogeneous') for every entry"),
    "partition.scheme": ("client", "str", lambda v: v in SCHEMES, f"scheme in {SCHEMES}"),
    "sweep.k_values": (None, "int_list", lambda v: len(v) >= 1 and min(v) >= 1, "every k >= 1"),
    "sweep.trials": (10_000, "int", lambda v: v >= 1, "trials >= 1"),
    "sweep.resample": (None, "bool", None, None),
    "sweep.resample_every": (100, "int", lambda v: v >= 1, "resample_every >= 1"),
    "fleet.pool_sizes": ([30, 50, 70], "int_list", lambda v: len(v) >= 1 and min(v) >= 1, "every pool_size >= 1"),
    "fleet.window_sizes": ([1, 5, 10], "int_list", lambda v: len(v) >= 1 and min(v) >= 1, "every window_size >= 1"),
    "fleet.step_sizes": ([0.2, 0.5, 1.0, 2.0, 5.0], "float_list", lambda v: len(v) >= 1 and min(v) >= 0,
                         "every step_size >= 0"),
    "fleet.select_k": (10, "int", lambda v: v >= 1, "select_k >= 1"),
    "fleet.rounds": (200, "int", lambda v: v >= 1, "rounds >= 1"),
    "hyper.algorithms": (["fedavg"], "str_list", lambda v: len(v) >= 1 and all(a in ALGORITHMS for a in v),
                         f"algorithms from {ALGORITHMS}"),
    "hyper.learning_rate": (0.05, "float", _pos, "learning_rate > 0"),
    "hyper.local_epochs": (2, "int", lambda v: v >= 1, "local_epochs >= 1"),
    "hyper.batch_size": (32, "int", lambda v: v >= 1, "batch_size >= 1"),
    "hyper.prox_mu": (0.01, "float", _nonneg, "prox_mu >= 0"),
    "hyper.moon_mu": (1.0, "float", _nonneg, "moon_mu >= 0"),
    "hyper.moon_tau": (0.5, "float", _pos, "moon_tau > 0"),
    "hyper.server_lr": (1.0, "float", _nonneg, "server_lr >= 0"),
    "hyper.hidden": (128, "int", lambda v: v >= 1, "hidden >= 1"),
    "hyper.rounds": (100, "int", lambda v: v >= 1, "rounds >= 1"),
    "hyper.clients_per_round": (10, "int", lambda v: v >= 1, "clients_per_round >= 1"),
    "hyper.target_accuracy": (None, "float", lambda v: 0 < v <= 1, "0 < target_accuracy <= 1"),
    "hyper.smoothing_window": (5, "int", lambda v: v >= 1, "smoothing_window >= 1"),
}

_DEFAULT_K = {"imbalance_sweep": [10], "selection_size_sweep": [5, 10, 20, 50]}
_DEFAULT_RESAMPLE = {"imbalance_sweep": True, "selection_size_sweep": False}

COLUMNS = {
    "imbalance_sweep": ["alpha", "k", "trials", "mean_delta", "seed", "n_clients", "scheme", "resample_every"],
    "selection_size_sweep": ["alpha", "k", "trials", "mean_delta", "seed", "n_clients", "scheme", "resample_every"],
    "battery_sweep": ["alpha", "pool_size", "window_size", "step_size", "select_k", "seed", "mean_delta",
                      "rounds", "n_clients", "scheme"],
    "fl_train_rounds": ["round", "algorithm", "alpha", "seed", "test_accuracy", "mean_train_loss",
                        "grouped_delta", "n_clients", "clients_per_round", "scheme"],
    "fl_train_summary": ["algorithm", "alpha", "final_acc_mean", "final_acc_std", "rounds_to_target",
                         "target_accuracy", "n_seeds"],
}
TABLES = {
    "imbalance_sweep": ("imbalance_sweep",),
    "selection_size_sweep": ("selection_size_sweep",),
    "battery_sweep": ("battery_sweep",),
    "fl_train": ("fl_train_rounds", "fl_train_summary"),
}


@dataclass
class ExperimentConfig:
    kind: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seeds(self):
        return self.values["seeds"]

    def hyperparams(self) -> HyperParams:
        v = self.values
        return HyperParams(
            learning_rate=v["hyper.learning_rate"],
            local_epochs=v["hyper.local_epochs"],
            batch_size=v["hyper.batch_size"],
            prox_mu=v["hyper.prox_mu"],
            moon_mu=v["hyper.moon_mu"],
            moon_tau=v["hyper.moon_tau"],
            server_lr=v["hyper.server_lr"],
        )


def _flatten(doc, prefix=""):
    out = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(key, tag, value):
    def bad():
        return ConfigError(f"{key}: cannot interpret {value!r} as {tag}")

    def as_int(x):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or x != int(x):
            raise bad()
        return int(x)

    def as_float(x):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise bad()
        return float(x)

    def as_list(x):
        return list(x) if isinstance(x, (list, tuple)) else [x]

    if value is None:
        return None
    if tag == "str":
        if not isinstance(value, str):
            raise bad()
        return value
    if tag == "int":
        return as_int(value)
    if tag == "float":
        return as_float(value)
    if tag == "bool":
        if not isinstance(value, bool):
            raise bad()
        return value
    if tag == "int_list":
        return [as_int(x) for x in as_list(value)]
    if tag == "float_list":
        return [as_float(x) for x in as_list(value)]
    if tag == "str_list":
        items = as_list(value)
        if not all(isinstance(x, str) for x in items):
            raise bad()
        return items
    if tag == "alpha_list":
        return [x if x == HOMOGENEOUS else as_float(x) for x in as_list(value)]
    raise AssertionError(tag)


def parse_config(text) -> ExperimentConfig:
    """Validate a YAML config document and fill every default."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping of keys to values")
    flat = _flatten(doc)
    # tolerate the singular spellings
    for single, plural in (("partition.alpha", "partition.alphas"), ("hyper.algorithm", "hyper.algorithms")):
        if single in flat:
            if plural in flat:
                raise ConfigError(f"give either {single} or {plural}, not both")
            flat[plural] = flat.pop(single)
    unknown = sorted(set(flat) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}")
    values = {}
    for key, (default, tag, check, rule) in SCHEMA.items():
        if key in flat:
            value = _coerce(key, tag, flat[key])
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key {key!r}")
        else:
            value = list(default) if isinstance(default, list) else default
        if value is not None and check is not None and not check(value):
            raise ConfigError(f"{key}={value!r} out of range: requires {rule}")
        values[key] = value
    kind = values["kind"]
    if values["sweep.k_values"] is None:
        values["sweep.k_values"] = list(_DEFAULT_K.get(kind, [10]))
    if values["sweep.resample"] is None:
        values["sweep.resample"] = _DEFAULT_RESAMPLE.get(kind, False)
    if values["dataset.source"] == "cifar10":
        if not values["dataset.paths"]:
            raise ConfigError("dataset.source=cifar10 requires dataset.paths")
        if kind == "fl_train" and not values["dataset.test_paths"]:
            raise ConfigError("fl_train on cifar10 requires dataset.test_paths")
    n = values["partition.n_clients"]
    if kind in ("imbalance_sweep", "selection_size_sweep") and max(values["sweep.k_values"]) > n:
        raise ConfigError(f"sweep.k_values out of range: requires every k <= partition.n_clients ({n})")
    if kind == "battery_sweep":
        if max(values["fleet.pool_sizes"]) > n:
            raise ConfigError(f"fleet.pool_sizes out of range: requires pool_size <= partition.n_clients ({n})")
        if values["fleet.select_k"] > min(values["fleet.pool_sizes"]):
            raise ConfigError("fleet.select_k out of range: requires select_k <= every pool_size")
        if max(values["fleet.window_sizes"]) > values["fleet.rounds"]:
            raise ConfigError("fleet.window_sizes out of range: requires window_size <= fleet.rounds")
    if kind == "fl_train" and values["hyper.clients_per_round"] > n:
        raise ConfigError(f"hyper.clients_per_round out of range: requires <= partition.n_clients ({n})")
    return ExperimentConfig(kind, values)


def load_config(path) -> ExperimentConfig:
    with open(os.fspath(path), encoding="utf-8") as fh:
        return parse_config(fh.read())


# -- execution ---------------------------------------------------------------


def _datasets(cfg):
    v = cfg.values
    if v["dataset.source"] == "cifar10":
        train = load_cifar10_binary(v["dataset.paths"])
        test = load_cifar10_binary(v["dataset.test_paths"]) if v["dataset.test_paths"] else None
        return train, test
    args = (v["dataset.num_classes"], v["dataset.dim"], v["dataset.spread"])
    train = make_synthetic_blobs(v["dataset.n_per_class"], *args, seed=v["dataset.seed"])
    test = None
    if cfg.kind == "fl_train":
        test = make_synthetic_blobs(v["dataset.test_per_class"], *args, seed=[v["dataset.seed"], 1])
    return train, test


def _partition(cfg, ds, alpha, seed):
    n = cfg["partition.n_clients"]
    if alpha == HOMOGENEOUS:
        return homogeneous_partition(ds, n, seed)
    return dirichlet_partition(ds, PartitionSpec(n, alpha, seed, cfg["partition.scheme"]))


def _delta_rows(cfg, ds, seed):
    v = cfg.values
    rows = []
    for alpha in v["partition.alphas"]:
        echo = {"alpha": alpha, "seed": seed, "n_clients": v["partition.n_clients"],
                "scheme": HOMOGENEOUS if alpha == HOMOGENEOUS else v["partition.scheme"]}
        resample = v["sweep.resample"] and alpha != HOMOGENEOUS
        if cfg.kind == "imbalance_sweep":
            for k in v["sweep.k_values"]:
                if resample:
                    spec = PartitionSpec(v["partition.n_clients"], alpha, seed, v["partition.scheme"])
                    summary = mean_delta_random_selection(None, ds, k, v["sweep.trials"], seed, spec,
                                                          v["sweep.resample_every"])
                else:
                    summary = mean_delta_random_selection(_partition(cfg, ds, alpha, seed), ds, k,
                                                          v["sweep.trials"], seed,
                                                          resample_every=v["sweep.resample_every"])
                rows.append({**echo, "k": k, "trials": v["sweep.trials"], "mean_delta": summary.mean_delta,
                             "resample_every": v["sweep.resample_every"] if resample else 0})
        else:
            shards = _partition(cfg, ds, alpha, seed)
            for k, summary in delta_vs_selection_size(shards, ds, v["sweep.k_values"], v["sweep.trials"], seed):
                rows.append({**echo, "k": k, "trials": v["sweep.trials"], "mean_delta": summary.mean_delta,
                             "resample_every": 0})
    return rows


def _battery_rows(cfg, ds, seed):
    v = cfg.values
    rows = []
    for alpha in v["partition.alphas"]:
        shards = _partition(cfg, ds, alpha, seed)
        for pool in v["fleet.pool_sizes"]:
            for window in v["fleet.window_sizes"]:
                for step in v["fleet.step_sizes"]:
                    fleet = FleetConfig(v["partition.n_clients"], pool, v["fleet.select_k"], step, window,
                                        v["fleet.rounds"])
                    res = simulate_windowed_delta(shards, ds, fleet, seed)
                    rows.append({"alpha": alpha, "pool_size": pool, "window_size": window, "step_size": step,
                                 "select_k": fleet.select_k, "seed": seed, "mean_delta": res.mean_delta,
                                 "rounds": fleet.rounds, "n_clients": fleet.n_devices,
                                 "scheme": HOMOGENEOUS if alpha == HOMOGENEOUS else v["partition.scheme"]})
    return rows


def _fl_rows(cfg, ds, test, seed):
    v = cfg.values
    hp = cfg.hyperparams()
    rows = []
    for alpha in v["partition.alphas"]:
        shards = _partition(cfg, ds, alpha, seed)
        for algorithm in v["hyper.algorithms"]:
            logs = run_federated(ds, test, shards, algorithm, hp, v["hyper.rounds"], v["hyper.clients_per_round"],
                                 v["hyper.hidden"], seed)
            for lg in logs:
                rows.append({"round": lg.round, "algorithm": algorithm, "alpha": alpha, "seed": seed,
                             "test_accuracy": lg.test_accuracy, "mean_train_loss": lg.mean_train_loss,
                             "grouped_delta": lg.grouped_delta, "n_clients": v["partition.n_clients"],
                             "clients_per_round": v["hyper.clients_per_round"],
                             "scheme": HOMOGENEOUS if alpha == HOMOGENEOUS else v["partition.scheme"]})
    return rows


def _fl_summary(cfg, round_rows):
    v = cfg.values
    target = v["hyper.target_accuracy"]
    out = []
    for alpha in v["partition.alphas"]:
        for algorithm in v["hyper.algorithms"]:
            series = []
            for seed in v["seeds"]:
                acc = [r["test_accuracy"] for r in round_rows
                       if r["alpha"] == alpha and r["algorithm"] == algorithm and r["seed"] == seed]
                series.append(acc)
            series = np.array(series)
            finals = series[:, -1]
            rtt = None
            if target is not None:
                rtt = rounds_to_target(series.mean(axis=0), target, v["hyper.smoothing_window"])
            out.append({"algorithm": algorithm, "alpha": alpha, "final_acc_mean": float(finals.mean()),
                        "final_acc_std": float(finals.std()), "rounds_to_target": rtt,
                        "target_accuracy": target, "n_seeds": len(v["seeds"])})
    return out


def _run_seed(cfg, ds, test, seed):
    try:
        if cfg.kind in ("imbalance_sweep", "selection_size_sweep"):
            return _delta_rows(cfg, ds, seed)
        if cfg.kind == "battery_sweep":
            return _battery_rows(cfg, ds, seed)
        return _fl_rows(cfg, ds, test, seed)
    except ExperimentError:
        raise
    except FedImbError as exc:
        raise ExperimentError(str(exc), seed) from exc


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Run every seed of ``cfg`` and return ``{table name: rows}``.

    Seeds may run concurrently; rows are assembled in config order, seeds
    last, so output does not depend on scheduling.
    """
    ds, test = _datasets(cfg)
    seeds = cfg.seeds
    if threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_seed = list(pool.map(lambda s: _run_seed(cfg, ds, test, s), seeds))
    else:
        per_seed = [_run_seed(cfg, ds, test, s) for s in seeds]
    # reorder: parameter tuple first, seed last
    n_seeds = len(seeds)
    rows = []
    n_per_seed = len(per_seed[0])
    for i in range(n_per_seed):
        for j in range(n_seeds):
            rows.append(per_seed[j][i])
    if cfg.kind == "fl_train":
        return {"fl_train_rounds": rows, "fl_train_summary": _fl_summary(cfg, rows)}
    return {cfg.kind: rows}


def format_value(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):#.6g}"
    return str(value)


def csv_text(rows, columns=None) -> str:
    rows = list(rows)
    if columns is None:
        if not rows:
            raise ValueError("columns are required when there are no rows")
        columns = list(rows[0])
    for r in rows:
        if set(r) != set(columns):
            raise ValueError(f"row keys {sorted(r)} do not match schema {columns}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r[c]) for c in columns])
    return buf.getvalue()


def emit_csv(rows, path, columns=None) -> None:
    """Header then rows; floats to 6 significant digits; UTF-8 with LF endings."""
    text = csv_text(rows, columns)
    with open(os.fspath(path), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_results(cfg: ExperimentConfig, tables: dict, out_dir=None) -> list:
    out_dir = os.fspath(out_dir if out_dir is not None else cfg["output"])
    # render everything before touching the filesystem
    rendered = {name: csv_text(rows, COLUMNS[name]) for name, rows in tables.items()}
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, text in rendered.items():
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths.append(path)
    return paths
