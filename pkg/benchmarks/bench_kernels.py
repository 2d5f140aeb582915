"""Compare the compiled and numpy kernels on Monte Carlo-sized inputs.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from fedimb import _kernels_py, kernels
from fedimb.dataset import make_synthetic_blobs
from fedimb.imbalance import draw_selections, mean_delta_random_selection
from fedimb.partition import PartitionSpec, dirichlet_partition, shard_class_matrix

try:
    from fedimb import _ckernels
except ImportError:
    _ckernels = None


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    ds = make_synthetic_blobs(500, 10, 2, 0.0, seed=0)
    shards = dirichlet_partition(ds, PartitionSpec(100, 0.1, seed=0))
    counts = shard_class_matrix(shards, ds)
    sel = draw_selections(np.random.default_rng(0), 100, 10, 10_000)

    backends = {"python": _kernels_py}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled extension not built; timing numpy only")

    print(f"{'case':34s} " + " ".join(f"{b:>10s}" for b in backends) + "   speedup")
    for window in (1, 10):
        times = {b: best(lambda m=m: m.window_deltas(counts, sel, window), args.repeat) for b, m in backends.items()}
        ref = backends["python"].window_deltas(counts, sel, window)
        for m in backends.values():
            assert m.window_deltas(counts, sel, window).tobytes() == ref.tobytes()
        report(f"window_deltas 10k x k=10, W={window}", times)

    original = kernels.window_deltas
    times = {}
    try:
        for b, m in backends.items():
            kernels.window_deltas = m.window_deltas
            times[b] = best(lambda: mean_delta_random_selection(shards, ds, 10, 10_000, seed=1), args.repeat)
    finally:
        kernels.window_deltas = original
    report("mean_delta 10k trials, fixed", times)


def report(name, times):
    cells = " ".join(f"{t * 1e3:8.2f}ms" for t in times.values())
    speed = f"{times['python'] / times['cython']:6.1f}x" if "cython" in times else ""
    print(f"{name:34s} {cells}   {speed}")


if __name__ == "__main__":
    main()
