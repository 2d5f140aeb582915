"""Numpy implementations of the Monte Carlo kernels (fallback when the extension is absent)."""

import numpy as np


def window_deltas(counts, selections, window):
    """Imbalance degree of each block of ``window`` consecutive selection rows.

    ``counts`` is a client x class int64 matrix, ``selections`` a rounds x k
    matrix of client ids. A trailing partial window is dropped. Windows whose
    merged data is empty yield NaN.
    """
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    selections = np.ascontiguousarray(selections, dtype=np.int64)
    n_windows = selections.shape[0] // window
    used = selections[: n_windows * window].reshape(n_windows, -1)
    grouped = counts[used].sum(axis=1)
    total = grouped.sum(axis=1)
    spread = grouped.max(axis=1) - grouped.min(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = spread.astype(np.float64) / total.astype(np.float64)
    out[total == 0] = np.nan
    return out


def selection_hits(selections, n_ids):
    """How many times each id appears in ``selections``."""
    return np.bincount(np.asarray(selections, dtype=np.int64).ravel(), minlength=n_ids)
