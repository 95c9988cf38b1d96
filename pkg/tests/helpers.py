"""Synthetic logs and small oracles shared by the test modules."""

import math

import numpy as np

from autogcas.harness.log import COLUMN_INDEX, COLUMNS, SimLog


def synthetic_log(t, dt=0.01, h_buff=100.0, q_bounds=(-0.1, 0.22), **columns) -> SimLog:
    t = np.asarray(t, dtype=float)
    data = np.zeros((t.size, len(COLUMNS)))
    data[:, COLUMN_INDEX["t"]] = t
    for name, values in columns.items():
        data[:, COLUMN_INDEX[name]] = values
    return SimLog(data, dt, h_buff, {"q_bounds": list(q_bounds)})


def brute_force_dtw(x, y):
    """Minimum path cost over every monotone warping path (exponential, tiny inputs only)."""
    n, m = len(x), len(y)
    best = math.inf

    def walk(i, j, acc):
        nonlocal best
        acc += abs(x[i] - y[j])
        if acc >= best:
            return
        if i == n - 1 and j == m - 1:
            best = acc
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return best


def minmax(v):
    v = np.asarray(v, dtype=float)
    span = v.max() - v.min()
    return np.zeros_like(v) if span == 0 else (v - v.min()) / span
