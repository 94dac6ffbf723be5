"""Chunked scans over dataset rows with order-independent results.

Rows are split into fixed-size chunks. Each chunk is processed independently
and partial results are combined by a fixed-shape pairwise tree, so the output
is bitwise identical for any thread count (given the chunk size).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

CHUNK_ROWS = 4096

_threads = None


def get_threads() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get("SCHEDLAB_THREADS")
    return int(env) if env else (os.cpu_count() or 1)


def set_threads(n) -> None:
    """Set the worker count for dataset scans; ``None`` restores the default."""
    global _threads
    if n is not None and int(n) < 1:
        raise ValueError("thread count must be positive")
    _threads = None if n is None else int(n)


@contextmanager
def threads(n):
    global _threads
    old = _threads
    set_threads(n)
    try:
        yield
    finally:
        _threads = old


def _chunks(n_rows, chunk_rows):
    return [slice(s, min(s + chunk_rows, n_rows)) for s in range(0, n_rows, chunk_rows)]


def _map(fn, items):
    n = min(get_threads(), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def pairwise_sum(parts):
    """Sum arrays with a balanced tree whose shape depends only on ``len(parts)``."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to sum")
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def row_dot(X: np.ndarray, v: np.ndarray, chunk_rows: int = CHUNK_ROWS) -> np.ndarray:
    """``X @ v`` computed chunk by chunk."""
    pieces = _map(lambda sl: X[sl] @ v, _chunks(X.shape[0], chunk_rows))
    return np.concatenate(pieces)


def weighted_row_sum(W: np.ndarray, X: np.ndarray, chunk_rows: int = CHUNK_ROWS) -> np.ndarray:
    """``W @ X`` for ``W`` of shape ``(K, N)``, skipping rows whose weights are all zero.

    Skipped rows contribute exactly zero, so pruning changes no value.
    """
    W = np.atleast_2d(W)

    def partial(sl):
        w = W[:, sl]
        live = np.flatnonzero(np.any(w != 0, axis=0))
        if live.size == 0:
            return None
        if live.size == w.shape[1]:
            return w @ X[sl]
        return w[:, live] @ X[sl][live]

    parts = [p for p in _map(partial, _chunks(X.shape[0], chunk_rows)) if p is not None]
    if not parts:
        return np.zeros((W.shape[0], X.shape[1]))
    return pairwise_sum(parts)
