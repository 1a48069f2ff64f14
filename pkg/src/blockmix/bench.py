"""Per-update cost measurement for the block sampler.

The contract is wall time O(k^3 * B_max) per update; measured scaling must
be at most linear in |B| and at most cubic in k. Synthetic blocks are
random recursive trees (each vertex attaches to a uniformly random earlier
vertex), whose subtree-size profile keeps the big-int DP close to linear.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .blocksampler import sample_block_coloring
from .graph import from_edges
from .partition import block_from_vertices
from .rngutil import master_rng


def random_recursive_tree_block(size: int, rng) -> tuple:
    edges = [(int(rng.integers(v)), v) for v in range(1, size)]
    g = from_edges(size, edges)
    return g, block_from_vertices(g, range(size))


def _time_update(g, block, k, rng, repeats: int) -> float:
    boundary = np.zeros(g.n, dtype=np.int64)  # no outer boundary on these blocks
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        sample_block_coloring(g, block, boundary, k, rng)
        best = min(best, time.perf_counter() - t0)
    return best


def fit_loglog_exponent(xs, ys) -> float:
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    lx = lx - lx.mean()
    return float((lx * (ly - ly.mean())).sum() / (lx * lx).sum())


def cost_scaling(sizes, ks, seed: int = 0, repeats: int = 3, k_fixed: int = 16, size_fixed: int = 500) -> dict:
    rng = master_rng(seed)
    rows = []
    size_times = []
    for size in sizes:
        g, block = random_recursive_tree_block(int(size), rng)
        t = _time_update(g, block, k_fixed, rng, repeats)
        size_times.append(t)
        rows.append(("block_size", int(size), k_fixed, t))
    k_times = []
    g, block = random_recursive_tree_block(size_fixed, rng)
    for k in ks:
        t = _time_update(g, block, int(k), rng, repeats)
        k_times.append(t)
        rows.append(("k", size_fixed, int(k), t))
    return {
        "rows": rows,
        "size_exponent": fit_loglog_exponent(sizes, size_times),
        "k_exponent": fit_loglog_exponent(ks, k_times),
        "sizes": list(map(int, sizes)),
        "ks": list(map(int, ks)),
    }
