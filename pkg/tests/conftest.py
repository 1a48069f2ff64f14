import numpy as np
import pytest

from blockmix.graph import from_edges
from blockmix.rngutil import master_rng


@pytest.fixture
def rng():
    return master_rng(12345)


def petersen():
    outer = [(i, (i + 1) % 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    spokes = [(i, 5 + i) for i in range(5)]
    return from_edges(10, outer + inner + spokes)


def heawood():
    cyc = [(i, (i + 1) % 14) for i in range(14)]
    chords = [(0, 5), (2, 7), (4, 9), (6, 11), (8, 13), (10, 1), (12, 3)]
    return from_edges(14, cyc + chords)


def hub_graph(n_pendants: int, n_paths: int, path_len: int = 6):
    """Star-of-paths: hub 0 with pendant leaves and longer paths hanging.

    With d=20, eps=0.2, r=2 the hub (degree > dhat) plus its distance-2
    neighborhood forms one tree block whose boundary is each path's third
    vertex.
    """
    edges = []
    nid = 1
    for _ in range(n_pendants):
        edges.append((0, nid))
        nid += 1
    for _ in range(n_paths):
        prev = 0
        for _ in range(path_len):
            edges.append((prev, nid))
            prev = nid
            nid += 1
    return from_edges(nid, edges)


def cycle_with_paths(cycle_len: int = 3, long_paths: int = 1, long_len: int = 8, short_len: int = 3):
    """A short cycle with paths hanging off its corners; used with a
    cycle_cap override so the cycle seeds a unicyclic block."""
    edges = [(i, (i + 1) % cycle_len) for i in range(cycle_len)]
    nid = cycle_len
    for corner in range(cycle_len):
        plen = long_len if corner < long_paths else short_len
        prev = corner
        for _ in range(plen):
            edges.append((prev, nid))
            prev = nid
            nid += 1
    return from_edges(nid, edges)


def brute_force_count_colorings(g, lists) -> int:
    """Oracle: exhaustive backtracking count of proper list colorings."""
    n = g.n
    order = list(range(n))
    count = 0
    assign = [-1] * n

    def rec(i):
        nonlocal count
        if i == n:
            count += 1
            return
        v = order[i]
        banned = {assign[int(x)] for x in g.neighbors(v) if assign[int(x)] >= 0}
        for c in lists[v]:
            if c not in banned:
                assign[v] = c
                rec(i + 1)
        assign[v] = -1

    rec(0)
    return count


def brute_force_cycles(g, max_len):
    """Oracle: enumerate simple cycles by DFS over all starting vertices,
    deduplicated by canonical rotation/reflection."""
    seen = set()
    n = g.n

    def canon(cyc):
        best = None
        m = len(cyc)
        for rot in range(m):
            for sign in (1, -1):
                cand = tuple(cyc[(rot + sign * i) % m] for i in range(m))
                if best is None or cand < best:
                    best = cand
        return best

    def dfs(start, path):
        u = path[-1]
        for x in g.neighbors(u):
            x = int(x)
            if x == start and len(path) >= 3:
                seen.add(canon(path))
            elif x not in path and len(path) < max_len:
                dfs(start, path + [x])

    for s in range(n):
        dfs(s, [s])
    return seen
