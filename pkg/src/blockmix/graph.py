"""Immutable simple undirected graphs with CSR adjacency.

Covers G(n,d/n) generation (geometric edge skipping, O(m) expected),
BFS balls, short-cycle enumeration, girth, and the text file format
``n m`` / one ``u v`` line per edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rngutil import master_rng

MAX_ENUMERATED_CYCLES = 10**6


class CycleLimitError(RuntimeError):
    """Raised when short-cycle enumeration exceeds MAX_ENUMERATED_CYCLES."""


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..n-1.

    Neighbor lists are sorted ascending; `indptr`/`indices` is the usual
    CSR layout. Instances are immutable after construction and safe to
    share across threads/replicas.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    m: int = field(default=0)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        i = np.searchsorted(row, v)
        return i < len(row) and row[i] == v

    def edges(self):
        """Yield edges (u, v) with u < v in ascending order."""
        for u in range(self.n):
            for v in self.neighbors(u):
                if u < int(v):
                    yield u, int(v)


def from_edges(n: int, edge_list) -> Graph:
    """Build a Graph from an iterable of (u,v) pairs; rejects loops/dupes."""
    seen = set()
    us, vs = [], []
    for u, v in edge_list:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u},{v}) out of range for n={n}")
        key = (u, v) if u < v else (v, u)
        if key in seen:
            raise ValueError(f"duplicate edge {key}")
        seen.add(key)
        us.append(key[0])
        vs.append(key[1])
    m = len(us)
    src = np.concatenate([np.asarray(us, dtype=np.int64), np.asarray(vs, dtype=np.int64)]) if m else np.zeros(0, dtype=np.int64)
    dst = np.concatenate([np.asarray(vs, dtype=np.int64), np.asarray(us, dtype=np.int64)]) if m else np.zeros(0, dtype=np.int64)
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    return Graph(n=n, indptr=indptr, indices=dst.astype(np.int64), m=m)


def gen_gnp(n: int, d: float, seed: int) -> Graph:
    """Sample G(n, d/n): each unordered pair is an edge w.p. p = d/n.

    Geometric skipping over the C(n,2) pair space keeps this O(m) expected,
    so n up to 1e6 stays feasible. Deterministic for a fixed seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if d < 0 or d > n:
        # p = d/n must be a probability; d = n (p = 1) gives the complete graph.
        raise ValueError(f"need 0 <= d <= n, got d={d}, n={n}")
    rng = master_rng(seed)
    p = d / n
    if p >= 1.0:
        return from_edges(n, ((u, v) for u in range(n) for v in range(u + 1, n)))
    if p <= 0.0:
        return from_edges(n, [])
    edges = []
    log1p_ = math.log1p(-p)
    # Batagelj-Brandes: walk pair index space (v, w), w < v, with geometric gaps.
    v, w = 1, -1
    while v < n:
        r = rng.random()
        w = w + 1 + int(math.floor(math.log1p(-r) / log1p_))
        while w >= v and v < n:
            w -= v
            v += 1
        if v < n:
            edges.append((w, v))
    return from_edges(n, edges)


def ball(g: Graph, w: int, R: int) -> set[int]:
    """B(w,R) = vertices within graph distance R of w (w included)."""
    if not (0 <= w < g.n):
        raise ValueError(f"vertex {w} out of range")
    if R < 0:
        raise ValueError("R must be >= 0")
    seen = {w}
    frontier = [w]
    for _ in range(R):
        nxt = []
        for u in frontier:
            for x in g.neighbors(u):
                x = int(x)
                if x not in seen:
                    seen.add(x)
                    nxt.append(x)
        if not nxt:
            break
        frontier = nxt
    return seen


def ball_multi(g: Graph, sources, R: int) -> set[int]:
    """Vertices within distance R of any source vertex."""
    seen = set(int(s) for s in sources)
    frontier = list(seen)
    for _ in range(R):
        nxt = []
        for u in frontier:
            for x in g.neighbors(u):
                x = int(x)
                if x not in seen:
                    seen.add(x)
                    nxt.append(x)
        if not nxt:
            break
        frontier = nxt
    return seen


@dataclass
class CycleList:
    cycles: list[tuple[int, ...]]
    max_len: int


def _triangles(g: Graph) -> list[tuple[int, ...]]:
    adj_sets = [set(map(int, g.neighbors(u))) for u in range(g.n)]
    out = []
    for u in range(g.n):
        nu = g.neighbors(u)
        for v in nu[nu > u]:
            v = int(v)
            for w in adj_sets[u] & adj_sets[v]:
                if w > v:
                    out.append((u, v, w))
                    if len(out) > MAX_ENUMERATED_CYCLES:
                        raise CycleLimitError("more than 1e6 cycles")
    return out


def short_cycles(g: Graph, max_len: int) -> CycleList:
    """All simple cycles of length <= max_len, once up to rotation/reflection.

    Each cycle is reported from its minimum vertex s with second vertex
    smaller than the last, which canonicalizes rotation and reflection.
    Triangles get a set-intersection fast path; longer cycles use bounded
    DFS over vertices > s. Aborts if more than 1e6 cycles are found.
    """
    if max_len < 3:
        return CycleList(cycles=[], max_len=max_len)
    cycles = _triangles(g)
    if max_len >= 4:
        adj_sets = [set(map(int, g.neighbors(u))) for u in range(g.n)]
        for s in range(g.n):
            # paths s -> ... of length <= max_len-1 through vertices > s
            stack = [(s, [s])]
            while stack:
                u, path = stack.pop()
                for x in g.neighbors(u):
                    x = int(x)
                    if x <= s or x in path:
                        continue
                    newpath = path + [x]
                    if len(newpath) >= 4 and s in adj_sets[x] and newpath[1] < newpath[-1]:
                        cycles.append(tuple(newpath))
                        if len(cycles) > MAX_ENUMERATED_CYCLES:
                            raise CycleLimitError("more than 1e6 cycles")
                    if len(newpath) < max_len:
                        stack.append((x, newpath))
    return CycleList(cycles=cycles, max_len=max_len)


def max_degree(g: Graph) -> int:
    degs = g.degrees
    return int(degs.max()) if degs.size else 0


def girth(g: Graph) -> float:
    """Length of a shortest cycle, or math.inf for a forest.

    BFS from every vertex; fine for the small instances where it is used
    (spectral checks, contraction preconditions).
    """
    best = math.inf
    dist = np.empty(g.n, dtype=np.int64)
    parent = np.empty(g.n, dtype=np.int64)
    for s in range(g.n):
        dist.fill(-1)
        parent.fill(-1)
        dist[s] = 0
        frontier = [s]
        while frontier:
            nxt = []
            for u in frontier:
                du = dist[u]
                if 2 * du + 1 >= best:
                    continue
                for x in g.neighbors(u):
                    x = int(x)
                    if dist[x] < 0:
                        dist[x] = du + 1
                        parent[x] = u
                        nxt.append(x)
                    elif x != parent[u] and dist[x] >= du:
                        best = min(best, du + dist[x] + 1)
            frontier = nxt
    return best


def write_graph(g: Graph, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")


def read_graph(path: str) -> Graph:
    """Read the text format; rejects duplicates, self-loops, bad counts."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("first line must be 'n m'")
        n, m = int(header[0]), int(header[1])
        edges = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"bad edge line: {line!r}")
            edges.append((int(parts[0]), int(parts[1])))
    if len(edges) != m:
        raise ValueError(f"header says m={m} but found {len(edges)} edges")
    g = from_edges(n, edges)
    return g
