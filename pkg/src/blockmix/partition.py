"""Vertex/path weights, breakpoints, and the sparse block partition.

The weighting gives low-degree vertices (degree <= dhat = (1+eps/6)d) a
weight below 1 and high-degree vertices a weight d^15*deg, so a walk is
"heavy" exactly when it meets a high-degree vertex at any realistic
horizon. Breakpoints are vertices from which every walk of bounded length
stays at total weight <= 1; they delimit the blocks.

Blocks come in three kinds: singleton (a breakpoint), tree, and unicyclic
(tree plus one extra edge). Construction seeds blocks from short cycles,
then closes under influence paths (paths free of breakpoints), and leaves
remaining breakpoints as singletons.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import Graph, ball_multi, short_cycles

# Root of alpha^alpha = e, equivalently alpha = exp(1/alpha); the k/d
# threshold of the rapid-mixing regime.
ALPHA = 1.0
for _ in range(200):
    ALPHA = math.exp(1.0 / ALPHA)
del _


@dataclass
class Params:
    """Model and partition parameters.

    dhat is derived, never stored: dhat = (1+epsilon/6)*d exactly.
    `r` is the breakpoint horizon; the default ceil(log n/(log d)^4)
    (floor 2) keeps detection tractable and matches the construction's
    desk-scale use. `delta` is the percolation slack, default epsilon^3.
    `cycle_len_cap` overrides the short-cycle length cap used to seed
    blocks; None means ceil(4 ln n/(ln d)^5) with no artificial floor.
    """

    epsilon: float
    d: float
    k: int
    n: int
    lam: float = 0.0
    r: Optional[int] = None
    delta: Optional[float] = None
    cycle_len_cap: Optional[int] = None

    @property
    def dhat(self) -> float:
        return (1.0 + self.epsilon / 6.0) * self.d

    @property
    def delta_eff(self) -> float:
        return self.epsilon**3 if self.delta is None else self.delta

    @property
    def r_eff(self) -> int:
        if self.r is not None:
            return self.r
        if self.d <= 1.0 or self.n < 2:
            return 2
        return max(2, math.ceil(math.log(self.n) / math.log(self.d) ** 4))

    def cycle_cap(self) -> int:
        if self.cycle_len_cap is not None:
            return self.cycle_len_cap
        if self.d <= math.e:
            return 0
        return math.ceil(4.0 * math.log(self.n) / math.log(self.d) ** 5)

    def min_colors(self) -> int:
        """ceil((alpha+epsilon)*d), the regime's color-count floor."""
        return math.ceil((ALPHA + self.epsilon) * self.d)


def vertex_weight(v: int, g: Graph, p: Params) -> float:
    deg = g.degree(v)
    if deg <= p.dhat:
        return 1.0 / (1.0 + p.epsilon / 10.0)
    return p.d**15 * deg


def log_vertex_weight(v: int, g: Graph, p: Params) -> float:
    deg = g.degree(v)
    if deg <= p.dhat:
        return -math.log1p(p.epsilon / 10.0)
    return 15.0 * math.log(p.d) + math.log(deg)


def path_weight(path, g: Graph, p: Params) -> float:
    """log of the product of vertex weights along a path.

    A single vertex counts as the trivial path with weight W(v). Rejects
    inputs that are not simple paths in g.
    """
    path = [int(v) for v in path]
    if not path:
        raise ValueError("empty vertex sequence")
    if len(set(path)) != len(path):
        raise ValueError("path vertices must be distinct")
    for a, b in zip(path, path[1:]):
        if not g.has_edge(a, b):
            raise ValueError(f"({a},{b}) is not an edge")
    return sum(log_vertex_weight(v, g, p) for v in path)


def is_breakpoint(v: int, g: Graph, p: Params, r: Optional[int] = None) -> bool:
    """True iff every walk of length <= r from v keeps running weight <= 1.

    Walks relax the simple-path condition: r rounds of depth-indexed
    max-log-weight DP on the radius-r ball. Conservative, since the walk
    maximum dominates the path maximum, so a declared breakpoint is genuine.
    """
    r = p.r_eff if r is None else r
    lw0 = log_vertex_weight(v, g, p)
    if lw0 > 0.0:
        return False
    verts = sorted(ball_multi(g, [v], r))
    idx = {u: i for i, u in enumerate(verts)}
    lw = np.array([log_vertex_weight(u, g, p) for u in verts])
    NEG = -math.inf
    h = np.full(len(verts), NEG)
    h[idx[v]] = lw0
    for _ in range(r):
        nxt = np.full(len(verts), NEG)
        for i, u in enumerate(verts):
            if h[i] == NEG:
                continue
            for x in g.neighbors(u):
                x = int(x)
                j = idx.get(x)
                if j is None:
                    continue
                cand = h[i] + lw[j]
                if cand > nxt[j]:
                    nxt[j] = cand
        np.maximum(h, nxt, out=h)
        if h.max() > 0.0:
            return False
    return True


def breakpoints_all(g: Graph, p: Params, r: Optional[int] = None) -> np.ndarray:
    """Breakpoint status for every vertex via global walk DP.

    h_l(u) = max log-weight over walks of length l ending at u; by walk
    reversal this equals the max over walks starting at u, so v is a
    breakpoint iff max_{l<=r} h_l(v) <= 0. Each round is one CSR sweep.
    """
    r = p.r_eff if r is None else r
    lw = np.where(
        g.degrees <= p.dhat,
        -math.log1p(p.epsilon / 10.0),
        15.0 * math.log(p.d) + np.log(np.maximum(g.degrees, 1)),
    )
    h = lw.copy()
    best = lw.copy()
    indptr, indices = g.indptr, g.indices
    nonempty = np.diff(indptr) > 0
    for _ in range(r):
        gathered = h[indices]
        nxt = np.full(g.n, -math.inf)
        if len(indices):
            nxt[nonempty] = np.maximum.reduceat(gathered, indptr[:-1][nonempty])
        h = nxt + lw
        np.maximum(best, h, out=best)
    return best <= 0.0


@dataclass
class Block:
    vertices: list[int]
    kind: str  # "singleton" | "tree" | "unicyclic"
    root: int
    cycle: Optional[list[int]]
    inner_boundary: list[int]
    outer_boundary: list[int]
    deg_in: dict[int, int]
    deg_out: dict[int, int]
    _order: Optional[list[tuple[int, int]]] = field(default=None, repr=False)

    def __contains__(self, v: int) -> bool:
        return v in self.deg_in

    @property
    def size(self) -> int:
        return len(self.vertices)


class PartitionError(RuntimeError):
    """The graph does not admit the sparse block partition."""


def block_from_vertices(g: Graph, vertices) -> Block:
    """Assemble a Block for a vertex set, classifying its kind.

    Raises PartitionError if the induced subgraph is disconnected or has
    more than one extra edge (not representable as tree/unicyclic).
    """
    vset = set(int(v) for v in vertices)
    verts = sorted(vset)
    deg_in, deg_out = {}, {}
    inner, outer = [], set()
    edges_in = 0
    for v in verts:
        di = 0
        for x in g.neighbors(v):
            x = int(x)
            if x in vset:
                di += 1
            else:
                outer.add(x)
        deg_in[v] = di
        deg_out[v] = g.degree(v) - di
        if deg_out[v] > 0:
            inner.append(v)
        edges_in += di
    edges_in //= 2
    nv = len(verts)
    if nv == 1:
        return Block(verts, "singleton", verts[0], None, inner, sorted(outer), deg_in, deg_out)
    # connectivity of the induced subgraph
    seen = {verts[0]}
    stack = [verts[0]]
    while stack:
        u = stack.pop()
        for x in g.neighbors(u):
            x = int(x)
            if x in vset and x not in seen:
                seen.add(x)
                stack.append(x)
    if len(seen) != nv:
        raise PartitionError(f"block of size {nv} is disconnected")
    if edges_in == nv - 1:
        kind, cycle = "tree", None
    elif edges_in == nv:
        kind, cycle = "unicyclic", _find_cycle(g, vset)
    else:
        raise PartitionError(
            f"block of size {nv} has {edges_in} internal edges; "
            "a tree with at most one extra edge cannot represent it"
        )
    return Block(verts, kind, verts[0], cycle, inner, sorted(outer), deg_in, deg_out)


def _find_cycle(g: Graph, vset: set[int]) -> list[int]:
    """Unique cycle of a unicyclic induced subgraph, by leaf peeling."""
    deg = {v: sum(1 for x in g.neighbors(v) if int(x) in vset) for v in vset}
    queue = [v for v, dv in deg.items() if dv <= 1]
    alive = set(vset)
    while queue:
        v = queue.pop()
        if v not in alive:
            continue
        alive.discard(v)
        for x in g.neighbors(v):
            x = int(x)
            if x in alive:
                deg[x] -= 1
                if deg[x] == 1:
                    queue.append(x)
    # order the 2-core as a cycle
    start = min(alive)
    cyc = [start]
    prev = None
    cur = start
    while True:
        nxt = None
        for x in g.neighbors(cur):
            x = int(x)
            if x in alive and x != prev:
                nxt = x
                break
        if nxt is None or nxt == start:
            break
        cyc.append(nxt)
        prev, cur = cur, nxt
    return cyc


@dataclass
class BlockPartition:
    blocks: list[Block]
    owner: np.ndarray  # vertex -> block index
    boundary: set[int]  # union of inner boundaries == union of outer boundaries

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def block_of(self, v: int) -> Block:
        return self.blocks[int(self.owner[v])]


def _assemble(g: Graph, groups: list[list[int]]) -> BlockPartition:
    owner = np.full(g.n, -1, dtype=np.int64)
    blocks = []
    for verts in groups:
        b = block_from_vertices(g, verts)
        bi = len(blocks)
        blocks.append(b)
        for v in b.vertices:
            if owner[v] != -1:
                raise PartitionError(f"vertex {v} assigned to two blocks")
            owner[v] = bi
    if (owner < 0).any():
        missing = int(np.flatnonzero(owner < 0)[0])
        raise PartitionError(f"vertex {missing} not covered by any block")
    inner_union = set()
    outer_union = set()
    for b in blocks:
        inner_union.update(b.inner_boundary)
        outer_union.update(b.outer_boundary)
    if inner_union != outer_union:
        raise PartitionError("inner/outer boundary unions disagree")
    return BlockPartition(blocks=blocks, owner=owner, boundary=inner_union)


def singleton_partition(g: Graph) -> BlockPartition:
    return _assemble(g, [[v] for v in range(g.n)])


def one_block_partition(g: Graph) -> BlockPartition:
    return _assemble(g, [list(range(g.n))])


def partition_from_groups(g: Graph, groups) -> BlockPartition:
    return _assemble(g, [list(gr) for gr in groups])


def cycle_block_radius(cycle_len: int, Delta: int, p: Params) -> int:
    """Radius of the ball seeded around a short cycle (natural logs)."""
    Delta = max(Delta, 1)
    t1 = 2.0 * math.log(cycle_len * Delta)
    if p.d > 1.0:
        t2 = (math.log(math.log(p.d)) / math.log(p.d)) * (cycle_len + math.log(Delta)) if p.d > math.e else 0.0
    else:
        t2 = 0.0
    return max(1, math.ceil(max(t1, t2)))


def build_partition(g: Graph, p: Params) -> BlockPartition:
    """Construct the sparse block partition.

    (i) every cycle of length <= the short-cycle cap seeds a block holding
    the cycle, the radius-rC ball around it, and the influence-path closure
    of that ball; (ii) every remaining non-breakpoint joins the block of
    everything reachable from it along influence paths (its component in
    the subgraph induced on non-breakpoints); (iii) remaining breakpoints
    are singletons. Overlapping cycle-seeded blocks mean the graph does not
    admit the partition and raise PartitionError.
    """
    bp = breakpoints_all(g, p)
    non_bp = ~bp
    comp = np.full(g.n, -1, dtype=np.int64)
    ncomp = 0
    for s in range(g.n):
        if not non_bp[s] or comp[s] != -1:
            continue
        stack = [s]
        comp[s] = ncomp
        while stack:
            u = stack.pop()
            for x in g.neighbors(u):
                x = int(x)
                if non_bp[x] and comp[x] == -1:
                    comp[x] = ncomp
                    stack.append(x)
        ncomp += 1

    cap = p.cycle_cap()
    Delta = int(g.degrees.max()) if g.n else 0
    assigned = np.zeros(g.n, dtype=bool)
    groups: list[list[int]] = []
    claimed_comps: dict[int, int] = {}  # influence component -> seeding group

    cycles = short_cycles(g, cap).cycles if cap >= 3 else []
    for cyc in cycles:
        rc = cycle_block_radius(len(cyc), Delta, p)
        verts = ball_multi(g, cyc, rc)
        comps = {int(comp[u]) for u in verts if non_bp[u]}
        gi = len(groups)
        for c in comps:
            if c in claimed_comps and claimed_comps[c] != gi:
                raise PartitionError(
                    f"cycle-seeded blocks {claimed_comps[c]} and {gi} share an influence component"
                )
            claimed_comps[c] = gi
        if comps:
            verts.update(int(v) for v in np.flatnonzero(np.isin(comp, list(comps))))
        overlap = [v for v in verts if assigned[v]]
        if overlap:
            raise PartitionError(f"cycle-seeded blocks overlap at vertex {overlap[0]}")
        for v in verts:
            assigned[v] = True
        groups.append(sorted(verts))

    for c in range(ncomp):
        if c in claimed_comps:
            continue
        verts = [int(v) for v in np.flatnonzero(comp == c)]
        if any(assigned[v] for v in verts):
            # swallowed by a cycle ball without its component tag; merge there
            raise PartitionError("influence component partially claimed by a cycle block")
        for v in verts:
            assigned[v] = True
        groups.append(sorted(verts))

    for v in range(g.n):
        if not assigned[v]:
            groups.append([v])

    return _assemble(g, groups)


@dataclass
class ValidationReport:
    n_blocks: int
    max_block_size: int
    boundary_size: int
    checked_boundary: int
    cond1_violations: int
    cond2a_violations: int
    cond2b_violations: int
    cond2c_violations: int
    cond3_violations: int
    cond3_cycle_cap: int
    cond3_unchecked: bool
    growth_violations: int
    growth_checked: int
    witnesses: dict[str, list]

    def hard_ok(self) -> bool:
        """Conditions with zero tolerance: 1, 2b, 3."""
        return self.cond1_violations == 0 and self.cond2b_violations == 0 and self.cond3_violations == 0

    def to_json(self) -> str:
        return json.dumps(self.__dict__, default=list, indent=2, sort_keys=True)


def validate_partition(
    g: Graph,
    part: BlockPartition,
    p: Params,
    growth_sample: int = 2000,
    rng: Optional[np.random.Generator] = None,
) -> ValidationReport:
    """Check the sparse-block-partition conditions and report violations.

    Condition 3's d^2 cycle bound is clamped to the short-cycle search cap;
    longer cycles through boundary vertices are not searched and the report
    flags them unchecked. The breakpoint growth diagnostic (level sizes from
    a breakpoint grow at most like ((1+eps/3)d)^l) is checked on up to
    `growth_sample` boundary breakpoints.
    """
    witnesses: dict[str, list] = {"cond1": [], "cond2a": [], "cond2b": [], "cond2c": [], "cond3": []}
    c1 = c2a = c2b = c2c = c3 = 0
    checked_boundary = 0

    cond3_len = min(int(p.d**2) - 1, max(p.cycle_cap(), 3)) if p.d > 1 else 3
    cond3_unchecked = cond3_len < int(p.d**2) - 1
    on_short_cycle: set[int] = set()
    try:
        for cyc in short_cycles(g, cond3_len).cycles:
            on_short_cycle.update(cyc)
    except Exception:
        on_short_cycle = set()
        cond3_unchecked = True

    loglog_n = math.log(math.log(g.n)) if g.n > 3 else 0.0
    for bi, b in enumerate(part.blocks):
        if b.size == 1:
            continue
        # condition 1 (kind correctness) is enforced structurally by
        # block_from_vertices; re-derive the edge count to double-check
        edges_in = sum(b.deg_in[v] for v in b.vertices) // 2
        want = b.size - 1 if b.kind == "tree" else b.size
        if edges_in != want or (b.kind == "unicyclic" and not b.cycle):
            c1 += 1
            witnesses["cond1"].append((bi, b.kind, edges_in))
        diam = _block_diameter(g, b)
        horizon = max(diam, math.ceil(loglog_n), 2)
        need_r = horizon + 1  # condition 2a wants r strictly above the max
        for u in b.outer_boundary:
            checked_boundary += 1
            if not is_breakpoint(u, g, p, r=need_r):
                c2a += 1
                if len(witnesses["cond2a"]) < 32:
                    witnesses["cond2a"].append((bi, u))
            inside = sum(1 for x in g.neighbors(u) if int(part.owner[x]) == bi)
            if inside != 1:
                c2b += 1
                if len(witnesses["cond2b"]) < 32:
                    witnesses["cond2b"].append((bi, u, inside))
            if b.cycle:
                dist_to_cycle = _dist_to_set(g, u, set(b.cycle))
                Delta = int(g.degrees.max())
                bound = max(
                    2.0 * math.log(len(b.cycle) * max(Delta, 1)),
                    (math.log(math.log(p.d)) / math.log(p.d)) * (len(b.cycle) + math.log(max(Delta, 1)))
                    if p.d > math.e
                    else 0.0,
                )
                if dist_to_cycle < bound:
                    c2c += 1
                    if len(witnesses["cond2c"]) < 32:
                        witnesses["cond2c"].append((bi, u, dist_to_cycle))
            if u in on_short_cycle:
                c3 += 1
                if len(witnesses["cond3"]) < 32:
                    witnesses["cond3"].append((bi, u))

    growth_viol, growth_checked = _breakpoint_growth_check(g, part, p, growth_sample, rng)

    return ValidationReport(
        n_blocks=part.n_blocks,
        max_block_size=max(b.size for b in part.blocks) if part.blocks else 0,
        boundary_size=len(part.boundary),
        checked_boundary=checked_boundary,
        cond1_violations=c1,
        cond2a_violations=c2a,
        cond2b_violations=c2b,
        cond2c_violations=c2c,
        cond3_violations=c3,
        cond3_cycle_cap=cond3_len,
        cond3_unchecked=cond3_unchecked,
        growth_violations=growth_viol,
        growth_checked=growth_checked,
        witnesses=witnesses,
    )


def _block_diameter(g: Graph, b: Block) -> int:
    vset = set(b.vertices)
    best = 0
    for s in b.vertices:
        dist = {s: 0}
        frontier = [s]
        while frontier:
            nxt = []
            for u in frontier:
                for x in g.neighbors(u):
                    x = int(x)
                    if x in vset and x not in dist:
                        dist[x] = dist[u] + 1
                        nxt.append(x)
            frontier = nxt
        best = max(best, max(dist.values()))
    return best


def _dist_to_set(g: Graph, v: int, targets: set[int]) -> int:
    if v in targets:
        return 0
    dist = {v: 0}
    frontier = [v]
    while frontier:
        nxt = []
        for u in frontier:
            for x in g.neighbors(u):
                x = int(x)
                if x in targets:
                    return dist[u] + 1
                if x not in dist:
                    dist[x] = dist[u] + 1
                    nxt.append(x)
        frontier = nxt
    return g.n  # unreachable counts as far


def _breakpoint_growth_check(g, part, p, sample_cap, rng):
    """Level sizes from breakpoint boundary vertices vs ((1+eps/3)d)^l."""
    r = p.r_eff
    base = (1.0 + p.epsilon / 3.0) * p.d
    is_bp = breakpoints_all(g, p)
    bps = [v for v in sorted(part.boundary) if is_bp[v]]
    if sample_cap and len(bps) > sample_cap:
        rng = rng or np.random.default_rng(0)
        bps = list(rng.choice(np.array(bps), size=sample_cap, replace=False))
    viol = 0
    for v in bps:
        seen = {int(v)}
        frontier = [int(v)]
        for level in range(1, r + 1):
            nxt = []
            for u in frontier:
                for x in g.neighbors(u):
                    x = int(x)
                    if x not in seen:
                        seen.add(x)
                        nxt.append(x)
            if len(nxt) > base**level:
                viol += 1
                break
            frontier = nxt
    return viol, len(bps)


def path_density(g: Graph, part: BlockPartition, p: Params):
    """J values over paths from high-degree vertices / block cycles to the
    inner boundary: J(P) = 450 * sum over P of (ln deg(u) + deg(u)/k).

    Returns (max_J, histogram dict, count) over all such shortest paths.
    """
    js: list[float] = []
    for b in part.blocks:
        if b.size == 1:
            continue
        sources = [v for v in b.vertices if g.degree(v) > p.dhat]
        if b.cycle:
            sources.extend(b.cycle)
        if not sources or not b.inner_boundary:
            continue
        vset = set(b.vertices)
        for s in set(sources):
            # BFS tree within the block records one shortest path per target
            prev = {s: None}
            frontier = [s]
            while frontier:
                nxt = []
                for u in frontier:
                    for x in g.neighbors(u):
                        x = int(x)
                        if x in vset and x not in prev:
                            prev[x] = u
                            nxt.append(x)
                frontier = nxt
            for t in b.inner_boundary:
                if t not in prev:
                    continue
                path = []
                cur = t
                while cur is not None:
                    path.append(cur)
                    cur = prev[cur]
                js.append(path_density_value([g.degree(u) for u in path], p.k))
    hist: dict[str, int] = {}
    for j in js:
        key = f"{int(j // 500) * 500}"
        hist[key] = hist.get(key, 0) + 1
    return (max(js) if js else 0.0), hist, len(js)


def path_density_value(degrees, k: int) -> float:
    return 450.0 * sum(math.log(max(d, 1)) + d / k for d in degrees)


def partition_to_json(part: BlockPartition) -> str:
    blocks = []
    for i, b in enumerate(part.blocks):
        entry = {
            "id": i,
            "kind": b.kind,
            "vertices": list(b.vertices),
            "inner_boundary": list(b.inner_boundary),
            "outer_boundary": list(b.outer_boundary),
        }
        if b.cycle:
            entry["cycle"] = list(b.cycle)
        blocks.append(entry)
    return json.dumps({"blocks": blocks}, indent=1)


def partition_from_json(g: Graph, text: str) -> BlockPartition:
    data = json.loads(text)
    return partition_from_groups(g, [blk["vertices"] for blk in data["blocks"]])
