"""Coupled pairs of block-dynamics chains.

The coupled block update recolors the chosen block vertex by vertex,
prioritizing vertices next to a disagreement (BFS from the entry vertex,
ties by index, cycle vertices last). Each vertex's pair of colors is drawn
from the exact conditional marginals of the two chains under a maximal
coupling, so each chain viewed alone is the unmodified block dynamics and
Pr[disagree] at a vertex equals the TV distance of its two conditionals.

Distance between configurations follows the weighted scheme: internal
vertices weigh 1, boundary vertices weigh n^2 * deg_out; arithmetic is
exact (python ints).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .blocksampler import (
    InfeasibleBoundaryError,
    _children,
    _smallest_cycle_edge,
    _subtree_counts,
    _tree_order,
    lists_from_boundary,
    sample_block_coloring,
)
from .dynamics import Configuration, available_colors_at
from .graph import Graph, girth
from .partition import Block, BlockPartition
from .rngutil import randrange_big, weighted_index_big


@dataclass
class CoupledState:
    X: Configuration
    Y: Configuration
    diff: set[int]
    D_hist: set[int] = field(default_factory=set)
    t: int = 0

    @classmethod
    def from_pair(cls, X: Configuration, Y: Configuration, part: BlockPartition) -> "CoupledState":
        diff = {int(v) for v in np.flatnonzero(X.colors != Y.colors)}
        s = cls(X=X, Y=Y, diff=diff)
        s.D_hist = set(v for v in diff if v in part.boundary)
        return s

    def rederive_diff(self) -> set[int]:
        return {int(v) for v in np.flatnonzero(self.X.colors != self.Y.colors)}

    def coalesced(self) -> bool:
        return not self.diff


def distance_weight(v: int, part: BlockPartition, n: int) -> int:
    """1 for internal vertices, n^2 * deg_out for boundary vertices."""
    b = part.block_of(v)
    return n * n * b.deg_out[v] if v in part.boundary else 1


def dist(s: CoupledState, part: BlockPartition) -> int:
    """Weighted distance between the two configurations, exact integer."""
    n = int(s.X.colors.shape[0])
    return sum(distance_weight(z, part, n) for z in s.diff)


def max_couple(p, q, rng: np.random.Generator) -> tuple[int, int]:
    """Draw (c_X, c_Y) with exact marginals p and q and
    Pr[c_X != c_Y] = TV(p, q). Accepts Fractions or exact int weights."""
    p = [Fraction(x) for x in p]
    q = [Fraction(x) for x in q]
    if len(p) != len(q):
        raise ValueError("distributions must share support size")
    dp = math.lcm(*(x.denominator for x in p))
    dq = math.lcm(*(x.denominator for x in q))
    pw = [int(x * dp) for x in p]
    qw = [int(x * dq) for x in q]
    if sum(pw) != dp or sum(qw) != dq:
        raise ValueError("distributions must be normalized")
    return _max_couple_weights(pw, dp, qw, dq, rng)


def _max_couple_weights(pw, ptot, qw, qtot, rng) -> tuple[int, int]:
    """Maximal coupling for integer weight vectors pw/ptot and qw/qtot."""
    # common denominator D = ptot*qtot; overlap mass M = sum min
    mins = [min(a * qtot, b * ptot) for a, b in zip(pw, qw)]
    M = sum(mins)
    D = ptot * qtot
    u = randrange_big(rng, D)
    if u < M:
        c = _pick_by_cum(mins, u)
        return c, c
    cx = weighted_index_big(rng, [a * qtot - m for a, m in zip(pw, mins)])
    cy = weighted_index_big(rng, [b * ptot - m for b, m in zip(qw, mins)])
    return cx, cy


def _pick_by_cum(weights, u):
    acc = 0
    for i, w in enumerate(weights):
        acc += w
        if u < acc:
            return i
    raise AssertionError("unreachable")


def _lists_pair(g, block, cfgX, cfgY, k):
    LX = lists_from_boundary(g, block, cfgX.colors, k)
    LY = lists_from_boundary(g, block, cfgY.colors, k)
    return LX, LY


def _couple_singleton(g, block, s, k, rng):
    v = block.root
    ax = available_colors_at(s.X, g, v, k)
    ay = available_colors_at(s.Y, g, v, k)
    if ax == ay:
        c = ax[randrange_big(rng, len(ax))]
        return {v: c}, {v: c}
    pw = [1 if c in ax else 0 for c in range(k)]
    qw = [1 if c in ay else 0 for c in range(k)]
    cx, cy = _max_couple_weights(pw, len(ax), qw, len(ay), rng)
    return {v: cx}, {v: cy}


def _order_from(g, block, root):
    order = [(root, -1)]
    seen = {root}
    qi = 0
    while qi < len(order):
        u, _ = order[qi]
        qi += 1
        for x in g.neighbors(u):
            x = int(x)
            if x in block.deg_in and x not in seen:
                seen.add(x)
                order.append((x, u))
    return order


def _couple_tree_single_source(g, block, s, k, rng, z, dp_cache=None):
    """Fast path: tree block, all boundary disagreement reaches only z.

    Subtree tables below z are identical in both chains (only z's list
    depends on the disagreeing boundary vertex), so one DP serves both.
    The tables depend only on the boundary colors away from the
    disagreement, which makes them cacheable across trials.
    """
    order = _order_from(g, block, z)
    children = _children(order)
    LX, LY = _lists_pair(g, block, s.X, s.Y, k)
    counts = None
    if dp_cache is not None:
        # tables depend on the root z and agreeing boundary colors, never on u*'s
        key = (
            z,
            tuple(
                -1 if int(s.X.colors[v]) != int(s.Y.colors[v]) else int(s.X.colors[v])
                for v in block.outer_boundary
            ),
        )
        counts = dp_cache.get(key)
    if counts is None:
        shared = dict(LX)
        shared[z] = set(range(k))
        counts = _subtree_counts(shared, k, order, children)
        if dp_cache is not None:
            if len(dp_cache) > 4096:
                dp_cache.clear()
            dp_cache[key] = counts
    rootX = [counts[z][c] if c in LX[z] else 0 for c in range(k)]
    rootY = [counts[z][c] if c in LY[z] else 0 for c in range(k)]
    totX, totY = sum(rootX), sum(rootY)
    if totX == 0 or totY == 0:
        raise InfeasibleBoundaryError("boundary admits no proper coloring of the block")
    outX, outY = {}, {}
    cx, cy = _max_couple_weights(rootX, totX, rootY, totY, rng)
    outX[z], outY[z] = cx, cy
    for u, parent in order[1:]:
        cu = counts[u]
        pcx, pcy = outX[parent], outY[parent]
        if pcx == pcy:
            w = [cu[c] if c != pcx else 0 for c in range(k)]
            c = weighted_index_big(rng, w)
            outX[u] = outY[u] = c
        else:
            pw = [cu[c] if c != pcx else 0 for c in range(k)]
            qw = [cu[c] if c != pcy else 0 for c in range(k)]
            cx, cy = _max_couple_weights(pw, sum(pw), qw, sum(qw), rng)
            outX[u], outY[u] = cx, cy
    return outX, outY


def _component_marginal(g, block, lists, colored, v, k):
    """Exact marginal count-vector of v over its uncolored component.

    colored: vertex -> color for already-decided block vertices; their
    colors restrict their uncolored neighbors' lists. The component is a
    tree or contains the block's single cycle (then the smallest cycle
    edge is pinned over <= k^2 cases and the vectors summed).
    """
    vset = block.deg_in
    comp = [v]
    seen = {v}
    qi = 0
    while qi < len(comp):
        u = comp[qi]
        qi += 1
        for x in g.neighbors(u):
            x = int(x)
            if x in vset and x not in colored and x not in seen:
                seen.add(x)
                comp.append(x)
    eff = {}
    for u in comp:
        L = set(lists[u])
        for x in g.neighbors(u):
            x = int(x)
            if x in colored:
                L.discard(colored[x])
        eff[u] = L
    edges = sum(1 for u in comp for x in g.neighbors(u) if int(x) in seen) // 2
    sub = _CompBlock(comp, v)
    order = _comp_order(g, sub, seen, None)
    if edges == len(comp) - 1:
        counts = _subtree_counts(eff, k, order, _children(order))
        return counts[v]
    if edges != len(comp):
        raise InfeasibleBoundaryError("uncolored component is not tree or unicyclic")
    cyc_edges = _component_cycle_edges(g, seen)
    a, b = min(cyc_edges)
    order = _comp_order(g, sub, seen, (a, b))
    children = _children(order)
    total = [0] * k
    for ca in eff[a]:
        for cb in eff[b]:
            if ca == cb:
                continue
            pinned = dict(eff)
            pinned[a] = {ca}
            pinned[b] = {cb}
            counts = _subtree_counts(pinned, k, order, children)
            cv = counts[v]
            for c in range(k):
                total[c] += cv[c]
    return total


@dataclass
class _CompBlock:
    vertices: list
    root: int


def _comp_order(g, sub, members, drop_edge):
    order = [(sub.root, -1)]
    seen = {sub.root}
    qi = 0
    while qi < len(order):
        u, _ = order[qi]
        qi += 1
        for x in g.neighbors(u):
            x = int(x)
            if x not in members or x in seen:
                continue
            if drop_edge and ((u, x) == drop_edge or (x, u) == drop_edge):
                continue
            seen.add(x)
            order.append((x, u))
    return order


def _component_cycle_edges(g, members):
    deg = {u: sum(1 for x in g.neighbors(u) if int(x) in members) for u in members}
    alive = set(members)
    queue = [u for u in members if deg[u] <= 1]
    while queue:
        u = queue.pop()
        if u not in alive:
            continue
        alive.discard(u)
        for x in g.neighbors(u):
            x = int(x)
            if x in alive:
                deg[x] -= 1
                if deg[x] == 1:
                    queue.append(x)
    return [
        (min(u, int(x)), max(u, int(x)))
        for u in alive
        for x in g.neighbors(u)
        if int(x) in alive and u < int(x)
    ]


def _couple_block_general(g, block, s, k, rng, boundary_dis):
    """Sequential maximal coupling for arbitrary disagreement patterns.

    Priority queue: uncolored vertices adjacent to a disagreement, FIFO in
    discovery order with index tie-breaks; cycle vertices deferred until no
    off-cycle candidate remains. Vertices never adjacent to a disagreement
    are drawn with the identity coupling, whole components at a time.
    """
    LX, LY = _lists_pair(g, block, s.X, s.Y, k)
    vset = block.deg_in
    cyc = set(block.cycle or [])
    coloredX: dict[int, int] = {}
    coloredY: dict[int, int] = {}
    disagreeing = set(boundary_dis)

    def frontier():
        cands = set()
        for w in disagreeing:
            for x in g.neighbors(w):
                x = int(x)
                if x in vset and x not in coloredX:
                    cands.add(x)
        if not cands:
            return None
        off = sorted(c for c in cands if c not in cyc)
        return off[0] if off else sorted(cands)[0]

    while True:
        v = frontier()
        if v is None:
            break
        margX = _component_marginal(g, block, LX, coloredX, v, k)
        margY = _component_marginal(g, block, LY, coloredY, v, k)
        cx, cy = _max_couple_weights(margX, sum(margX), margY, sum(margY), rng)
        coloredX[v], coloredY[v] = cx, cy
        if cx != cy:
            disagreeing.add(v)

    # identity region: no disagreement on any remaining component boundary
    remaining = [u for u in block.vertices if u not in coloredX]
    while remaining:
        v = remaining[0]
        comp_counts = _component_marginal(g, block, LX, coloredX, v, k)
        tot = sum(comp_counts)
        if tot == 0:
            raise InfeasibleBoundaryError("boundary admits no proper coloring of the block")
        c = weighted_index_big(rng, comp_counts)
        coloredX[v] = coloredY[v] = c
        remaining = [u for u in block.vertices if u not in coloredX]
    return coloredX, coloredY


def coupled_block_step(
    s: CoupledState,
    g: Graph,
    part: BlockPartition,
    k: int,
    rng: np.random.Generator,
    forced_block: Optional[int] = None,
    dp_cache: Optional[dict] = None,
) -> CoupledState:
    """One step of the coupled block dynamics (same block in both chains)."""
    bi = int(rng.integers(part.n_blocks)) if forced_block is None else forced_block
    block = part.blocks[bi]
    boundary_dis = [u for u in block.outer_boundary if u in s.diff]

    if not boundary_dis:
        newc = sample_block_coloring(g, block, s.X.colors, k, rng)
        for u, c in newc.items():
            s.X.colors[u] = c
            s.Y.colors[u] = c
    elif block.kind == "singleton":
        outX, outY = _couple_singleton(g, block, s, k, rng)
        _apply(s, outX, outY)
    else:
        entries = {
            int(x)
            for u in boundary_dis
            for x in g.neighbors(u)
            if int(x) in block.deg_in
        }
        if block.kind == "tree" and len(boundary_dis) == 1 and len(entries) == 1:
            outX, outY = _couple_tree_single_source(
                g, block, s, k, rng, next(iter(entries)), dp_cache=dp_cache
            )
        else:
            outX, outY = _couple_block_general(g, block, s, k, rng, boundary_dis)
        _apply(s, outX, outY)

    for u in block.vertices:
        if s.X.colors[u] == s.Y.colors[u]:
            s.diff.discard(u)
        else:
            s.diff.add(u)
    s.t += 1
    s.X.step_count += 1
    s.Y.step_count += 1
    s.D_hist.update(u for u in s.diff if u in part.boundary)
    return s


def _apply(s, outX, outY):
    for u, c in outX.items():
        s.X.colors[u] = c
    for u, c in outY.items():
        s.Y.colors[u] = c


def run_coupled(
    s: CoupledState,
    g: Graph,
    part: BlockPartition,
    k: int,
    rng: np.random.Generator,
    T: int,
    stop_on_coalesce: bool = True,
    trace: Optional[list] = None,
    recheck: int = 4096,
) -> CoupledState:
    """Run T coupled steps; optionally record (t, dist, |diff|, |D_t|, |D_hist|)."""
    for _ in range(T):
        if stop_on_coalesce and s.coalesced():
            break
        coupled_block_step(s, g, part, k, rng)
        if trace is not None:
            d_t = sum(1 for u in s.diff if u in part.boundary)
            trace.append((s.t, dist(s, part), len(s.diff), d_t, len(s.D_hist)))
        if recheck and s.t % recheck == 0:
            fresh = s.rederive_diff()
            if fresh != s.diff:
                raise AssertionError("incremental diff drifted from recomputed diff")
    return s


class PreconditionError(RuntimeError):
    pass


def check_contraction_preconditions(g: Graph, part: BlockPartition, k: int) -> None:
    from .partition import _block_diameter

    Delta = int(g.degrees.max()) if g.n else 0
    if k <= 2 * Delta:
        raise PreconditionError(f"need k > 2*Delta, got k={k}, Delta={Delta}")
    gi = girth(g)
    bound = gi / 2 - 3
    for b in part.blocks:
        if b.size > 1 and _block_diameter(g, b) > bound:
            raise PreconditionError(
                f"block diameter {_block_diameter(g, b)} exceeds girth/2-3 = {bound}"
            )
        if b.size == 1 and 0 > bound:
            raise PreconditionError(f"girth {gi} too small even for singleton blocks")


def one_step_ratio(
    s: CoupledState, g: Graph, part: BlockPartition, k: int, rng: np.random.Generator
) -> float:
    d0 = dist(s, part)
    if d0 == 0:
        raise PreconditionError("pair must have dist > 0")
    coupled_block_step(s, g, part, k, rng)
    return dist(s, part) / d0


def sample_adjacent_pair(
    X: Configuration, g: Graph, part: BlockPartition, k: int, rng: np.random.Generator
) -> Optional[tuple[CoupledState, int]]:
    """Y = X recolored at a uniform vertex to a uniform different available
    color; None if the picked vertex has no alternative."""
    u = int(rng.integers(g.n))
    avail = [c for c in available_colors_at(X, g, u, k) if c != int(X.colors[u])]
    if not avail:
        return None
    Y = X.copy()
    Y.colors[u] = avail[int(rng.integers(len(avail)))]
    s = CoupledState.from_pair(X.copy(), Y, part)
    return s, u


def contraction_experiment(
    g: Graph,
    part: BlockPartition,
    k: int,
    pairs: int,
    rng: np.random.Generator,
    burn_steps: Optional[int] = None,
    refresh_steps: int = 2,
) -> dict:
    """Per-step expected distance change over single-disagreement pairs.

    Pairs are (X, Y) with X from a long block-dynamics run (kept running
    between trials, so draws stay stationary) and Y differing at one
    uniformly chosen vertex. Returns mean ratio, SE, and trial count.
    """
    check_contraction_preconditions(g, part, k)
    from .dynamics import block_step, greedy_initial_retry

    X = greedy_initial_retry(g, k, int(rng.integers(2**63)))
    N = part.n_blocks
    for _ in range(burn_steps if burn_steps is not None else 10 * N):
        block_step(X, g, part, k, rng)
    ratios = []
    while len(ratios) < pairs:
        for _ in range(refresh_steps):
            block_step(X, g, part, k, rng)
        made = sample_adjacent_pair(X, g, part, k, rng)
        if made is None:
            continue
        s, _ = made
        ratios.append(one_step_ratio(s, g, part, k, rng))
    arr = np.asarray(ratios)
    return {
        "mean_ratio": float(arr.mean()),
        "se": float(arr.std(ddof=1) / math.sqrt(len(arr))),
        "pairs": len(arr),
    }


def propagation_probe(
    g: Graph,
    part: BlockPartition,
    k: int,
    block: Block,
    u_star: int,
    trials: int,
    rng: np.random.Generator,
    burn_steps: Optional[int] = None,
    refresh_steps: int = 2,
) -> dict:
    """Monte Carlo frequency, per block vertex, of the disagreement at
    u_star propagating into the block in one coupled update, starting from
    stationary boundary conditions (long block-dynamics run)."""
    if u_star not in set(block.outer_boundary):
        raise ValueError("u_star must lie on the block's outer boundary")
    from .dynamics import block_step, greedy_initial_retry

    bi = next(i for i, b in enumerate(part.blocks) if b is block)
    X = greedy_initial_retry(g, k, int(rng.integers(2**63)))
    N = part.n_blocks
    for _ in range(burn_steps if burn_steps is not None else 10 * N):
        block_step(X, g, part, k, rng)
    hits = {v: 0 for v in block.vertices}
    done = 0
    while done < trials:
        for _ in range(refresh_steps):
            block_step(X, g, part, k, rng)
        alts = [c for c in available_colors_at(X, g, u_star, k) if c != int(X.colors[u_star])]
        if not alts:
            continue
        Y = X.copy()
        Y.colors[u_star] = alts[int(rng.integers(len(alts)))]
        s = CoupledState.from_pair(X.copy(), Y, part)
        coupled_block_step(s, g, part, k, rng, forced_block=bi)
        for v in block.vertices:
            if v in s.diff:
                hits[v] += 1
        done += 1
    freq = {v: hits[v] / trials for v in block.vertices}
    se = {v: math.sqrt(max(freq[v] * (1 - freq[v]), 1e-12) / trials) for v in block.vertices}
    return {"freq": freq, "se": se, "trials": trials}


def _coupling_time_one(args) -> dict:
    g, part, k, T_max, seed, rep, burn_steps = args
    from .dynamics import block_step, greedy_initial_retry
    from .rngutil import replica_rng

    N = part.n_blocks
    rng = replica_rng(seed, rep)
    X = greedy_initial_retry(g, k, int(rng.integers(2**63)))
    for _ in range(burn_steps if burn_steps is not None else 2 * N):
        block_step(X, g, part, k, rng)
    made = None
    while made is None:
        made = sample_adjacent_pair(X, g, part, k, rng)
        if made is None:
            block_step(X, g, part, k, rng)
    s, u = made
    run_coupled(s, g, part, k, rng, T_max, stop_on_coalesce=True)
    return {"replica": rep, "vertex": u, "steps": s.t, "coalesced": s.coalesced()}


def coupling_time(
    g: Graph,
    part: BlockPartition,
    k: int,
    T_max: int,
    replicas: int,
    seed: int,
    burn_steps: Optional[int] = None,
    threads: int = 1,
) -> list[dict]:
    """Coalescence step counts from single-disagreement pairs, censored at
    T_max. Replicas use independently derived streams, so results do not
    depend on the degree of parallelism."""
    jobs = [(g, part, k, T_max, seed, rep, burn_steps) for rep in range(replicas)]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            return sorted(pool.map(_coupling_time_one, jobs), key=lambda r: r["replica"])
    return [_coupling_time_one(job) for job in jobs]
