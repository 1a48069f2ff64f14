"""Independent Bernoulli disagreement percolation inside a block.

S_p includes each block vertex independently with its percolation
probability; the cluster C grown from u* through S_p dominates the real
coupled update's disagreements. beta weights certify that boundary hits
are controlled: beta(u*) = 1 and each child pays a factor
1/((1+eps^2) deg_in(parent) p_w), capped at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import Graph
from .partition import Block, BlockPartition, Params


def percolation_prob(v: int, block: Block, p: Params, variant: str = "simple") -> float:
    """Site probability p_v.

    simple: 1/((1+eps) deg_in(v)) for low-degree off-cycle v, else 1.
    slack:  (1+delta) min{1/((1+eps) deg_in(v)), 1/(k-deg(v))} likewise.
    Both clamp to <= 1; deg_in = 0 clamps to 1 (no interior to spread
    through). Slack with k <= deg(v) on a low-degree vertex is undefined.
    """
    if v not in block.deg_in:
        raise ValueError(f"vertex {v} not in block")
    deg = block.deg_in[v] + block.deg_out[v]
    on_cycle = bool(block.cycle) and v in set(block.cycle)
    if deg > p.dhat or on_cycle:
        return 1.0
    din = block.deg_in[v]
    base = 1.0 / ((1.0 + p.epsilon) * din) if din > 0 else math.inf
    if variant == "simple":
        return min(1.0, base)
    if variant == "slack":
        if p.k <= deg:
            raise ValueError(f"slack variant undefined: k={p.k} <= deg({v})={deg}")
        return min(1.0, (1.0 + p.delta_eff) * min(base, 1.0 / (p.k - deg)))
    raise ValueError(f"unknown variant {variant!r}")


@dataclass
class BetaWeights:
    beta: dict[int, float]
    parent: dict[int, int]  # w -> parent (u_star for the entry vertices)
    u_star: int


def _entry_vertices(g: Graph, block: Block, u_star: int) -> list[int]:
    entries = [int(x) for x in g.neighbors(u_star) if int(x) in block.deg_in]
    if not entries:
        raise ValueError("u_star has no neighbor inside the block")
    return sorted(entries)


def _spanning_order(g: Graph, block: Block, u_star: int):
    """BFS spanning tree of {u_star} + block rooted at u_star; unicyclic
    blocks drop the lexicographically smallest cycle edge (parent relation
    only; degrees stay those of the full block)."""
    drop = None
    if block.kind == "unicyclic":
        from .blocksampler import _smallest_cycle_edge

        drop = _smallest_cycle_edge(block)
    parent = {u_star: -1}
    order = [u_star]
    qi = 0
    while qi < len(order):
        u = order[qi]
        qi += 1
        for x in g.neighbors(u):
            x = int(x)
            if x not in block.deg_in or x in parent:
                continue
            if drop and ((u, x) == drop or (x, u) == drop):
                continue
            parent[x] = u
            order.append(x)
    if len(order) != len(block.vertices) + 1:
        raise ValueError("u_star does not reach the whole block")
    return order, parent


def beta_weights(g: Graph, block: Block, u_star: int, p: Params) -> BetaWeights:
    """beta(u*) = 1, then each child divides its parent's weight by
    (1+eps^2) * deg_in(parent) * p_child, capped at 1; deg_in(u*) is taken
    as 1 (its single in-block neighbor)."""
    order, parent = _spanning_order(g, block, u_star)
    beta = {u_star: 1.0}
    for w in order[1:]:
        par = parent[w]
        din_par = 1 if par == u_star else block.deg_in[par]
        pw = percolation_prob(w, block, p, "simple")
        val = beta[par] / ((1.0 + p.epsilon**2) * max(din_par, 1) * pw)
        beta[w] = min(1.0, val)
    return BetaWeights(beta=beta, parent=parent, u_star=u_star)


@dataclass
class PercolationSample:
    in_sp: set[int]
    cluster: set[int]
    boundary_hits: set[int]
    z_stat: float


def grow_cluster(
    g: Graph,
    block: Block,
    u_star: int,
    p: Params,
    variant: str,
    rng: np.random.Generator,
    p_override: Optional[dict[int, float]] = None,
    betas: Optional[BetaWeights] = None,
) -> PercolationSample:
    """Reveal S_p lazily in BFS order from u*'s block neighbors and grow
    the cluster of vertices connected to u* through S_p."""
    betas = betas or beta_weights(g, block, u_star, p)
    inner = set(block.inner_boundary)
    probs = p_override or {}
    # one uniform per block vertex, indexed by vertex: common random numbers
    # then couple runs monotonically in the p_v
    uniforms = dict(zip(block.vertices, rng.random(len(block.vertices))))
    in_sp: set[int] = set()
    cluster: set[int] = set()
    revealed: set[int] = set()
    frontier = _entry_vertices(g, block, u_star)
    while frontier:
        nxt = []
        for v in sorted(frontier):
            if v in revealed:
                continue
            revealed.add(v)
            pv = probs.get(v, percolation_prob(v, block, p, variant))
            if uniforms[v] < pv:
                in_sp.add(v)
                cluster.add(v)
                for x in g.neighbors(v):
                    x = int(x)
                    if x in block.deg_in and x not in revealed:
                        nxt.append(x)
        frontier = nxt
    z = sum(betas.beta[w] for w in cluster)
    return PercolationSample(
        in_sp=in_sp,
        cluster=cluster,
        boundary_hits=cluster & inner,
        z_stat=z,
    )


def fit_log_survival(values: list[int]):
    """OLS fit of ln(survival) against the threshold l, over l >= 1 with
    positive survival. Returns (slope, intercept, stderr, points).

    The plots component recomputes this fit from the CSV; keep the
    arithmetic plain so both sides agree to 1e-9.
    """
    n = len(values)
    if n == 0:
        return 0.0, 0.0, math.inf, []
    top = max(values)
    pts = []
    for ell in range(1, top + 1):
        surv = sum(1 for v in values if v >= ell) / n
        if surv > 0.0:
            pts.append((float(ell), math.log(surv)))
    if len(pts) < 2:
        return 0.0, (pts[0][1] if pts else 0.0), math.inf, pts
    xs = [a for a, _ in pts]
    ys = [b for _, b in pts]
    xbar = sum(xs) / len(xs)
    ybar = sum(ys) / len(ys)
    sxx = sum((x - xbar) ** 2 for x in xs)
    sxy = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    if len(pts) > 2:
        resid = sum((y - (intercept + slope * x)) ** 2 for x, y in zip(xs, ys))
        stderr = math.sqrt(resid / (len(pts) - 2) / sxx)
    else:
        stderr = math.inf
    return slope, intercept, stderr, pts


def wilson_interval(successes: int, trials: int, zq: float = 1.96) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1 + zq**2 / trials
    center = (phat + zq**2 / (2 * trials)) / denom
    half = zq * math.sqrt(phat * (1 - phat) / trials + zq**2 / (4 * trials**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class TailReport:
    trials: int
    survival: list[tuple[int, float, float, float]]  # (l, surv, wilson_lo, wilson_hi)
    slope: float
    intercept: float
    slope_stderr: float
    samples: list = field(default_factory=list)


def tail_experiment(
    g: Graph,
    block: Block,
    u_star: int,
    p: Params,
    variant: str,
    trials: int,
    rng: np.random.Generator,
    keep_samples: bool = False,
) -> TailReport:
    """Empirical tails of |boundary hits| and of Z over repeated clusters."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    betas = beta_weights(g, block, u_star, p)
    hits: list[int] = []
    rows = []
    for t in range(trials):
        ps = grow_cluster(g, block, u_star, p, variant, rng, betas=betas)
        hits.append(len(ps.boundary_hits))
        if keep_samples:
            rows.append((t, len(ps.cluster), len(ps.boundary_hits), ps.z_stat))
    slope, intercept, stderr, pts = fit_log_survival(hits)
    surv = []
    top = max(hits) if hits else 0
    for ell in range(0, top + 1):
        cnt = sum(1 for v in hits if v >= ell)
        lo, hi = wilson_interval(cnt, trials)
        surv.append((ell, cnt / trials, lo, hi))
    return TailReport(
        trials=trials,
        survival=surv,
        slope=slope,
        intercept=intercept,
        slope_stderr=stderr,
        samples=rows,
    )


@dataclass
class DominationReport:
    trials: int
    levels: list[int]
    real_survival: list[float]
    perc_survival: list[float]
    margins: list[float]  # perc + 3*sigma - real; >= 0 at every level means pass
    dominated: bool


def domination_test(
    g: Graph,
    part: BlockPartition,
    k: int,
    block: Block,
    u_star: int,
    trials: int,
    rng: np.random.Generator,
    params: Params,
    burn_steps: Optional[int] = None,
    refresh_steps: int = 1,
    p_override: Optional[dict[int, float]] = None,
) -> DominationReport:
    """Paired comparison of the real coupled update's inner-boundary
    disagreement count against the slack-percolation boundary-hit count.

    Real-side boundary conditions come from a long block-dynamics run that
    keeps stepping between trials (stationarity is preserved by
    invariance); the percolation side draws an independent cluster per
    trial. Domination passes when the real survival is below the
    percolation survival within 3 binomial sigmas at every level.
    """
    from .coupling import CoupledState, coupled_block_step
    from .dynamics import available_colors_at, block_step, greedy_initial_retry

    inner = set(block.inner_boundary)
    bi = next(i for i, b in enumerate(part.blocks) if b is block)
    X = greedy_initial_retry(g, k, int(rng.integers(2**63)))
    N = part.n_blocks
    for _ in range(burn_steps if burn_steps is not None else 10 * N):
        block_step(X, g, part, k, rng)
    betas = beta_weights(g, block, u_star, params)
    real_counts: list[int] = []
    perc_counts: list[int] = []
    dp_cache: dict = {}
    while len(real_counts) < trials:
        for _ in range(refresh_steps):
            block_step(X, g, part, k, rng)
        alts = [c for c in available_colors_at(X, g, u_star, k) if c != int(X.colors[u_star])]
        if not alts:
            continue
        Y = X.copy()
        Y.colors[u_star] = alts[int(rng.integers(len(alts)))]
        s = CoupledState.from_pair(X.copy(), Y, part)
        coupled_block_step(s, g, part, k, rng, forced_block=bi, dp_cache=dp_cache)
        real_counts.append(sum(1 for v in s.diff if v in inner))
        ps = grow_cluster(g, block, u_star, params, "slack", rng, p_override=p_override, betas=betas)
        perc_counts.append(len(ps.boundary_hits))
    top = max(max(real_counts, default=0), max(perc_counts, default=0))
    levels = list(range(1, top + 2))
    real_s, perc_s, margins = [], [], []
    n = len(real_counts)
    ok = True
    for ell in levels:
        ra = sum(1 for v in real_counts if v >= ell) / n
        pb = sum(1 for v in perc_counts if v >= ell) / n
        sig = math.sqrt(ra * (1 - ra) / n + pb * (1 - pb) / n)
        margin = pb + 3 * sig - ra
        real_s.append(ra)
        perc_s.append(pb)
        margins.append(margin)
        if margin < 0:
            ok = False
    return DominationReport(
        trials=n,
        levels=levels,
        real_survival=real_s,
        perc_survival=perc_s,
        margins=margins,
        dominated=ok,
    )
