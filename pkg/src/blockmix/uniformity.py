"""Available-color tracking and the local-uniformity burn-in experiment.

The experiment runs block dynamics from a greedy start and watches, for
each probe vertex v over the window [C0*N, (C+C0)*N], whether the count of
available colors ever drops to the threshold
1[updated] * (1-eps^2) * k * exp(-deg(v)/k).

|A(v)| only changes when v or a neighbor is recolored, so checks fire at
those events (plus window entry), which makes the sweep exact and cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Configuration, greedy_initial_retry
from .graph import Graph
from .partition import BlockPartition, Params
from .percolation import wilson_interval
from .blocksampler import sample_block_coloring


def available_colors(cfg: Configuration, g: Graph, v: int, k: int) -> set[int]:
    """[k] minus the colors on N(v); size is always >= k - deg(v)."""
    return set(range(k)) - {int(cfg.colors[x]) for x in g.neighbors(v)}


def uniformity_threshold(deg: int, k: int, epsilon: float) -> float:
    return (1.0 - epsilon**2) * k * math.exp(-deg / k)


@dataclass
class UniformityResult:
    violating_fraction: float
    wilson_lo: float
    wilson_hi: float
    n_probes: int
    violators: list[int]
    rows: list  # (vertex, deg, t, avail, updated, threshold, violated)
    window: tuple[int, int]


def uniformity_experiment(
    g: Graph,
    part: BlockPartition,
    k: int,
    p: Params,
    C0: float,
    C: float,
    probe_vertices,
    rng: np.random.Generator,
    init_seed: int = 0,
    keep_rows: bool = True,
) -> UniformityResult:
    """Fraction of probe vertices whose threshold event ever fires in the
    window. Probe vertices must be low-degree (deg <= dhat)."""
    probes = [int(v) for v in probe_vertices]
    for v in probes:
        if g.degree(v) > p.dhat:
            raise ValueError(f"probe vertex {v} has degree {g.degree(v)} > dhat")
    N = part.n_blocks
    t_lo = int(math.floor(C0 * N))
    t_hi = int(math.ceil((C + C0) * N))
    cfg = greedy_initial_retry(g, k, init_seed)
    cfg.block_last_update = np.full(N, -1, dtype=np.int64)

    probe_set = set(probes)
    watchers: dict[int, list[int]] = {}
    for v in probes:
        for x in g.neighbors(v):
            watchers.setdefault(int(x), []).append(v)
        watchers.setdefault(v, [])  # v's own update flips its indicator

    # neighbor color counts per probe vertex; avail = k - #colors with count>0
    counts = {v: np.zeros(k, dtype=np.int64) for v in probes}
    avail = {}
    for v in probes:
        for x in g.neighbors(v):
            counts[v][int(cfg.colors[x])] += 1
        avail[v] = k - int(np.count_nonzero(counts[v]))
    thresholds = {v: uniformity_threshold(g.degree(v), k, p.epsilon) for v in probes}
    updated = {v: False for v in probes}
    ulp_guard = 1e-9

    violated: dict[int, bool] = {v: False for v in probes}
    rows = []

    def check(v: int, t: int):
        if violated[v]:
            return
        thr = thresholds[v] if updated[v] else 0.0
        bad = avail[v] <= thr + ulp_guard * max(1.0, thr)
        if keep_rows and (bad or t == t_lo):
            rows.append((v, g.degree(v), t, avail[v], int(updated[v]), thr, int(bad)))
        if bad:
            violated[v] = True

    if t_lo == 0:
        for v in probes:
            check(v, 0)
    for t in range(1, t_hi + 1):
        bi = int(rng.integers(N))
        block = part.blocks[bi]
        old = {u: int(cfg.colors[u]) for u in block.vertices}
        newc = sample_block_coloring(g, block, cfg.colors, k, rng)
        touched = set()
        for u, c in newc.items():
            if c == old[u]:
                continue
            cfg.colors[u] = c
            for w in watchers.get(u, ()):
                cnt = counts[w]
                cnt[old[u]] -= 1
                if cnt[old[u]] == 0:
                    avail[w] += 1
                if cnt[c] == 0:
                    avail[w] -= 1
                cnt[c] += 1
                touched.add(w)
        cfg.block_last_update[bi] = t
        cfg.step_count = t
        for u in block.vertices:
            if u in probe_set and not updated[u]:
                updated[u] = True
                touched.add(u)
        if t == t_lo:
            for v in probes:
                check(v, t)
        elif t > t_lo:
            for v in touched:
                check(v, t)

    violators = sorted(v for v in probes if violated[v])
    frac = len(violators) / len(probes) if probes else 0.0
    lo, hi = wilson_interval(len(violators), len(probes))
    return UniformityResult(
        violating_fraction=frac,
        wilson_lo=lo,
        wilson_hi=hi,
        n_probes=len(probes),
        violators=violators,
        rows=rows,
        window=(t_lo, t_hi),
    )
