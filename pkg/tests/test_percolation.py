import math

import numpy as np
import pytest

from blockmix.graph import from_edges
from blockmix.partition import Params, block_from_vertices, build_partition
from blockmix.percolation import (
    beta_weights,
    domination_test,
    fit_log_survival,
    grow_cluster,
    percolation_prob,
    tail_experiment,
    wilson_interval,
)
from blockmix.rngutil import master_rng
from conftest import hub_graph


def star_block(leaves: int, extra_outside: int = 1):
    """Center 0 with `leaves` in-block leaves and one outside neighbor."""
    edges = [(0, i) for i in range(1, leaves + 1)]
    for j in range(extra_outside):
        edges.append((0, leaves + 1 + j))
    g = from_edges(leaves + 1 + extra_outside, edges)
    return g, block_from_vertices(g, range(leaves + 1))


def ternary_tree_block(target: int = 200):
    """Ternary tree block with an outside pendant per leaf and u* at the root."""
    edges = []
    nid = 1
    frontier = [0]
    while nid < target:
        nxt = []
        for u in frontier:
            for _ in range(3):
                if nid >= target:
                    break
                edges.append((u, nid))
                nxt.append(nid)
                nid += 1
        frontier = nxt
    block_n = nid
    children = {u: 0 for u in range(block_n)}
    for a, b in edges:
        children[a] += 1
    for u in range(block_n):
        if children[u] == 0:
            edges.append((u, nid))
            nid += 1
    u_star = nid
    edges.append((0, u_star))
    nid += 1
    g = from_edges(nid, edges)
    return g, block_from_vertices(g, range(block_n)), u_star


def test_percolation_prob_values():
    # deg_in = 10 = deg (no outside edges), eps = 0.2, delta = 0, k = 36
    g, b = star_block(10, extra_outside=0)
    p = Params(epsilon=0.2, d=20.0, k=36, n=g.n, delta=0.0)
    assert math.isclose(percolation_prob(0, b, p, "simple"), 1 / 12)
    assert math.isclose(percolation_prob(0, b, p, "slack"), 1 / 26)
    # leaf: deg_in = 1, low degree
    assert math.isclose(percolation_prob(1, b, p, "simple"), 1 / 1.2)


def test_percolation_prob_cycle_and_high_degree_are_one():
    tri = from_edges(4, [(0, 1), (1, 2), (0, 2), (0, 3)])
    b = block_from_vertices(tri, [0, 1, 2])
    p = Params(epsilon=0.2, d=20.0, k=36, n=4)
    for v in (0, 1, 2):
        assert percolation_prob(v, b, p, "simple") == 1.0
    g, bs = star_block(30)  # center degree 31 > dhat
    ph = Params(epsilon=0.2, d=20.0, k=50, n=g.n)
    assert percolation_prob(0, bs, ph, "simple") == 1.0


def test_percolation_prob_slack_needs_k_above_deg():
    g, b = star_block(10)
    p = Params(epsilon=0.2, d=20.0, k=11, n=g.n)
    with pytest.raises(ValueError):
        percolation_prob(0, b, p, "slack")


def test_grow_cluster_forced_extremes():
    g, b, u_star = ternary_tree_block(40)
    p = Params(epsilon=0.2, d=20.0, k=40, n=g.n)
    rng = master_rng(1)
    off = {v: 0.0 for v in b.vertices}
    ps = grow_cluster(g, b, u_star, p, "simple", rng, p_override=off)
    assert ps.cluster == set() and ps.z_stat == 0.0
    on = {v: 1.0 for v in b.vertices}
    ps = grow_cluster(g, b, u_star, p, "simple", rng, p_override=on)
    assert ps.cluster == set(b.vertices)


def test_grow_cluster_path_quarter():
    g = from_edges(4, [(0, 1), (1, 2), (2, 3)])
    b = block_from_vertices(g, [1, 2, 3])
    p = Params(epsilon=0.2, d=20.0, k=40, n=4)
    rng = master_rng(2)
    T = 60_000
    half = {1: 0.5, 2: 0.5, 3: 0.5}
    hits = sum(1 for _ in range(T) if len(grow_cluster(g, b, 0, p, "simple", rng, p_override=half).cluster) >= 2)
    se = math.sqrt(0.25 * 0.75 / T)
    assert abs(hits / T - 0.25) <= 4 * se


def test_beta_weights_examples():
    # child z of u* with p_z = 1/24 and eps = 0.2: beta(z) = min(1, 24/1.04) = 1
    g, b = star_block(23)  # deg_in(center) = 23 -> p = 1/(1.2*23) ~ 1/27.6
    p = Params(epsilon=0.2, d=40.0, k=60, n=g.n)
    bw = beta_weights(g, b, 24, p)  # the outside vertex
    assert bw.beta[0] == 1.0
    assert all(0 < x <= 1 for x in bw.beta.values())


def test_beta_boundary_bound_on_built_partition():
    g = hub_graph(10, 8, path_len=6)
    p = Params(epsilon=0.2, d=20.0, k=40, n=g.n, r=2)
    part = build_partition(g, p)
    for b in part.blocks:
        for u_star in b.outer_boundary:
            bw = beta_weights(g, b, u_star, p)
            for w in b.vertices:
                if w in part.boundary:
                    assert bw.beta[w] >= 0.5, (b.kind, w)


def test_tail_fixed_points():
    g, b, u_star = ternary_tree_block(60)
    p = Params(epsilon=0.2, d=20.0, k=40, n=g.n)
    rep = tail_experiment(g, b, u_star, p, "simple", 2000, master_rng(3))
    assert rep.survival[0][:2] == (0, 1.0)  # survival at level 0 is 1
    # Z <= |cluster| since beta <= 1, and |P| <= 2Z on beta >= 1/2 boundaries
    rng = master_rng(4)
    bw = beta_weights(g, b, u_star, p)
    for _ in range(300):
        ps = grow_cluster(g, b, u_star, p, "simple", rng, betas=bw)
        assert ps.z_stat <= len(ps.cluster) + 1e-9
        if all(bw.beta[w] >= 0.5 for w in ps.boundary_hits):
            assert len(ps.boundary_hits) <= 2 * ps.z_stat + 1e-9


def test_tail_no_boundary_hits_when_cluster_empty():
    # u* in the outer boundary forces its entry vertex into the inner
    # boundary, so a literally empty inner boundary cannot occur; the
    # level-1 survival is 0 exactly when the cluster never forms
    g = from_edges(3, [(0, 1), (1, 2)])
    b = block_from_vertices(g, [1, 2])
    assert b.inner_boundary == [1]
    p = Params(epsilon=0.2, d=20.0, k=40, n=3)
    rng = master_rng(5)
    off = {1: 0.0, 2: 0.0}
    for _ in range(200):
        ps = grow_cluster(g, b, 0, p, "simple", rng, p_override=off)
        assert len(ps.boundary_hits) == 0
    rep = tail_experiment(g, b, 0, p, "simple", 500, master_rng(5))
    assert rep.survival[0][1] == 1.0  # level 0 always survives


def test_cluster_monotone_in_p_with_common_randomness():
    g, b, u_star = ternary_tree_block(60)
    p = Params(epsilon=0.2, d=20.0, k=40, n=g.n)
    for seed in range(30):
        lo = grow_cluster(g, b, u_star, p, "simple", master_rng(seed), p_override={v: 0.3 for v in b.vertices})
        hi = grow_cluster(g, b, u_star, p, "simple", master_rng(seed), p_override={v: 0.6 for v in b.vertices})
        assert lo.cluster <= hi.cluster


def test_fit_log_survival_slope():
    # counts 2^(L-l-1) for l < L plus one atom at L give survival(l) = 2^-l
    # exactly, so the fitted slope is ln(1/2) up to float rounding
    L = 12
    values = []
    for ell in range(L):
        values.extend([ell] * (2 ** (L - ell - 1)))
    values.append(L)
    slope, intercept, stderr, pts = fit_log_survival(values)
    assert abs(slope - math.log(0.5)) < 1e-9
    assert stderr < 1e-9
    assert abs(intercept) < 1e-9


def test_wilson_interval_sane():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 100)[0] == 0.0


def test_domination_forced_p_one_and_no_disagreement():
    g = hub_graph(8, 6, path_len=6)
    p = Params(epsilon=0.2, d=20.0, k=40, n=g.n, r=2)
    part = build_partition(g, p)
    block = max(part.blocks, key=lambda b: b.size)
    u_star = block.outer_boundary[0]
    rep = domination_test(
        g, part, 40, block, u_star, 800, master_rng(6), p,
        p_override={v: 1.0 for v in block.vertices},
    )
    # percolation cluster is the whole block: survival 1 at level 1, maximal
    assert rep.dominated
    assert rep.perc_survival[0] == 1.0


def test_domination_real_partition_quick():
    g = hub_graph(10, 8, path_len=6)
    p = Params(epsilon=0.2, d=20.0, k=40, n=g.n, r=2)
    part = build_partition(g, p)
    block = max(part.blocks, key=lambda b: b.size)
    u_star = block.outer_boundary[0]
    rep = domination_test(g, part, 40, block, u_star, 10_000, master_rng(7), p)
    assert rep.dominated, list(zip(rep.levels, rep.real_survival, rep.perc_survival))
