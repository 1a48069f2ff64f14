import math
from collections import Counter
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from scipy import stats

from blockmix.blocksampler import (
    InfeasibleBoundaryError,
    count_list_colorings,
    count_unicyclic,
    hardcore_partition_function,
    lists_from_boundary,
    marginal,
    marginal_vector,
    sample_block_coloring,
    sample_block_hardcore,
)
from blockmix.graph import from_edges
from blockmix.partition import block_from_vertices
from blockmix.rngutil import master_rng
from conftest import brute_force_count_colorings


def random_tree_edges(n, rng):
    return [(int(rng.integers(v)), v) for v in range(1, n)]


def random_unicyclic_edges(n, rng):
    edges = random_tree_edges(n, rng)
    present = set(map(frozenset, edges))
    while True:
        u, v = rng.integers(n), rng.integers(n)
        if u != v and frozenset((int(u), int(v))) not in present:
            edges.append((int(u), int(v)))
            return edges


def test_count_path3_full_lists():
    g = from_edges(3, [(0, 1), (1, 2)])
    b = block_from_vertices(g, [0, 1, 2])
    assert count_list_colorings(g, b, {v: set(range(3)) for v in range(3)}) == 12


def test_count_single_vertex():
    g = from_edges(1, [])
    b = block_from_vertices(g, [0])
    assert count_list_colorings(g, b, {0: {1, 2}}) == 2


def test_count_rejects_unicyclic():
    tri = from_edges(3, [(0, 1), (1, 2), (0, 2)])
    b = block_from_vertices(tri, [0, 1, 2])
    with pytest.raises(ValueError):
        count_list_colorings(tri, b, {v: {0, 1, 2} for v in range(3)})


def test_count_unicyclic_examples():
    tri = from_edges(3, [(0, 1), (1, 2), (0, 2)])
    bt = block_from_vertices(tri, [0, 1, 2])
    assert count_unicyclic(tri, bt, {v: {0, 1, 2} for v in range(3)}) == 6
    c4 = from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    bc = block_from_vertices(c4, [0, 1, 2, 3])
    # chromatic polynomial of C4 at k=3: (k-1)^4 + (k-1) = 18
    assert count_unicyclic(c4, bc, {v: {0, 1, 2} for v in range(4)}) == 18


def test_counts_match_brute_force_on_random_instances():
    rng = master_rng(77)
    for trial in range(120):
        n = int(rng.integers(2, 8))
        k = int(rng.integers(2, 5))
        unicyclic = bool(rng.random() < 0.5) and n >= 3
        edges = random_unicyclic_edges(n, rng) if unicyclic else random_tree_edges(n, rng)
        g = from_edges(n, edges)
        lists = {v: {c for c in range(k) if rng.random() < 0.8} for v in range(n)}
        b = block_from_vertices(g, range(n))
        oracle = brute_force_count_colorings(g, lists)
        if b.kind == "unicyclic":
            got = count_unicyclic(g, b, lists)
        else:
            got = count_list_colorings(g, b, lists)
        assert got == oracle, (trial, edges, lists)


def test_count_consistency_root_pinning():
    rng = master_rng(5)
    g = from_edges(6, random_tree_edges(6, rng))
    b = block_from_vertices(g, range(6))
    k = 4
    lists = {v: set(range(k)) for v in range(6)}
    total = count_list_colorings(g, b, lists)
    parts = []
    for c in range(k):
        pinned = dict(lists)
        pinned[b.root] = {c}
        parts.append(count_list_colorings(g, b, pinned))
    assert total == sum(parts)


def test_sample_singleton_uniform_over_two():
    g = from_edges(3, [(0, 1), (0, 2)])
    b = block_from_vertices(g, [0])
    boundary = np.array([0, 1, 2])  # neighbors use colors 1,2 -> {0,3} left at k=4
    rng = master_rng(3)
    cnt = Counter(sample_block_coloring(g, b, boundary, 4, rng)[0] for _ in range(4000))
    assert set(cnt) == {0, 3}
    assert stats.chisquare(list(cnt.values())).pvalue > 0.001


def test_sample_infeasible_boundary_raises():
    g = from_edges(3, [(0, 1), (0, 2)])
    b = block_from_vertices(g, [0])
    with pytest.raises(InfeasibleBoundaryError):
        sample_block_coloring(g, b, np.array([0, 0, 1]), 2, master_rng(0))


def test_sampler_uniform_star_block_chi2():
    # center + 3 leaves, no outer boundary, k=3: 24 proper colorings
    star = from_edges(4, [(0, 1), (0, 2), (0, 3)])
    b = block_from_vertices(star, range(4))
    rng = master_rng(9)
    draws = 100_000
    cnt = Counter()
    boundary = np.zeros(4, dtype=np.int64)
    for _ in range(draws):
        s = sample_block_coloring(star, b, boundary, 3, rng)
        assert s[0] not in (s[1], s[2], s[3])
        cnt[tuple(s[v] for v in range(4))] += 1
    assert len(cnt) == 24
    assert stats.chisquare(list(cnt.values())).pvalue > 0.001


def test_sampler_uniform_unicyclic_chi2():
    g = from_edges(5, [(0, 1), (1, 2), (2, 0), (2, 3), (0, 4)])
    b = block_from_vertices(g, range(5))
    assert b.kind == "unicyclic"
    lists = {v: set(range(3)) for v in range(5)}
    total = count_unicyclic(g, b, lists)
    rng = master_rng(21)
    cnt = Counter()
    boundary = np.zeros(5, dtype=np.int64)
    for _ in range(30_000):
        s = sample_block_coloring(g, b, boundary, 3, rng)
        cnt[tuple(s[v] for v in range(5))] += 1
    assert len(cnt) == total
    assert stats.chisquare(list(cnt.values())).pvalue > 0.001


def test_marginal_examples():
    g = from_edges(3, [(0, 1), (0, 2)])
    b = block_from_vertices(g, [0])
    boundary = np.array([0, 1, 1])  # both neighbors colored 1, k=3
    assert marginal(g, b, boundary, 0, 2, 3) == Fraction(1, 2)
    vec = marginal_vector(g, b, boundary, 0, 3)
    assert sum(vec) == 1


def test_marginal_matches_sampler_frequency():
    g = from_edges(7, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 5), (4, 6)])
    b = block_from_vertices(g, [0, 1, 2, 3, 4])
    k = 4
    boundary = np.array([0, 0, 0, 0, 0, 1, 2])
    vec = marginal_vector(g, b, boundary, 2, k)
    rng = master_rng(31)
    draws = 100_000
    hits = Counter(sample_block_coloring(g, b, boundary, k, rng)[2] for _ in range(draws))
    for c in range(k):
        p = float(vec[c])
        se = math.sqrt(max(p * (1 - p), 1e-9) / draws)
        assert abs(hits[c] / draws - p) <= 4 * se + 1e-9, c


def test_hardcore_examples():
    edge = from_edges(2, [(0, 1)])
    be = block_from_vertices(edge, [0, 1])
    assert hardcore_partition_function(edge, be, set(), 1.0) == 3
    tri = from_edges(3, [(0, 1), (1, 2), (0, 2)])
    bt = block_from_vertices(tri, [0, 1, 2])
    lam = 0.5
    assert hardcore_partition_function(tri, bt, set(), lam) == Fraction(5, 2)
    rng = master_rng(2)
    empty = sum(1 for _ in range(40_000) if not sample_block_hardcore(edge, be, set(), 1.0, rng))
    se = math.sqrt((1 / 3) * (2 / 3) / 40_000)
    assert abs(empty / 40_000 - 1 / 3) < 4 * se


def _enumerate_independent_sets(g, allowed):
    out = []
    for bits in product((0, 1), repeat=g.n):
        ok = all(bits[v] == 0 or allowed[v] for v in range(g.n))
        if ok:
            for u in range(g.n):
                if bits[u]:
                    for x in g.neighbors(u):
                        if bits[int(x)]:
                            ok = False
        if ok:
            out.append(frozenset(v for v in range(g.n) if bits[v]))
    return out


def test_hardcore_sampler_matches_enumeration_chi2():
    rng = master_rng(8)
    for trial in range(6):
        n = int(rng.integers(3, 8))
        unicyclic = trial % 2 == 0 and n >= 3
        edges = random_unicyclic_edges(n, rng) if unicyclic else random_tree_edges(n, rng)
        g = from_edges(n, edges)
        b = block_from_vertices(g, range(n))
        lam = [0.5, 1.0, 2.0][trial % 3]
        sets = _enumerate_independent_sets(g, {v: True for v in range(n)})
        weights = {s: lam ** len(s) for s in sets}
        Z = sum(weights.values())
        assert hardcore_partition_function(g, b, set(), lam) == Fraction(Z).limit_denominator(10**12)
        draws = 30_000
        cnt = Counter(frozenset(sample_block_hardcore(g, b, set(), lam, rng)) for _ in range(draws))
        expected = [draws * weights[s] / Z for s in sets]
        observed = [cnt.get(s, 0) for s in sets]
        assert stats.chisquare(observed, expected).pvalue > 0.001, (trial, edges)


def test_hardcore_boundary_blocks_occupied_neighbor():
    # block vertex adjacent to an occupied outside vertex is forced vacant
    g = from_edges(3, [(0, 1), (1, 2)])
    b = block_from_vertices(g, [0, 1])
    rng = master_rng(4)
    for _ in range(200):
        occ = sample_block_hardcore(g, b, {2}, 5.0, rng)
        assert 1 not in occ


def test_every_sample_proper_against_boundary():
    g = from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (2, 5)])
    b = block_from_vertices(g, [1, 2, 3])
    k = 3
    rng = master_rng(6)
    boundary = np.array([1, 0, 0, 0, 2, 0])
    for _ in range(500):
        s = sample_block_coloring(g, b, boundary, k, rng)
        colors = boundary.copy()
        for u, c in s.items():
            colors[u] = c
        for u, v in g.edges():
            if u in b.deg_in or v in b.deg_in:
                assert colors[u] != colors[v]
