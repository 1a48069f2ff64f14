import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from blockmix.dynamics import (
    ChainSpec,
    Configuration,
    ErgodicityError,
    GreedyFailure,
    Probe,
    block_step,
    checkpoint_from_json,
    checkpoint_to_json,
    glauber_step,
    greedy_initial,
    greedy_initial_retry,
    hardcore_glauber_step,
    run_chain,
)
from blockmix.graph import from_edges, gen_gnp
from blockmix.partition import partition_from_groups, singleton_partition, one_block_partition
from blockmix.rngutil import master_rng
from blockmix.spectral import enumerate_colorings


def test_greedy_trees():
    rng = master_rng(0)
    for seed in range(10):
        n = 12
        edges = [(int(rng.integers(v)), v) for v in range(1, n)]
        g = from_edges(n, edges)
        cfg = greedy_initial(g, 3, seed)
        cfg.assert_valid(g)


def test_greedy_k4_always_fails():
    k4 = from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    for seed in range(20):
        with pytest.raises(GreedyFailure):
            greedy_initial(k4, 3, seed)
    with pytest.raises(GreedyFailure):
        greedy_initial_retry(k4, 3, 0, retries=8)


def test_greedy_gnp_succeeds_with_retry():
    g = gen_gnp(2000, 20, seed=1)
    ok = 0
    for seed in range(100):
        try:
            greedy_initial_retry(g, 40, seed, retries=2)
            ok += 1
        except GreedyFailure:
            pass
    assert ok >= 99


def test_greedy_deterministic_per_seed():
    g = gen_gnp(100, 5, seed=4)
    a = greedy_initial(g, 10, 7)
    b = greedy_initial(g, 10, 7)
    assert np.array_equal(a.colors, b.colors)


def test_glauber_edge_update_distribution():
    g = from_edges(2, [(0, 1)])
    rng = master_rng(1)
    hits = Counter()
    T = 30_000
    for _ in range(T):
        cfg = Configuration(model="coloring", colors=np.array([0, 1]))
        glauber_step(cfg, g, 3, rng)
        hits[(int(cfg.colors[0]), int(cfg.colors[1]))] += 1
    # either vertex updates w.p. 1/2, then its new color is uniform over the
    # two colors its neighbor leaves available (the old color included)
    expected = {(0, 1): T / 2, (2, 1): T / 4, (0, 2): T / 4}
    assert set(hits) == set(expected)
    assert stats.chisquare([hits[s] for s in expected], [expected[s] for s in expected]).pvalue > 0.001


def test_glauber_isolated_vertex_uniform():
    g = from_edges(1, [])
    rng = master_rng(2)
    cnt = Counter()
    for _ in range(9000):
        cfg = Configuration(model="coloring", colors=np.array([0]))
        glauber_step(cfg, g, 3, rng)
        cnt[int(cfg.colors[0])] += 1
    assert stats.chisquare([cnt[c] for c in range(3)]).pvalue > 0.001


def test_glauber_p3_long_run_uniform_chi2():
    # chi-square needs near-independent draws: thin by ~2x t_mix (=13 here)
    g = from_edges(3, [(0, 1), (1, 2)])
    space = enumerate_colorings(g, 3)
    assert space.size == 12
    rng = master_rng(3)
    cfg = greedy_initial(g, 3, 0)
    counts = Counter()
    thin = 25
    for step in range(200_000):
        glauber_step(cfg, g, 3, rng)
        if step % thin == 0:
            counts[tuple(int(c) for c in cfg.colors)] += 1
    assert len(counts) == 12
    assert stats.chisquare([counts[s] for s in space.states]).pvalue > 0.001


def test_block_step_one_block_is_exact_sampler():
    # every step draws the whole graph fresh: consecutive states independent
    g = from_edges(4, [(0, 1), (1, 2), (2, 3)])
    part = one_block_partition(g)
    space = enumerate_colorings(g, 3)
    rng = master_rng(5)
    cfg = greedy_initial(g, 3, 1)
    counts = Counter()
    for _ in range(50_000):
        block_step(cfg, g, part, 3, rng)
        counts[tuple(int(c) for c in cfg.colors)] += 1
    assert len(counts) == 24
    assert stats.chisquare([counts[s] for s in space.states]).pvalue > 0.001


def test_block_singleton_partition_matches_glauber_distribution():
    # definitional coincidence: singleton block update == heat-bath site update
    g = from_edges(3, [(0, 1), (1, 2)])
    part = singleton_partition(g)
    rng = master_rng(6)
    cfg = greedy_initial(g, 3, 2)
    counts = Counter()
    thin = 25
    for step in range(150_000):
        block_step(cfg, g, part, 3, rng)
        if step % thin == 0:
            counts[tuple(int(c) for c in cfg.colors)] += 1
    assert len(counts) == 12
    assert stats.chisquare(list(counts.values())).pvalue > 0.001


def test_hardcore_steps():
    iso = from_edges(1, [])
    rng = master_rng(7)
    occ = 0
    for _ in range(20_000):
        cfg = Configuration(model="hardcore", occupied=set())
        hardcore_glauber_step(cfg, iso, 1.0, rng)
        occ += 0 in cfg.occupied
    se = math.sqrt(0.25 / 20_000)
    assert abs(occ / 20_000 - 0.5) < 4 * se

    edge = from_edges(2, [(0, 1)])
    cfg = Configuration(model="hardcore", occupied={0})
    for _ in range(50):
        before = 0 in cfg.occupied
        hardcore_glauber_step(cfg, edge, 100.0, rng)
        cfg.assert_valid(edge)


def test_hardcore_triangle_empty_frequency():
    tri = from_edges(3, [(0, 1), (1, 2), (0, 2)])
    rng = master_rng(8)
    cfg = Configuration(model="hardcore", occupied=set())
    lam = 0.5
    empty = 0
    T = 1_000_000
    for _ in range(T):
        hardcore_glauber_step(cfg, tri, lam, rng)
        empty += not cfg.occupied
    target = 1 / (1 + 3 * lam)
    # autocorrelated samples: use a generous band (4 sigma of iid would be
    # too tight); the chain mixes in O(n) so 25x iid variance is safe
    se = math.sqrt(target * (1 - target) / T) * 5
    assert abs(empty / T - target) < 4 * se


def test_run_chain_contracts():
    g = from_edges(3, [(0, 1), (1, 2)])
    spec = ChainSpec(kind="glauber", k=4, seed=9)
    cfg = greedy_initial(g, 4, 0)
    before = cfg.colors.copy()
    out = run_chain(spec, g, cfg, 0)
    assert np.array_equal(out.colors, before)

    # determinism: same seed -> identical trajectory
    runs = []
    for _ in range(2):
        cfg = greedy_initial(g, 4, 0)
        out = run_chain(ChainSpec(kind="glauber", k=4, seed=11), g, cfg, 500)
        runs.append(out.colors.copy())
    assert np.array_equal(runs[0], runs[1])

    # probe cadence: exactly T/cadence records
    cfg = greedy_initial(g, 4, 0)
    probe = Probe(name="c0", cadence=100, fn=lambda c, t: (int(c.colors[0]),))
    run_chain(ChainSpec(kind="glauber", k=4, seed=13), g, cfg, 1000, probes=[probe])
    assert len(probe.records) == 10


def test_ergodicity_guard():
    g = from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    spec = ChainSpec(kind="glauber", k=4, seed=0)  # needs Delta+2 = 5
    cfg = Configuration(model="coloring", colors=np.array([0, 1, 2, 3]))
    with pytest.raises(ErgodicityError):
        run_chain(spec, g, cfg, 10)
    spec_forced = ChainSpec(kind="glauber", k=4, seed=0, force=True)
    run_chain(spec_forced, g, cfg, 10)
    cfg.assert_valid(g)


def test_checkpoint_roundtrip():
    g = from_edges(3, [(0, 1), (1, 2)])
    rng = master_rng(10)
    cfg = greedy_initial(g, 3, 3)
    cfg.step_count = 42
    text = checkpoint_to_json(cfg, rng)
    back, rng2 = checkpoint_from_json(text)
    assert back.step_count == 42
    assert np.array_equal(back.colors, cfg.colors)
    assert rng2.integers(1 << 30) == master_rng(10).integers(1 << 30)


def test_hardcore_block_chain_triangle():
    from blockmix.dynamics import hardcore_block_step
    from blockmix.partition import one_block_partition

    tri = from_edges(3, [(0, 1), (1, 2), (0, 2)])
    part = one_block_partition(tri)
    rng = master_rng(12)
    cfg = Configuration(model="hardcore", occupied=set())
    counts = Counter()
    T = 20_000
    for _ in range(T):  # one-block steps draw fresh exact samples
        hardcore_block_step(cfg, tri, part, 0.5, rng)
        counts[frozenset(cfg.occupied)] += 1
    want = {frozenset(): 0.4, frozenset({0}): 0.2, frozenset({1}): 0.2, frozenset({2}): 0.2}
    observed = [counts.get(s, 0) for s in want]
    expected = [T * p for p in want.values()]
    assert stats.chisquare(observed, expected).pvalue > 0.001
