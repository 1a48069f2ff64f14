"""The Markov chains: single-site heat-bath Glauber, block dynamics, and
their hard-core variants, plus greedy initial states and the chain runner.

One step = one site/block update (discrete time). A chain is deterministic
given its seed; replicas derive independent streams via rngutil.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .blocksampler import sample_block_coloring, sample_block_hardcore
from .graph import Graph, max_degree
from .partition import BlockPartition
from .rngutil import master_rng

DEBUG_ASSERTS = os.environ.get("BLOCKMIX_DEBUG_ASSERTS", "") == "1"


class ErgodicityError(RuntimeError):
    pass


class GreedyFailure(RuntimeError):
    def __init__(self, vertex: int):
        super().__init__(f"greedy coloring stuck at vertex {vertex}")
        self.vertex = vertex


@dataclass
class Configuration:
    """A proper coloring or an independent set, mutated by chain steps."""

    model: str  # "coloring" | "hardcore"
    colors: Optional[np.ndarray] = None
    occupied: Optional[set[int]] = None
    step_count: int = 0
    block_last_update: Optional[np.ndarray] = None

    def copy(self) -> "Configuration":
        return Configuration(
            model=self.model,
            colors=None if self.colors is None else self.colors.copy(),
            occupied=None if self.occupied is None else set(self.occupied),
            step_count=self.step_count,
            block_last_update=None
            if self.block_last_update is None
            else self.block_last_update.copy(),
        )

    def assert_valid(self, g: Graph) -> None:
        if self.model == "coloring":
            for u, v in g.edges():
                if self.colors[u] == self.colors[v]:
                    raise AssertionError(f"monochromatic edge ({u},{v})")
        else:
            for u in self.occupied:
                for x in g.neighbors(u):
                    if int(x) in self.occupied:
                        raise AssertionError(f"occupied edge ({u},{int(x)})")


@dataclass
class ChainSpec:
    kind: str  # "glauber" | "block"
    k: int = 0
    lam: float = 0.0
    model: str = "coloring"
    partition: Optional[BlockPartition] = None
    seed: int = 0
    force: bool = False


def greedy_initial(g: Graph, k: int, seed: int) -> Configuration:
    """Sequential greedy coloring in a seeded random vertex order.

    Assigns each vertex the smallest color absent from its already-colored
    neighbors; raises GreedyFailure naming the stuck vertex if none fits.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = master_rng(seed)
    order = rng.permutation(g.n)
    colors = np.full(g.n, -1, dtype=np.int64)
    for v in order:
        v = int(v)
        used = {int(colors[x]) for x in g.neighbors(v) if colors[x] >= 0}
        c = next((c for c in range(k) if c not in used), None)
        if c is None:
            raise GreedyFailure(v)
        colors[v] = c
    return Configuration(model="coloring", colors=colors)


def greedy_initial_retry(g: Graph, k: int, seed: int, retries: int = 16) -> Configuration:
    last: Optional[GreedyFailure] = None
    for i in range(retries):
        try:
            return greedy_initial(g, k, seed + i)
        except GreedyFailure as exc:
            last = exc
    raise last


def available_colors_at(cfg: Configuration, g: Graph, v: int, k: int) -> list[int]:
    used = {int(cfg.colors[x]) for x in g.neighbors(v)}
    return [c for c in range(k) if c not in used]


def glauber_step(cfg: Configuration, g: Graph, k: int, rng: np.random.Generator) -> Configuration:
    """Heat-bath single-site update: uniform v, uniform new color outside
    the current neighborhood (the set always contains cfg(v))."""
    v = int(rng.integers(g.n))
    avail = available_colors_at(cfg, g, v, k)
    cfg.colors[v] = avail[int(rng.integers(len(avail)))]
    cfg.step_count += 1
    if DEBUG_ASSERTS:
        cfg.assert_valid(g)
    return cfg


def block_step(
    cfg: Configuration,
    g: Graph,
    part: BlockPartition,
    k: int,
    rng: np.random.Generator,
) -> Configuration:
    """Resample a uniformly chosen block exactly, given its outer boundary."""
    bi = int(rng.integers(part.n_blocks))
    block = part.blocks[bi]
    newc = sample_block_coloring(g, block, cfg.colors, k, rng)
    for u, c in newc.items():
        cfg.colors[u] = c
    cfg.step_count += 1
    if cfg.block_last_update is not None:
        cfg.block_last_update[bi] = cfg.step_count
    if DEBUG_ASSERTS:
        cfg.assert_valid(g)
    return cfg


def hardcore_glauber_step(
    cfg: Configuration, g: Graph, lam: float, rng: np.random.Generator
) -> Configuration:
    """Heat-bath hard-core update: v vacant if a neighbor is occupied, else
    occupied with probability lam/(1+lam)."""
    v = int(rng.integers(g.n))
    cfg.occupied.discard(v)
    if not any(int(x) in cfg.occupied for x in g.neighbors(v)):
        if rng.random() < lam / (1.0 + lam):
            cfg.occupied.add(v)
    cfg.step_count += 1
    if DEBUG_ASSERTS:
        cfg.assert_valid(g)
    return cfg


def hardcore_block_step(
    cfg: Configuration,
    g: Graph,
    part: BlockPartition,
    lam: float,
    rng: np.random.Generator,
) -> Configuration:
    bi = int(rng.integers(part.n_blocks))
    block = part.blocks[bi]
    boundary_occ = {u for u in cfg.occupied if u not in block.deg_in}
    inside = sample_block_hardcore(g, block, boundary_occ, lam, rng)
    for u in block.vertices:
        cfg.occupied.discard(u)
    cfg.occupied.update(inside)
    cfg.step_count += 1
    if cfg.block_last_update is not None:
        cfg.block_last_update[bi] = cfg.step_count
    if DEBUG_ASSERTS:
        cfg.assert_valid(g)
    return cfg


def check_ergodicity(g: Graph, spec: ChainSpec) -> None:
    """Glauber: require k >= Delta+2 unless forced. Block: smoke test that
    a few seeded restarts reach at least two distinct states."""
    if spec.model == "hardcore":
        return  # reachable from/to the empty set; trivially ergodic
    if spec.kind == "glauber":
        need = max_degree(g) + 2
        if spec.k < need and not spec.force:
            raise ErgodicityError(
                f"k={spec.k} < Delta+2={need}; pass force to run anyway"
            )
        return
    if spec.partition is None:
        raise ValueError("block chain needs a partition")
    if spec.force or g.n == 0:
        return
    seen = set()
    for rep in range(4):
        try:
            cfg = greedy_initial_retry(g, spec.k, spec.seed + 1000 + rep, retries=4)
        except GreedyFailure:
            continue
        rng = master_rng(spec.seed + 2000 + rep)
        for _ in range(min(2 * part_count(spec), 512)):
            block_step(cfg, g, spec.partition, spec.k, rng)
        seen.add(tuple(int(c) for c in cfg.colors))
    if len(seen) < 2:
        raise ErgodicityError(
            "block-dynamics smoke test reached fewer than 2 distinct states; "
            "pass force if the state space is genuinely tiny"
        )


def part_count(spec: ChainSpec) -> int:
    return spec.partition.n_blocks if spec.partition is not None else 1


@dataclass
class Probe:
    name: str
    cadence: int
    fn: Callable[[Configuration, int], tuple]
    records: list = field(default_factory=list)


def run_chain(
    spec: ChainSpec,
    g: Graph,
    cfg0: Configuration,
    T: int,
    probes: Optional[list[Probe]] = None,
    rng: Optional[np.random.Generator] = None,
    check: bool = True,
) -> Configuration:
    """Execute T steps, invoking each probe at its cadence.

    Probes fire at steps cadence, 2*cadence, ..., so a cadence of 100 over
    T=1000 yields exactly 10 records.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    if check and T > 0:
        check_ergodicity(g, spec)
    rng = rng if rng is not None else master_rng(spec.seed)
    cfg = cfg0
    probes = probes or []
    if cfg.block_last_update is None and spec.partition is not None:
        cfg.block_last_update = np.full(spec.partition.n_blocks, -1, dtype=np.int64)
    for t in range(1, T + 1):
        if spec.model == "coloring":
            if spec.kind == "glauber":
                glauber_step(cfg, g, spec.k, rng)
            else:
                block_step(cfg, g, spec.partition, spec.k, rng)
        else:
            if spec.kind == "glauber":
                hardcore_glauber_step(cfg, g, spec.lam, rng)
            else:
                hardcore_block_step(cfg, g, spec.partition, spec.lam, rng)
        for pr in probes:
            if pr.cadence > 0 and t % pr.cadence == 0:
                pr.records.append((t,) + tuple(pr.fn(cfg, t)))
    return cfg


def checkpoint_to_json(cfg: Configuration, rng: np.random.Generator) -> str:
    state = rng.bit_generator.state
    payload = {
        "model": cfg.model,
        "step_count": cfg.step_count,
        "rng_state": json.loads(json.dumps(state, default=int)),
    }
    if cfg.model == "coloring":
        payload["colors"] = [int(c) for c in cfg.colors]
    else:
        payload["occupied"] = sorted(cfg.occupied)
    return json.dumps(payload)


def checkpoint_from_json(text: str) -> tuple[Configuration, np.random.Generator]:
    payload = json.loads(text)
    rng = np.random.default_rng(0)
    rng.bit_generator.state = payload["rng_state"]
    if payload["model"] == "coloring":
        cfg = Configuration(
            model="coloring",
            colors=np.asarray(payload["colors"], dtype=np.int64),
            step_count=payload["step_count"],
        )
    else:
        cfg = Configuration(
            model="hardcore",
            occupied=set(payload["occupied"]),
            step_count=payload["step_count"],
        )
    return cfg, rng
