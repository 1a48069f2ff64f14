"""Exact conditional resampling of blocks.

Counting is over arbitrary-precision integers (counts reach k^|B|, floats
would break uniformity); sampling draws exact uniform integers below the
big counts, so every sample is exactly from the conditional distribution.

Tree blocks use the standard subtree DP with the subtract-one trick
(child total minus same-color entry), O(k) per edge. Unicyclic blocks fix
the colors of one cycle edge's endpoints (the lexicographically smallest
cycle edge), delete it, and sum <= k^2 conditioned tree counts, which is
the O(k^3 |B|) per-update bound.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm
from typing import Optional

import numpy as np

from .graph import Graph
from .partition import Block
from .rngutil import randrange_big, weighted_index_big


class InfeasibleBoundaryError(ValueError):
    """The boundary condition admits no proper configuration of the block."""


def lists_from_boundary(g: Graph, block: Block, boundary_colors, k: int) -> dict[int, set[int]]:
    """L(u) = [k] minus the colors on N(u) outside the block.

    `boundary_colors` maps vertex -> color for (at least) all of
    block.outer_boundary; a full per-vertex array works too.
    """
    lists = {}
    for u in block.vertices:
        banned = set()
        for x in g.neighbors(u):
            x = int(x)
            if x not in block.deg_in:
                banned.add(int(boundary_colors[x]))
        lists[u] = set(range(k)) - banned
    return lists


def _tree_order(g: Graph, block: Block, drop_edge: Optional[tuple[int, int]] = None):
    """(vertex, parent) pairs in BFS order from the block root.

    With drop_edge set, that edge is ignored (unicyclic -> spanning tree).
    Cached on the block for the plain tree case.
    """
    if drop_edge is None and block._order is not None:
        return block._order
    vset = block.deg_in
    order = [(block.root, -1)]
    seen = {block.root}
    qi = 0
    while qi < len(order):
        u, _ = order[qi]
        qi += 1
        for x in g.neighbors(u):
            x = int(x)
            if x not in vset or x in seen:
                continue
            if drop_edge and ((u, x) == drop_edge or (x, u) == drop_edge):
                continue
            seen.add(x)
            order.append((x, u))
    if len(order) != len(block.vertices):
        raise ValueError("block is not connected under the requested edge set")
    if drop_edge is None:
        block._order = order
    return order


def _children(order) -> dict[int, list[int]]:
    ch: dict[int, list[int]] = {u: [] for u, _ in order}
    for u, parent in order:
        if parent >= 0:
            ch[parent].append(u)
    return ch


def _subtree_counts(lists, k, order, children):
    """counts[u][c] = proper list colorings of u's subtree with u colored c."""
    counts = {}
    for u, _ in reversed(order):
        cu = [1 if c in lists[u] else 0 for c in range(k)]
        for w in children[u]:
            cw = counts[w]
            sw = sum(cw)
            for c in range(k):
                if cu[c]:
                    cu[c] *= sw - cw[c]
        counts[u] = cu
    return counts


def count_list_colorings(g: Graph, block: Block, lists: dict[int, set[int]]) -> int:
    """Exact number of proper list colorings of a singleton or tree block."""
    if block.kind == "unicyclic":
        raise ValueError("unicyclic block: use count_unicyclic")
    if block.kind == "singleton":
        return len(lists[block.root])
    k = 1 + max((max(L) for L in lists.values() if L), default=0)
    order = _tree_order(g, block)
    counts = _subtree_counts(lists, k, order, _children(order))
    return sum(counts[block.root])


def _smallest_cycle_edge(block: Block) -> tuple[int, int]:
    cyc = block.cycle or []
    edges = []
    for i, u in enumerate(cyc):
        v = cyc[(i + 1) % len(cyc)]
        edges.append((min(u, v), max(u, v)))
    return min(edges)


def count_unicyclic(g: Graph, block: Block, lists: dict[int, set[int]]) -> int:
    """Exact count for a unicyclic block via <= k^2 conditioned tree counts."""
    if block.kind != "unicyclic":
        raise ValueError("count_unicyclic needs a unicyclic block")
    a, b = _smallest_cycle_edge(block)
    k = 1 + max((max(L) for L in lists.values() if L), default=0)
    order = _tree_order(g, block, drop_edge=(a, b))
    children = _children(order)
    total = 0
    for ca in lists[a]:
        for cb in lists[b]:
            if ca == cb:
                continue
            pinned = dict(lists)
            pinned[a] = {ca}
            pinned[b] = {cb}
            counts = _subtree_counts(pinned, k, order, children)
            total += sum(counts[block.root])
    return total


def count_block(g: Graph, block: Block, lists: dict[int, set[int]]) -> int:
    if block.kind == "unicyclic":
        return count_unicyclic(g, block, lists)
    return count_list_colorings(g, block, lists)


def _sample_tree(g, block, lists, k, rng, order=None, pinned=None):
    """Exact uniform list coloring of a tree block, or None if count is 0.

    Root color is drawn proportional to subtree counts, then colors
    propagate root-to-leaf, each child excluding its parent's color.
    """
    order = order if order is not None else _tree_order(g, block)
    eff = dict(lists)
    if pinned:
        for v, c in pinned.items():
            eff[v] = eff[v] & {c}
    children = _children(order)
    counts = _subtree_counts(eff, k, order, children)
    root = order[0][0]
    if sum(counts[root]) == 0:
        return None
    out = {root: weighted_index_big(rng, counts[root])}
    for u, parent in order[1:]:
        cu = counts[u]
        pc = out[parent]
        out[u] = weighted_index_big(rng, [cu[c] if c != pc else 0 for c in range(k)])
    return out


def sample_block_coloring(
    g: Graph,
    block: Block,
    boundary_colors,
    k: int,
    rng: np.random.Generator,
) -> dict[int, int]:
    """Exactly uniform proper coloring of the block given its boundary."""
    lists = lists_from_boundary(g, block, boundary_colors, k)
    if block.kind == "singleton":
        L = sorted(lists[block.root])
        if not L:
            raise InfeasibleBoundaryError(f"vertex {block.root} has no available color")
        return {block.root: L[randrange_big(rng, len(L))]}
    if block.kind == "tree":
        out = _sample_tree(g, block, lists, k, rng)
        if out is None:
            raise InfeasibleBoundaryError("boundary admits no proper coloring of the block")
        return out
    # unicyclic: draw the deleted edge's endpoint pair proportional to its
    # conditioned tree count, then sample the tree with that pair pinned
    a, b = _smallest_cycle_edge(block)
    order = _tree_order(g, block, drop_edge=(a, b))
    children = _children(order)
    pairs, weights = [], []
    for ca in sorted(lists[a]):
        for cb in sorted(lists[b]):
            if ca == cb:
                continue
            pinned = dict(lists)
            pinned[a] = {ca}
            pinned[b] = {cb}
            counts = _subtree_counts(pinned, k, order, children)
            w = sum(counts[block.root])
            if w:
                pairs.append((ca, cb))
                weights.append(w)
    if not pairs:
        raise InfeasibleBoundaryError("boundary admits no proper coloring of the block")
    ca, cb = pairs[weighted_index_big(rng, weights)]
    out = _sample_tree(g, block, lists, k, rng, order=order, pinned={a: ca, b: cb})
    assert out is not None
    return out


def marginal(
    g: Graph,
    block: Block,
    boundary_colors,
    v: int,
    c: int,
    k: int,
    pinned: Optional[dict[int, int]] = None,
) -> Fraction:
    """Exact Pr[coloring(v) = c | boundary (and pinned block vertices)]."""
    if v not in block.deg_in:
        raise ValueError(f"vertex {v} not in block")
    lists = lists_from_boundary(g, block, boundary_colors, k)
    if pinned:
        for u, cu in pinned.items():
            lists[u] = lists[u] & {cu}
    total = count_block(g, block, lists)
    if total == 0:
        raise InfeasibleBoundaryError("boundary admits no proper coloring of the block")
    lists_pin = dict(lists)
    lists_pin[v] = lists[v] & {c}
    return Fraction(count_block(g, block, lists_pin), total)


def marginal_vector(g, block, boundary_colors, v, k, pinned=None) -> list[Fraction]:
    """Exact marginal of v over all k colors; sums to 1."""
    lists = lists_from_boundary(g, block, boundary_colors, k)
    if pinned:
        for u, cu in pinned.items():
            lists[u] = lists[u] & {cu}
    total = count_block(g, block, lists)
    if total == 0:
        raise InfeasibleBoundaryError("boundary admits no proper coloring of the block")
    out = []
    for c in range(k):
        lists_pin = dict(lists)
        lists_pin[v] = lists[v] & {c}
        out.append(Fraction(count_block(g, block, lists_pin), total))
    return out


# hard-core: per-vertex occupied/vacant partition functions ----------------


def _hc_tables(allowed, lamf, order, children, pins=None):
    """(occ[u], vac[u]) partition-function pairs, bottom-up.

    pins maps vertex -> True (forced occupied) / False (forced vacant).
    """
    pins = pins or {}
    occ: dict[int, Fraction] = {}
    vac: dict[int, Fraction] = {}
    for u, _ in reversed(order):
        can_occ = allowed[u] and pins.get(u) is not False
        can_vac = pins.get(u) is not True
        o = lamf if can_occ else Fraction(0)
        v = Fraction(1) if can_vac else Fraction(0)
        for w in children[u]:
            o *= vac[w]
            v *= occ[w] + vac[w]
        occ[u], vac[u] = o, v
    return occ, vac


def _hc_allowed(g, block, boundary_occupied):
    outside = set(int(x) for x in boundary_occupied)
    allowed = {}
    for u in block.vertices:
        allowed[u] = not any(
            int(x) in outside for x in g.neighbors(u) if int(x) not in block.deg_in
        )
    return allowed


def _hc_tree_draw(rng, order, children, occ, vac) -> set[int]:
    root = order[0][0]
    out: set[int] = set()
    for u, parent in order:
        if parent >= 0 and parent in out:
            continue  # neighbor occupied forces vacant
        o, v = occ[u], vac[u]
        if o == 0:
            continue
        if v == 0 or _bernoulli(rng, o / (o + v)):
            out.add(u)
    return out


def sample_block_hardcore(
    g: Graph,
    block: Block,
    boundary_occupied,
    lam: float,
    rng: np.random.Generator,
) -> set[int]:
    """Exact draw proportional to lam^|I| over independent sets of the block
    compatible with the occupied boundary.

    Unicyclic blocks enumerate the <= 4 joint states of the deleted cycle
    edge's endpoints and then sample the spanning tree with them pinned.
    """
    lamf = Fraction(lam)
    allowed = _hc_allowed(g, block, boundary_occupied)
    if block.kind == "singleton":
        u = block.root
        if not allowed[u] or lamf == 0:
            return set()
        return {u} if _bernoulli(rng, lamf / (1 + lamf)) else set()

    drop = _smallest_cycle_edge(block) if block.kind == "unicyclic" else None
    order = _tree_order(g, block, drop_edge=drop)
    children = _children(order)
    if block.kind == "tree":
        occ, vac = _hc_tables(allowed, lamf, order, children)
        return _hc_tree_draw(rng, order, children, occ, vac)

    a, b = drop
    root = order[0][0]
    cases, weights = [], []
    for sa in (False, True):
        for sb in (False, True):
            if sa and sb:
                continue  # a~b both occupied is excluded by the dropped edge
            occ, vac = _hc_tables(allowed, lamf, order, children, pins={a: sa, b: sb})
            w = occ[root] + vac[root]
            if w > 0:
                cases.append((sa, sb))
                weights.append(w)
    if not cases:
        return set()
    den = lcm(*(w.denominator for w in weights))
    sa, sb = cases[weighted_index_big(rng, [w.numerator * (den // w.denominator) for w in weights])]
    occ, vac = _hc_tables(allowed, lamf, order, children, pins={a: sa, b: sb})
    return _hc_tree_draw(rng, order, children, occ, vac)


def hardcore_partition_function(g: Graph, block: Block, boundary_occupied, lam: float) -> Fraction:
    """Exact Z = sum of lam^|I| over compatible independent sets."""
    lamf = Fraction(lam)
    allowed = _hc_allowed(g, block, boundary_occupied)
    if block.kind == "singleton":
        return Fraction(1) + (lamf if allowed[block.root] else Fraction(0))
    drop = _smallest_cycle_edge(block) if block.kind == "unicyclic" else None
    order = _tree_order(g, block, drop_edge=drop)
    children = _children(order)
    root = order[0][0]
    if block.kind == "tree":
        occ, vac = _hc_tables(allowed, lamf, order, children)
        return occ[root] + vac[root]
    a, b = drop
    total = Fraction(0)
    for sa in (False, True):
        for sb in (False, True):
            if sa and sb:
                continue
            occ, vac = _hc_tables(allowed, lamf, order, children, pins={a: sa, b: sb})
            total += occ[root] + vac[root]
    return total


def _bernoulli(rng: np.random.Generator, p: Fraction) -> bool:
    return randrange_big(rng, p.denominator) < p.numerator
