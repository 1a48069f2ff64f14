"""Exact verification on tiny instances: state enumeration, transition
kernels, stationary distributions, relaxation/mixing times, and the
block-vs-single-site comparison inequality.

Only reversible chains are handled; relaxation times come from the
symmetric eigenproblem on D^(1/2) P D^(-1/2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ChainSpec
from .graph import Graph
from .partition import BlockPartition

STATE_GUARD = 10**6


class StateSpaceTooLarge(RuntimeError):
    pass


@dataclass
class StateSpace:
    model: str
    k: int
    states: list[tuple[int, ...]]  # colorings: color tuples; hardcore: 0/1 tuples
    index: dict[tuple[int, ...], int]

    @property
    def size(self) -> int:
        return len(self.states)


def enumerate_colorings(g: Graph, k: int) -> StateSpace:
    """All proper k-colorings by backtracking, vertex order 0..n-1."""
    states: list[tuple[int, ...]] = []
    assign = [-1] * g.n

    def rec(v: int):
        if v == g.n:
            states.append(tuple(assign))
            if len(states) > STATE_GUARD:
                raise StateSpaceTooLarge("more than 1e6 proper colorings")
            return
        banned = {assign[int(x)] for x in g.neighbors(v) if int(x) < v}
        for c in range(k):
            if c not in banned:
                assign[v] = c
                rec(v + 1)
        assign[v] = -1

    if g.n > 0:
        rec(0)
    else:
        states.append(())
    return StateSpace("coloring", k, states, {s: i for i, s in enumerate(states)})


def enumerate_independent_sets(g: Graph) -> StateSpace:
    states: list[tuple[int, ...]] = []
    assign = [0] * g.n

    def rec(v: int):
        if v == g.n:
            states.append(tuple(assign))
            if len(states) > STATE_GUARD:
                raise StateSpaceTooLarge("more than 1e6 independent sets")
            return
        assign[v] = 0
        rec(v + 1)
        if all(assign[int(x)] == 0 for x in g.neighbors(v) if int(x) < v):
            assign[v] = 1
            rec(v + 1)
            assign[v] = 0

    if g.n > 0:
        rec(0)
    else:
        states.append(())
    return StateSpace("hardcore", 0, states, {s: i for i, s in enumerate(states)})


def hardcore_weights(space: StateSpace, lam: float) -> np.ndarray:
    sizes = np.array([sum(s) for s in space.states])
    return lam**sizes


def _heat_bath_site_kernel(g: Graph, space: StateSpace, v: int, lam: float = 0.0) -> np.ndarray:
    """P_v: resample site v from its conditional; exact, row-stochastic."""
    ns = space.size
    P = np.zeros((ns, ns))
    groups: dict[tuple, list[int]] = {}
    for i, s in enumerate(space.states):
        key = s[:v] + s[v + 1:]
        groups.setdefault(key, []).append(i)
    if space.model == "coloring":
        for idx in groups.values():
            w = 1.0 / len(idx)
            for i in idx:
                for j in idx:
                    P[i, j] = w
    else:
        for idx in groups.values():
            weights = np.array([lam ** space.states[j][v] for j in idx])
            weights = weights / weights.sum()
            for i in idx:
                P[i, list(idx)] = weights
    return P


def _block_kernel_one(g: Graph, space: StateSpace, verts: list[int], lam: float = 0.0) -> np.ndarray:
    """P_B: resample the whole vertex set `verts` from its conditional."""
    ns = space.size
    vset = set(verts)
    rest = [v for v in range(g.n) if v not in vset]
    P = np.zeros((ns, ns))
    groups: dict[tuple, list[int]] = {}
    for i, s in enumerate(space.states):
        key = tuple(s[v] for v in rest)
        groups.setdefault(key, []).append(i)
    if space.model == "coloring":
        for idx in groups.values():
            w = 1.0 / len(idx)
            for i in idx:
                for j in idx:
                    P[i, j] = w
    else:
        for idx in groups.values():
            weights = np.array([lam ** sum(space.states[j][v] for v in verts) for j in idx])
            weights = weights / weights.sum()
            for i in idx:
                P[i, list(idx)] = weights
    return P


@dataclass
class KernelMatrix:
    P: np.ndarray
    kind: str  # "discrete" | "generator"
    pi: np.ndarray  # reversing distribution

    def check(self, tol: float = 1e-12) -> None:
        rows = self.P.sum(axis=1)
        if self.kind == "discrete":
            if not np.allclose(rows, 1.0, atol=tol):
                raise AssertionError("rows must sum to 1")
        else:
            if not np.allclose(rows, 0.0, atol=tol):
                raise AssertionError("generator rows must sum to 0")
            off = self.P - np.diag(np.diag(self.P))
            if off.min() < -tol:
                raise AssertionError("off-diagonal generator entries must be >= 0")
        D = self.pi[:, None] * self.P
        if not np.allclose(D, D.T, atol=tol * max(1.0, abs(self.P).max())):
            raise AssertionError("kernel fails detailed balance")


def kernel(
    g: Graph,
    spec: ChainSpec,
    space: StateSpace,
    continuous: bool = False,
) -> KernelMatrix:
    """Exact kernel of the chain on the enumerated space.

    Discrete: average of the unit kernels. Continuous: generator
    L = sum over units of (P_unit - I), rate 1 per site/block.
    """
    ns = space.size
    if space.model == "coloring":
        pi = np.full(ns, 1.0 / ns)
    else:
        w = hardcore_weights(space, spec.lam)
        pi = w / w.sum()
    if spec.kind == "glauber":
        units = [_heat_bath_site_kernel(g, space, v, spec.lam) for v in range(g.n)]
    else:
        units = [
            _block_kernel_one(g, space, b.vertices, spec.lam) for b in spec.partition.blocks
        ]
    if continuous:
        L = sum(units) - len(units) * np.eye(ns)
        km = KernelMatrix(P=L, kind="generator", pi=pi)
    else:
        km = KernelMatrix(P=sum(units) / len(units), kind="discrete", pi=pi)
    km.check()
    return km


def stationary(km: KernelMatrix) -> np.ndarray:
    """Stationary distribution by linear solve; checks irreducibility."""
    ns = km.P.shape[0]
    if km.kind == "discrete":
        A = km.P.T - np.eye(ns)
    else:
        A = km.P.T
    A = np.vstack([A, np.ones(ns)])
    b = np.zeros(ns + 1)
    b[-1] = 1.0
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    if sol.min() < -1e-9:
        raise RuntimeError("negative stationary mass; chain may be reducible")
    _assert_irreducible(km)
    return sol


def _assert_irreducible(km: KernelMatrix) -> None:
    ns = km.P.shape[0]
    adj = km.P > 1e-15 if km.kind == "discrete" else (km.P - np.diag(np.diag(km.P))) > 1e-15
    seen = np.zeros(ns, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for vtx in np.flatnonzero(adj[u]):
            if not seen[vtx]:
                seen[vtx] = True
                stack.append(int(vtx))
    if not seen.all():
        raise RuntimeError("kernel is reducible")


def relaxation(km: KernelMatrix) -> float:
    """tau = 1/(1-lambda2) for discrete reversible kernels, 1/gap(L) for
    generators; eigenvalues from the pi-symmetrized matrix."""
    if km.P.shape[0] < 2:
        return 1.0
    d = np.sqrt(km.pi)
    S = (d[:, None] * km.P) / d[None, :]
    S = (S + S.T) / 2.0
    ev = np.linalg.eigvalsh(S)
    gap = 1.0 - ev[-2] if km.kind == "discrete" else -ev[-2]
    if gap <= 0:
        raise RuntimeError("nonpositive spectral gap")
    return 1.0 / gap


def exact_tmix(km: KernelMatrix, eps: float = 0.25, tmax: int = 10**6) -> int:
    """Smallest T with worst-row TV distance to stationary <= eps."""
    if km.kind != "discrete":
        raise ValueError("exact_tmix needs a discrete kernel")
    pi = stationary(km)
    M = np.eye(km.P.shape[0])
    for t in range(1, tmax + 1):
        M = M @ km.P
        tv = 0.5 * np.abs(M - pi[None, :]).sum(axis=1).max()
        if tv <= eps:
            return t
    raise RuntimeError(f"mixing exceeds {tmax} steps")


def _conditional_block_space(
    g: Graph, verts: list[int], boundary: dict[int, int], k: int
) -> tuple[Graph, StateSpace, list[int]]:
    """Enumerate proper colorings of the induced subgraph on `verts` with
    outside colors fixed; returns the induced graph and its state space."""
    sub_index = {v: i for i, v in enumerate(verts)}
    edges = [
        (sub_index[u], sub_index[int(x)])
        for u in verts
        for x in g.neighbors(u)
        if int(x) in sub_index and sub_index[u] < sub_index[int(x)]
    ]
    from .graph import from_edges

    sub = from_edges(len(verts), edges)
    states: list[tuple[int, ...]] = []
    assign = [-1] * len(verts)

    def rec(i: int):
        if i == len(verts):
            states.append(tuple(assign))
            return
        u = verts[i]
        banned = {boundary[int(x)] for x in g.neighbors(u) if int(x) not in sub_index}
        banned |= {assign[sub_index[int(x)]] for x in g.neighbors(u) if int(x) in sub_index and sub_index[int(x)] < i}
        for c in range(k):
            if c not in banned:
                assign[i] = c
                rec(i + 1)
        assign[i] = -1

    rec(0)
    space = StateSpace("coloring", k, states, {s: i for i, s in enumerate(states)})
    return sub, space, verts


def comparison_check(g: Graph, part: BlockPartition, k: int) -> dict:
    """Verify tau <= tau_block * max_B tau_B * max_v Q_v (continuous time).

    Q_v = 1 for partitions. tau_B is the relaxation time of the single-site
    dynamics on B, maximized over boundary conditions realized by proper
    colorings of the whole graph.
    """
    space = enumerate_colorings(g, k)
    if space.size == 0:
        raise RuntimeError("graph has no proper k-colorings")
    spec_g = ChainSpec(kind="glauber", k=k)
    spec_b = ChainSpec(kind="block", k=k, partition=part)
    tau = relaxation(kernel(g, spec_g, space, continuous=True))
    tau_block = relaxation(kernel(g, spec_b, space, continuous=True))

    tau_B_max = 0.0
    for b in part.blocks:
        if b.size == 1:
            # single-site conditional kernel has uniform rows: gap exactly 1
            tau_B_max = max(tau_B_max, 1.0)
            continue
        realized = set()
        for s in space.states:
            realized.add(tuple((int(x), s[int(x)]) for x in b.outer_boundary))
        for cond in realized:
            boundary = dict(cond)
            sub, sub_space, verts = _conditional_block_space(g, list(b.vertices), boundary, k)
            if sub_space.size == 0:
                continue
            # single-site generator on the conditional space
            units = []
            for i_local in range(len(verts)):
                P = np.zeros((sub_space.size, sub_space.size))
                groups: dict[tuple, list[int]] = {}
                for i, s in enumerate(sub_space.states):
                    key = s[:i_local] + s[i_local + 1:]
                    groups.setdefault(key, []).append(i)
                for idx in groups.values():
                    w = 1.0 / len(idx)
                    for i in idx:
                        for j in idx:
                            P[i, j] = w
                units.append(P)
            L = sum(units) - len(units) * np.eye(sub_space.size)
            km = KernelMatrix(P=L, kind="generator", pi=np.full(sub_space.size, 1.0 / sub_space.size))
            if sub_space.size > 1:
                tau_B_max = max(tau_B_max, relaxation(km))
            else:
                tau_B_max = max(tau_B_max, 1.0)
    q_max = 1
    rhs = tau_block * tau_B_max * q_max
    return {
        "tau": tau,
        "tau_block": tau_block,
        "tau_B_max": tau_B_max,
        "Q_max": q_max,
        "inequality_holds": bool(tau <= rhs),
        "slack": rhs - tau,
    }
