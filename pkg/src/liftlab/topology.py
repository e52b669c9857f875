"""Cycle structure of a chain's graph.

A BFS spanning tree rooted at state 0 (neighbors in ascending order) fixes
everything downstream. Each non-tree edge is a *special* edge oriented
from its smaller to its larger endpoint; crossing special edge ``m`` in
that direction moves the winding vector by ``+e_m``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chain import ChainSpec
from .errors import NotAdjacent


@dataclass(frozen=True)
class SpecialEdge:
    edge: int  # index into ChainSpec.edges
    u: int
    v: int


@dataclass(frozen=True, eq=False)
class CycleBasis:
    tree_edges: frozenset[int]
    special_edges: tuple[SpecialEdge, ...]
    tree_potential: np.ndarray
    cycle_gains: np.ndarray
    parent: tuple[int, ...]  # BFS parent, -1 at the root

    @property
    def n(self) -> int:
        return len(self.special_edges)

    def special_index(self, i: int, j: int) -> tuple[int, int]:
        """``(m, sign)`` if ``i -> j`` crosses special edge ``m``, else ``(-1, 0)``."""
        for m, s in enumerate(self.special_edges):
            if (s.u, s.v) == (i, j):
                return m, 1
            if (s.u, s.v) == (j, i):
                return m, -1
        return -1, 0

    def to_json(self, spec: ChainSpec) -> dict:
        return {
            "betti": self.n,
            "tree_edges": [[spec.edges[e].i, spec.edges[e].j] for e in sorted(self.tree_edges)],
            "special_edges": [{"edge": s.edge, "from": s.u, "to": s.v} for s in self.special_edges],
            "cycle_gains": self.cycle_gains.tolist(),
            "tree_potential": self.tree_potential.tolist(),
        }


def betti_number(spec: ChainSpec) -> int:
    return len(spec.edges) - spec.k + 1


def _step_gain(spec: ChainSpec, i: int, j: int) -> float:
    Q = spec.rate_matrix
    if i == j or Q[i, j] <= 0:
        raise NotAdjacent(f"states {i} and {j} are not adjacent")
    return float(np.log(Q[j, i] / Q[i, j]))


def build_cycle_basis(spec: ChainSpec) -> CycleBasis:
    k = spec.k
    edge_of = {}
    for idx, e in enumerate(spec.edges):
        edge_of[(e.i, e.j)] = idx
        edge_of[(e.j, e.i)] = idx

    parent = [-1] * k
    phi = np.zeros(k)
    seen = [False] * k
    seen[0] = True
    tree = set()
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for b in spec.neighbors[a]:
            if not seen[b]:
                seen[b] = True
                parent[b] = a
                tree.add(edge_of[(a, b)])
                phi[b] = phi[a] + _step_gain(spec, a, b)
                queue.append(b)

    special = sorted(
        (idx for idx in range(len(spec.edges)) if idx not in tree),
        key=lambda idx: (spec.edges[idx].i, spec.edges[idx].j),
    )
    specials = tuple(SpecialEdge(idx, spec.edges[idx].i, spec.edges[idx].j) for idx in special)
    gains = np.array(
        [_step_gain(spec, s.u, s.v) + phi[s.u] - phi[s.v] for s in specials], dtype=float
    )
    return CycleBasis(frozenset(tree), specials, phi, gains, tuple(parent))


def potential_gain(spec: ChainSpec, traj: Sequence[int]) -> float:
    return float(sum(_step_gain(spec, a, b) for a, b in zip(traj[:-1], traj[1:])))


def winding_vector(spec: ChainSpec, basis: CycleBasis, traj: Sequence[int]) -> np.ndarray:
    """Signed number of crossings of each special edge along ``traj``."""
    w = np.zeros(basis.n, dtype=np.int64)
    Q = spec.rate_matrix
    for a, b in zip(traj[:-1], traj[1:]):
        if a == b or Q[a, b] <= 0:
            raise NotAdjacent(f"states {a} and {b} are not adjacent")
        m, sign = basis.special_index(a, b)
        if m >= 0:
            w[m] += sign
    return w


def has_global_potential(basis: CycleBasis, tol: float = 1e-10) -> bool:
    if basis.n == 0:
        return True
    return bool(np.max(np.abs(basis.cycle_gains)) <= tol)
