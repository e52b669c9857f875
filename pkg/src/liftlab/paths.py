"""Exact-jump sampling of lifted trajectories.

Paths live on the full lattice, so the window radius plays no role here.
Every path owns a random stream seeded by ``(seed, path_index)``: results
do not depend on how paths are batched or how many workers run them.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .chain import ChainSpec
from .errors import ValidationError
from .lift import LiftedState, LiftSpec
from .topology import CycleBasis


@dataclass
class PathStats:
    start: LiftedState
    t_end: float
    seed: int
    end_state: np.ndarray  # base state at t_end
    winding: np.ndarray  # (n_paths, n), accumulated from the start
    drop: np.ndarray  # phi(start) - phi(end)
    n_jumps: np.ndarray
    paths: list[np.ndarray] | None = None  # visited base states, when kept

    @property
    def n_paths(self) -> int:
        return self.drop.size

    @property
    def mean_rate(self) -> float:
        return float(self.drop.mean() / self.t_end)

    @property
    def stderr(self) -> float:
        if self.n_paths < 2:
            return float("nan")
        return float(self.drop.std(ddof=1) / np.sqrt(self.n_paths) / self.t_end)

    @property
    def mean_winding(self) -> np.ndarray:
        return self.winding.mean(axis=0)


class _Tables:
    """Jump tables shared by every path."""

    def __init__(self, base: ChainSpec, basis: CycleBasis):
        Q = base.rate_matrix
        self.exit = Q.sum(axis=1)
        self.cum = np.cumsum(Q / self.exit[:, None], axis=1)
        self.cum[:, -1] = 1.0
        k, n = base.k, basis.n
        self.step = np.zeros((k, k, n), dtype=np.int64)
        for m, s in enumerate(basis.special_edges):
            self.step[s.u, s.v, m] = 1
            self.step[s.v, s.u, m] = -1
        self.phi_tree = basis.tree_potential
        self.gains = basis.cycle_gains


def _budget(t_end: float, max_exit: float) -> int:
    # jumps per path exceed this with probability < 1e-12; overflow is handled anyway
    return int(poisson.isf(1e-12, t_end * max_exit)) + 8


def _draws(seed: int, idx: np.ndarray, count: int) -> np.ndarray:
    out = np.empty((idx.size, count, 2))
    for r, p in enumerate(idx):
        out[r] = np.random.default_rng(np.random.SeedSequence([seed, int(p)])).random((count, 2))
    return out


def _simulate(tables: _Tables, i0: int, t_end: float, seed: int, idx: np.ndarray, keep: bool):
    m = idx.size
    budget = _budget(t_end, tables.exit.max())
    U = _draws(seed, idx, budget)
    state = np.full(m, i0, dtype=np.int64)
    t = np.zeros(m)
    winding = np.zeros((m, tables.step.shape[2]), dtype=np.int64)
    jumps = np.zeros(m, dtype=np.int64)
    alive = np.ones(m, dtype=bool)
    history = [[i0] for _ in range(m)] if keep else None
    col = 0
    while alive.any():
        if col == U.shape[1]:
            # rare: a path needs more draws; continue its own stream deterministically
            extra = np.empty((m, budget, 2))
            for r, p in enumerate(idx):
                rng = np.random.default_rng(np.random.SeedSequence([seed, int(p)]))
                extra[r] = rng.random((col + budget, 2))[col:]
            U = np.concatenate([U, extra], axis=1)
        a = np.flatnonzero(alive)
        s = state[a]
        wait = -np.log1p(-U[a, col, 0]) / tables.exit[s]
        t_new = t[a] + wait
        done = t_new > t_end
        alive[a[done]] = False
        go = a[~done]
        if go.size:
            src = state[go]
            dst = (tables.cum[src] <= U[go, col, 1][:, None]).sum(axis=1)
            winding[go] += tables.step[src, dst]
            state[go] = dst
            t[go] = t_new[~done]
            jumps[go] += 1
            if keep:
                for r, d in zip(go, dst):
                    history[r].append(int(d))
        col += 1
    return state, winding, jumps, history


def sample_paths(
    lift: LiftSpec,
    start: int | LiftedState,
    t_end: float,
    n_paths: int,
    seed: int,
    threads: int = 1,
    keep_paths: bool = False,
) -> PathStats:
    """Simulate ``n_paths`` lifted trajectories from ``start`` up to ``t_end``."""
    if n_paths < 1:
        raise ValidationError("n_paths must be at least 1")
    if t_end <= 0:
        raise ValidationError("t_end must be positive")
    if not isinstance(start, LiftedState):
        start = LiftedState(int(start), (0,) * lift.n)
    if not 0 <= start.i < lift.k or len(start.alpha) != lift.n:
        raise ValidationError(f"invalid start state {start}")
    tables = _Tables(lift.base, lift.basis)
    chunks = np.array_split(np.arange(n_paths), max(1, min(threads, n_paths)))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_simulate, *zip(*[(tables, start.i, t_end, seed, c, keep_paths) for c in chunks])))
    else:
        parts = [_simulate(tables, start.i, t_end, seed, c, keep_paths) for c in chunks]
    end = np.concatenate([p[0] for p in parts])
    wind = np.concatenate([p[1] for p in parts])
    jumps = np.concatenate([p[2] for p in parts])
    paths = [np.array(h) for p in parts for h in p[3]] if keep_paths else None
    # phi(i, alpha) = phi_T(i) + alpha . G; start winding cancels in the difference
    drop = tables.phi_tree[start.i] - tables.phi_tree[end] - wind @ tables.gains
    return PathStats(start, t_end, seed, end, wind, drop, jumps, paths)
