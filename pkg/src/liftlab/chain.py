"""Finite continuous-time Markov chains: validation, evolution, thermodynamics.

Convention: ``q_ij`` is the jump rate from ``i`` to ``j`` and the master
equation reads ``dp_i/dt = sum_j (p_j q_ji - p_i q_ij)``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import thermo
from .errors import (
    Disconnected,
    DuplicateEdge,
    RateSignMismatch,
    SelfLoop,
    SingularSolve,
    StepTooLarge,
    SupportMismatch,
    ValidationError,
)
from .integrate import RK4Stepper, step_count

DIST_TOL = 1e-12
# dt must not exceed this fraction of 1 / (max exit rate)
STEP_FRACTION = 0.1


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    q_ij: float
    q_ji: float


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """Undirected simple graph with a rate in each direction of every edge."""

    states: tuple[str, ...]
    edges: tuple[Edge, ...]

    @classmethod
    def from_rates(cls, states: Sequence[str] | int, edges) -> "ChainSpec":
        """Build from ``(i, j, q_ij, q_ji)`` tuples; ``i > j`` is re-oriented."""
        if isinstance(states, int):
            states = [str(s) for s in range(states)]
        out = []
        for e in edges:
            i, j, qij, qji = (e.i, e.j, e.q_ij, e.q_ji) if isinstance(e, Edge) else e
            i, j = int(i), int(j)
            if i > j:
                i, j, qij, qji = j, i, qji, qij
            out.append(Edge(i, j, float(qij), float(qji)))
        return cls(tuple(str(s) for s in states), tuple(out))

    @property
    def k(self) -> int:
        return len(self.states)

    @cached_property
    def edge_rates(self) -> thermo.EdgeRates:
        return thermo.EdgeRates(
            src=np.array([e.i for e in self.edges], dtype=np.int64),
            dst=np.array([e.j for e in self.edges], dtype=np.int64),
            q_fwd=np.array([e.q_ij for e in self.edges], dtype=float),
            q_bwd=np.array([e.q_ji for e in self.edges], dtype=float),
        )

    @cached_property
    def rate_matrix(self) -> np.ndarray:
        """Dense ``k x k`` matrix of off-diagonal rates (zero diagonal)."""
        Q = np.zeros((self.k, self.k))
        for e in self.edges:
            Q[e.i, e.j] = e.q_ij
            Q[e.j, e.i] = e.q_ji
        return Q

    @cached_property
    def exit_rates(self) -> np.ndarray:
        return self.rate_matrix.sum(axis=1)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[set[int]] = [set() for _ in range(self.k)]
        for e in self.edges:
            adj[e.i].add(e.j)
            adj[e.j].add(e.i)
        return tuple(tuple(sorted(a)) for a in adj)

    def forward_generator(self):
        """Sparse ``A`` with ``dp/dt = A p`` (column convention)."""
        Q = self.rate_matrix
        return sp.csr_matrix(Q.T - np.diag(Q.sum(axis=1)))

    def max_step(self) -> float:
        return STEP_FRACTION / float(self.exit_rates.max())

    def to_json(self) -> dict:
        return {
            "states": list(self.states),
            "edges": [{"i": e.i, "j": e.j, "q_ij": e.q_ij, "q_ji": e.q_ji} for e in self.edges],
        }


def validate_chain(spec: ChainSpec) -> ChainSpec:
    k = spec.k
    if k < 2:
        raise ValidationError(f"need at least 2 states, got {k}")
    seen = set()
    for n, e in enumerate(spec.edges):
        if not (0 <= e.i < k and 0 <= e.j < k):
            raise ValidationError(f"edge {n} references a state outside 0..{k - 1}")
        if e.i == e.j:
            raise SelfLoop(f"edge {n} is a self-loop on state {e.i}")
        key = (min(e.i, e.j), max(e.i, e.j))
        if key in seen:
            raise DuplicateEdge(f"edge {key} listed twice")
        seen.add(key)
        if not (np.isfinite(e.q_ij) and np.isfinite(e.q_ji)):
            raise ValidationError(f"edge {key} has a non-finite rate")
        if e.q_ij < 0 or e.q_ji < 0:
            raise ValidationError(f"edge {key} has a negative rate")
        if (e.q_ij > 0) != (e.q_ji > 0):
            raise RateSignMismatch(
                f"edge {key}: q_ij={e.q_ij}, q_ji={e.q_ji}; rates must be positive in both directions"
            )
        if e.q_ij == 0:
            raise RateSignMismatch(f"edge {key} has zero rate in both directions")
    reached = _reachable(spec)
    if len(reached) != k:
        missing = sorted(set(range(k)) - reached)
        raise Disconnected(f"states {missing} are not reachable from state 0")
    return spec


def _reachable(spec: ChainSpec) -> set[int]:
    adj: list[list[int]] = [[] for _ in range(spec.k)]
    for e in spec.edges:
        if 0 <= e.i < spec.k and 0 <= e.j < spec.k:
            adj[e.i].append(e.j)
            adj[e.j].append(e.i)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def as_distribution(p, k: int | None = None, tol: float = DIST_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValidationError("a distribution must be a vector")
    if k is not None and p.size != k:
        raise ValidationError(f"distribution has {p.size} entries, chain has {k} states")
    if np.any(p < 0):
        raise ValidationError("distribution has negative entries")
    if abs(p.sum() - 1.0) > tol:
        raise ValidationError(f"distribution sums to {p.sum()!r}, not 1")
    return p


def balance_residual(spec: ChainSpec, p: np.ndarray) -> np.ndarray:
    """Net outflow ``sum_j (p_i q_ij - p_j q_ji)`` at every state."""
    Q = spec.rate_matrix
    return p * Q.sum(axis=1) - Q.T @ p


def stationary_distribution(spec: ChainSpec) -> np.ndarray:
    """Unique invariant law, from the balance equations with one row replaced by normalization."""
    k = spec.k
    A = spec.forward_generator().toarray()
    A[-1, :] = 1.0
    rhs = np.zeros(k)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSolve(f"stationary solve failed: {exc}") from exc
    if not np.all(np.isfinite(pi)) or np.any(pi < -1e-12):
        raise SingularSolve("stationary solve produced an invalid vector")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    res = np.max(np.abs(balance_residual(spec, pi)))
    if res > 1e-12 * max(1.0, float(spec.exit_rates.max())):
        raise SingularSolve(f"stationary residual {res:.3e} too large; rates ill-conditioned")
    return pi


def check_step(dt: float, max_step: float) -> None:
    if dt > max_step * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt} exceeds the stability bound {max_step:.6g}")


def evolve_base(spec: ChainSpec, p0, t_end: float, dt: float, every: int = 1):
    """RK4 on the master equation.

    Returns ``(times, traj)`` with ``traj[m]`` the law at ``times[m]``;
    samples are taken every ``every`` steps, plus the final time.
    """
    p = as_distribution(p0, spec.k).copy()
    check_step(dt, spec.max_step())
    n, h = step_count(t_end, dt)
    stepper = RK4Stepper(spec.forward_generator(), h)
    times, traj = [0.0], [p.copy()]
    for s in range(1, n + 1):
        p = stepper.step(p)
        if s % every == 0 or s == n:
            times.append(s * h)
            traj.append(p.copy())
    return np.array(times), np.array(traj)


def relative_entropy(p, theta) -> float:
    """``sum_i p_i log(p_i / theta_i)``; ``theta`` may be an unnormalized measure."""
    p = np.asarray(p, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if p.shape != theta.shape:
        raise ValidationError("p and theta have different shapes")
    bad = (p > 0) & ~(theta > 0)
    if np.any(bad):
        raise SupportMismatch(f"theta vanishes where p > 0 at indices {np.flatnonzero(bad)[:5].tolist()}")
    with np.errstate(divide="ignore"):
        return thermo.relative_entropy_log(p, np.log(theta))


def base_epr(spec: ChainSpec, p) -> float:
    return thermo.epr(np.asarray(p, dtype=float), spec.edge_rates)


def stationary_epr(spec: ChainSpec) -> float:
    return base_epr(spec, stationary_distribution(spec))


@dataclass(frozen=True)
class ThermoSample:
    t: float
    e_p: float
    dF_dt: float
    q_hk: float
    F: float
    H: float
    E: float | None = field(default=None)

    def decomposition_error(self) -> float:
        return abs(self.e_p - self.q_hk + self.dF_dt)


def base_thermo(spec: ChainSpec, p, t: float = 0.0, pi: np.ndarray | None = None) -> ThermoSample:
    """Free energy, its rate, EPR and housekeeping heat against the stationary law."""
    p = np.asarray(p, dtype=float)
    if pi is None:
        pi = stationary_distribution(spec)
    log_pi = np.log(pi)
    er = spec.edge_rates
    e_p = thermo.epr(p, er)
    dF = thermo.free_energy_rate(p, er, log_pi)
    q_hk = thermo.housekeeping(p, er, log_pi)
    return ThermoSample(
        t=t,
        e_p=e_p,
        dF_dt=dF,
        q_hk=q_hk,
        F=thermo.relative_entropy_log(p, log_pi),
        H=thermo.entropy(p),
    )
