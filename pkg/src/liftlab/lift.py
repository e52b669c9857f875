"""The winding-lattice lift of a chain, restricted to a finite window.

A lifted state is ``(i, alpha)`` with ``i`` a base state and ``alpha`` in
``[-R, R]^n``. Tree edges keep ``alpha``; crossing special edge ``m`` in
its orientation adds ``e_m``. Transitions that leave the window are
absorbed into ``lost_mass``.

Lifted states are stored cell-major: ``index = cell * k + i`` with
``cell`` the C-order ravel of ``alpha + R``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.stats import poisson

from . import thermo
from .chain import ChainSpec, as_distribution, check_step, stationary_distribution, validate_chain
from .errors import ExcessiveLeak, ValidationError, WindowTooSmall
from .integrate import RK4Stepper, step_count
from .series import LIFT_COLUMNS, ThermoSeries
from .topology import CycleBasis, build_cycle_basis

FOLD_TOL = 1e-9
LEAK_ABORT = 1e-6


@dataclass(frozen=True)
class LiftedState:
    i: int
    alpha: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class LiftSpec:
    base: ChainSpec
    basis: CycleBasis
    radius: int

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def k(self) -> int:
        return self.base.k

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def n_cells(self) -> int:
        return self.side ** self.n

    @property
    def n_states(self) -> int:
        return self.n_cells * self.k

    @cached_property
    def alphas(self) -> np.ndarray:
        """Winding vector of every cell, shape ``(n_cells, n)``."""
        if self.n == 0:
            return np.zeros((1, 0), dtype=np.int64)
        grid = np.indices((self.side,) * self.n).reshape(self.n, -1).T
        return grid - self.radius

    def index(self, i: int, alpha=None) -> int:
        alpha = np.zeros(self.n, dtype=int) if alpha is None else np.asarray(alpha, dtype=int)
        if alpha.shape != (self.n,):
            raise ValidationError(f"winding vector must have length {self.n}")
        if np.any(np.abs(alpha) > self.radius):
            raise WindowTooSmall(f"alpha={alpha.tolist()} outside the window of radius {self.radius}")
        cell = int(np.ravel_multi_index(tuple(alpha + self.radius), (self.side,) * self.n)) if self.n else 0
        return cell * self.k + int(i)

    def state(self, index: int) -> LiftedState:
        cell, i = divmod(int(index), self.k)
        return LiftedState(i, tuple(int(a) for a in self.alphas[cell]))

    @cached_property
    def _structure(self):
        """Interior lifted edges plus window-exit transitions."""
        k, C = self.k, self.n_cells
        cells = np.arange(C)
        src, dst, qf, qb, base_edge = [], [], [], [], []
        exit_state, exit_rate = [], []
        special_of = {s.edge: m for m, s in enumerate(self.basis.special_edges)}
        for e_idx, e in enumerate(self.base.edges):
            m = special_of.get(e_idx)
            if m is None:
                src.append(cells * k + e.i)
                dst.append(cells * k + e.j)
                n_e = C
            else:
                stride = self.side ** (self.n - 1 - m)
                inside = self.alphas[:, m] < self.radius
                c_in = cells[inside]
                src.append(c_in * k + e.i)
                dst.append((c_in + stride) * k + e.j)
                n_e = c_in.size
                # i at the top face jumps out forward; j at the bottom face jumps out backward
                top = cells[~inside]
                bottom = cells[self.alphas[:, m] == -self.radius]
                exit_state += [top * k + e.i, bottom * k + e.j]
                exit_rate += [np.full(top.size, e.q_ij), np.full(bottom.size, e.q_ji)]
            qf.append(np.full(n_e, e.q_ij))
            qb.append(np.full(n_e, e.q_ji))
            base_edge.append(np.full(n_e, e_idx))
        cat = lambda xs, dt=float: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt)
        edges = thermo.EdgeRates(cat(src, np.int64), cat(dst, np.int64), cat(qf), cat(qb))
        return edges, cat(base_edge, np.int64), cat(exit_state, np.int64), cat(exit_rate)

    @property
    def edge_rates(self) -> thermo.EdgeRates:
        return self._structure[0]

    @property
    def edge_base_index(self) -> np.ndarray:
        return self._structure[1]

    @property
    def window_exits(self) -> tuple[np.ndarray, np.ndarray]:
        return self._structure[2], self._structure[3]

    def generator(self):
        """Sparse generator on the window plus one absorbing ``lost`` state (last index)."""
        N = self.n_states
        er = self.edge_rates
        ex_s, ex_r = self.window_exits
        diag = -np.tile(self.base.exit_rates, self.n_cells)
        rows = np.concatenate([er.dst, er.src, np.arange(N), np.full(ex_s.size, N)])
        cols = np.concatenate([er.src, er.dst, np.arange(N), ex_s])
        vals = np.concatenate([er.q_fwd, er.q_bwd, diag, ex_r])
        return sp.csr_matrix((vals, (rows, cols)), shape=(N + 1, N + 1))

    def max_step(self) -> float:
        return self.base.max_step()


def build_lift(base: ChainSpec, radius: int) -> LiftSpec:
    validate_chain(base)
    if int(radius) != radius or radius < 1:
        raise WindowTooSmall(f"radius must be an integer >= 1, got {radius}")
    return LiftSpec(base, build_cycle_basis(base), int(radius))


def default_radius(base: ChainSpec, t_end: float, tail: float = 1e-12, basis: CycleBasis | None = None) -> int:
    """Smallest window radius whose escape probability by ``t_end`` is below ``tail``.

    Winding coordinate ``m`` changes only across special edge ``m``, so
    its total crossing count is dominated by a Poisson variable with mean
    ``t_end * max(q_uv, q_vu)``; a union bound covers all coordinates.
    """
    basis = basis or build_cycle_basis(base)
    if basis.n == 0:
        return 1
    Q = base.rate_matrix
    lam = t_end * max(max(Q[s.u, s.v], Q[s.v, s.u]) for s in basis.special_edges)
    R = 1
    while basis.n * poisson.sf(R, lam) > tail:
        R += 1
    return R


@dataclass
class WindowedDistribution:
    probs: np.ndarray
    lost_mass: float = 0.0

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if np.any(self.probs < 0):
            raise ValidationError("windowed distribution has negative entries")
        if self.lost_mass < 0:
            raise ValidationError("lost_mass must be non-negative")
        total = float(self.probs.sum()) + self.lost_mass
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"probs + lost_mass = {total!r}, not 1")

    @classmethod
    def delta(cls, lift: LiftSpec, i: int, alpha=None) -> "WindowedDistribution":
        p = np.zeros(lift.n_states)
        p[lift.index(i, alpha)] = 1.0
        return cls(p)

    @classmethod
    def from_base(cls, lift: LiftSpec, p_base, alpha=None) -> "WindowedDistribution":
        """Place a base-chain law on the single cell ``alpha`` (default 0)."""
        p_base = as_distribution(p_base, lift.k)
        p = np.zeros(lift.n_states)
        start = lift.index(0, alpha)
        p[start:start + lift.k] = p_base
        return cls(p)


def fold(lift: LiftSpec, w: WindowedDistribution, fold_tol: float = FOLD_TOL) -> np.ndarray:
    """Marginal on the base states, renormalized for the mass that left the window."""
    if w.lost_mass > fold_tol:
        raise ExcessiveLeak(f"lost mass {w.lost_mass:.3e} exceeds fold tolerance {fold_tol:.1e}")
    marginal = w.probs.reshape(lift.n_cells, lift.k).sum(axis=0)
    return marginal / (1.0 - w.lost_mass)


@dataclass(frozen=True, eq=False)
class PotentialTable:
    phi: np.ndarray
    pi_lift: np.ndarray

    @property
    def log_mu(self) -> np.ndarray:
        return -self.phi

    @property
    def mu(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(-self.phi)


def potential_table(lift: LiftSpec, pi: np.ndarray | None = None) -> PotentialTable:
    """Proper global potential ``phi(i, alpha) = phi_T(i) + alpha . G`` and the two lifted measures."""
    b = lift.basis
    cell_shift = lift.alphas @ b.cycle_gains if lift.n else np.zeros(1)
    phi = (cell_shift[:, None] + b.tree_potential[None, :]).ravel()
    if pi is None:
        pi = stationary_distribution(lift.base)
    return PotentialTable(phi=phi, pi_lift=np.tile(pi, lift.n_cells))


def _mu_affinity(lift: LiftSpec) -> np.ndarray:
    """``log(mu_i q_ij / mu_j q_ji)`` per lifted edge, built from base-level terms.

    The ``alpha . G`` parts of the two potentials cancel identically on
    tree edges and leave exactly ``G_m`` on special ones, so they are never
    formed; this keeps the value at round-off of the base rates.
    """
    b = lift.basis
    dphi = b.tree_potential[lift.base.edge_rates.dst] - b.tree_potential[lift.base.edge_rates.src]
    per_base = dphi + lift.base.edge_rates.log_ratio
    for m, s in enumerate(b.special_edges):
        per_base[s.edge] += b.cycle_gains[m]
    return per_base[lift.edge_base_index]


@dataclass
class LiftRun:
    series: ThermoSeries
    final: WindowedDistribution
    snapshots: list[WindowedDistribution] | None = None


class _LiftThermo:
    """Per-sample evaluation of every series column on a fixed lift."""

    def __init__(self, lift: LiftSpec, table: PotentialTable):
        self.edges = lift.edge_rates
        self.phi = table.phi
        self.log_mu = table.log_mu
        self.log_pi = np.log(table.pi_lift)
        self.mu_aff = _mu_affinity(lift)
        self.pi_aff = self.log_pi[self.edges.src] - self.log_pi[self.edges.dst] + self.edges.log_ratio

    def row(self, t: float, p: np.ndarray, lost: float) -> dict:
        er = self.edges
        e_p = thermo.epr(p, er)
        H = thermo.entropy(p)
        E = float(np.dot(p, self.phi))
        return dict(
            t=t,
            e_p=e_p,
            dF_pi=thermo.free_energy_rate(p, er, self.log_pi),
            dF_mu=thermo.free_energy_rate(p, er, self.log_mu),
            Qhk_pi=thermo.housekeeping(p, er, self.log_pi, self.pi_aff),
            Qhk_mu=thermo.housekeeping(p, er, self.log_mu, self.mu_aff),
            F_pi=thermo.relative_entropy_log(p, self.log_pi),
            F_mu=thermo.relative_entropy_log(p, self.log_mu),
            E=E,
            H=H,
            lost_mass=lost,
        )


def evolve_lift(
    lift: LiftSpec,
    w0: WindowedDistribution,
    t_end: float,
    dt: float,
    every: int = 10,
    leak_abort: float = LEAK_ABORT,
    keep_snapshots: bool = False,
) -> LiftRun:
    """RK4 on the windowed master equation, sampling every ``every`` steps."""
    check_step(dt, lift.max_step())
    if w0.probs.size != lift.n_states:
        raise ValidationError("initial distribution does not match the lift window")
    n, h = step_count(t_end, dt)
    stepper = RK4Stepper(lift.generator(), h)
    table = potential_table(lift)
    probe = _LiftThermo(lift, table)
    series = ThermoSeries(LIFT_COLUMNS)
    x = np.append(w0.probs, w0.lost_mass)
    N = lift.n_states
    snaps = [] if keep_snapshots else None

    def record(t):
        p = np.clip(x[:N], 0.0, None)
        series.append(**probe.row(t, p, x[N]))
        if snaps is not None:
            snaps.append(_windowed(x, N))

    record(0.0)
    for s in range(1, n + 1):
        x = stepper.step(x)
        if s % every == 0 or s == n:
            if x[N] > leak_abort:
                raise ExcessiveLeak(
                    f"lost mass {x[N]:.3e} exceeds {leak_abort:.1e} at t={s * h:.4g}; enlarge the radius"
                )
            record(s * h)
    return LiftRun(series, _windowed(x, N), snaps)


def _windowed(x: np.ndarray, N: int) -> WindowedDistribution:
    return WindowedDistribution(np.clip(x[:N], 0.0, None), max(float(x[N]), 0.0))


def entropies_at(lift: LiftSpec, w0: WindowedDistribution, times, dt: float | None = None,
                 leak_tol: float = FOLD_TOL):
    """Entropy of the lifted law at each of ``times``, and the laws themselves."""
    dt = dt or lift.max_step()
    check_step(dt, lift.max_step())
    stepper_cache: dict[float, RK4Stepper] = {}
    A = lift.generator()
    N = lift.n_states
    x = np.append(w0.probs, w0.lost_mass)
    t_cur = 0.0
    H, laws = [], []
    for t in sorted(times):
        if t < t_cur - 1e-12:
            raise ValidationError("times must be non-negative")
        if t > t_cur + 1e-12:
            n, h = step_count(t - t_cur, dt)
            key = round(h, 15)
            if key not in stepper_cache:
                stepper_cache[key] = RK4Stepper(A, h)
            for _ in range(n):
                x = stepper_cache[key].step(x)
            t_cur = t
        if x[N] > leak_tol:
            raise ExcessiveLeak(f"lost mass {x[N]:.3e} at t={t:g} exceeds {leak_tol:.1e}; enlarge the radius")
        p = np.clip(x[:N], 0.0, None)
        H.append(thermo.entropy(p))
        laws.append(p)
    return np.array(H), laws


def mutual_information_curve(lift: LiftSpec, start: int, times, dt: float | None = None) -> np.ndarray:
    """``MI(L_1, L_t)`` for a walk started at ``(start, 0)``, for every ``t > 1`` in ``times``.

    Uses ``MI = H^j_t - sum_i P(base(L_1) = i) H^i_{t-1}``; the conditional
    entropies depend only on the base state by translation invariance.
    """
    times = np.asarray(sorted(times), dtype=float)
    if np.any(times <= 1.0):
        raise ValidationError("mutual information needs t > 1")
    H_start, laws = entropies_at(lift, WindowedDistribution.delta(lift, start), [1.0, *times], dt)
    p1 = laws[0].reshape(lift.n_cells, lift.k).sum(axis=0)
    H_t = H_start[1:]
    cond = np.zeros_like(times)
    for i in range(lift.k):
        if p1[i] == 0:
            continue
        H_i, _ = entropies_at(lift, WindowedDistribution.delta(lift, i), times - 1.0, dt)
        cond += p1[i] * H_i
    return H_t - cond


def mutual_information(lift: LiftSpec, start: int, t: float, dt: float | None = None) -> float:
    return float(mutual_information_curve(lift, start, [t], dt)[0])


def lifted_balance_residual(lift: LiftSpec, theta: np.ndarray) -> np.ndarray:
    """Net outflow of the measure ``theta`` at each lifted state (interior states only are meaningful)."""
    A = lift.generator()[: lift.n_states, : lift.n_states]
    return -(A @ theta)


def interior_mask(lift: LiftSpec) -> np.ndarray:
    """States whose every neighbor lies inside the window."""
    if lift.n == 0:
        return np.ones(lift.n_states, dtype=bool)
    inner = np.all(np.abs(lift.alphas) < lift.radius, axis=1)
    return np.repeat(inner, lift.k)


def detailed_balance_error(lift: LiftSpec, table: PotentialTable) -> float:
    """Max relative mismatch of ``mu_i q_ij`` and ``mu_j q_ji`` over lifted edges."""
    er = lift.edge_rates
    lhs = table.log_mu[er.src] + np.log(er.q_fwd)
    rhs = table.log_mu[er.dst] + np.log(er.q_bwd)
    return float(np.max(np.abs(np.expm1(lhs - rhs)))) if er.src.size else 0.0

