"""Fokker-Planck evolution on the torus and on a window of its lift.

Thermodynamic sums run over faces with both neighbours inside the grid.
With ``y`` the discrete affinity of ``(D^{-1} b_eff)_a`` at a face (see
:func:`~liftlab.diffusion.grid.discrete_affinity`) and ``d log f`` the jump
of ``log f`` across it,

    e_p  = h^n sum J (y - d log f / h)
    dF/dt = h^n sum J (d log f - d log nu) / h
    Q_hk = h^n sum J (y - d log nu / h)

so ``e_p = Q_hk - dF/dt`` holds to round-off for every reference ``nu``,
and ``dF/dt`` is exactly the derivative of the discrete relative entropy
under the semi-discrete scheme.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import (
    CurlObstruction,
    ExcessiveLeak,
    NegativeDensity,
    NonPSD,
    NumericalAbort,
    SingularSolve,
    StepTooLarge,
    ValidationError,
)
from ..integrate import RK4Stepper, step_count
from ..series import LIFT_COLUMNS, ThermoSeries
from .field import PeriodicField
from .grid import FluxOperator, Grid
from .potential import Potential, reconstruct_potential

FLOOR = 1e-14
MASS_TOL = 1e-12
NEGATIVE_ABORT = -1e-10
LEAK_ABORT = 1e-6
STEP_SAFETY = 0.9
ROUNDOFF_GUARD = 1e-13


def cov_columns(dim: int) -> tuple[str, ...]:
    return ("cov_00",) if dim == 1 else ("cov_00", "cov_01", "cov_11")


def fp_columns(dim: int) -> tuple[str, ...]:
    return LIFT_COLUMNS + cov_columns(dim) + ("S_bound",)


@lru_cache(maxsize=16)
def flux_operator(field: PeriodicField, grid: Grid) -> FluxOperator:
    return FluxOperator(field, grid)


@dataclass
class TorusDensity:
    """Cell averages on the ``N^n`` torus grid, C order."""

    values: np.ndarray
    N: int
    dim: int = 1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size != self.N**self.dim:
            raise ValidationError(f"torus density needs {self.N ** self.dim} cell values, got {self.values.size}")
        if np.any(self.values < NEGATIVE_ABORT):
            raise ValidationError("density has negative cells")
        if abs(self.mass - 1.0) > MASS_TOL:
            raise ValidationError(f"density mass is {self.mass!r}, not 1")

    @property
    def grid(self) -> Grid:
        return Grid(self.dim, self.N)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * (1.0 / self.N) ** self.dim)

    @classmethod
    def uniform(cls, dim: int, N: int) -> "TorusDensity":
        return cls(np.ones(N**dim), N, dim)

    @classmethod
    def from_function(cls, dim: int, N: int, fn) -> "TorusDensity":
        """Sample ``fn`` at cell centres and normalize."""
        vals = np.asarray(fn(Grid(dim, N).centers), dtype=float)
        return cls(vals / (vals.sum() * N**-dim), N, dim)


@dataclass
class LiftedDensity:
    """Cell values on the window ``[-R, R+1)^n`` plus the probability that has left it."""

    values: np.ndarray
    N: int
    radius: int
    dim: int = 1
    lost_mass: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size != self.grid.n_cells:
            raise ValidationError(f"lifted density needs {self.grid.n_cells} cell values, got {self.values.size}")
        if self.lost_mass < 0:
            raise ValidationError("lost_mass must be non-negative")
        if abs(self.mass + self.lost_mass - 1.0) > MASS_TOL:
            raise ValidationError(f"mass {self.mass!r} + lost {self.lost_mass!r} is not 1")

    @property
    def grid(self) -> Grid:
        return Grid(self.dim, self.N, self.radius)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * (1.0 / self.N) ** self.grid.dim)

    @classmethod
    def gaussian(cls, dim: int, N: int, radius: int, sigma: float, center=None) -> "LiftedDensity":
        grid = Grid(dim, N, radius)
        c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        vals = np.exp(-0.5 * np.sum((grid.centers - c) ** 2, axis=1) / sigma**2)
        return cls(vals / (vals.sum() * grid.cell_volume), N, radius, dim)

    def fold(self) -> np.ndarray:
        """Sum over integer translates; total equals ``1 - lost_mass``."""
        g = self.grid
        return np.bincount(g.torus_index, weights=self.values, minlength=g.N**g.dim)


def default_window(field: PeriodicField, t_end: float, spread: float = 0.0) -> int:
    """Radius ``>= |b|_inf t + 6 sqrt(2 |D|_inf t)`` plus the initial spread."""
    X = Grid(field.dim, field.grid_n).centers
    bmax = np.linalg.norm(field.b(X), axis=-1).max()
    Dmax = np.linalg.norm(field.D(X), ord=2, axis=(-2, -1)).max()
    return int(np.ceil(bmax * t_end + 6 * np.sqrt(2 * Dmax * t_end) + spread))


def _resolve_step(op: FluxOperator, dt: float | None) -> float:
    bound = op.stable_step()
    if dt is None:
        return STEP_SAFETY * bound
    if dt > bound * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt} exceeds the explicit stability bound {bound:.6g}")
    return dt


def stationary_density(field: PeriodicField, N: int | None = None, tol: float = 1e-10) -> TorusDensity:
    """Null vector of the discrete torus generator, normalized to unit mass."""
    N = N or field.grid_n
    grid = Grid(field.dim, N)
    gen = flux_operator(field, grid).generator
    n = grid.n_cells
    # bordered system [A 1; v^T 0][rho; lam] = [0; 1]; lam = 0 since columns of A sum to zero
    vol = sp.csr_matrix(np.full((1, n), grid.cell_volume))
    K = sp.bmat([[gen, sp.csr_matrix(np.ones((n, 1)))], [vol, None]], format="csc")
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise SingularSolve(f"stationary solve failed: {exc}") from exc
    z = lu.solve(rhs)
    for _ in range(2):  # iterative refinement; entries scale like 1/h^2
        z += lu.solve(rhs - K @ z)
    rho = z[:n]
    if not np.all(np.isfinite(rho)) or rho.min() < NEGATIVE_ABORT:
        raise SingularSolve("stationary solve produced an invalid density")
    res = np.abs(gen @ rho).max()
    if res > tol:
        raise SingularSolve(f"stationary residual {res:.3e} exceeds {tol:.1e}")
    rho = np.clip(rho, 0.0, None)
    return TorusDensity(rho / (rho.sum() * grid.cell_volume), N, grid.dim)


class _FPThermo:
    """Face sums of the module docstring for one grid."""

    def __init__(self, op: FluxOperator, log_rho: np.ndarray, potential: Potential | None):
        self.grid = op.grid
        self.faces = []
        for ax in op.axes:
            m = ax.interior
            self.faces.append((ax.flux[m], ax.left[m], ax.right[m], ax.y[m]))
        self.log_rho = log_rho
        self.log_mu = potential.on(self.grid) if potential is not None else None

    def _sums(self, f, log_nu):
        h = self.grid.h
        lf = np.log(np.maximum(f, FLOOR))
        ep = q = df = 0.0
        for flux, L, R, y in self.faces:
            J = flux @ f
            dlf = lf[R] - lf[L]
            ep += np.dot(J, y - dlf / h)
            if log_nu is not None:
                dln = log_nu[R] - log_nu[L]
                q += np.dot(J, y - dln / h)
                df += np.dot(J, dlf - dln) / h
        vol = self.grid.cell_volume
        if log_nu is None:
            return vol * ep, np.nan, np.nan
        return vol * ep, vol * q, vol * df

    def row(self, t: float, f: np.ndarray, lost: float) -> dict:
        g = self.grid
        vol = g.cell_volume
        pos = f > 0
        flogf = np.zeros_like(f)
        flogf[pos] = f[pos] * np.log(f[pos])
        S = -vol * flogf.sum()
        ep, q_rho, df_rho = self._sums(f, self.log_rho)
        F_rho = vol * (flogf.sum() - np.dot(f[pos], self.log_rho[pos]))
        if self.log_mu is not None:
            _, q_mu, df_mu = self._sums(f, self.log_mu)
            F_mu = vol * (flogf.sum() - np.dot(f[pos], self.log_mu[pos]))
            E = -vol * np.dot(f, self.log_mu)
        else:
            q_mu = df_mu = F_mu = E = np.nan
        row = dict(
            t=t, e_p=ep, dF_pi=df_rho, dF_mu=df_mu, Qhk_pi=q_rho, Qhk_mu=q_mu,
            F_pi=F_rho, F_mu=F_mu, E=E, H=S, lost_mass=lost,
        )
        if g.periodic:
            for c in cov_columns(g.dim):
                row[c] = np.nan
            row["S_bound"] = np.nan
            return row
        cov = density_covariance(g, f)
        for a in range(g.dim):
            for b in range(a, g.dim):
                row[f"cov_{a}{b}"] = cov[a, b]
        row["S_bound"] = gaussian_entropy_bound(cov, g.dim)
        return row


def density_covariance(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Covariance of the piecewise-constant density (normalized by its own mass)."""
    w = f * grid.cell_volume
    m = w.sum()
    X = grid.centers
    mean = w @ X / m
    d = X - mean
    return (d.T * w) @ d / m + grid.h**2 / 12.0 * np.eye(grid.dim)


def gaussian_entropy_bound(cov, n: int) -> float:
    """``(1/2)[n + log((2 pi)^n det cov)]``, the entropy of a normal law with covariance ``cov``."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (n, n):
        raise NonPSD(f"covariance must be {n}x{n}, got {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise NonPSD("covariance is not symmetric")
    eig = np.linalg.eigvalsh(cov)
    if eig.min() < -1e-12 * max(1.0, eig.max()):
        raise NonPSD(f"covariance has negative eigenvalue {eig.min():.3e}")
    if eig.min() <= 0:
        return float("-inf")
    return float(0.5 * (n + n * np.log(2 * np.pi) + np.sum(np.log(eig))))


def _detailed_balance_potential(field: PeriodicField, N: int, curl_tol: float | None) -> Potential | None:
    try:
        return reconstruct_potential(field, N, curl_tol)
    except CurlObstruction:
        return None


def torus_epr(field: PeriodicField, f: TorusDensity) -> float:
    """Entropy production rate of ``f`` on the torus (log-flux form of the flux quadratic form)."""
    op = flux_operator(field, f.grid)
    probe = _FPThermo(op, np.zeros(f.values.size), None)
    return float(probe._sums(f.values, None)[0])


@dataclass
class FPRun:
    series: ThermoSeries
    final: TorusDensity | LiftedDensity
    rho: TorusDensity
    potential: Potential | None
    dt: float
    mass: np.ndarray  # cells plus lost mass at every output


def _run(op, x, t_end, dt, every, probe, series, n_cells, leak_abort):
    n, h = step_count(t_end, dt)
    stepper = RK4Stepper(op, h)
    vol = probe.grid.cell_volume

    def lost(z):
        return float(z[n_cells]) * vol if z.size > n_cells else 0.0

    series.append(**probe.row(0.0, x[:n_cells], lost(x)))
    masses = [x.sum() * vol]
    total = x.sum()
    for s in range(1, n + 1):
        x = stepper.step(x)
        # the scheme conserves sum(x) exactly; remove accumulated round-off,
        # refusing to absorb anything larger than a few ulps
        defect = total - x.sum()
        if abs(defect) > ROUNDOFF_GUARD * abs(total):
            raise NumericalAbort(f"mass defect {defect * vol:.3e} in one step at t={s * h:.4g}")
        x[:n_cells] *= 1.0 + defect / x[:n_cells].sum()
        if x[:n_cells].min() < NEGATIVE_ABORT:
            raise NegativeDensity(f"cell value {x[:n_cells].min():.3e} at t={s * h:.4g}; refine the grid")
        if s % every == 0 or s == n:
            if lost(x) > leak_abort:
                raise ExcessiveLeak(f"lost mass {lost(x):.3e} exceeds {leak_abort:.1e} at t={s * h:.4g}; enlarge the window")
            series.append(**probe.row(s * h, x[:n_cells], lost(x)))
            masses.append(x.sum() * vol)
    return x, h, np.array(masses)


def evolve_fp_torus(
    field: PeriodicField,
    f0: TorusDensity,
    t_end: float,
    dt: float | None = None,
    every: int = 10,
    curl_tol: float | None = None,
) -> FPRun:
    grid = f0.grid
    if grid.dim != field.dim:
        raise ValidationError("initial density and field dimensions differ")
    op = flux_operator(field, grid)
    dt = _resolve_step(op, dt)
    rho = stationary_density(field, grid.N)
    pot = _detailed_balance_potential(field, grid.N, curl_tol)
    if pot is not None and not pot.periodic:
        pot = None  # mu is not a measure on the torus
    probe = _FPThermo(op, np.log(np.maximum(rho.values, FLOOR)), pot)
    series = ThermoSeries(fp_columns(grid.dim))
    x, h, mass = _run(op.generator, f0.values.copy(), t_end, dt, every, probe, series, grid.n_cells, np.inf)
    final = TorusDensity(x, grid.N, grid.dim)
    return FPRun(series, final, rho, pot, h, mass)


def evolve_fp_lifted(
    field: PeriodicField,
    f0: LiftedDensity,
    t_end: float,
    dt: float | None = None,
    every: int = 10,
    leak_abort: float = LEAK_ABORT,
    curl_tol: float | None = None,
) -> FPRun:
    """Same scheme on the window with absorbing walls; covariance and entropy bound per output."""
    grid = f0.grid
    if grid.dim != field.dim:
        raise ValidationError("initial density and field dimensions differ")
    op = flux_operator(field, grid)
    dt = _resolve_step(op, dt)
    rho = stationary_density(field, grid.N)
    pot = _detailed_balance_potential(field, grid.N, curl_tol)
    log_rho = np.log(np.maximum(rho.values, FLOOR))[grid.torus_index]
    probe = _FPThermo(op, log_rho, pot)
    series = ThermoSeries(fp_columns(grid.dim))
    x0 = np.append(f0.values, f0.lost_mass / grid.cell_volume)
    x, h, mass = _run(op.augmented_generator(), x0, t_end, dt, every, probe, series, grid.n_cells, leak_abort)
    final = LiftedDensity(x[:-1], grid.N, grid.radius, grid.dim, max(float(x[-1]) * grid.cell_volume, 0.0))
    return FPRun(series, final, rho, pot, h, mass)
