"""Detailed-balance test and potential reconstruction for periodic fields.

The relevant vector field is ``v = D^{-1} b_eff``. A detailed-balanced
stationary measure ``mu = exp(g)`` exists when ``v = grad g`` on R^n; ``g``
need not be periodic, its increments over a period are the loop integrals
of ``v``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CurlObstruction
from .field import PeriodicField
from .grid import FluxOperator, Grid, discrete_affinity


@dataclass(frozen=True)
class CurlReport:
    max_curl: float
    loop_integrals: np.ndarray  # shape (n,)
    curl: np.ndarray | None  # on the torus grid, None for n = 1


def _v_grid(field: PeriodicField, grid: Grid, offset_axis: int | None = None) -> np.ndarray:
    X = grid.centers
    if offset_axis is not None:
        X = X.copy()
        X[:, offset_axis] += 0.5 * grid.h
    return field.force(X).reshape(grid.shape + (grid.dim,))


def curl_check(field: PeriodicField, N: int | None = None) -> CurlReport:
    grid = Grid(field.dim, N or field.grid_n)
    v = _v_grid(field, grid)
    h = grid.h
    # loop integral along axis a, averaged over the transverse lines
    loops = np.array([v[..., a].sum(axis=a).mean() * h for a in range(grid.dim)])
    if grid.dim == 1:
        return CurlReport(0.0, loops, None)
    d1v0 = (np.roll(v[..., 0], -1, axis=1) - np.roll(v[..., 0], 1, axis=1)) / (2 * h)
    d0v1 = (np.roll(v[..., 1], -1, axis=0) - np.roll(v[..., 1], 1, axis=0)) / (2 * h)
    curl = d1v0 - d0v1
    return CurlReport(float(np.abs(curl).max()), loops, curl)


@dataclass(frozen=True)
class Potential:
    """``g`` on the torus cells with ``g = 0`` at the first cell centre, plus its period increments."""

    N: int
    g: np.ndarray  # flat, torus cell order
    loop: np.ndarray
    flux_residual: float
    max_curl: float

    def on(self, grid: Grid) -> np.ndarray:
        """``g`` at the cells of ``grid`` (torus or window), extended by ``g(x + alpha) = g(x) + alpha . loop``."""
        if grid.N != self.N:
            raise ValueError(f"potential was built at N={self.N}, grid has N={grid.N}")
        return self.g[grid.torus_index] + grid.winding @ self.loop

    @property
    def periodic(self) -> bool:
        return bool(np.all(np.abs(self.loop) <= 1e-10))


def reconstruct_potential(field: PeriodicField, N: int | None = None, curl_tol: float | None = None) -> Potential:
    """Integrate the face affinities to ``g``; raise :class:`CurlObstruction` if ``v`` is not a gradient.

    Increments are ``h`` times the discrete affinity of ``v`` at face
    midpoints, the same quantity the flux scheme uses, so ``g`` is the
    exact discrete potential wherever the scheme admits one and an
    ``O(h^2)`` approximation of the continuous one. In two dimensions the
    increments carry an ``O(h^4)`` discrete curl; ``g`` is their
    least-squares primitive, which keeps that error local instead of
    accumulating it along integration paths.
    """
    N = N or field.grid_n
    grid = Grid(field.dim, N)
    h, n = grid.h, grid.dim
    report = curl_check(field, N)
    tol = 10 * h * h if curl_tol is None else curl_tol
    if report.max_curl > tol:
        raise CurlObstruction(
            f"max |curl v| = {report.max_curl:.6g} exceeds {tol:.3g}; no detailed-balanced measure",
            max_curl=report.max_curl,
        )
    inc = [h * discrete_affinity(_v_grid(field, grid, a)[..., a], h) for a in range(n)]
    if n == 1:
        g = np.concatenate([[0.0], np.cumsum(inc[0])[:-1]])
        loop = np.array([inc[0].sum()])
    else:
        g, loop = _least_squares_primitive(inc, grid)
    residual = _flux_residual(field, grid, g, loop)
    return Potential(N, g, loop, residual, report.max_curl)


def _least_squares_primitive(inc, grid: Grid):
    """Minimize ``sum (g(x + h e_a) - g(x) - inc_a(x))^2`` over ``g = periodic + loop . x``."""
    N = grid.N
    loop = np.array([inc[a].sum(axis=a).mean() for a in range(2)])
    r = [inc[a] - loop[a] / N for a in range(2)]
    # normal equations: periodic five-point Laplacian of g = backward divergence of r
    div = (r[0] - np.roll(r[0], 1, axis=0)) + (r[1] - np.roll(r[1], 1, axis=1))
    k = 2 * np.cos(2 * np.pi * np.arange(N) / N) - 2
    lam = k[:, None] + k[None, :]
    lam[0, 0] = 1.0
    ghat = np.fft.fft2(div) / lam
    ghat[0, 0] = 0.0
    periodic = np.fft.ifft2(ghat).real
    g = periodic + (grid.centers - grid.centers[0]).reshape(N, N, 2) @ loop
    g = (g - g[0, 0]).ravel()
    return g, loop


def _flux_residual(field: PeriodicField, grid: Grid, g: np.ndarray, loop: np.ndarray) -> float:
    """Largest face flux of ``mu = exp(g)`` under the scheme, with ``max mu = 1`` on the unit cell.

    Neighbours across the period boundary take the lifted value
    ``mu(x +- e_a) = mu(x) exp(+- loop_a)``.
    """
    op = FluxOperator(field, grid)
    gmax = g.max()
    worst = 0.0
    for ax in op.axes:
        F = ax.flux.tocoo()
        d = grid.multi[F.col] - grid.multi[F.row]
        offset = np.where(d > 1, -1, np.where(d < -1, 1, 0))
        vals = F.data * np.exp(g[F.col] + offset @ loop - gmax)
        J = np.bincount(F.row, weights=vals, minlength=F.shape[0])
        worst = max(worst, float(np.abs(J).max()))
    return worst
