"""Cell-centred grids and the flux-form finite-volume operator.

The density evolves as ``df/dt = -div J`` with face fluxes
``J_a = b_eff_a * avg(f) - D_aa * (f_R - f_L)/h - sum_{c != a} D_ac * d_c f``
where the transverse derivative is the average of the two cell-centred
central differences. Coefficients are sampled at face midpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..errors import ValidationError
from .field import PeriodicField


@dataclass(frozen=True)
class Grid:
    """``N`` cells per unit length; ``radius=None`` is the torus, otherwise the window ``[-R, R+1)^n``."""

    dim: int
    N: int
    radius: int | None = None

    @property
    def periodic(self) -> bool:
        return self.radius is None

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def side(self) -> int:
        return self.N if self.periodic else (2 * self.radius + 1) * self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.dim

    @property
    def n_cells(self) -> int:
        return self.side ** self.dim

    @property
    def origin(self) -> float:
        return 0.0 if self.periodic else -float(self.radius)

    @cached_property
    def multi(self) -> np.ndarray:
        """Integer cell coordinates, shape ``(n_cells, dim)``, C order."""
        return np.indices(self.shape).reshape(self.dim, -1).T

    @cached_property
    def centers(self) -> np.ndarray:
        return self.origin + (self.multi + 0.5) * self.h

    @cached_property
    def torus_index(self) -> np.ndarray:
        """Flat index of the torus cell each cell folds onto."""
        return np.ravel_multi_index(tuple((self.multi % self.N).T), (self.N,) * self.dim)

    @cached_property
    def winding(self) -> np.ndarray:
        """Integer translate ``alpha`` of each cell (zero on the torus)."""
        return np.floor_divide(self.multi, self.N) - (0 if self.periodic else self.radius)

    def shift(self, axis: int, step: int) -> np.ndarray:
        """Flat index of the neighbour ``step`` cells along ``axis``; -1 outside the window."""
        m = self.multi.copy()
        m[:, axis] += step
        if self.periodic:
            m %= self.side
            return np.ravel_multi_index(tuple(m.T), self.shape)
        inside = np.all((m >= 0) & (m < self.side), axis=1)
        out = np.full(self.n_cells, -1, dtype=np.int64)
        out[inside] = np.ravel_multi_index(tuple(m[inside].T), self.shape)
        return out

    def torus(self) -> "Grid":
        return Grid(self.dim, self.N)


def discrete_affinity(y: np.ndarray, h: float) -> np.ndarray:
    """``(2/h) artanh(h y / 2)``: the log ratio of the scheme's face transition rates, divided by ``h``.

    With ``D`` diagonal the flux ``J = f_L (b/2 + D/h) - f_R (D/h - b/2)``
    is that of a jump process between neighbouring cells, whose rate ratio
    is ``(1 + h y/2) / (1 - h y/2)``. Requires cell Peclet number ``|h y| < 2``.
    """
    z = 0.5 * h * np.asarray(y, dtype=float)
    if np.any(np.abs(z) >= 1.0):
        raise ValidationError(
            f"cell Peclet number {2 * np.abs(z).max():.3g} >= 2; refine the grid (N={round(1 / h)})"
        )
    return np.arctanh(z) * (2.0 / h)


@dataclass
class AxisFaces:
    left: np.ndarray   # -1 for a face on the window's lower boundary
    right: np.ndarray  # -1 for a face on the window's upper boundary
    flux: sp.csr_matrix  # face flux as a linear map of the cell values
    y: np.ndarray  # discrete affinity of (D^{-1} b_eff)_a at the face
    Daa: np.ndarray

    @cached_property
    def interior(self) -> np.ndarray:
        return (self.left >= 0) & (self.right >= 0)


class FluxOperator:
    def __init__(self, field: PeriodicField, grid: Grid):
        if field.dim != grid.dim:
            raise ValueError("field and grid dimensions differ")
        self.field = field
        self.grid = grid
        field.check_elliptic(grid.torus().centers)
        self.axes = [self._faces(a) for a in range(grid.dim)]

    def _faces(self, a: int) -> AxisFaces:
        g, f = self.grid, self.field
        h, n = g.h, g.dim
        left = np.arange(g.n_cells)
        right = g.shift(a, +1)
        if not g.periodic:
            first = np.flatnonzero(g.multi[:, a] == 0)
            left = np.concatenate([left, np.full(first.size, -1)])
            right = np.concatenate([right, first])
        anchor = np.where(left >= 0, left, right)
        xf = g.centers[anchor].copy()
        xf[:, a] += np.where(left >= 0, 0.5 * h, -0.5 * h)

        be = f.b_eff(xf)
        D = f.D(xf)
        y = np.linalg.solve(D, be[..., None])[..., 0][:, a]
        faces = np.arange(left.size)
        rows, cols, vals = [], [], []

        def add(face_idx, cell_idx, v):
            ok = cell_idx >= 0
            rows.append(face_idx[ok])
            cols.append(cell_idx[ok])
            vals.append(np.broadcast_to(v, face_idx.shape)[ok])

        add(faces, left, 0.5 * be[:, a] + D[:, a, a] / h)
        add(faces, right, 0.5 * be[:, a] - D[:, a, a] / h)
        for c in range(n):
            if c == a:
                continue
            coef = -D[:, a, c] / (4.0 * h)
            up, down = g.shift(c, +1), g.shift(c, -1)
            for cell in (left, right):
                ok = cell >= 0
                nb_up = np.where(ok, up[np.where(ok, cell, 0)], -1)
                nb_dn = np.where(ok, down[np.where(ok, cell, 0)], -1)
                add(faces, nb_up, coef)
                add(faces, nb_dn, -coef)
        flux = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(left.size, g.n_cells),
        )
        return AxisFaces(left, right, flux, discrete_affinity(y, h), D[:, a, a])

    @cached_property
    def generator(self) -> sp.csr_matrix:
        """``A`` with ``df/dt = A f`` on the cell values."""
        g = self.grid
        A = sp.csr_matrix((g.n_cells, g.n_cells))
        for ax in self.axes:
            faces = np.arange(ax.left.size)
            rows = np.concatenate([ax.left, ax.right])
            cols = np.concatenate([faces, faces])
            vals = np.concatenate([np.full(faces.size, -1.0 / g.h), np.full(faces.size, 1.0 / g.h)])
            ok = rows >= 0
            div = sp.csr_matrix((vals[ok], (rows[ok], cols[ok])), shape=(g.n_cells, faces.size))
            A = A + div @ ax.flux
        A = sp.csr_matrix(A)
        A.eliminate_zeros()
        return A

    def augmented_generator(self) -> sp.csr_matrix:
        """Generator on ``[cells, lost / h^n]``; every column sums to zero."""
        A = self.generator
        leak = -np.asarray(A.sum(axis=0)).ravel()
        n = self.grid.n_cells
        top = sp.hstack([A, sp.csr_matrix((n, 1))])
        bottom = sp.hstack([sp.csr_matrix(leak[None, :]), sp.csr_matrix((1, 1))])
        return sp.csr_matrix(sp.vstack([top, bottom]))

    def stable_step(self) -> float:
        """Largest admissible explicit step ``h^2 / (2n max|D| + h max|b_eff|)``."""
        X = self.grid.torus().centers
        f = self.field
        # include face midpoints so the bound sees the same samples as the scheme
        pts = [X] + [X + 0.5 * self.grid.h * np.eye(self.grid.dim)[a] for a in range(self.grid.dim)]
        Dmax = max(np.linalg.norm(f.D(p), ord=2, axis=(-2, -1)).max() for p in pts)
        bmax = max(np.linalg.norm(f.b_eff(p), axis=-1).max() for p in pts)
        h = self.grid.h
        return h * h / (2 * self.grid.dim * Dmax + h * bmax)
