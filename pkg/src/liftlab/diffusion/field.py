"""Periodic drift and diffusion coefficients as truncated Fourier series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ValidationError

MAX_HARMONIC = 8
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class FourierSeries:
    """``const + sum a cos(2 pi k.x) + sum a sin(2 pi k.x)`` with integer wave vectors ``k``."""

    dim: int
    const: float = 0.0
    cos: tuple[tuple[tuple[int, ...], float], ...] = ()
    sin: tuple[tuple[tuple[int, ...], float], ...] = ()

    @classmethod
    def from_json(cls, obj: dict, dim: int) -> "FourierSeries":
        if not isinstance(obj, dict):
            raise ConfigError(f"Fourier series must be an object, got {type(obj).__name__}")
        unknown = set(obj) - {"const", "cos", "sin"}
        if unknown:
            raise ConfigError(f"unknown Fourier series keys {sorted(unknown)}")
        terms = {}
        for kind in ("cos", "sin"):
            parsed = []
            for entry in obj.get(kind, []):
                if not isinstance(entry, (list, tuple)) or len(entry) != dim + 1:
                    raise ConfigError(f"{kind} term {entry!r} must be [k_1..k_{dim}, amplitude]")
                ks = tuple(int(k) for k in entry[:dim])
                if any(k != float(v) for k, v in zip(ks, entry[:dim])):
                    raise ConfigError(f"wave numbers must be integers in {entry!r}")
                if max(abs(k) for k in ks) > MAX_HARMONIC:
                    raise ConfigError(f"harmonic in {entry!r} exceeds {MAX_HARMONIC}")
                parsed.append((ks, float(entry[dim])))
            terms[kind] = tuple(parsed)
        return cls(dim, float(obj.get("const", 0.0)), terms["cos"], terms["sin"])

    def to_json(self) -> dict:
        out: dict = {"const": self.const}
        if self.cos:
            out["cos"] = [[*k, a] for k, a in self.cos]
        if self.sin:
            out["sin"] = [[*k, a] for k, a in self.sin]
        return out

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[:-1], self.const)
        for k, a in self.cos:
            out += a * np.cos(TWO_PI * (X @ np.array(k, dtype=float)))
        for k, a in self.sin:
            out += a * np.sin(TWO_PI * (X @ np.array(k, dtype=float)))
        return out

    def grad(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape)
        for k, a in self.cos:
            kv = np.array(k, dtype=float)
            out -= (a * TWO_PI * np.sin(TWO_PI * (X @ kv)))[..., None] * kv
        for k, a in self.sin:
            kv = np.array(k, dtype=float)
            out += (a * TWO_PI * np.cos(TWO_PI * (X @ kv)))[..., None] * kv
        return out


def constant(dim: int, value: float) -> FourierSeries:
    return FourierSeries(dim, float(value))


@dataclass(frozen=True)
class PeriodicField:
    """Drift ``b`` (n series) and symmetric diffusion matrix ``D`` (n x n series)."""

    dim: int
    drift: tuple[FourierSeries, ...]
    diffusion: tuple[tuple[FourierSeries, ...], ...]
    grid_n: int = 64

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dimension must be 1 or 2, got {self.dim}")
        if len(self.drift) != self.dim or len(self.diffusion) != self.dim:
            raise ValidationError("drift/diffusion sizes do not match the dimension")
        if any(len(row) != self.dim for row in self.diffusion):
            raise ValidationError("diffusion must be a square matrix")
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                if self.diffusion[i][j] != self.diffusion[j][i]:
                    raise ValidationError(f"diffusion entries ({i},{j}) and ({j},{i}) differ")

    @classmethod
    def from_json(cls, obj: dict) -> "PeriodicField":
        if not isinstance(obj, dict):
            raise ConfigError("field description must be a JSON object")
        unknown = set(obj) - {"dim", "drift", "diffusion", "grid_n"}
        if unknown:
            raise ConfigError(f"unknown field keys {sorted(unknown)}")
        try:
            dim = int(obj["dim"])
            drift = tuple(FourierSeries.from_json(d, dim) for d in obj["drift"])
            diff = tuple(tuple(FourierSeries.from_json(d, dim) for d in row) for row in obj["diffusion"])
        except KeyError as exc:
            raise ConfigError(f"field description is missing {exc}") from exc
        except TypeError as exc:
            raise ConfigError(f"malformed field description: {exc}") from exc
        grid_n = int(obj.get("grid_n", 64))
        if grid_n < 4:
            raise ConfigError("grid_n must be at least 4")
        return cls(dim, drift, diff, grid_n)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "drift": [d.to_json() for d in self.drift],
            "diffusion": [[d.to_json() for d in row] for row in self.diffusion],
            "grid_n": self.grid_n,
        }

    def b(self, X) -> np.ndarray:
        return np.stack([s(X) for s in self.drift], axis=-1)

    def D(self, X) -> np.ndarray:
        return np.stack([np.stack([s(X) for s in row], axis=-1) for row in self.diffusion], axis=-2)

    def div_D(self, X) -> np.ndarray:
        """Row divergence ``(div D)_i = sum_j d_j D_ij``, from the exact series derivatives."""
        X = np.asarray(X, dtype=float)
        return np.stack(
            [sum(self.diffusion[i][j].grad(X)[..., j] for j in range(self.dim)) for i in range(self.dim)],
            axis=-1,
        )

    def b_eff(self, X) -> np.ndarray:
        """Drift of the divergence form ``df/dt = -div(b_eff f - D grad f)``."""
        return self.b(X) - self.div_D(X)

    def force(self, X) -> np.ndarray:
        """``v = -D^{-1}(div D - b)``; a gradient exactly when a detailed-balanced measure exists."""
        return np.linalg.solve(self.D(X), self.b_eff(X)[..., None])[..., 0]

    def check_elliptic(self, X, min_eig: float = 1e-8) -> None:
        eig = np.linalg.eigvalsh(self.D(X))
        if eig.min() < min_eig:
            raise ValidationError(f"diffusion matrix not positive definite on the grid (min eigenvalue {eig.min():.3e})")


def constant_field(b0, D0, grid_n: int = 64) -> PeriodicField:
    """Constant drift vector ``b0`` and constant diffusion matrix ``D0``."""
    b0 = np.atleast_1d(np.asarray(b0, dtype=float))
    n = b0.size
    D0 = np.asarray(D0, dtype=float) * (np.eye(n) if np.ndim(D0) == 0 else 1.0)
    return PeriodicField(
        n,
        tuple(constant(n, x) for x in b0),
        tuple(tuple(constant(n, D0[i, j]) for j in range(n)) for i in range(n)),
        grid_n,
    )
