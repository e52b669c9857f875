"""Sampled thermodynamic time series and the reductions computed on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .errors import InsufficientSpan

LIFT_COLUMNS = (
    "t", "e_p", "dF_pi", "dF_mu", "Qhk_pi", "Qhk_mu",
    "F_pi", "F_mu", "E", "H", "cesaro_ep", "lost_mass",
)


@dataclass
class ThermoSeries:
    """Column-oriented table of per-output-step diagnostics.

    The column named ``dF_pi``/``Qhk_pi``/``F_pi`` always refers to the
    periodic stationary measure (``pi`` for chains, ``rho`` for
    diffusions) and ``*_mu`` to the detailed-balanced one.
    """

    columns: tuple[str, ...] = LIFT_COLUMNS
    data: dict[str, list] = field(default_factory=dict)

    def __post_init__(self):
        for c in self.columns:
            self.data.setdefault(c, [])
        self._q_integral = 0.0

    def append(self, **row):
        missing = set(self.columns) - set(row) - {"cesaro_ep"}
        if missing:
            raise KeyError(f"row is missing {sorted(missing)}")
        for c in self.columns:
            if c != "cesaro_ep":
                self.data[c].append(float(row[c]))
        if "cesaro_ep" in self.columns:
            self.data["cesaro_ep"].append(self._running_cesaro())

    def _running_cesaro(self) -> float:
        t, q, F = self.data["t"], self.data["Qhk_pi"], self.data["F_pi"]
        if len(t) < 2:
            return float("nan")
        self._q_integral += 0.5 * (q[-1] + q[-2]) * (t[-1] - t[-2])
        return (self._q_integral - (F[-1] - F[0])) / (t[-1] - t[0])

    def __getitem__(self, name: str) -> np.ndarray:
        return np.asarray(self.data[name], dtype=float)

    def __len__(self) -> int:
        return len(self.data["t"])

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    def row(self, m: int) -> dict:
        return {c: self.data[c][m] for c in self.columns}

    def rows(self):
        for m in range(len(self)):
            yield [self.data[c][m] for c in self.columns]


def _cesaro(t: np.ndarray, q_hk: np.ndarray, F: np.ndarray, T: float) -> float:
    # (1/T) int_0^T e_p = (1/T) [int_0^T Q_hk dt - (F(T) - F(0))]
    # e_p has an integrable log singularity at t=0 for concentrated initial
    # data; Q_hk and F are regular, so only Q_hk is integrated numerically.
    mask = t <= T + 1e-12
    ts, qs, fs = t[mask], q_hk[mask], F[mask]
    if ts[-1] < T - 1e-12:
        qs = np.append(qs, np.interp(T, t, q_hk))
        fs = np.append(fs, np.interp(T, t, F))
        ts = np.append(ts, T)
    integral = trapezoid(qs, ts) - (fs[-1] - fs[0])
    return float(integral / T)


def cesaro_epr(series: ThermoSeries, T: float) -> float:
    """Time average ``(1/T) int_0^T e_p dt`` over the sampled run."""
    t = series.t
    if len(t) < 2 or t[0] > 1e-12 or T <= 0 or t[-1] < T - 1e-9:
        raise InsufficientSpan(f"series covers [{t[0] if len(t) else 'nan'}, {t[-1] if len(t) else 'nan'}], need [0, {T}]")
    return _cesaro(t, series["Qhk_pi"], series["F_pi"], T)


def energy_slope(series: ThermoSeries, window: tuple[float, float]) -> float:
    """Least-squares slope of the mean potential energy over ``window``."""
    a, b = window
    t = series.t
    if len(t) == 0 or a < t[0] - 1e-9 or b > t[-1] + 1e-9 or b <= a:
        raise InsufficientSpan(f"window {window} not inside the series span")
    mask = (t >= a - 1e-9) & (t <= b + 1e-9)
    if mask.sum() < 3:
        raise InsufficientSpan(f"only {mask.sum()} samples inside {window}")
    slope, _ = np.polyfit(t[mask], series["E"][mask], 1)
    return float(slope)
