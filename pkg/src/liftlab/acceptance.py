"""Acceptance criteria AC-1 ... AC-14, runnable from the CLI (``liftlab verify``) and from pytest.

Each check returns a :class:`Criterion` with the measured quantities; it
never raises on a failed threshold. Expensive scenario runs are shared
between checks through small caches.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .chain import ChainSpec, base_thermo, evolve_base, stationary_distribution, stationary_epr
from .diffusion import (
    LiftedDensity,
    TorusDensity,
    constant_field,
    curl_check,
    default_window,
    evolve_fp_lifted,
    evolve_fp_torus,
    reconstruct_potential,
    stationary_density,
    torus_epr,
)
from .diffusion.field import PeriodicField
from .diffusion.grid import Grid
from .errors import CurlObstruction
from .io import chain_from_json, load_json
from .lift import WindowedDistribution, build_lift, default_radius, evolve_lift, fold, mutual_information_curve
from .paths import sample_paths
from .series import cesaro_epr, energy_slope
from .topology import build_cycle_basis, has_global_potential

LOG2 = float(np.log(2.0))

# scenario parameters
RING_RADIUS = 40
RING_T_END = 50.0
RING_DT = 0.01
MI_TIMES = (2.0, 5.0, 10.0, 20.0, 50.0)
RANDOM_CHAINS = 20
RANDOM_SEED = 20240517
RANDOM_T_END = 1.0
PATH_SEED = 1
PATH_COUNT = 10_000
PATH_T_END = 100.0
FP_N = 32
FP_SIGMA0 = 4.0
FP_T_END = 20.0


@dataclass
class Criterion:
    id: str
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{self.id:<6} {'PASS' if self.passed else 'FAIL'}  {self.title}: {self.detail} [{self.seconds:.2f}s]"


def fixture(name: str):
    return load_json(resources.files("liftlab") / "fixtures" / name)


def fixture_chain(name: str) -> ChainSpec:
    return chain_from_json(fixture(name))


def fixture_field(name: str, N: int | None = None) -> PeriodicField:
    f = PeriodicField.from_json(fixture(name))
    return f if N is None else PeriodicField(f.dim, f.drift, f.diffusion, N)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# ---------------------------------------------------------------- scenarios

@lru_cache(maxsize=1)
def ring_run():
    """Biased 3-ring lifted from a delta at ``(0, 0)``."""
    ring = fixture_chain("biased_3ring.json")
    lift = build_lift(ring, RING_RADIUS)
    run, secs = _timed(
        lambda: evolve_lift(lift, WindowedDistribution.delta(lift, 0), RING_T_END, RING_DT, every=10, keep_snapshots=True)
    )
    return lift, run, secs


def random_chain(rng: np.random.Generator) -> ChainSpec:
    k = int(rng.integers(3, 7))
    order = rng.permutation(k)
    pairs = {tuple(sorted((int(order[v]), int(order[rng.integers(0, v)])))) for v in range(1, k)}
    free = [(i, j) for i in range(k) for j in range(i + 1, k) if (i, j) not in pairs]
    betti = int(rng.integers(1, min(3, len(free)) + 1))
    for idx in rng.choice(len(free), size=betti, replace=False):
        pairs.add(free[idx])
    rates = np.exp(rng.uniform(np.log(0.25), np.log(2.0), size=(len(pairs), 2)))
    return ChainSpec.from_rates(k, [(i, j, a, b) for (i, j), (a, b) in zip(sorted(pairs), rates)])


@dataclass
class RandomRun:
    chain: ChainSpec
    betti: int
    p0: np.ndarray
    base_times: np.ndarray
    base_traj: np.ndarray
    base_decomp: float
    base_F: np.ndarray
    lift_series: object
    lift_snapshots: list
    fold_error: np.ndarray
    lost: np.ndarray


@lru_cache(maxsize=1)
def random_runs():
    rng = np.random.default_rng(RANDOM_SEED)
    out = []
    t0 = time.perf_counter()
    for _ in range(RANDOM_CHAINS):
        chain = random_chain(rng)
        p0 = rng.dirichlet(np.ones(chain.k))
        basis = build_cycle_basis(chain)
        lift = build_lift(chain, default_radius(chain, RANDOM_T_END, basis=basis))
        dt = chain.max_step()
        times, traj = evolve_base(chain, p0, RANDOM_T_END, dt, every=10)
        pi = stationary_distribution(chain)
        samples = [base_thermo(chain, p, t, pi) for t, p in zip(times, traj)]
        decomp = max(s.decomposition_error() for s in samples)
        if has_global_potential(basis):
            log_mu = -basis.tree_potential
            mu = np.exp(log_mu) / np.exp(log_mu).sum()
            decomp = max(decomp, max(base_thermo(chain, p, t, mu).decomposition_error() for t, p in zip(times, traj)))
        run = evolve_lift(lift, WindowedDistribution.from_base(lift, p0), RANDOM_T_END, dt, every=10, keep_snapshots=True)
        folded = np.array([fold(lift, w) for w in run.snapshots])
        out.append(RandomRun(
            chain, basis.n, p0, times, traj, decomp, np.array([s.F for s in samples]), run.series, run.snapshots,
            np.abs(folded - traj).max(axis=1), np.array([w.lost_mass for w in run.snapshots]),
        ))
    return out, time.perf_counter() - t0


@lru_cache(maxsize=1)
def fp_lifted_run():
    f = constant_field(1.0, 1.0, FP_N)
    R = default_window(f, FP_T_END, spread=6 * FP_SIGMA0)
    f0 = LiftedDensity.gaussian(1, FP_N, R, FP_SIGMA0)
    return _timed(lambda: evolve_fp_lifted(f, f0, FP_T_END, every=50))


@lru_cache(maxsize=1)
def fp_torus_run():
    f = fixture_field("variable_drift_1d.json", 64)
    f0 = TorusDensity.from_function(1, 64, lambda X: np.exp(2.0 * np.cos(2 * np.pi * X[:, 0])))
    return _timed(lambda: evolve_fp_torus(f, f0, 5.0, every=20))


# ---------------------------------------------------------------- criteria

def ac1() -> Criterion:
    ring = fixture_chain("biased_3ring.json")
    stationary_epr(ring)  # warm caches outside the timed call
    ring = fixture_chain("biased_3ring.json")
    val, secs = _timed(lambda: stationary_epr(ring))
    # oracle: per edge (2/3 - 1/3) log 2 at the uniform law, three edges
    oracle = 3 * (2.0 / 3 - 1.0 / 3) * LOG2
    err = abs(val - oracle)
    ok = err <= 1e-10 and secs < 1e-3
    return Criterion("AC-1", "biased 3-ring stationary EPR", ok,
                     f"e_p={val:.15f}, |err|={err:.2e}, runtime={secs * 1e3:.3f} ms", secs, {"epr": val})


def ac2() -> Criterion:
    runs, secs = random_runs()
    base = max(r.base_decomp for r in runs)
    lift_pi = max(np.abs(r.lift_series["e_p"] - r.lift_series["Qhk_pi"] + r.lift_series["dF_pi"]).max() for r in runs)
    lift_mu = max(np.abs(r.lift_series["e_p"] - r.lift_series["Qhk_mu"] + r.lift_series["dF_mu"]).max() for r in runs)
    worst = max(base, lift_pi, lift_mu)
    ok = worst <= 1e-8 and secs < 30
    bettis = sorted(r.betti for r in runs)
    return Criterion("AC-2", "decomposition identity on random chains", ok,
                     f"max residual base={base:.2e} lift(pi)={lift_pi:.2e} lift(mu)={lift_mu:.2e}; "
                     f"betti={bettis}; runtime={secs:.1f} s", secs)


def ac3() -> Criterion:
    _, run, secs = ring_run()
    q = run.series["Qhk_mu"]
    return Criterion("AC-3", "housekeeping heat against mu vanishes", bool(q.max() <= 1e-10),
                     f"max Q_hk^mu={q.max():.2e}, min={q.min():.2e}", secs)


def ac4() -> Criterion:
    _, run, secs = ring_run()
    c50 = cesaro_epr(run.series, 50.0)
    c10 = cesaro_epr(run.series, 10.0)
    e50, e10 = abs(c50 - LOG2) / LOG2, abs(c10 - LOG2) / LOG2
    ok = e50 <= 0.05 and e50 < e10 and secs < 60
    return Criterion("AC-4", "Cesaro convergence of EPR", ok,
                     f"avg(50)={c50:.6f} (rel err {e50:.2%}), avg(10)={c10:.6f} (rel err {e10:.2%}), "
                     f"runtime={secs:.1f} s", secs, {"c50": c50, "c10": c10})


def ac5() -> Criterion:
    _, run, secs = ring_run()
    slope = energy_slope(run.series, (40.0, 50.0))
    rel = abs(slope + LOG2) / LOG2
    return Criterion("AC-5", "energy slope", rel <= 0.01, f"dE/dt={slope:.6f}, rel err {rel:.2e}", secs)


def ac6() -> Criterion:
    _, run, secs = ring_run()
    t, H = run.series.t, run.series["H"]
    H1 = float(np.interp(1.0, t, H))
    fit = (t > 1.0 + 1e-9) & (t <= 10.0 + 1e-9)
    C = float(np.max((H[fit] - H1) / np.log(t[fit])))
    late = (t > 10.0 + 1e-9) & (t <= 50.0 + 1e-9)
    slack = float(np.max(H[late] - (H1 + C * np.log(t[late]))))
    ratio = float(H[-1] / t[-1])
    ok = slack <= 0 and ratio <= 0.05
    return Criterion("AC-6", "logarithmic entropy growth", ok,
                     f"C={C:.4f}, max excess on (10,50]={slack:.3e}, H(50)/50={ratio:.4f} (threshold 0.05)", secs,
                     {"C": C, "ratio": ratio})


def ac7() -> Criterion:
    runs, secs = random_runs()
    worst = -np.inf
    for r in runs:
        for arr in (r.base_F, r.lift_series["F_pi"], r.lift_series["F_mu"]):
            worst = max(worst, float(np.diff(arr).max()))
    return Criterion("AC-7", "monotone relative entropy", worst <= 1e-10, f"largest step increase {worst:.2e}", secs)


def ac8() -> Criterion:
    runs, secs = random_runs()
    excess = max(float(np.max(r.fold_error - r.lost)) for r in runs)
    worst = max(float(r.fold_error.max()) for r in runs)
    return Criterion("AC-8", "fold commutes with evolution", excess <= 1e-9,
                     f"max L_inf gap {worst:.2e}; max gap minus lost mass {excess:.2e}", secs)


def ac9() -> Criterion:
    ring = fixture_chain("biased_3ring.json")
    lift = build_lift(ring, default_radius(ring, max(MI_TIMES)))
    mi, secs = _timed(lambda: mutual_information_curve(lift, 0, MI_TIMES))
    ref = np.array(fixture("mi_reference.json")["mi"])
    monotone = bool(np.all(np.diff(mi) <= 1e-12))
    drift = float(np.abs(mi - ref).max())
    ok = monotone and mi[-1] <= 0.01 and drift <= 1e-8
    vals = ", ".join(f"{v:.6f}" for v in mi)
    return Criterion("AC-9", "mutual information decay", ok,
                     f"MI at t={list(MI_TIMES)}: [{vals}]; non-increasing={monotone}; MI(50)={mi[-1]:.6f} "
                     f"(threshold 0.01); |MI - reference|={drift:.1e}", secs, {"mi": mi})


def ac10() -> Criterion:
    ring = fixture_chain("biased_3ring.json")
    lift = build_lift(ring, 1)
    st, secs = _timed(lambda: sample_paths(lift, 0, PATH_T_END, PATH_COUNT, PATH_SEED))
    z = (st.mean_rate - LOG2) / st.stderr
    ok = abs(z) <= 3 and secs < 60
    return Criterion("AC-10", "path estimator of the drop rate", ok,
                     f"rate={st.mean_rate:.5f} +- {st.stderr:.5f} ({z:+.2f} se), runtime={secs:.1f} s", secs)


def ac11() -> Criterion:
    t0 = time.perf_counter()
    f256 = constant_field(1.0, 1.0, 256)
    epr256 = torus_epr(f256, stationary_density(f256))
    f128 = constant_field(1.0, 1.0, 128)
    epr128 = torus_epr(f128, stationary_density(f128))
    ratio = abs(epr128 - 1.0) / abs(epr256 - 1.0)
    run, run_secs = fp_lifted_run()
    ces = cesaro_epr(run.series, FP_T_END)
    slope = energy_slope(run.series, (15.0, 20.0))
    checks = {
        "torus": abs(epr256 - 1.0) <= 1e-3,
        "cesaro": abs(ces - 1.0) <= 0.05,
        "slope": abs(slope + 1.0) <= 0.02,
        "ratio": abs(ratio - 4.0) <= 1.0,
    }
    secs = time.perf_counter() - t0
    return Criterion("AC-11", "diffusion EPR oracle", all(checks.values()),
                     f"torus e_p(N=256)={epr256:.8f}, lifted avg(20)={ces:.5f}, dE/dt={slope:.5f}, "
                     f"error ratio N=128/N=256={ratio:.3f}", secs)


def ac12() -> Criterion:
    t0 = time.perf_counter()
    errs = {}
    for N in (64, 128):
        f = fixture_field("gradient_2d.json", N)
        pot = reconstruct_potential(f)
        X = Grid(2, N).centers
        A = 0.05
        g0 = A * np.cos(2 * np.pi * X[:, 0]) + A * np.sin(2 * np.pi * X[:, 1]) + A / 2 * np.cos(2 * np.pi * X.sum(1))
        errs[N] = (float(np.abs((pot.g - pot.g.mean()) - (g0 - g0.mean())).max()), pot.flux_residual)
    order = float(np.log2(errs[64][0] / errs[128][0]))
    h = 1 / 128
    flux = max(errs[64][1], errs[128][1])
    grad_ok = errs[128][0] <= h * h and order >= 1.8 and flux <= 1e-6
    try:
        reconstruct_potential(fixture_field("shear_2d.json"))
        shear_ok, curl = False, curl_check(fixture_field("shear_2d.json")).max_curl
    except CurlObstruction as exc:
        curl = exc.max_curl
        shear_ok = abs(curl - 2 * np.pi) <= 0.05 * 2 * np.pi
    secs = time.perf_counter() - t0
    return Criterion("AC-12", "curl criterion and potential reconstruction", grad_ok and shear_ok,
                     f"g error N=128 {errs[128][0]:.2e} (order {order:.2f}), max flux residual {flux:.2e}; "
                     f"shear max|curl|={curl:.4f} vs 2*pi={2 * np.pi:.4f}", secs)


def ac13() -> Criterion:
    run, secs = fp_lifted_run()
    s = run.series
    t = s.t
    gap = float(np.max(s["H"] - s["S_bound"]))
    cov = np.abs(s["cov_00"])
    fit = (t >= 1.0 - 1e-9) & (t <= 5.0 + 1e-9)
    C = float(np.max(cov[fit] / t[fit] ** 2))
    late = (t > 5.0 + 1e-9) & (t <= 20.0 + 1e-9)
    cov_excess = float(np.max(cov[late] - C * t[late] ** 2))
    ok = gap <= 1e-12 and cov_excess <= 0
    return Criterion("AC-13", "Gaussian entropy and covariance bounds", ok,
                     f"max S - bound = {gap:.3e}; C={C:.3f}, max |Cov| - C t^2 on (5,20] = {cov_excess:.3e}", secs)


def ac14() -> Criterion:
    t0 = time.perf_counter()
    torus, _ = fp_torus_run()
    lifted, _ = fp_lifted_run()
    torus_rate = float(np.max(np.abs(torus.mass - 1.0)) / torus.series.t[-1])
    fp_lift = float(np.max(np.abs(lifted.mass - 1.0)))
    chain = 0.0
    lift = 0.0
    for r in random_runs()[0]:
        chain = max(chain, float(np.abs(r.base_traj.sum(axis=1) - 1.0).max()))
        lift = max(lift, max(abs(w.probs.sum() + w.lost_mass - 1.0) for w in r.lift_snapshots))
    _, ring, _ = ring_run()
    lift = max(lift, max(abs(w.probs.sum() + w.lost_mass - 1.0) for w in ring.snapshots))
    ok = torus_rate <= 1e-12 and fp_lift <= 1e-12 and chain <= 1e-12 and lift <= 1e-12
    secs = time.perf_counter() - t0
    return Criterion("AC-14", "conservation", ok,
                     f"torus drift {torus_rate:.1e}/unit time, diffusion lift {fp_lift:.1e}, "
                     f"chain {chain:.1e}, chain lift {lift:.1e}", secs)


CRITERIA = (ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8, ac9, ac10, ac11, ac12, ac13, ac14)


def run_all(emit=print) -> list[Criterion]:
    results = []
    for check in CRITERIA:
        res = check()
        if emit is not None:
            emit(res.line())
        results.append(res)
    return results
