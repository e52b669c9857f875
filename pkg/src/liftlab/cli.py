"""Command-line entry point ``liftlab``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import io
from .chain import base_thermo, evolve_base, stationary_distribution, stationary_epr
from .errors import ConfigError, CurlObstruction, NumericalAbort, ValidationError
from .topology import build_cycle_basis, has_global_potential

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3, 4

COMMANDS = (
    "chain-analyze", "chain-evolve", "lift-evolve", "lift-mi", "lift-sample",
    "fp-evolve", "fp-stationary", "verify",
)

# tolerances a user may override with --tol-overrides
TOLERANCES = {
    "leak_abort": 1e-6,
    "radius_tail": 1e-12,
    "curl_tol": None,
}


@dataclass
class RunConfig:
    command: str
    inputs: dict[str, str] = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    out: str | None = None
    seed: int = 0
    threads: int = 1
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCES))

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if self.seed < 0:
            raise ConfigError("--seed must be non-negative")
        p = self.params
        for key in ("t_end", "dt", "sigma"):
            if p.get(key) is not None and not p[key] > 0:
                raise ConfigError(f"--{key.replace('_', '-')} must be positive")
        for key, low in (("radius", 1), ("paths", 1), ("every", 1), ("grid_n", 4)):
            if p.get(key) is not None and p[key] < low:
                raise ConfigError(f"--{key.replace('_', '-')} must be at least {low}")

    def tol(self, name: str):
        return self.tolerances[name]


def read_tolerances(path: str | None) -> dict:
    tol = dict(TOLERANCES)
    if path is None:
        return tol
    obj = io.load_json(path)
    if not isinstance(obj, dict):
        raise ConfigError("tolerance overrides must be a JSON object")
    unknown = set(obj) - set(TOLERANCES)
    if unknown:
        raise ConfigError(f"unknown tolerance keys {sorted(unknown)}; known: {sorted(TOLERANCES)}")
    for k, v in obj.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            raise ConfigError(f"tolerance {k!r} must be a positive number")
        tol[k] = float(v)
    return tol


# ---------------------------------------------------------------- commands

def _distribution(spec, text: str | None, start: int) -> np.ndarray:
    if text is None:
        if not 0 <= start < spec.k:
            raise ValidationError(f"start state {start} outside 0..{spec.k - 1}")
        p = np.zeros(spec.k)
        p[start] = 1.0
        return p
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"--p0 must be comma-separated numbers: {exc}") from exc


def chain_analyze(cfg: RunConfig) -> int:
    spec = io.load_chain(cfg.inputs["chain"])
    basis = build_cycle_basis(spec)
    pi = stationary_distribution(spec)
    out = {"states": list(spec.states), **basis.to_json(spec),
           "pi": pi.tolist(), "stationary_epr": stationary_epr(spec),
           "has_global_potential": has_global_potential(basis)}
    io.write_json(cfg.out, out)
    return EXIT_OK


def chain_evolve(cfg: RunConfig) -> int:
    spec = io.load_chain(cfg.inputs["chain"])
    p = cfg.params
    p0 = _distribution(spec, p.get("p0"), p.get("start", 0))
    dt = p.get("dt") or spec.max_step()
    times, traj = evolve_base(spec, p0, p["t_end"], dt, every=p.get("every", 10))
    pi = stationary_distribution(spec)
    cols = ["t", *(f"p_{s}" for s in spec.states), "e_p", "dF_pi", "Qhk_pi", "F_pi", "H"]
    rows = []
    for t, q in zip(times, traj):
        s = base_thermo(spec, q, t, pi)
        rows.append([t, *q, s.e_p, s.dF_dt, s.q_hk, s.F, s.H])
    io.write_csv(cfg.out, cols, rows)
    return EXIT_OK


def _lift_for(cfg: RunConfig, t_end: float):
    from .lift import build_lift, default_radius

    spec = io.load_chain(cfg.inputs["chain"])
    R = cfg.params.get("radius") or default_radius(spec, t_end, tail=cfg.tol("radius_tail"))
    return build_lift(spec, R)


def lift_evolve(cfg: RunConfig) -> int:
    from .lift import WindowedDistribution, evolve_lift

    p = cfg.params
    lift = _lift_for(cfg, p["t_end"])
    p0 = _distribution(lift.base, p.get("p0"), p.get("start", 0))
    w0 = WindowedDistribution.from_base(lift, p0)
    run = evolve_lift(lift, w0, p["t_end"], p.get("dt") or lift.max_step(), every=p.get("every", 10),
                      leak_abort=cfg.tol("leak_abort"))
    io.write_csv(cfg.out, run.series.columns, run.series.rows())
    return EXIT_OK


def lift_mi(cfg: RunConfig) -> int:
    from .lift import mutual_information_curve

    p = cfg.params
    try:
        times = [float(x) for x in p["times"].split(",")]
    except ValueError as exc:
        raise ConfigError(f"--times must be comma-separated numbers: {exc}") from exc
    lift = _lift_for(cfg, max(times))
    mi = mutual_information_curve(lift, p.get("start", 0), times, p.get("dt"))
    io.write_csv(cfg.out, ["t", "mi"], zip(sorted(times), mi))
    return EXIT_OK


def lift_sample(cfg: RunConfig) -> int:
    from .lift import build_lift
    from .paths import sample_paths

    p = cfg.params
    lift = build_lift(io.load_chain(cfg.inputs["chain"]), 1)
    st = sample_paths(lift, p.get("start", 0), p["t_end"], p["paths"], cfg.seed, threads=cfg.threads)
    io.write_json(cfg.out, {
        "n_paths": st.n_paths, "t_end": st.t_end, "seed": st.seed,
        "mean_drop_rate": st.mean_rate, "stderr": st.stderr,
        "mean_winding": st.mean_winding.tolist(), "mean_jumps": float(st.n_jumps.mean()),
    })
    if p.get("per_path"):
        cols = ["path", "end_state", *(f"w_{m}" for m in range(lift.n)), "drop", "jumps"]
        rows = ([i, int(e), *w.tolist(), d, int(j)]
                for i, (e, w, d, j) in enumerate(zip(st.end_state, st.winding, st.drop, st.n_jumps)))
        io.write_csv(p["per_path"], cols, rows)
    return EXIT_OK


def _field(cfg: RunConfig):
    from .diffusion.field import PeriodicField

    f = io.load_field(cfg.inputs["field"])
    N = cfg.params.get("grid_n")
    return f if N is None else PeriodicField(f.dim, f.drift, f.diffusion, N)


def fp_evolve(cfg: RunConfig) -> int:
    from .diffusion import LiftedDensity, TorusDensity, default_window, evolve_fp_lifted, evolve_fp_torus

    p = cfg.params
    f = _field(cfg)
    N = f.grid_n
    if p.get("lift"):
        sigma = p.get("sigma") or 1.0
        R = p.get("radius") or default_window(f, p["t_end"], spread=6 * sigma)
        f0 = LiftedDensity.gaussian(f.dim, N, R, sigma)
        run = evolve_fp_lifted(f, f0, p["t_end"], p.get("dt"), every=p.get("every", 10),
                               leak_abort=cfg.tol("leak_abort"), curl_tol=cfg.tol("curl_tol"))
    else:
        f0 = TorusDensity.from_function(
            f.dim, N, lambda X: np.exp(2.0 * np.cos(2 * np.pi * X).sum(axis=1)))
        run = evolve_fp_torus(f, f0, p["t_end"], p.get("dt"), every=p.get("every", 10), curl_tol=cfg.tol("curl_tol"))
    io.write_csv(cfg.out, run.series.columns, run.series.rows())
    return EXIT_OK


def fp_stationary(cfg: RunConfig) -> int:
    from .diffusion import curl_check, reconstruct_potential, stationary_density, torus_epr

    f = _field(cfg)
    rho = stationary_density(f)
    report = curl_check(f)
    out = {
        "dim": f.dim, "grid_n": f.grid_n, "epr": torus_epr(f, rho),
        "max_curl": report.max_curl, "loop_integrals": report.loop_integrals.tolist(),
    }
    try:
        pot = reconstruct_potential(f, curl_tol=cfg.tol("curl_tol"))
        out["detailed_balance"] = {"loop": pot.loop.tolist(), "flux_residual": pot.flux_residual}
    except CurlObstruction as exc:
        out["detailed_balance"] = None
        out["curl_obstruction"] = str(exc)
    out["density"] = rho.values.tolist()
    io.write_json(cfg.out, out)
    return EXIT_OK


def verify(cfg: RunConfig) -> int:
    from .acceptance import run_all

    results = run_all(emit=lambda line: print(line, flush=True))
    failed = [r.id for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAILED
    print("all acceptance criteria passed")
    return EXIT_OK


HANDLERS = {
    "chain-analyze": chain_analyze, "chain-evolve": chain_evolve,
    "lift-evolve": lift_evolve, "lift-mi": lift_mi, "lift-sample": lift_sample,
    "fp-evolve": fp_evolve, "fp-stationary": fp_stationary, "verify": verify,
}


def run(cfg: RunConfig) -> int:
    return HANDLERS[cfg.command](cfg)


# ---------------------------------------------------------------- parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="liftlab", description="Thermodynamics of lifted Markov chains and periodic diffusions.")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--tol-overrides", metavar="FILE", help="JSON object overriding named tolerances")
    groups = ap.add_subparsers(dest="group", required=True)

    def common(p, chain=True):
        if chain:
            p.add_argument("--chain", required=True, help="chain JSON file")
        p.add_argument("--t-end", type=float, required=True)
        p.add_argument("--dt", type=float)
        p.add_argument("--every", type=int, default=10, help="output every N steps")

    chain = groups.add_parser("chain").add_subparsers(dest="cmd", required=True)
    p = chain.add_parser("analyze", help="cycle basis, stationary law and EPR")
    p.add_argument("--chain", required=True)
    p = chain.add_parser("evolve", help="master equation with thermodynamic series")
    common(p)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--p0", help="comma-separated initial law (default: delta at --start)")

    lift = groups.add_parser("lift").add_subparsers(dest="cmd", required=True)
    p = lift.add_parser("evolve", help="windowed lift evolution")
    common(p)
    p.add_argument("--radius", type=int)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--p0")
    p = lift.add_parser("mi", help="mutual information MI(L_1, L_t)")
    p.add_argument("--chain", required=True)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--times", required=True, help="comma-separated times > 1")
    p.add_argument("--radius", type=int)
    p.add_argument("--dt", type=float)
    p = lift.add_parser("sample", help="exact-jump path sampling")
    p.add_argument("--chain", required=True)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--t-end", type=float, default=100.0)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--per-path", metavar="CSV", help="also write per-path statistics")

    fp = groups.add_parser("fp").add_subparsers(dest="cmd", required=True)
    p = fp.add_parser("evolve", help="Fokker-Planck evolution on the torus or its lift")
    p.add_argument("--field", required=True)
    common(p, chain=False)
    p.add_argument("--lift", action="store_true", help="evolve on R^n with a Gaussian start")
    p.add_argument("--sigma", type=float, help="initial Gaussian width for --lift (default 1)")
    p.add_argument("--radius", type=int)
    p.add_argument("--grid-n", type=int)
    p = fp.add_parser("stationary", help="stationary density, EPR, curl test")
    p.add_argument("--field", required=True)
    p.add_argument("--grid-n", type=int)

    groups.add_parser("verify", help="run acceptance criteria AC-1..AC-14")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    command = ns.group if ns.group == "verify" else f"{ns.group}-{ns.cmd}"
    values = {k: v for k, v in vars(ns).items() if k not in {"group", "cmd", "out", "seed", "threads", "tol_overrides"}}
    inputs = {k: values.pop(k) for k in ("chain", "field") if k in values}
    return RunConfig(command, inputs, values, ns.out, ns.seed, ns.threads, read_tolerances(ns.tol_overrides))


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return run(config_from_args(ns))
    except ConfigError as exc:
        print(f"liftlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"liftlab: invalid input ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalAbort as exc:
        print(f"liftlab: numerical abort ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
