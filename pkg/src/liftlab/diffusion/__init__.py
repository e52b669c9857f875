"""Fokker-Planck diffusions with periodic coefficients on T^n and R^n, n in {1, 2}."""

from .field import FourierSeries, PeriodicField, constant_field
from .fp import (
    FPRun,
    LiftedDensity,
    TorusDensity,
    default_window,
    density_covariance,
    evolve_fp_lifted,
    evolve_fp_torus,
    gaussian_entropy_bound,
    stationary_density,
    torus_epr,
)
from .grid import FluxOperator, Grid
from .potential import CurlReport, Potential, curl_check, reconstruct_potential

__all__ = [
    "CurlReport", "FPRun", "FluxOperator", "FourierSeries", "Grid", "LiftedDensity",
    "PeriodicField", "Potential", "TorusDensity", "constant_field", "curl_check",
    "default_window", "density_covariance", "evolve_fp_lifted", "evolve_fp_torus",
    "gaussian_entropy_bound", "reconstruct_potential", "stationary_density", "torus_epr",
]
