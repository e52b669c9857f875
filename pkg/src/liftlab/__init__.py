"""Lifted Markov chains and periodic diffusions: entropy production, housekeeping heat and cycle windings."""

from .chain import (
    ChainSpec,
    Edge,
    ThermoSample,
    base_epr,
    base_thermo,
    evolve_base,
    relative_entropy,
    stationary_distribution,
    stationary_epr,
    validate_chain,
)
from .errors import (
    ConfigError,
    CurlObstruction,
    LiftLabError,
    NumericalAbort,
    ValidationError,
)
from .lift import (
    LiftSpec,
    WindowedDistribution,
    build_lift,
    default_radius,
    evolve_lift,
    fold,
    mutual_information,
    mutual_information_curve,
    potential_table,
)
from .paths import PathStats, sample_paths
from .series import ThermoSeries, cesaro_epr, energy_slope
from .topology import (
    CycleBasis,
    betti_number,
    build_cycle_basis,
    has_global_potential,
    potential_gain,
    winding_vector,
)

__version__ = "0.1.0"

__all__ = [
    "ChainSpec", "ConfigError", "CurlObstruction", "CycleBasis", "Edge", "LiftLabError", "LiftSpec",
    "NumericalAbort", "PathStats", "ThermoSample", "ThermoSeries", "ValidationError", "WindowedDistribution",
    "base_epr", "base_thermo", "betti_number", "build_cycle_basis", "build_lift", "cesaro_epr",
    "default_radius", "energy_slope", "evolve_base", "evolve_lift", "fold", "has_global_potential",
    "mutual_information", "mutual_information_curve", "potential_gain", "potential_table",
    "relative_entropy", "sample_paths", "stationary_distribution", "stationary_epr",
    "validate_chain", "winding_vector",
]
