"""
Rubidium vapor in the hyperfine Paschen-Back regime.

Zeeman-resolved level structure, D-line transition catalogs, weak-probe
transmission spectra, three-level EIT/Autler-Townes profiles, rate-equation
optical pumping and least-squares fits, plus a config-driven CLI.
"""
__version__ = "0.1.0"

from .atom_data import lookup, mixture, vapor_number_density
from .zeeman import eigenstates
from .transitions import compute_lines, find_line, line_catalog, solve_line
from .spectrum import MediumConfig, transmission_spectrum
from .eit import LambdaSystem, doppler_averaged_profile, transparency_metrics
from .pumping import PumpScheme, steady_state
from .fitting import DataSeries, FitResult

__all__ = [
    "__version__",
    "lookup",
    "mixture",
    "vapor_number_density",
    "eigenstates",
    "compute_lines",
    "find_line",
    "line_catalog",
    "solve_line",
    "MediumConfig",
    "transmission_spectrum",
    "LambdaSystem",
    "doppler_averaged_profile",
    "transparency_metrics",
    "PumpScheme",
    "steady_state",
    "DataSeries",
    "FitResult",
]
