"""
Weak-probe optical depth and transmission of a vapor cell.

Each line contributes an incoherent Voigt term to the susceptibility,

    chi(nu) = N p_g w_q |d|^2 S / (2 eps0 hbar) * i Z(nu - nu_line)

with Z the complex, area-normalized Voigt function (real part = lineshape).
OD = k L Im chi and n - 1 = Re chi / 2.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.constants import c, epsilon_0, hbar
from scipy.special import wofz

from . import atom_data
from .transitions import TransitionLine, compute_lines, solve_line

__all__ = [
    "MediumConfig",
    "SpectrumGrid",
    "EmptySpectrumWarning",
    "BUFFER_BROADENING_AR",
    "buffer_broadening",
    "complex_voigt",
    "voigt_profile",
    "lab_polarization_weights",
    "detuning_grid",
    "line_od_scale",
    "transmission_spectrum",
]

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

# Ar pressure broadening of the Rb D lines, FWHM in Hz per mbar.  Converted
# from ~18.3 (D1) and ~17.9 (D2) MHz/Torr (Rotondaro & Perram 1997).
BUFFER_BROADENING_AR = {"D1": 18.3e6 / 1.33322, "D2": 17.9e6 / 1.33322}


class EmptySpectrumWarning(UserWarning):
    """No line survived the strength cut; the spectrum is flat."""


def buffer_broadening(pressure_mbar: float, line: str, coefficient: float | None = None) -> float:
    """Lorentzian FWHM (Hz) from a buffer-gas pressure (default: Ar)."""
    if pressure_mbar < 0:
        raise ValueError("pressure must be non-negative")
    if coefficient is None:
        coefficient = BUFFER_BROADENING_AR[line]
    return pressure_mbar * coefficient


@dataclass(frozen=True)
class MediumConfig:
    isotope_mixture: Mapping[str, float]
    B: float
    temperature: float
    cell_length: float
    buffer_broadening_fwhm: float = 0.0
    buffer_shift: float = 0.0
    lab_polarization: str | Sequence[float] = "horizontal"
    ground_populations: Mapping[str, Sequence[float]] | None = None
    min_strength: float = 1e-4

    def __post_init__(self):
        if self.cell_length <= 0:
            raise ValueError("cell_length must be positive")
        if self.buffer_broadening_fwhm < 0:
            raise ValueError("buffer_broadening_fwhm must be non-negative")
        if self.B < 0:
            raise ValueError("field must be non-negative")
        if abs(sum(self.isotope_mixture.values()) - 1.0) > 1e-12:
            raise ValueError("isotope fractions must sum to 1")


@dataclass(frozen=True, eq=False)
class SpectrumGrid:
    detunings: np.ndarray
    optical_depth: np.ndarray
    transmission: np.ndarray
    refractive_index: np.ndarray | None = None  # n - 1, reference wavenumber
    status: str = "ok"
    lines: tuple[TransitionLine, ...] = field(default=(), repr=False)


def complex_voigt(detuning, gaussian_sigma: float, lorentzian_fwhm: float):
    """Area-normalized complex Voigt function (1/Hz).

    The real part is the Voigt lineshape; the imaginary part is the
    matching dispersion profile.
    """
    if gaussian_sigma < 0 or lorentzian_fwhm < 0:
        raise ValueError("widths must be non-negative")
    if gaussian_sigma == 0 and lorentzian_fwhm == 0:
        raise ValueError("gaussian_sigma and lorentzian_fwhm cannot both be zero")
    x = np.asarray(detuning, dtype=float)
    gamma = 0.5 * lorentzian_fwhm
    if gaussian_sigma == 0:
        return 1j / (np.pi * (x + 1j * gamma))
    z = (x + 1j * gamma) / (gaussian_sigma * _SQRT2)
    return wofz(z) / (gaussian_sigma * _SQRT2PI)


def voigt_profile(detuning, gaussian_sigma: float, lorentzian_fwhm: float):
    """Area-normalized Voigt lineshape (1/Hz)."""
    return complex_voigt(detuning, gaussian_sigma, lorentzian_fwhm).real


def lab_polarization_weights(lab_polarization) -> np.ndarray:
    """Intensity weights over (sigma-, pi, sigma+) for a transverse field.

    Horizontal light is pure pi; vertical light is an equal mix of both
    circular components.  Custom triples are normalized.
    """
    if isinstance(lab_polarization, str):
        key = lab_polarization.lower()
        if key == "horizontal":
            return np.array([0.0, 1.0, 0.0])
        if key == "vertical":
            return np.array([0.5, 0.0, 0.5])
        raise ValueError(f"unknown polarization {lab_polarization!r}")
    w = np.asarray(lab_polarization, dtype=float)
    if w.shape != (3,):
        raise ValueError("custom polarization needs three weights (sigma-, pi, sigma+)")
    if np.any(w < 0):
        raise ValueError("polarization weights must be non-negative")
    total = w.sum()
    if total <= 0:
        raise ValueError("polarization weights sum to zero")
    return w / total


def detuning_grid(start: float, stop: float, step: float = 10e6) -> np.ndarray:
    """Uniform grid from ``start`` to ``stop`` inclusive (Hz)."""
    if step <= 0 or stop <= start:
        raise ValueError("need stop > start and step > 0")
    n = int(round((stop - start) / step)) + 1
    return start + step * np.arange(n)


def line_od_scale(isotope: str, line: str, density: float, cell_length: float) -> float:
    """OD x Hz per unit (population x weight x strength x lineshape)."""
    term = atom_data.lookup(isotope).line(line)
    k = 2 * np.pi * term.line_center_frequency / c
    # |<g|d|e>|^2 = |<J||d||J'>|^2 (2J+1)/(2J'+1) x strength, ground J = 1/2
    d2 = term.reduced_dipole_moment**2 * 2.0 / (2 * term.J + 1)
    return k * cell_length * density * d2 / (2 * epsilon_0 * hbar)


def _populations(config: MediumConfig, isotope: str, n_ground: int) -> np.ndarray:
    pops = (config.ground_populations or {}).get(isotope)
    if pops is None:
        return np.full(n_ground, 1.0 / n_ground)
    pops = np.asarray(pops, dtype=float)
    if pops.shape != (n_ground,):
        raise ValueError(f"{isotope}: expected {n_ground} ground populations, got {pops.shape}")
    if np.any(pops < 0):
        raise ValueError(f"{isotope}: negative ground population")
    return pops


def _chi_terms(config: MediumConfig, line: str):
    """Per-line (centre, amplitude, sigma, fwhm) tuples for the whole mixture."""
    weights = lab_polarization_weights(config.lab_polarization)
    densities = atom_data.vapor_number_density(config.temperature, config.isotope_mixture)
    terms = []
    kept = []
    for isotope, density in densities.items():
        if density == 0.0:
            continue
        atom = atom_data.lookup(isotope)
        excited = atom.line(line)
        ground_states, excited_states = solve_line(isotope, line, config.B)
        lines = compute_lines(ground_states, excited_states, config.min_strength)
        pops = _populations(config, isotope, len(ground_states))
        index = {id(s): i for i, s in enumerate(ground_states)}
        scale = line_od_scale(isotope, line, density, config.cell_length)
        sigma = atom_data.doppler_sigma(
            excited.line_center_frequency, config.temperature, atom.isotope.atomic_mass
        )
        fwhm = excited.natural_linewidth + config.buffer_broadening_fwhm
        for ln in lines:
            amp = scale * pops[index[id(ln.ground)]] * weights[ln.q + 1] * ln.relative_strength
            if amp == 0.0:
                continue
            terms.append((ln.detuning + config.buffer_shift, amp, sigma, fwhm))
            kept.append(ln)
    return terms, kept


def _evaluate(terms, detunings: np.ndarray) -> np.ndarray:
    chi = np.zeros(detunings.shape, dtype=complex)
    for centre, amp, sigma, fwhm in terms:
        chi += amp * 1j * complex_voigt(detunings - centre, sigma, fwhm)
    return chi


def transmission_spectrum(
    config: MediumConfig,
    line_choice: str = "D2",
    grid=None,
    workers: int = 1,
) -> SpectrumGrid:
    """Probe transmission through the cell on a detuning grid (Hz).

    ``grid`` is an array of detunings or a ``(start, stop, step)`` triple;
    the default spans +-60 GHz in 10 MHz steps.
    """
    if grid is None:
        detunings = detuning_grid(-60e9, 60e9, 10e6)
    elif isinstance(grid, tuple) and len(grid) == 3:
        detunings = detuning_grid(*grid)
    else:
        detunings = np.asarray(grid, dtype=float)
    if detunings.ndim != 1 or detunings.size == 0:
        raise ValueError("grid must be a non-empty 1-D array")

    terms, kept = _chi_terms(config, line_choice)
    status = "ok"
    if not terms:
        warnings.warn("no line contributes (strength cut or zero populations); spectrum is flat", EmptySpectrumWarning)
        status = "empty"

    if workers and workers > 1 and detunings.size > 1:
        chunks = np.array_split(detunings, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chi = np.concatenate(list(pool.map(lambda d: _evaluate(terms, d), chunks)))
    else:
        chi = _evaluate(terms, detunings)

    od = chi.imag
    return SpectrumGrid(
        detunings=detunings,
        optical_depth=od,
        transmission=np.exp(-od),
        refractive_index=0.5 * chi.real / _k_length(config, line_choice),
        status=status,
        lines=tuple(kept),
    )


def _k_length(config: MediumConfig, line: str) -> float:
    return 2 * np.pi * atom_data.reference_frequency(line) / c * config.cell_length
