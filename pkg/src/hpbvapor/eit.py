"""
Weak-probe response of a three-level Lambda system.

All rates and detunings are ordinary frequencies (Hz).  With this
convention the Autler-Townes doublet of a resonant control field is split by
exactly ``rabi_control``, the excited-state Lorentzian has FWHM
``linewidth``, and the steady-state susceptibility (all population in the
probe ground state) is

    chi ~ i (g - i d2) / [ (G/2 - i dp)(g - i d2) + (W/2)^2 ]

with dp the probe detuning, d2 the two-photon detuning, G the optical
linewidth, g the ground-state decoherence and W the control Rabi frequency.

Doppler averaging is done in closed form: chi is a ratio of polynomials in
the atomic velocity, so after a partial-fraction split every term is a
Gaussian average of a simple pole, i.e. a Faddeeva function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c
from scipy.signal import peak_widths
from scipy.special import wofz

from . import atom_data
from .transitions import TransitionLine

__all__ = [
    "DEFAULT_WAVEVECTOR_RATIO",
    "LambdaSystem",
    "ProbeProfile",
    "TransparencyMetrics",
    "lambda_chi",
    "doppler_averaged_chi",
    "doppler_averaged_profile",
    "absorption_map",
    "transparency_metrics",
    "dressed_branches",
    "power_to_rabi",
    "calibration_from_point",
]

EIT, ATS, CROSSOVER, NO_FEATURE = "EIT", "ATS", "crossover", "none"

# k_c/k_p of the Rb87 D2 scheme pi |1/2,3/2> / sigma+ |-1/2,3/2> at 1.06 T;
# the control starts from the lower ground state, so k_c > k_p.
DEFAULT_WAVEVECTOR_RATIO = 1.0 + 9.13e-5


@dataclass(frozen=True)
class LambdaSystem:
    rabi_control: float
    control_detuning: float = 0.0
    linewidth: float = 6.0666e6
    ground_decoherence: float = 100e3
    doppler_sigma: float = 0.0
    wavevector_ratio: float = DEFAULT_WAVEVECTOR_RATIO
    probe_frequency: float = 384.2304844685e12
    probe_line: TransitionLine | None = field(default=None, compare=False, repr=False)
    control_line: TransitionLine | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.linewidth <= 0:
            raise ValueError("linewidth must be positive")
        if self.ground_decoherence < 0:
            raise ValueError("ground_decoherence must be non-negative")
        if self.doppler_sigma < 0:
            raise ValueError("doppler_sigma must be non-negative")
        if self.rabi_control < 0:
            raise ValueError("rabi_control must be non-negative")
        if self.probe_line is not None and self.control_line is not None:
            pe, ce = self.probe_line.excited, self.control_line.excited
            if (pe.isotope, pe.term_label, pe.m_J, pe.m_I) != (ce.isotope, ce.term_label, ce.m_J, ce.m_I):
                raise ValueError("probe and control must share the excited state")

    @classmethod
    def from_lines(
        cls,
        probe_line: TransitionLine,
        control_line: TransitionLine,
        rabi_control: float,
        temperature: float,
        control_detuning: float = 0.0,
        buffer_broadening_fwhm: float = 0.0,
        ground_decoherence: float = 100e3,
    ) -> "LambdaSystem":
        """Lambda system on two catalog lines, with thermal Doppler width."""
        atom = atom_data.lookup(probe_line.isotope)
        term = atom.line(probe_line.line)
        nu_ref = atom_data.reference_frequency(probe_line.line)
        nu_p = nu_ref + probe_line.detuning
        nu_c = nu_ref + control_line.detuning
        return cls(
            rabi_control=rabi_control,
            control_detuning=control_detuning,
            linewidth=term.natural_linewidth + buffer_broadening_fwhm,
            ground_decoherence=ground_decoherence,
            doppler_sigma=atom_data.doppler_sigma(nu_p, temperature, atom.isotope.atomic_mass),
            wavevector_ratio=nu_c / nu_p,
            probe_frequency=nu_p,
            probe_line=probe_line,
            control_line=control_line,
        )

    def with_(self, **changes) -> "LambdaSystem":
        return replace(self, **changes)


def lambda_chi(system: LambdaSystem, probe_detuning, velocity=0.0):
    """Susceptibility (arbitrary units) of atoms moving at ``velocity`` (m/s).

    Beams co-propagate; the probe sees ``dp + v/lambda_p`` and the
    two-photon detuning picks up the residual ``(k_p - k_c) v``.
    """
    dp = np.asarray(probe_detuning, dtype=float)
    u = np.asarray(velocity, dtype=float) * system.probe_frequency / c
    delta_p = dp + u
    delta_2 = dp - system.control_detuning + (1.0 - system.wavevector_ratio) * u
    two_photon = system.ground_decoherence - 1j * delta_2
    optical = 0.5 * system.linewidth - 1j * delta_p
    coupling = 0.25 * system.rabi_control**2
    if coupling == 0.0:
        return 1j / optical
    return 1j * two_photon / (optical * two_photon + coupling)


def _pole_average(poles, sigma: float):
    """Gaussian average <1/(u - u_k)> over u ~ N(0, sigma^2)."""
    z = poles / (math.sqrt(2.0) * sigma)
    upper = z.imag > 0
    zz = np.where(upper, z, np.conj(z))
    w = wofz(zz)
    w = np.where(upper, w, -np.conj(w))
    return 1j * math.sqrt(math.pi) * w / (math.sqrt(2.0) * sigma)


def doppler_averaged_chi(system: LambdaSystem, probe_detuning):
    """Exact Maxwell-Boltzmann average of :func:`lambda_chi`."""
    dp = np.atleast_1d(np.asarray(probe_detuning, dtype=float))
    sigma = system.doppler_sigma
    if sigma == 0:
        return lambda_chi(system, dp)
    a0 = 0.5 * system.linewidth - 1j * dp
    if 0.25 * system.rabi_control**2 == 0.0:
        # i / (a0 - i u) = -1 / (u + i a0)
        return -_pole_average(-1j * a0, sigma)

    b = 1.0 - system.wavevector_ratio
    b0 = system.ground_decoherence - 1j * (dp - system.control_detuning)
    cc = a0 * b0 + 0.25 * system.rabi_control**2
    # chi(u) = i (b0 - i b u) / D(u),  D(u) = -b u^2 - i (a0 b + b0) u + cc
    if b == 0.0:
        # D linear: chi = i b0 / (-i b0 (u - u1)), u1 = cc / (i b0)
        zero = b0 == 0
        b0s = np.where(zero, 1.0, b0)
        u1 = cc / (1j * b0s)
        out = -_pole_average(u1, sigma)
        return np.where(zero, 0.0, out)

    alpha = -b
    beta = -1j * (a0 * b + b0)
    disc = np.sqrt(beta * beta - 4 * alpha * cc)
    sgn = np.where((np.conj(beta) * disc).real >= 0, 1.0, -1.0)
    qq = -0.5 * (beta + sgn * disc)
    u1 = qq / alpha
    u2 = cc / qq
    num1 = b0 - 1j * b * u1
    num2 = b0 - 1j * b * u2
    c1 = num1 / (alpha * (u1 - u2))
    c2 = num2 / (alpha * (u2 - u1))
    return 1j * (c1 * _pole_average(u1, sigma) + c2 * _pole_average(u2, sigma))


@dataclass(frozen=True, eq=False)
class ProbeProfile:
    """Doppler-averaged probe absorption, in units of the bare resonance peak."""

    probe_detunings: np.ndarray
    absorption: np.ndarray
    reference: np.ndarray
    regime: str = NO_FEATURE


def _reference_peak(system: LambdaSystem) -> float:
    bare = system.with_(rabi_control=0.0)
    return float(doppler_averaged_chi(bare, np.array([0.0])).imag[0])


def doppler_averaged_profile(system: LambdaSystem, grid) -> ProbeProfile:
    """Absorption on ``grid`` plus the Omega_c = 0 envelope, both normalized."""
    dp = np.asarray(grid, dtype=float)
    if dp.ndim != 1 or dp.size == 0:
        raise ValueError("probe grid must be a non-empty 1-D array")
    peak = _reference_peak(system)
    absorption = doppler_averaged_chi(system, dp).imag / peak
    reference = doppler_averaged_chi(system.with_(rabi_control=0.0), dp).imag / peak
    absorption = np.maximum(absorption, 0.0)
    profile = ProbeProfile(dp, absorption, reference)
    regime = transparency_metrics(profile).regime
    return ProbeProfile(dp, absorption, reference, regime)


def absorption_map(system: LambdaSystem, probe_detunings, control_detunings) -> np.ndarray:
    """Absorption, shape (n_control, n_probe), for a control-detuning sweep."""
    dp = np.asarray(probe_detunings, dtype=float)
    peak = _reference_peak(system)
    rows = [
        doppler_averaged_chi(system.with_(control_detuning=float(dc)), dp).imag / peak
        for dc in np.asarray(control_detunings, dtype=float)
    ]
    return np.maximum(np.array(rows), 0.0)


@dataclass(frozen=True)
class TransparencyMetrics:
    width: float | None
    depth: float
    splitting: float | None
    regime: str
    dip_position: float | None = None
    maxima: tuple[float, ...] = ()

    @property
    def has_feature(self) -> bool:
        return self.regime != NO_FEATURE


def _crossing(x, y, i0, level, step):
    """First position from index i0 moving by ``step`` where y drops below level."""
    i = i0
    while 0 <= i + step < y.size:
        j = i + step
        if y[j] < level:
            return x[i] + (x[j] - x[i]) * (y[i] - level) / (y[i] - y[j])
        i = j
    return None


def transparency_metrics(profile: ProbeProfile, min_depth: float = 1e-6) -> TransparencyMetrics:
    """Width, depth and splitting of the induced transparency.

    The dip is measured on ``1 - absorption/reference``.  Regimes: ATS when
    the two flanking absorption maxima are separated by more than their mean
    FWHM, EIT when no such pair exists or the separation is below half that
    width, crossover otherwise.
    """
    x = profile.probe_detunings
    a = profile.absorption
    ref = profile.reference
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(ref > 0, 1.0 - a / ref, 0.0)
    i0 = int(np.argmax(t))
    depth = float(t[i0])
    if depth < min_depth:
        return TransparencyMetrics(None, max(depth, 0.0), None, NO_FEATURE)

    half = 0.5 * depth
    lo = _crossing(x, t, i0, half, -1)
    hi = _crossing(x, t, i0, half, +1)
    width = hi - lo if lo is not None and hi is not None else None

    left = int(np.argmax(a[: i0 + 1])) if i0 > 0 else 0
    right = i0 + int(np.argmax(a[i0:]))
    interior = 0 < left < i0 < right < a.size - 1
    splitting = None
    maxima: tuple[float, ...] = ()
    regime = EIT
    if interior:
        splitting = float(x[right] - x[left])
        maxima = (float(x[left]), float(x[right]))
        widths = peak_widths(a, [left, right], rel_height=0.5)[0]
        spacing = np.diff(x).mean()
        mean_fwhm = float(np.mean(widths)) * spacing
        if splitting > mean_fwhm:
            regime = ATS
        elif splitting > 0.5 * mean_fwhm:
            regime = CROSSOVER
    return TransparencyMetrics(width, depth, splitting, regime, float(x[i0]), maxima)


def dressed_branches(control_detuning: float, rabi_control: float) -> tuple[float, float]:
    """Probe detunings of the two dressed-state resonances."""
    if rabi_control < 0:
        raise ValueError("rabi_control must be non-negative")
    root = math.hypot(control_detuning, rabi_control)
    return 0.5 * (control_detuning + root), 0.5 * (control_detuning - root)


def power_to_rabi(power: float, calibration: float) -> float:
    """Control Rabi frequency (Hz) from power (W) and a Hz/sqrt(W) calibration."""
    if power < 0:
        raise ValueError("power must be non-negative")
    if calibration <= 0:
        raise ValueError("calibration must be positive")
    return calibration * math.sqrt(power)


def calibration_from_point(power: float, rabi_control: float) -> float:
    """Hz/sqrt(W) calibration through one (power, Rabi frequency) point."""
    if power <= 0:
        raise ValueError("power must be positive")
    return rabi_control / math.sqrt(power)
