"""
Rubidium isotope and fine-structure term constants.

Values are transcribed from D. A. Steck, "Rubidium 87 D Line Data" and
"Rubidium 85 D Line Data" (revisions 2.3.x), which in turn collect the
CODATA/atomic-spectroscopy literature.  All frequencies are ordinary
frequencies in Hz; hyperfine constants are quoted as A/h and B/h.

Source notes per constant
-------------------------
mass, nuclear spin, g_I ............ Steck tables 1, 2 (g_I in the
                                     convention H = mu_B (g_J J + g_I I).B)
g_J (5S1/2, 5P1/2, 5P3/2) .......... Steck table 3/4 (5P values are the
                                     measured Lande factors 0.666, 1.3362)
A_hfs, B_hfs ....................... Steck table 4 (87Rb 5P1/2 A from the
                                     2.3 revision, 408.328 MHz)
line centres (D1, D2) .............. Steck tables 3 and 5 (centroid to
                                     centroid transition frequencies)
natural linewidths ................. Steck tables 3, 5 (Gamma/2pi)
reduced dipole moments ............. Steck tables 3, 5, <J=1/2||er||J'>

The active catalog can be replaced wholesale by a YAML override file, see
:func:`load_catalog`.  The environment variable ``HPBVAPOR_ATOM_DATA`` is
read on first access.
"""
from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import yaml
from scipy.constants import c, k as k_B

__all__ = [
    "IsotopeSpec",
    "TermSpec",
    "Atom",
    "UnknownIsotopeError",
    "TERM_LABELS",
    "LINE_TERMS",
    "isotope_catalog",
    "lookup",
    "load_catalog",
    "reset_catalog",
    "mixture",
    "vapor_pressure",
    "vapor_number_density",
    "reference_frequency",
    "doppler_sigma",
    "ENV_OVERRIDE",
]

ENV_OVERRIDE = "HPBVAPOR_ATOM_DATA"

TERM_LABELS = ("S1/2", "P1/2", "P3/2")
LINE_TERMS = {"D1": "P1/2", "D2": "P3/2"}

NATURAL_ABUNDANCE = {"Rb85": 0.7217, "Rb87": 0.2783}

# Vapor-pressure correlation (log10 P[torr] = a - b/T), solid and liquid Rb.
_MELTING_POINT = 312.46
_SOLID = (2.881 + 4.857, 4215.0)
_LIQUID = (2.881 + 4.312, 4040.0)
_TORR = 133.322368
T_MIN, T_MAX = 250.0, 500.0


class UnknownIsotopeError(KeyError):
    """Requested isotope is not in the catalog."""


@dataclass(frozen=True)
class IsotopeSpec:
    name: str
    nuclear_spin: float
    g_I: float
    atomic_mass: float
    abundance: float


@dataclass(frozen=True)
class TermSpec:
    """One fine-structure term of the n=5 manifold.

    Excited-term-only fields (line centre, linewidth, dipole) are ``None``
    for the ground term.
    """

    term_label: str
    J: float
    g_J: float
    A_hfs: float
    B_hfs: float = 0.0
    line_center_frequency: float | None = None
    natural_linewidth: float | None = None
    reduced_dipole_moment: float | None = None

    @property
    def is_excited(self) -> bool:
        return self.line_center_frequency is not None


@dataclass(frozen=True)
class Atom:
    isotope: IsotopeSpec
    terms: Mapping[str, TermSpec]

    @property
    def name(self) -> str:
        return self.isotope.name

    @property
    def nuclear_spin(self) -> float:
        return self.isotope.nuclear_spin

    def term(self, label: str) -> TermSpec:
        try:
            return self.terms[label]
        except KeyError:
            raise KeyError(f"{self.name} has no term {label!r}") from None

    def line(self, line: str) -> TermSpec:
        """Excited term of the D1 or D2 line."""
        if line not in LINE_TERMS:
            raise ValueError(f"line must be 'D1' or 'D2', got {line!r}")
        return self.term(LINE_TERMS[line])

    @property
    def ground(self) -> TermSpec:
        return self.term("S1/2")


def _builtin() -> dict[str, Atom]:
    d1_dipole = 2.53728e-29
    d2_dipole = 3.58424e-29
    gJ_S, gJ_P12, gJ_P32 = 2.00233113, 0.666, 1.3362
    gamma_d1, gamma_d2 = 5.7500e6, 6.0666e6

    rb87 = Atom(
        IsotopeSpec("Rb87", 1.5, -0.0009951414, 1.443160648e-25, NATURAL_ABUNDANCE["Rb87"]),
        {
            "S1/2": TermSpec("S1/2", 0.5, gJ_S, 3.417341305452145e9),
            "P1/2": TermSpec("P1/2", 0.5, gJ_P12, 408.328e6, 0.0,
                             377.107463380e12, gamma_d1, d1_dipole),
            "P3/2": TermSpec("P3/2", 1.5, gJ_P32, 84.7185e6, 12.4965e6,
                             384.2304844685e12, gamma_d2, d2_dipole),
        },
    )
    rb85 = Atom(
        IsotopeSpec("Rb85", 2.5, -0.00029364000, 1.409993199e-25, NATURAL_ABUNDANCE["Rb85"]),
        {
            "S1/2": TermSpec("S1/2", 0.5, gJ_S, 1.0119108130e9),
            "P1/2": TermSpec("P1/2", 0.5, gJ_P12, 120.527e6, 0.0,
                             377.107385690e12, gamma_d1, d1_dipole),
            "P3/2": TermSpec("P3/2", 1.5, gJ_P32, 25.0020e6, 25.790e6,
                             384.230406373e12, gamma_d2, d2_dipole),
        },
    )
    return {"Rb87": rb87, "Rb85": rb85}


def _freeze(atoms: dict[str, Atom]) -> Mapping[str, Atom]:
    frozen = {
        name: Atom(a.isotope, MappingProxyType(dict(a.terms))) for name, a in atoms.items()
    }
    for atom in frozen.values():
        _validate(atom)
    return MappingProxyType(frozen)


def _validate(atom: Atom) -> None:
    iso = atom.isotope
    if (2 * iso.nuclear_spin) % 1 != 0 or iso.nuclear_spin <= 0:
        raise ValueError(f"{iso.name}: nuclear spin must be a positive half-integer")
    if not 0.0 <= iso.abundance <= 1.0:
        raise ValueError(f"{iso.name}: abundance outside [0, 1]")
    for label, term in atom.terms.items():
        if label != term.term_label:
            raise ValueError(f"{iso.name}: term key {label!r} != label {term.term_label!r}")
        if term.B_hfs != 0.0 and (term.J < 1 or iso.nuclear_spin < 1):
            raise ValueError(f"{iso.name} {label}: quadrupole constant requires J, I >= 1")
        if term.is_excited:
            if not (term.natural_linewidth and term.natural_linewidth > 0):
                raise ValueError(f"{iso.name} {label}: linewidth must be > 0")
            if not (term.reduced_dipole_moment and term.reduced_dipole_moment > 0):
                raise ValueError(f"{iso.name} {label}: dipole moment must be > 0")


_ACTIVE: Mapping[str, Atom] | None = None


def _numeric(where: str, updates: Mapping, text_fields: set) -> dict:
    # YAML 1.1 reads '1.0e8' as a string
    out = {}
    for key, value in updates.items():
        if key in text_fields:
            out[key] = value
            continue
        try:
            out[key] = float(value)
        except (TypeError, ValueError):
            raise ValueError(f"override for {where}: {key} must be a number, got {value!r}") from None
    return out


def _apply_override(atoms: dict[str, Atom], data: dict) -> dict[str, Atom]:
    iso_fields = {f.name for f in dataclasses.fields(IsotopeSpec)}
    term_fields = {f.name for f in dataclasses.fields(TermSpec)}
    out = dict(atoms)
    for name, block in (data or {}).items():
        if name not in out:
            raise UnknownIsotopeError(name)
        atom = out[name]
        block = dict(block or {})
        iso_updates = block.pop("isotope", {}) or {}
        term_updates = block.pop("terms", {}) or {}
        if block:
            raise ValueError(f"override for {name}: unknown keys {sorted(block)}")
        bad = set(iso_updates) - iso_fields
        if bad:
            raise ValueError(f"override for {name}: unknown isotope fields {sorted(bad)}")
        isotope = dataclasses.replace(atom.isotope, **_numeric(name, iso_updates, {"name"}))
        terms = dict(atom.terms)
        for label, upd in term_updates.items():
            if label not in terms:
                raise ValueError(f"override for {name}: unknown term {label!r}")
            bad = set(upd) - term_fields
            if bad:
                raise ValueError(f"override for {name} {label}: unknown fields {sorted(bad)}")
            terms[label] = dataclasses.replace(terms[label], **_numeric(f"{name} {label}", upd, {"term_label"}))
        out[name] = Atom(isotope, terms)
    return out


def load_catalog(path: str | os.PathLike | None = None) -> Mapping[str, Atom]:
    """Activate the built-in catalog, optionally patched by a YAML file.

    The override file maps isotope names to ``isotope`` and ``terms``
    blocks whose keys are the dataclass field names, e.g.::

        Rb87:
          terms:
            P3/2: {A_hfs: 84.72e6}
    """
    global _ACTIVE
    atoms = _builtin()
    if path is not None:
        with open(path) as fh:
            atoms = _apply_override(atoms, yaml.safe_load(fh))
    _ACTIVE = _freeze(atoms)
    return _ACTIVE


def reset_catalog() -> None:
    """Forget the active catalog; the next access re-reads the environment."""
    global _ACTIVE
    _ACTIVE = None


def _catalog() -> Mapping[str, Atom]:
    if _ACTIVE is None:
        return load_catalog(os.environ.get(ENV_OVERRIDE) or None)
    return _ACTIVE


def isotope_catalog() -> list[tuple[IsotopeSpec, list[TermSpec]]]:
    return [
        (atom.isotope, [atom.terms[label] for label in TERM_LABELS])
        for atom in _catalog().values()
    ]


def lookup(name: str) -> Atom:
    try:
        return _catalog()[name]
    except KeyError:
        raise UnknownIsotopeError(name) from None


def mixture(rb87_fraction: float = 0.90) -> dict[str, float]:
    """Two-isotope mixture; the default matches a 90 % enriched cell."""
    if not 0.0 <= rb87_fraction <= 1.0:
        raise ValueError("rb87_fraction must lie in [0, 1]")
    return {"Rb87": rb87_fraction, "Rb85": 1.0 - rb87_fraction}


def _check_mixture(fractions: Mapping[str, float]) -> None:
    for name, f in fractions.items():
        lookup(name)
        if f < 0:
            raise ValueError(f"negative fraction for {name}")
    if abs(sum(fractions.values()) - 1.0) > 1e-12:
        raise ValueError(f"isotope fractions must sum to 1, got {sum(fractions.values())!r}")


def vapor_pressure(temperature: float) -> float:
    """Saturated Rb vapor pressure in Pa (log-linear solid/liquid fit)."""
    if not T_MIN < temperature < T_MAX:
        raise ValueError(
            f"temperature {temperature} K outside vapor-pressure range ({T_MIN}, {T_MAX}) K"
        )
    a, b = _SOLID if temperature < _MELTING_POINT else _LIQUID
    return 10.0 ** (a - b / temperature) * _TORR


def vapor_number_density(
    temperature: float, isotope_mixture: Mapping[str, float]
) -> dict[str, float]:
    """Per-isotope number densities (m^-3) of saturated vapor."""
    _check_mixture(isotope_mixture)
    total = vapor_pressure(temperature) / (k_B * temperature)
    return {name: f * total for name, f in isotope_mixture.items()}


def reference_frequency(line: str) -> float:
    """Detuning origin of a D line: natural-abundance weighted line centre."""
    num = 0.0
    den = 0.0
    for atom in _catalog().values():
        w = NATURAL_ABUNDANCE.get(atom.name, atom.isotope.abundance)
        num += w * atom.line(line).line_center_frequency
        den += w
    return num / den


def doppler_sigma(frequency: float, temperature: float, mass: float) -> float:
    """Gaussian standard deviation (Hz) of the Doppler profile."""
    return frequency * math.sqrt(k_B * temperature / (mass * c**2))
