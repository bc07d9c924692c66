"""
Optical transition lines between the ground term and one excited term.

Dipole elements are evaluated in the uncoupled basis, where light acts on
m_J only and the nucleus is a spectator::

    <m_J', m_I'| d_q |m_J, m_I>  ~  delta(m_I', m_I) <J m_J; 1 q | J' m_J'>

Strengths are squared amplitudes in these Clebsch-Gordan units, so the
stretched D2 line at zero field has strength 1 and the total over all
lines and polarizations is (2I+1)(2J'+1) at every field.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from sympy import Rational
from sympy.physics.wigner import clebsch_gordan

from . import atom_data
from .zeeman import ZeemanState, basis_states, eigenstates

__all__ = [
    "ALLOWED",
    "SINGLY_FORBIDDEN",
    "HIGHER_ORDER",
    "TransitionLine",
    "clebsch",
    "dipole_matrix",
    "compute_lines",
    "classify_line",
    "solve_line",
    "line_catalog",
    "find_line",
]

ALLOWED = "allowed"
SINGLY_FORBIDDEN = "singly_forbidden"
HIGHER_ORDER = "higher_order"

POLARIZATION_NAMES = {-1: "sigma-", 0: "pi", 1: "sigma+"}


@dataclass(frozen=True, eq=False)
class TransitionLine:
    ground: ZeemanState
    excited: ZeemanState
    q: int
    detuning: float
    relative_strength: float
    amplitude: float
    line_class: str
    delta_mI: int
    line: str

    @property
    def isotope(self) -> str:
        return self.ground.isotope

    @property
    def frequency(self) -> float:
        """Transition frequency relative to the isotope's own line centre (Hz)."""
        return self.excited.energy - self.ground.energy

    @property
    def polarization(self) -> str:
        return POLARIZATION_NAMES[self.q]

    def label(self) -> str:
        return f"{self.ground.label()}->{self.excited.label()}"


def _rational(x: float) -> Rational:
    return Rational(round(2 * x), 2)


@lru_cache(maxsize=None)
def clebsch(j1: float, m1: float, j2: float, m2: float, j: float, m: float) -> float:
    """<j1 m1; j2 m2 | j m> (Condon-Shortley phase)."""
    return float(
        clebsch_gordan(
            _rational(j1), _rational(j2), _rational(j),
            _rational(m1), _rational(m2), _rational(m),
        )
    )


@lru_cache(maxsize=None)
def _basis_dipole(J: float, Je: float, I: float, q: int) -> np.ndarray:
    bg = basis_states(J, I)
    be = basis_states(Je, I)
    M = np.zeros((len(be), len(bg)))
    for a, e in enumerate(be):
        for b, g in enumerate(bg):
            if e.m_I == g.m_I and e.m_J == g.m_J + q:
                M[a, b] = clebsch(J, g.m_J, 1.0, float(q), Je, e.m_J)
    M.setflags(write=False)
    return M


def dipole_matrix(
    ground_states: Sequence[ZeemanState], excited_states: Sequence[ZeemanState], q: int
) -> np.ndarray:
    """Signed dipole amplitudes, shape (n_excited, n_ground), for polarization q."""
    _check_compatible(ground_states, excited_states)
    g0, e0 = ground_states[0], excited_states[0]
    M = _basis_dipole(g0.J, e0.J, g0.I, q)
    Cg = np.array([s.composition for s in ground_states]).T
    Ce = np.array([s.composition for s in excited_states])
    return Ce @ M @ Cg


def _check_compatible(ground_states, excited_states) -> None:
    if not ground_states or not excited_states:
        raise ValueError("state lists must be non-empty")
    g0, e0 = ground_states[0], excited_states[0]
    for s in (*ground_states, *excited_states):
        if s.isotope != g0.isotope:
            raise ValueError(f"mixed isotopes: {s.isotope} vs {g0.isotope}")
        if s.field != g0.field:
            raise ValueError(f"mixed fields: {s.field} T vs {g0.field} T")
    if any(s.term_label != g0.term_label for s in ground_states):
        raise ValueError("ground states from more than one term")
    if any(s.term_label != e0.term_label for s in excited_states):
        raise ValueError("excited states from more than one term")


def classify_line(line: TransitionLine) -> tuple[str, int]:
    """Allowed / singly forbidden / higher order, from the dominant Delta m_I."""
    return _classify(line.ground, line.excited)


def _classify(ground: ZeemanState, excited: ZeemanState) -> tuple[str, int]:
    d = round(excited.m_I - ground.m_I)
    if d == 0:
        return ALLOWED, 0
    if abs(d) == 1:
        return SINGLY_FORBIDDEN, d
    return HIGHER_ORDER, d


def _line_name(excited_label: str) -> str:
    for name, label in atom_data.LINE_TERMS.items():
        if label == excited_label:
            return name
    raise ValueError(f"{excited_label!r} is not the upper term of a D line")


def compute_lines(
    ground_states: Sequence[ZeemanState],
    excited_states: Sequence[ZeemanState],
    min_strength: float = 1e-4,
) -> list[TransitionLine]:
    """All lines with strength >= ``min_strength`` times the strongest, by detuning.

    Detunings are measured from :func:`atom_data.reference_frequency` of
    the D line, so lines of different isotopes share one axis.
    """
    _check_compatible(ground_states, excited_states)
    if min_strength < 0:
        raise ValueError("min_strength must be non-negative")
    line = _line_name(excited_states[0].term_label)
    atom = atom_data.lookup(ground_states[0].isotope)
    offset = atom.line(line).line_center_frequency - atom_data.reference_frequency(line)

    candidates = []
    for q in (-1, 0, 1):
        D = dipole_matrix(ground_states, excited_states, q)
        for a, e in enumerate(excited_states):
            for b, g in enumerate(ground_states):
                if e.m_F - g.m_F != q:
                    continue
                amp = float(D[a, b])
                if amp == 0.0:
                    continue
                candidates.append((g, e, q, amp))
    if not candidates:
        return []
    s_max = max(amp * amp for *_, amp in candidates)
    lines = []
    for g, e, q, amp in candidates:
        s = amp * amp
        if s < min_strength * s_max:
            continue
        cls, dmi = _classify(g, e)
        lines.append(
            TransitionLine(
                ground=g,
                excited=e,
                q=q,
                detuning=e.energy - g.energy + offset,
                relative_strength=s,
                amplitude=amp,
                line_class=cls,
                delta_mI=dmi,
                line=line,
            )
        )
    lines.sort(key=lambda ln: (ln.detuning, ln.q))
    return lines


def solve_line(isotope: str, line: str, B: float) -> tuple[list[ZeemanState], list[ZeemanState]]:
    """Ground and excited eigenstates of one D line of one isotope."""
    atom = atom_data.lookup(isotope)
    return (
        eigenstates(atom.ground, atom.isotope, B),
        eigenstates(atom.line(line), atom.isotope, B),
    )


def line_catalog(isotope: str, line: str, B: float, min_strength: float = 1e-4) -> list[TransitionLine]:
    return compute_lines(*solve_line(isotope, line, B), min_strength=min_strength)


def find_line(
    lines: Iterable[TransitionLine],
    ground: tuple[float, float],
    excited: tuple[float, float],
    q: int | None = None,
) -> TransitionLine:
    """Select the line whose dominant ground/excited labels are (m_J, m_I)."""
    hits = [
        ln
        for ln in lines
        if (ln.ground.m_J, ln.ground.m_I) == tuple(map(float, ground))
        and (ln.excited.m_J, ln.excited.m_I) == tuple(map(float, excited))
        and (q is None or ln.q == q)
    ]
    if not hits:
        raise LookupError(f"no line |{ground}> -> |{excited}>'" + (f" with q={q}" if q is not None else ""))
    if len(hits) > 1:
        raise LookupError(f"ambiguous line selection |{ground}> -> |{excited}>'")
    return hits[0]
