"""
Hyperfine + Zeeman Hamiltonian of a single fine-structure term.

The Hamiltonian is written in the uncoupled basis |m_J, m_I> ordered by
descending m_J, then descending m_I, and is block diagonal in
m_F = m_J + m_I for a field along the quantization axis.  Energies are in Hz
relative to the zero-field hyperfine centroid of the term (all three terms
of the Hamiltonian are traceless, so no explicit shift is needed).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.constants import physical_constants

from .atom_data import IsotopeSpec, TermSpec

__all__ = [
    "MU_B",
    "BasisState",
    "ZeemanState",
    "NumericError",
    "basis_states",
    "build_hamiltonian",
    "eigenstates",
    "breit_rabi_oracle",
]

MU_B = physical_constants["Bohr magneton in Hz/T"][0]


class NumericError(ArithmeticError):
    """Eigensolver failed or returned non-finite values."""


@dataclass(frozen=True, order=True)
class BasisState:
    m_J: float
    m_I: float

    @property
    def m_F(self) -> float:
        return self.m_J + self.m_I

    def label(self) -> str:
        return f"|{_half(self.m_J)},{_half(self.m_I)}>"


def _half(x: float) -> str:
    n = round(2 * x)
    if n % 2 == 0:
        return str(n // 2)
    return f"{n}/2"


@dataclass(frozen=True, eq=False)
class ZeemanState:
    """Eigenstate of one term at a fixed field.

    ``composition`` holds real amplitudes over :func:`basis_states` (same
    ordering); the largest-magnitude amplitude is positive.
    """

    isotope: str
    term_label: str
    field: float
    energy: float
    composition: np.ndarray
    m_F: float
    dominant_basis_state: BasisState
    J: float
    I: float

    @property
    def m_J(self) -> float:
        return self.dominant_basis_state.m_J

    @property
    def m_I(self) -> float:
        return self.dominant_basis_state.m_I

    def label(self) -> str:
        return self.dominant_basis_state.label()


@lru_cache(maxsize=None)
def basis_states(J: float, I: float) -> tuple[BasisState, ...]:
    m_J = np.arange(J, -J - 0.5, -1.0)
    m_I = np.arange(I, -I - 0.5, -1.0)
    return tuple(BasisState(float(a), float(b)) for a in m_J for b in m_I)


def _spin_ops(j: float) -> tuple[np.ndarray, np.ndarray]:
    """J_z and J_+ for spin j, basis ordered by descending m."""
    m = np.arange(j, -j - 0.5, -1.0)
    jp = np.zeros((m.size, m.size))
    for k in range(1, m.size):
        jp[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    return np.diag(m), jp


@lru_cache(maxsize=None)
def _operators(J: float, I: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(I.J, quadrupole tensor without B_hfs, J_z, I_z) in the product basis."""
    jz, jp = _spin_ops(J)
    iz, ip = _spin_ops(I)
    eye_j = np.eye(jz.shape[0])
    eye_i = np.eye(iz.shape[0])
    Jz, Jp = np.kron(jz, eye_i), np.kron(jp, eye_i)
    Iz, Ip = np.kron(eye_j, iz), np.kron(eye_j, ip)
    IJ = Iz @ Jz + 0.5 * (Ip @ Jp.T + Ip.T @ Jp)
    if J >= 1 and I >= 1:
        n = IJ.shape[0]
        quad = (3 * IJ @ IJ + 1.5 * IJ - I * (I + 1) * J * (J + 1) * np.eye(n)) / (
            2 * I * (2 * I - 1) * J * (2 * J - 1)
        )
    else:
        quad = np.zeros_like(IJ)
    for a in (IJ, quad, Jz, Iz):
        a.setflags(write=False)
    return IJ, quad, Jz, Iz


def build_hamiltonian(term: TermSpec, isotope: IsotopeSpec, B: float) -> np.ndarray:
    """Hamiltonian matrix (Hz) of ``term`` in a static field ``B`` (tesla)."""
    if B < 0:
        raise ValueError(f"field must be non-negative, got {B}")
    IJ, quad, Jz, Iz = _operators(term.J, isotope.nuclear_spin)
    H = term.A_hfs * IJ + MU_B * B * (term.g_J * Jz + isotope.g_I * Iz)
    if term.B_hfs:
        H = H + term.B_hfs * quad
    return H


@lru_cache(maxsize=None)
def _blocks(J: float, I: float) -> tuple[tuple[float, np.ndarray], ...]:
    m_F = np.array([s.m_F for s in basis_states(J, I)])
    out = []
    for mf in np.unique(m_F)[::-1]:
        idx = np.flatnonzero(np.isclose(m_F, mf))
        idx.setflags(write=False)
        out.append((float(mf), idx))
    return tuple(out)


def eigenstates(term: TermSpec, isotope: IsotopeSpec, B: float) -> list[ZeemanState]:
    """Eigenstates of ``term`` at field ``B``, sorted by energy.

    Each m_F block is diagonalized separately so every state carries an
    exact m_F label.
    """
    H = build_hamiltonian(term, isotope, B)
    J, I = term.J, isotope.nuclear_spin
    basis = basis_states(J, I)
    n = len(basis)
    states = []
    for mf, idx in _blocks(J, I):
        try:
            w, v = np.linalg.eigh(H[np.ix_(idx, idx)])
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"eigensolver failed for m_F={mf}: {exc}") from exc
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            raise NumericError(f"non-finite eigensystem for m_F={mf}")
        for k in range(w.size):
            vec = v[:, k]
            j = int(np.argmax(np.abs(vec)))
            if vec[j] < 0:
                vec = -vec
            full = np.zeros(n)
            full[idx] = vec
            full.setflags(write=False)
            states.append(
                ZeemanState(
                    isotope=isotope.name,
                    term_label=term.term_label,
                    field=float(B),
                    energy=float(w[k]),
                    composition=full,
                    m_F=mf,
                    dominant_basis_state=basis[idx[j]],
                    J=J,
                    I=I,
                )
            )
    states.sort(key=lambda s: (s.energy, -s.m_F))
    return states


def breit_rabi_oracle(term: TermSpec, isotope: IsotopeSpec, B: float) -> list[float]:
    """Closed-form Breit-Rabi energies (Hz) of a J = 1/2 term, sorted.

    Independent of the matrix construction; used as a test oracle.
    """
    if term.J != 0.5:
        raise NotImplementedError("Breit-Rabi formula applies only to J = 1/2 terms")
    if B < 0:
        raise ValueError(f"field must be non-negative, got {B}")
    I = isotope.nuclear_spin
    gJ, gI = term.g_J, isotope.g_I
    dE = term.A_hfs * (I + 0.5)
    x = (gJ - gI) * MU_B * B / dE
    energies = []
    # stretched states |+-1/2, +-I> are exact 1x1 blocks
    for s in (1.0, -1.0):
        energies.append(term.A_hfs * I / 2 + s * MU_B * B * (gJ / 2 + gI * I))
    for m in np.arange(-I + 0.5, I, 1.0):
        root = np.sqrt(1 + 4 * m * x / (2 * I + 1) + x * x)
        base = -dE / (2 * (2 * I + 1)) + gI * MU_B * m * B
        energies.extend([base + dE / 2 * root, base - dE / 2 * root])
    return sorted(float(e) for e in energies)
