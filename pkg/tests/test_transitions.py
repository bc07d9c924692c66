import math

import numpy as np
import pytest

from hpbvapor import atom_data
from hpbvapor.transitions import (
    ALLOWED,
    SINGLY_FORBIDDEN,
    clebsch,
    compute_lines,
    dipole_matrix,
    find_line,
    line_catalog,
    solve_line,
)

CASES = [(iso, line) for iso in ("Rb85", "Rb87") for line in ("D1", "D2")]


def test_clebsch_known_values():
    s = 1 / math.sqrt(2)
    assert clebsch(0.5, 0.5, 0.5, -0.5, 1, 0) == pytest.approx(s)
    assert clebsch(0.5, 0.5, 0.5, -0.5, 0, 0) == pytest.approx(s)
    assert clebsch(0.5, -0.5, 0.5, 0.5, 0, 0) == pytest.approx(-s)
    assert clebsch(1, 1, 1, -1, 2, 0) == pytest.approx(math.sqrt(1 / 6))
    assert clebsch(0.5, 0.5, 1, 0, 1.5, 0.5) == pytest.approx(math.sqrt(2 / 3))
    assert clebsch(0.5, 0.5, 1, 1, 0.5, 0.5) == 0.0


def test_clebsch_orthonormality():
    j1, j2 = 1.5, 1.0
    for j in (0.5, 1.5, 2.5):
        for m in np.arange(-j, j + 1):
            total = sum(
                clebsch(j1, m1, j2, m - m1, j, m) ** 2
                for m1 in np.arange(-j1, j1 + 1)
                if abs(m - m1) <= j2
            )
            assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("iso,line", CASES)
@pytest.mark.parametrize("B", [0.0, 0.3, 1.06, 5.0])
def test_every_excited_state_has_equal_total_strength(iso, line, B):
    ground, excited = solve_line(iso, line, B)
    total = sum(dipole_matrix(ground, excited, q) ** 2 for q in (-1, 0, 1))
    per_excited = total.sum(axis=1)
    per_ground = total.sum(axis=0)
    assert np.allclose(per_excited, per_excited[0], rtol=1e-12)
    assert np.allclose(per_ground, per_ground[0], rtol=1e-12)
    assert per_excited[0] * len(excited) == pytest.approx(per_ground[0] * len(ground), rel=1e-12)


@pytest.mark.parametrize("iso,line", CASES)
@pytest.mark.parametrize("B", [0.0, 0.5, 1.06, 3.0])
def test_strength_weighted_mean_frequency_vanishes(iso, line, B):
    # both Hamiltonians are traceless and every state carries equal total strength
    lines = compute_lines(*solve_line(iso, line, B), min_strength=0.0)
    s = np.array([ln.relative_strength for ln in lines])
    f = np.array([ln.frequency for ln in lines])
    assert abs(np.dot(s, f) / s.sum()) <= 1e-6 * np.abs(f).max()


@pytest.mark.parametrize("iso,line", CASES)
def test_selection_rules_and_classes(iso, line):
    for ln in line_catalog(iso, line, 1.06, min_strength=0.0):
        assert ln.excited.m_F - ln.ground.m_F == ln.q
        assert ln.delta_mI == round(ln.excited.m_I - ln.ground.m_I)
        if ln.line_class == ALLOWED:
            assert ln.delta_mI == 0
        elif ln.line_class == SINGLY_FORBIDDEN:
            assert abs(ln.delta_mI) == 1


def test_strength_cut_is_relative():
    all_lines = line_catalog("Rb87", "D2", 1.06, min_strength=0.0)
    kept = line_catalog("Rb87", "D2", 1.06, min_strength=1e-3)
    smax = max(ln.relative_strength for ln in all_lines)
    assert len(kept) == sum(ln.relative_strength >= 1e-3 * smax for ln in all_lines)
    with pytest.raises(ValueError):
        line_catalog("Rb87", "D2", 1.06, min_strength=-1.0)


def test_zero_field_d2_reproduces_hyperfine_structure():
    # at B = 0 the Rb87 D2 lines collapse onto the six dipole-allowed F -> F' groups
    lines = line_catalog("Rb87", "D2", 0.0)
    freqs = sorted({round(ln.frequency / 1e6, 3) for ln in lines})
    assert len(freqs) == 6


def _forbidden_ratio(B):
    lines = line_catalog("Rb87", "D2", B, min_strength=0.0)
    allowed = max(ln.relative_strength for ln in lines if ln.line_class == ALLOWED and ln.q == 0)
    forbidden = max(ln.relative_strength for ln in lines if ln.line_class == SINGLY_FORBIDDEN)
    return forbidden / allowed


def test_forbidden_strength_scales_as_inverse_square_field():
    # perturbative admixture amplitude ~ A_hfs / (mu_B B)
    assert _forbidden_ratio(10.0) / _forbidden_ratio(5.0) == pytest.approx(0.25, rel=0.02)


def test_pi_quadruplets_follow_ground_m_J():
    lines = [ln for ln in line_catalog("Rb87", "D2", 1.06) if ln.q == 0 and ln.line_class == ALLOWED]
    low = {ln.ground.m_J for ln in lines if ln.detuning < 0}
    high = {ln.ground.m_J for ln in lines if ln.detuning > 0}
    assert len(low) == len(high) == 1 and low != high


def test_find_line():
    lines = line_catalog("Rb87", "D2", 1.06)
    ln = find_line(lines, (0.5, 1.5), (0.5, 1.5), 0)
    assert ln.q == 0 and ln.line_class == ALLOWED
    assert ln.label() == "|1/2,3/2>->|1/2,3/2>"
    with pytest.raises(LookupError):
        find_line(lines, (0.5, 1.5), (-1.5, -1.5))


def _first_order(term, I, m_J, m_I):
    e = term.A_hfs * m_J * m_I
    J = term.J
    if term.B_hfs and J > 0.5:
        e += term.B_hfs * (3 * m_J**2 - J * (J + 1)) * (3 * m_I**2 - I * (I + 1)) / (4 * J * (2 * J - 1) * I * (2 * I - 1))
    return e


@pytest.mark.parametrize("iso,line", CASES)
def test_mirror_lines_antisymmetric_after_diagonal_hyperfine(iso, line):
    # (m_J, m_I, q) -> (-m_J, -m_I, -q) flips the Zeeman and second-order terms;
    # the diagonal A m_J m_I (and quadrupole) part is even and is removed first
    atom = atom_data.lookup(iso)
    I = atom.nuclear_spin
    for B, tol in ((1.0, 100e6), (3.0, 15e6)):
        lines = line_catalog(iso, line, B)
        index = {(l.ground.m_J, l.ground.m_I, l.excited.m_J, l.excited.m_I, l.q): l for l in lines}
        pairs = 0
        raw = 0.0
        for (a, b, c, d, q), ln in index.items():
            mirror = index.get((-a, -b, -c, -d, -q))
            if mirror is None:
                continue
            pairs += 1
            total = ln.frequency + mirror.frequency
            raw = max(raw, abs(total))
            even = 2 * (_first_order(atom.line(line), I, c, d) - _first_order(atom.ground, I, a, b))
            assert abs(total - even) < tol
        assert pairs >= len(lines) - 2
        assert raw > 1e9  # the uncorrected sum is far from antisymmetric
