import math

import numpy as np
import pytest
from scipy.constants import atomic_mass, k as k_B

from hpbvapor import atom_data
from hpbvapor.atom_data import UnknownIsotopeError


def test_vapor_pressure_room_temperature():
    # tabulated saturated pressure of solid Rb at 25 C: 3.92e-7 torr
    assert atom_data.vapor_pressure(298.15) == pytest.approx(3.92e-7 * 133.322368, rel=0.02)


def test_vapor_pressure_branches_meet_at_melting_point():
    below = atom_data.vapor_pressure(312.46 - 1e-9)
    above = atom_data.vapor_pressure(312.46 + 1e-9)
    assert above == pytest.approx(below, rel=0.1)


def test_vapor_pressure_increases_with_temperature():
    T = np.linspace(280.0, 495.0, 50)
    p = np.array([atom_data.vapor_pressure(t) for t in T])
    assert np.all(np.diff(p) > 0)


@pytest.mark.parametrize("T", [0.0, -10.0, 5000.0])
def test_vapor_pressure_out_of_range(T):
    with pytest.raises(ValueError):
        atom_data.vapor_pressure(T)


def test_number_density_is_ideal_gas_split():
    T = 350.0
    n = atom_data.vapor_number_density(T, atom_data.mixture(0.9))
    total = sum(n.values())
    assert total * k_B * T == pytest.approx(atom_data.vapor_pressure(T), rel=1e-12)
    assert n["Rb87"] / total == pytest.approx(0.9, rel=1e-12)


def test_mixture():
    m = atom_data.mixture(0.9)
    assert m["Rb87"] == 0.9 and m["Rb85"] == pytest.approx(0.1)
    with pytest.raises(ValueError):
        atom_data.mixture(1.5)
    with pytest.raises(ValueError):
        atom_data.vapor_number_density(300.0, {"Rb87": 0.5, "Rb85": 0.4})


def test_unknown_isotope():
    with pytest.raises(UnknownIsotopeError):
        atom_data.lookup("Cs133")


def test_catalog_values():
    rb87 = atom_data.lookup("Rb87")
    assert rb87.nuclear_spin == 1.5
    assert atom_data.lookup("Rb85").nuclear_spin == 2.5
    assert rb87.ground.A_hfs == pytest.approx(3.417341305e9, rel=1e-9)
    assert rb87.line("D2").line_center_frequency == pytest.approx(384.2304844685e12, rel=1e-12)
    with pytest.raises(ValueError):
        rb87.line("D3")


def test_reference_frequency_between_isotopes():
    for line in ("D1", "D2"):
        f85 = atom_data.lookup("Rb85").line(line).line_center_frequency
        f87 = atom_data.lookup("Rb87").line(line).line_center_frequency
        ref = atom_data.reference_frequency(line)
        assert min(f85, f87) < ref < max(f85, f87)


def test_doppler_sigma_formula():
    m = 86.909180527 * atomic_mass
    f = 384.23e12
    sigma = atom_data.doppler_sigma(f, 320.15, m)
    assert sigma == pytest.approx(f / 299792458.0 * math.sqrt(k_B * 320.15 / m), rel=1e-12)
    assert atom_data.doppler_sigma(f, 4 * 320.15, m) == pytest.approx(2 * sigma, rel=1e-12)


OVERRIDE = """
Rb87:
  terms:
    P3/2: {A_hfs: 1.0e8}
"""


def test_catalog_override_file(tmp_path):
    path = tmp_path / "override.yaml"
    path.write_text(OVERRIDE)
    default = atom_data.lookup("Rb87").line("D2").A_hfs
    atom_data.load_catalog(path)
    assert atom_data.lookup("Rb87").line("D2").A_hfs == 1.0e8
    atom_data.reset_catalog()
    assert atom_data.lookup("Rb87").line("D2").A_hfs == default


def test_catalog_override_environment(tmp_path, monkeypatch):
    path = tmp_path / "override.yaml"
    path.write_text(OVERRIDE)
    monkeypatch.setenv(atom_data.ENV_OVERRIDE, str(path))
    atom_data.reset_catalog()
    assert atom_data.lookup("Rb87").line("D2").A_hfs == 1.0e8


def test_catalog_is_read_only():
    atom = atom_data.lookup("Rb87")
    with pytest.raises((AttributeError, TypeError)):
        atom.terms["S1/2"] = None


def test_catalog_override_rejects_non_numeric(tmp_path):
    path = tmp_path / "override.yaml"
    path.write_text("Rb87:\n  terms:\n    P3/2: {A_hfs: large}\n")
    with pytest.raises(ValueError, match="A_hfs"):
        atom_data.load_catalog(path)
