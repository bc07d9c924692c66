import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid
from scipy.signal import find_peaks

from hpbvapor import atom_data
from hpbvapor.spectrum import (
    EmptySpectrumWarning,
    MediumConfig,
    buffer_broadening,
    complex_voigt,
    detuning_grid,
    lab_polarization_weights,
    transmission_spectrum,
    voigt_profile,
)
from hpbvapor.transitions import ALLOWED, line_catalog

GRID = detuning_grid(-15e9, 15e9, 20e6)


def _medium(**kw):
    base = dict(
        isotope_mixture=atom_data.mixture(0.9),
        B=1.06,
        temperature=350.0,
        cell_length=2e-3,
        buffer_broadening_fwhm=buffer_broadening(11.0, "D2"),
    )
    base.update(kw)
    return MediumConfig(**base)


@settings(max_examples=30, deadline=None)
@given(sigma=st.floats(1e6, 1e9), fwhm=st.floats(1e5, 1e9))
def test_voigt_is_area_normalized(sigma, fwhm):
    # analytic tails beyond +-L: Lorentzian mass 2/pi * atan(gamma/L) complement
    L = 2000 * (sigma + fwhm)
    x = np.linspace(-L, L, 400001)
    area = trapezoid(voigt_profile(x, sigma, fwhm), x)
    tail = 1 - 2 / np.pi * np.arctan(L / (0.5 * fwhm))
    assert area + tail == pytest.approx(1.0, abs=2e-4)


def test_voigt_limits():
    x = np.linspace(-5e8, 5e8, 101)
    g = 3e6
    lorentz = (g / np.pi) / (x**2 + g**2)
    assert np.allclose(voigt_profile(x, 0.0, 2 * g), lorentz, rtol=1e-12)
    sigma = 2e8
    gauss = np.exp(-0.5 * (x / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))
    assert np.allclose(voigt_profile(x, sigma, 1e-3), gauss, rtol=1e-6)
    with pytest.raises(ValueError):
        voigt_profile(x, 0.0, 0.0)


def test_complex_voigt_dispersion_is_odd():
    x = np.linspace(-1e9, 1e9, 201)
    z = complex_voigt(x, 2e8, 1e7)
    assert np.allclose(z.imag, -z.imag[::-1], atol=1e-25)
    assert np.allclose(z.real, z.real[::-1], rtol=1e-12)


def test_transmission_is_exp_of_minus_od():
    s = transmission_spectrum(_medium(), "D2", GRID)
    assert np.allclose(s.transmission, np.exp(-s.optical_depth), rtol=1e-14)
    assert np.all(s.optical_depth >= 0)
    assert s.status == "ok"


def test_isotope_additivity():
    mixed = transmission_spectrum(_medium(), "D2", GRID).optical_depth
    pure87 = transmission_spectrum(_medium(isotope_mixture=atom_data.mixture(1.0)), "D2", GRID).optical_depth
    pure85 = transmission_spectrum(_medium(isotope_mixture=atom_data.mixture(0.0)), "D2", GRID).optical_depth
    assert np.allclose(mixed, 0.9 * pure87 + 0.1 * pure85, rtol=1e-12, atol=1e-300)


def test_od_linear_in_length():
    a = transmission_spectrum(_medium(cell_length=1e-3), "D2", GRID).optical_depth
    b = transmission_spectrum(_medium(cell_length=3e-3), "D2", GRID).optical_depth
    assert np.allclose(b, 3 * a, rtol=1e-12)


def test_zeroed_populations_remove_isotope():
    m = _medium(isotope_mixture=atom_data.mixture(1.0), ground_populations={"Rb87": np.zeros(8)})
    with pytest.warns(EmptySpectrumWarning):
        s = transmission_spectrum(m, "D2", GRID)
    assert np.all(s.optical_depth == 0.0)
    assert np.all(s.transmission == 1.0)


def test_population_vector_validated():
    with pytest.raises(ValueError):
        transmission_spectrum(_medium(ground_populations={"Rb87": np.ones(3)}), "D2", GRID)
    with pytest.raises(ValueError):
        transmission_spectrum(_medium(ground_populations={"Rb87": -np.ones(8) / 8}), "D2", GRID)


def test_empty_spectrum_warns():
    m = _medium(isotope_mixture=atom_data.mixture(1.0), ground_populations={"Rb87": np.zeros(8)})
    with pytest.warns(EmptySpectrumWarning):
        s = transmission_spectrum(m, "D2", GRID)
    assert s.status == "empty"
    with pytest.warns(EmptySpectrumWarning):
        transmission_spectrum(replace(m, ground_populations=None, min_strength=2.0), "D2", GRID)


def test_horizontal_probe_peaks_on_pi_lines():
    m = _medium(isotope_mixture=atom_data.mixture(1.0), temperature=300.0, buffer_broadening_fwhm=0.0)
    grid = detuning_grid(-12e9, 12e9, 2e6)
    od = transmission_spectrum(m, "D2", grid).optical_depth
    peaks, props = find_peaks(od, height=0)
    top = np.sort(grid[peaks[np.argsort(props["peak_heights"])[-8:]]])
    pi = np.sort([ln.detuning for ln in line_catalog("Rb87", "D2", 1.06) if ln.q == 0 and ln.line_class == ALLOWED])
    assert np.max(np.abs(top - pi)) < 20e6


def test_threads_do_not_change_result():
    a = transmission_spectrum(_medium(), "D2", GRID, workers=1)
    b = transmission_spectrum(_medium(), "D2", GRID, workers=4)
    assert np.array_equal(a.optical_depth, b.optical_depth)


def test_hotter_cell_absorbs_more():
    cold = transmission_spectrum(_medium(temperature=320.0), "D2", GRID).optical_depth
    hot = transmission_spectrum(_medium(temperature=370.0), "D2", GRID).optical_depth
    assert hot.max() > cold.max()


def test_polarization_weights():
    assert np.array_equal(lab_polarization_weights("horizontal"), [0, 1, 0])
    assert np.array_equal(lab_polarization_weights("vertical"), [0.5, 0, 0.5])
    assert np.allclose(lab_polarization_weights([1, 1, 2]), [0.25, 0.25, 0.5])
    for bad in ("diagonal", [1, 2], [-1, 1, 1], [0, 0, 0]):
        with pytest.raises(ValueError):
            lab_polarization_weights(bad)


def test_detuning_grid_inclusive():
    g = detuning_grid(-1e9, 1e9, 1e6)
    assert g[0] == -1e9 and g[-1] == pytest.approx(1e9) and g.size == 2001
    with pytest.raises(ValueError):
        detuning_grid(1.0, 0.0, 1.0)


def test_medium_validation():
    with pytest.raises(ValueError):
        _medium(cell_length=0.0)
    with pytest.raises(ValueError):
        _medium(B=-1.0)
    with pytest.raises(ValueError):
        _medium(isotope_mixture={"Rb87": 0.5})


def test_buffer_broadening_linear_in_pressure():
    assert buffer_broadening(22.0, "D2") == pytest.approx(2 * buffer_broadening(11.0, "D2"))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert buffer_broadening(0.0, "D1") == 0.0
