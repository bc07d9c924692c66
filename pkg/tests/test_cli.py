import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from hpbvapor import cli, tables
from hpbvapor.cli import EXIT_CODES, main
from hpbvapor.zeeman import NumericError

SPECTRUM = """\
command: spectrum
output: out/spectrum.csv
medium:
  rb87_fraction: 0.9
  field_tesla: 1.06
  temperature_celsius: 97
  cell_length_mm: 2
  buffer_pressure_mbar: 11
grid:
  detuning_start_ghz: -5
  detuning_stop_ghz: 5
  detuning_step_mhz: 50
"""

EIT_SWEEP = """\
command: eit
output: out/eit.csv
eit:
  isotope: Rb87
  field_tesla: 1.06
  temperature_celsius: 47
  probe: {ground: [0.5, 1.5], excited: [0.5, 1.5], q: 0}
  control: {ground: [-0.5, 1.5], excited: [0.5, 1.5], q: 1}
  rabi_mhz: 500
  probe_grid: {detuning_start_ghz: -1, detuning_stop_ghz: 1, detuning_step_mhz: 100}
  control_grid: {control_start_ghz: -1, control_stop_ghz: 1, control_step_mhz: 500}
"""


def _write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def test_spectrum_columns(tmp_path):
    assert main(["spectrum", "--config", str(_write(tmp_path, SPECTRUM)), "--quiet"]) == 0
    out = tmp_path / "out" / "spectrum.csv"
    assert _header(out) == ["detuning_GHz", "od", "transmission"]
    data = tables.read_columns(out, ["detuning_GHz", "od", "transmission"], si=False)
    assert data["detuning_GHz"].size == 201
    assert np.allclose(data["transmission"], np.exp(-data["od"]), rtol=1e-15)


def test_eit_sweep_triplets(tmp_path):
    assert main(["run", "--config", str(_write(tmp_path, EIT_SWEEP)), "--quiet"]) == 0
    out = tmp_path / "out" / "eit.csv"
    assert _header(out) == ["delta_p_GHz", "delta_c_GHz", "absorption"]
    d = tables.read_columns(out, ["delta_p_GHz", "delta_c_GHz", "absorption"], si=False)
    assert d["absorption"].size == 21 * 5
    assert sorted(set(d["delta_c_GHz"])) == [-1.0, -0.5, 0.0, 0.5, 1.0]


@pytest.mark.parametrize(
    "name,header",
    [
        ("fig2_levels.yaml", ["term", "index", "energy_GHz", "mF", "dominant_mJ", "dominant_mI", "amplitudes"]),
        ("fig2_lines.yaml", ["detuning_GHz", "q", "strength", "class", "ground", "excited"]),
    ],
)
def test_documented_columns(config_copy, tmp_path, name, header):
    out = tmp_path / "x.csv"
    assert main(["run", "--config", str(config_copy / name), "--out", str(out), "--quiet"]) == 0
    assert _header(out) == header


def test_pump_writes_json_and_spectrum(config_copy, tmp_path):
    out = tmp_path / "pump.json"
    assert main(["run", "--config", str(config_copy / "fig7_pump.yaml"), "--out", str(out), "--quiet"]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == tables.SCHEMA_VERSION
    assert doc["status"] == "unique"
    assert sum(p["population"] for p in doc["populations"]) == pytest.approx(1.0)
    assert _header(tmp_path / "pump_spectrum.csv") == ["detuning_GHz", "od", "transmission"]


def test_fit_writes_json(config_copy, tmp_path):
    out = tmp_path / "fit.json"
    assert main(["run", "--config", str(config_copy / "fit_sqrt_scaling.yaml"), "--out", str(out), "--quiet"]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == tables.SCHEMA_VERSION
    assert doc["converged"] is True
    assert doc["a_MHz_per_sqrt_mW"] == pytest.approx(43.14, abs=0.01)


def test_json_format_override(tmp_path):
    out = tmp_path / "s.json"
    assert main(["spectrum", "--config", str(_write(tmp_path, SPECTRUM)), "--out", str(out), "--format", "json", "--quiet"]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == tables.SCHEMA_VERSION


def test_stdout_when_no_output(tmp_path, capsys):
    cfg = _write(tmp_path, SPECTRUM.replace("output: out/spectrum.csv\n", ""))
    assert main(["spectrum", "--config", str(cfg), "--quiet"]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == "detuning_GHz,od,transmission"
    assert not (tmp_path / "out").exists()


def test_threads_give_identical_bytes(tmp_path):
    cfg = _write(tmp_path, SPECTRUM)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["spectrum", "--config", str(cfg), "--out", str(a), "--threads", "1", "--quiet"]) == 0
    assert main(["spectrum", "--config", str(cfg), "--out", str(b), "--threads", "0", "--quiet"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_atom_data_override_changes_output(tmp_path):
    cfg = _write(tmp_path, SPECTRUM)
    override = tmp_path / "atoms.yaml"
    override.write_text("Rb87:\n  terms:\n    P3/2: {natural_linewidth: 5.0e7}\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["spectrum", "--config", str(cfg), "--out", str(a), "--quiet"]) == 0
    assert main(["spectrum", "--config", str(cfg), "--out", str(b), "--atom-data", str(override), "--quiet"]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_exit_codes(tmp_path, monkeypatch):
    assert main(["spectrum", "--config", str(tmp_path / "missing.yaml"), "--quiet"]) == EXIT_CODES["not_found"]
    bad = _write(tmp_path, SPECTRUM.replace("temperature_celsius", "temperature"), "bad.yaml")
    assert main(["spectrum", "--config", str(bad), "--quiet"]) == EXIT_CODES["config"]
    assert main(["eit", "--config", str(_write(tmp_path, SPECTRUM)), "--quiet"]) == EXIT_CODES["config"]
    assert main(["spectrum", "--config", str(_write(tmp_path, SPECTRUM)), "--threads", "-2", "--quiet"]) == EXIT_CODES["argument"]

    data = tmp_path / "far.csv"
    data.write_text("detuning_GHz,transmission\n200,1\n201,1\n202,1\n")
    fit = _write(
        tmp_path,
        "command: fit\nfit:\n  kind: spectrum\n  data: far.csv\nmedium:\n"
        "  field_tesla: 1.06\n  temperature_celsius: 97\n  cell_length_mm: 2\n",
        "fit.yaml",
    )
    assert main(["fit", "--config", str(fit), "--quiet"]) == EXIT_CODES["fit"]

    missing_col = tmp_path / "cols.csv"
    missing_col.write_text("power_W,splitting_MHz\n1,2\n4,4\n")
    cfg = _write(tmp_path, "command: fit\nfit:\n  kind: sqrt_scaling\n  data: cols.csv\n", "cols.yaml")
    assert main(["fit", "--config", str(cfg), "--quiet"]) == EXIT_CODES["not_found"]

    def boom(*args, **kwargs):
        raise NumericError("eigensolver failed")

    monkeypatch.setattr(cli, "run", boom)
    assert main(["spectrum", "--config", str(_write(tmp_path, SPECTRUM)), "--quiet"]) == EXIT_CODES["numeric"]


def test_exit_codes_are_distinct():
    assert len(set(EXIT_CODES.values())) == len(EXIT_CODES)


def test_console_script_version():
    exe = shutil.which("hpbvapor")
    cmd = [exe] if exe else [sys.executable, "-m", "hpbvapor.cli"]
    res = subprocess.run([*cmd, "--version"], capture_output=True, text=True, check=True)
    assert res.stdout.strip().startswith("hpbvapor ")


def test_tables_round_trip(tmp_path):
    values = [0.1, 1 / 3, 2.5e-300, -7.123456789012345e12]
    path = tables.write_text(tmp_path / "t.csv", tables.csv_text(["x_GHz"], [[v] for v in values]))
    back = tables.read_columns(path, ["x_GHz"], si=False)["x_GHz"]
    assert back.tolist() == values
    assert np.allclose(tables.read_columns(path, ["x_GHz"])["x_GHz"], np.array(values) * 1e9, rtol=1e-15)
    with pytest.raises(LookupError):
        tables.read_columns(path, ["y"])
    with pytest.raises(ValueError):
        tables.csv_text(["a", "b"], [[1]])


def test_json_is_sorted_and_versioned():
    text = tables.json_text({"b": np.float64(1.5), "a": [np.int64(2)], "c": float("nan")})
    doc = json.loads(text)
    assert list(doc) == ["a", "b", "c", "schema_version"]
    assert doc["c"] == "nan"
