"""
Command-line front end: ``hpbvapor <command> --config run.yaml``.

Exit codes
----------
0 success, 2 configuration error, 3 missing file / unknown name,
4 invalid argument or model input, 5 numerical failure, 6 fit failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, atom_data
from .config import COMMANDS, ConfigError, RunConfig, load_config
from .eit import (
    LambdaSystem,
    absorption_map,
    doppler_averaged_profile,
    power_to_rabi,
    transparency_metrics,
)
from .fitting import (
    DataSeries,
    FitError,
    fit_avoided_crossing,
    fit_spectrum_parameters,
    fit_sqrt_scaling,
)
from .pumping import PumpScheme, nuclear_polarization, pumped_spectrum, steady_state
from .spectrum import MediumConfig, buffer_broadening, detuning_grid, transmission_spectrum
from .tables import csv_text, json_text, read_columns, write_text
from .transitions import compute_lines, find_line, line_catalog, solve_line
from .zeeman import NumericError, eigenstates

__all__ = ["main", "run", "build_parser", "EXIT_CODES"]

log = logging.getLogger("hpbvapor")

EXIT_CODES = {
    "ok": 0,
    "config": 2,
    "not_found": 3,
    "argument": 4,
    "numeric": 5,
    "fit": 6,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hpbvapor",
        description="Rubidium vapor spectra, EIT and optical pumping in tesla-scale fields.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "run"):
        p = sub.add_parser(name, help="run the command named in the config" if name == "run" else f"{name} calculation")
        p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
        p.add_argument("--out", type=Path, help="output path (default: config 'output' or stdout)")
        p.add_argument("--format", choices=("csv", "json"), help="output format (overrides config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = all cores")
        p.add_argument("--atom-data", type=Path, help=f"YAML constant overrides (else ${atom_data.ENV_OVERRIDE})")
        p.add_argument("--quiet", action="store_true", help="only report errors")
    return parser


def _medium(params: dict) -> MediumConfig:
    width = params["buffer_broadening"]
    if width is None:
        width = buffer_broadening(params["buffer_pressure"] or 0.0, params["line"])
    return MediumConfig(
        isotope_mixture=atom_data.mixture(params["rb87_fraction"]),
        B=params["B"],
        temperature=params["temperature"],
        cell_length=params["cell_length"],
        buffer_broadening_fwhm=width,
        buffer_shift=params["buffer_shift"],
        lab_polarization=params["polarization"],
        min_strength=params["min_strength"],
    )


def _levels(cfg: RunConfig, fmt: str) -> dict[str, str]:
    p = cfg.params
    atom = atom_data.lookup(p["isotope"])
    rows, records = [], []
    for label in p["terms"]:
        for i, s in enumerate(eigenstates(atom.term(label), atom.isotope, p["B"])):
            amps = ";".join(format(float(a), ".17g") for a in s.composition)
            rows.append((label, i, s.energy / 1e9, s.m_F, s.m_J, s.m_I, amps))
            records.append({
                "term": label, "index": i, "energy_GHz": s.energy / 1e9, "mF": s.m_F,
                "dominant_mJ": s.m_J, "dominant_mI": s.m_I, "amplitudes": s.composition,
            })
    if fmt == "json":
        return {"main": json_text({"command": "levels", "isotope": p["isotope"],
                                   "field_tesla": p["B"], "levels": records})}
    header = ("term", "index", "energy_GHz", "mF", "dominant_mJ", "dominant_mI", "amplitudes")
    return {"main": csv_text(header, rows)}


def _lines(cfg: RunConfig, fmt: str) -> dict[str, str]:
    p = cfg.params
    lines = line_catalog(p["isotope"], p["line"], p["B"], p["min_strength"])
    rows = [
        (ln.detuning / 1e9, ln.q, ln.relative_strength, ln.line_class, ln.ground.label(), ln.excited.label())
        for ln in lines
    ]
    header = ("detuning_GHz", "q", "strength", "class", "ground", "excited")
    if fmt == "json":
        return {"main": json_text({"command": "lines", "isotope": p["isotope"], "line": p["line"],
                                   "field_tesla": p["B"],
                                   "lines": [dict(zip(header, r)) for r in rows]})}
    return {"main": csv_text(header, rows)}


def _spectrum_table(grid, fmt: str, extra: dict | None = None) -> str:
    header = ("detuning_GHz", "od", "transmission")
    if fmt == "json":
        return json_text({
            "command": "spectrum", "status": grid.status,
            "detuning_GHz": grid.detunings / 1e9, "od": grid.optical_depth,
            "transmission": grid.transmission, **(extra or {}),
        })
    return csv_text(header, zip(grid.detunings / 1e9, grid.optical_depth, grid.transmission))


def _spectrum(cfg: RunConfig, fmt: str, threads: int) -> dict[str, str]:
    p = cfg.params
    medium = _medium(p["medium"])
    grid = transmission_spectrum(medium, p["medium"]["line"], p["grid"], workers=threads)
    log.info("spectrum: %d points, %d lines, max OD %.3g", grid.detunings.size, len(grid.lines),
             grid.optical_depth.max())
    return {"main": _spectrum_table(grid, fmt)}


def _eit(cfg: RunConfig, fmt: str) -> dict[str, str]:
    p = cfg.params
    ground, excited = solve_line(p["isotope"], p["line"], p["B"])
    lines = compute_lines(ground, excited, min_strength=0.0)
    probe = find_line(lines, p["probe"]["ground"], p["probe"]["excited"], p["probe"]["q"])
    control = find_line(lines, p["control"]["ground"], p["control"]["excited"], p["control"]["q"])
    rabi = p["rabi"] if p["rabi"] is not None else power_to_rabi(p["power"], p["calibration"])
    system = LambdaSystem.from_lines(
        probe, control, rabi, p["temperature"],
        control_detuning=p.get("control_detuning", 0.0),
        buffer_broadening_fwhm=p["buffer_broadening"],
        ground_decoherence=p["ground_decoherence"],
    )
    changes = {}
    if p["wavevector_ratio"] is not None:
        changes["wavevector_ratio"] = p["wavevector_ratio"]
    if not p["doppler"]:
        changes["doppler_sigma"] = 0.0
    if changes:
        system = system.with_(**changes)

    dp = detuning_grid(*p["probe_grid"])
    header = ("delta_p_GHz", "delta_c_GHz", "absorption")
    meta = {"command": "eit", "rabi_hz": rabi, "doppler_sigma_hz": system.doppler_sigma,
            "wavevector_ratio": system.wavevector_ratio}
    if p["control_grid"] is None:
        profile = doppler_averaged_profile(system, dp)
        m = transparency_metrics(profile)
        log.info("eit: regime %s, splitting %s", m.regime, m.splitting)
        dc = np.full(dp.size, system.control_detuning)
        rows = list(zip(dp / 1e9, dc / 1e9, profile.absorption))
        meta.update(regime=m.regime, width_hz=m.width, depth=m.depth, splitting_hz=m.splitting)
    else:
        dcs = detuning_grid(*p["control_grid"])
        amap = absorption_map(system, dp, dcs)
        rows = [(x / 1e9, d / 1e9, a) for d, row in zip(dcs, amap) for x, a in zip(dp, row)]
        log.info("eit: %d x %d absorption map", dcs.size, dp.size)
    if fmt == "json":
        meta.update({k: [r[i] for r in rows] for i, k in enumerate(header)})
        return {"main": json_text(meta)}
    return {"main": csv_text(header, rows)}


def _pump(cfg: RunConfig, fmt: str, threads: int) -> dict[str, str]:
    p = cfg.params
    pp = p["pump"]
    medium = _medium(p["medium"])
    entries = [(e["ground"], e["excited"], e["q"], e["rate"]) for e in pp["pumps"] if e["enabled"]]
    scheme = PumpScheme.build(pp["isotope"], pp["line"], medium.B, entries, pp["relaxation"])
    pops = steady_state(scheme)
    # ground-state ordering is shared by both D lines, so pump and probe lines may differ
    grid = pumped_spectrum(pops, medium, p["medium"]["line"], p["grid"], workers=threads)
    summary = {
        "command": "pump",
        "isotope": pp["isotope"],
        "field_tesla": medium.B,
        "status": pops.status,
        "components": [list(c) for c in pops.components],
        "nuclear_polarization": nuclear_polarization(pops),
        "populations": [
            {"label": s.label(), "mJ": s.m_J, "mI": s.m_I, "energy_GHz": s.energy / 1e9, "population": x}
            for s, x in zip(pops.states, pops.populations)
        ],
    }
    log.info("pump: status %s, polarization %.4f", pops.status, summary["nuclear_polarization"])
    return {"main": json_text(summary), "spectrum": _spectrum_table(grid, "csv")}


def _fit(cfg: RunConfig) -> dict[str, str]:
    p = cfg.params
    cols = [p["x_column"], p["y_column"]]
    if p["sigma_column"]:
        cols.append(p["sigma_column"])
    if p["kind"] == "avoided_crossing":
        cols.append(p["branch_column"])
    data = read_columns(p["data"], cols)
    series = DataSeries(
        data[p["x_column"]], data[p["y_column"]],
        data[p["sigma_column"]] if p["sigma_column"] else None,
        x_unit="SI", y_unit="SI",
    )
    extra: dict = {}
    if p["kind"] == "sqrt_scaling":
        result = fit_sqrt_scaling(series)
        a = result.parameters["a"]
        extra["a_MHz_per_sqrt_mW"] = a / 1e6 * np.sqrt(1e-3)
    elif p["kind"] == "avoided_crossing":
        result = fit_avoided_crossing(series, data[p["branch_column"]])
    else:
        medium = _medium(p["medium"])
        result = fit_spectrum_parameters(series, medium, p["free"], p["initial"], p["medium"]["line"])
    log.info("fit %s: converged=%s after %d iterations", p["kind"], result.converged, result.iterations)
    payload = {"command": "fit", "kind": p["kind"], "units": "SI (Hz, T, K, W)", **result.to_dict(), **extra}
    return {"main": json_text(payload)}


def run(cfg: RunConfig, out: Path | None = None, fmt: str | None = None, threads: int = 1) -> dict[str, Path | str]:
    """Execute a validated configuration and write its artifacts.

    Returns the written paths (or the text, for stdout output) per artifact.
    """
    fmt = fmt or cfg.format
    if threads == 0:
        threads = os.cpu_count() or 1
    if threads < 0:
        raise ValueError("threads must be >= 0")
    out = out or cfg.output
    if cfg.command == "levels":
        texts = _levels(cfg, fmt)
    elif cfg.command == "lines":
        texts = _lines(cfg, fmt)
    elif cfg.command == "spectrum":
        texts = _spectrum(cfg, fmt, threads)
    elif cfg.command == "eit":
        texts = _eit(cfg, fmt)
    elif cfg.command == "pump":
        texts = _pump(cfg, fmt, threads)
    else:
        texts = _fit(cfg)

    written: dict[str, Path | str] = {}
    for name, text in texts.items():
        if out is None:
            if name == "main":
                sys.stdout.write(text)
                written[name] = text
            else:
                log.info("no output path; %s artifact not written", name)
            continue
        target = out if name == "main" else out.with_name(f"{out.stem}_{name}.csv")
        written[name] = write_text(target, text)
        log.info("wrote %s", target)
    return written


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CODES["config"]
    if isinstance(exc, FitError):
        return EXIT_CODES["fit"]
    if isinstance(exc, (FileNotFoundError, LookupError)):
        return EXIT_CODES["not_found"]
    if isinstance(exc, (NumericError, ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_CODES["numeric"]
    if isinstance(exc, (ValueError, TypeError)):
        return EXIT_CODES["argument"]
    raise exc


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.atom_data is not None:
            atom_data.load_catalog(args.atom_data)
        command = None if args.command == "run" else args.command
        cfg = load_config(args.config, command)
        run(cfg, args.out, args.format, args.threads)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        code = _exit_code(exc)
        log.error("%s: %s", type(exc).__name__, exc)
        return code
    return EXIT_CODES["ok"]


if __name__ == "__main__":
    sys.exit(main())
