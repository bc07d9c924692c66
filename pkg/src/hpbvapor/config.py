"""
Strict YAML run configuration.

Every dimensional key carries its unit in the name (``field_tesla``,
``temperature_celsius``, ``detuning_step_mhz`` ...).  Unknown keys, bare
quantity names and missing required keys are rejected with a
:class:`ConfigError` naming the key and its line.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

__all__ = ["ConfigError", "RunConfig", "COMMANDS", "parse_config", "load_config"]

COMMANDS = ("levels", "lines", "spectrum", "eit", "pump", "fit")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Invalid run configuration."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = ""
        if key is not None:
            where += f"key '{key}'"
        if line is not None:
            where += f"{' ' if where else ''}(line {line})"
        super().__init__(f"{where}: {message}" if where else message)
        self.key = key
        self.line = line


# unit suffix -> factor to SI (Hz, T, K offset handled separately, m, W)
_SCALE = {
    "ghz": 1e9, "mhz": 1e6, "khz": 1e3, "hz": 1.0,
    "tesla": 1.0, "mt": 1e-3,
    "mm": 1e-3, "cm": 1e-2, "m": 1.0,
    "mw": 1e-3, "w": 1.0,
    "mbar": 1.0,
    "kelvin": 1.0,
}

# quantity -> accepted suffixes
_QUANTITIES = {
    "field": ("tesla", "mt"),
    "temperature": ("celsius", "kelvin"),
    "cell_length": ("mm", "cm", "m"),
    "buffer_pressure": ("mbar",),
    "buffer_broadening": ("mhz", "ghz"),
    "buffer_shift": ("mhz", "ghz"),
    "detuning_start": ("ghz", "mhz"),
    "detuning_stop": ("ghz", "mhz"),
    "detuning_step": ("mhz", "ghz", "khz"),
    "control_start": ("ghz", "mhz"),
    "control_stop": ("ghz", "mhz"),
    "control_step": ("mhz", "ghz"),
    "control_detuning": ("mhz", "ghz"),
    "control_power": ("mw", "w"),
    "rabi": ("mhz", "ghz"),
    "ground_decoherence": ("khz", "hz", "mhz"),
    "relaxation": ("khz", "hz", "mhz"),
    "rate": ("khz", "hz", "mhz"),
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict[str, Any]
    output: Path | None = None
    format: str = "csv"
    base_dir: Path = field(default_factory=Path.cwd)


_SCALARS = yaml.SafeLoader("")


def _construct(node: yaml.Node, path: str, lines: dict[str, int]) -> Any:
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            if not isinstance(k, yaml.ScalarNode):
                raise ConfigError("mapping keys must be scalars", path, k.start_mark.line + 1)
            key = k.value
            sub = f"{path}.{key}" if path else key
            if key in out:
                raise ConfigError("duplicate key", sub, k.start_mark.line + 1)
            out[key] = _construct(v, sub, lines)
            lines[sub] = k.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v, f"{path}[{i}]", lines) for i, v in enumerate(node.value)]
    return _SCALARS.construct_object(node)


class _Block:
    """Key-checked access to one mapping of the config."""

    def __init__(self, data: dict, path: str, lines: dict[str, int]):
        if not isinstance(data, dict):
            raise ConfigError("expected a mapping", path, lines.get(path))
        self.data = data
        self.path = path
        self.lines = lines
        self.used: set[str] = set()

    def _full(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def error(self, key: str, message: str) -> ConfigError:
        full = self._full(key)
        return ConfigError(message, full, self.lines.get(full, self.lines.get(self.path)))

    def has(self, key: str) -> bool:
        return key in self.data

    def raw(self, key: str, default: Any = ..., kind: type | tuple | None = None) -> Any:
        if key not in self.data:
            if default is ...:
                raise self.error(key, "missing required key")
            return default
        self.used.add(key)
        value = self.data[key]
        if kind is not None:
            numeric = kind in (int, float, (int, float))
            if not isinstance(value, kind) or (numeric and isinstance(value, bool)):
                raise self.error(key, f"expected {getattr(kind, '__name__', kind)}, got {value!r}")
        return value

    def number(self, key: str, default: Any = ...) -> float:
        value = self.raw(key, default)
        if value is default and key not in self.data:
            return value
        if isinstance(value, str):
            # YAML 1.1 reads exponent-only literals such as 1e-4 as strings
            try:
                return float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(key, f"expected a number, got {value!r}")
        return float(value)

    def quantity(self, name: str, si_default: Any = ..., required: bool = True) -> Any:
        """SI value of the unit-suffixed key ``name_<unit>``."""
        suffixes = _QUANTITIES[name]
        for key in self.data:
            if key == name or (key.startswith(name + "_") and key[len(name) + 1:] not in suffixes
                               and key.rpartition("_")[0] == name):
                self._unit_error(key)
        present = [s for s in suffixes if f"{name}_{s}" in self.data]
        if len(present) > 1:
            raise self.error(f"{name}_{present[1]}", f"'{name}' given in more than one unit")
        if not present:
            if si_default is ... and required:
                options = ", ".join(f"{name}_{s}" for s in suffixes)
                raise self.error(name, f"missing required key (one of {options})")
            return None if si_default is ... else si_default
        unit = present[0]
        value = self.number(f"{name}_{unit}")
        if unit == "celsius":
            return value + 273.15
        return value * _SCALE[unit]

    def block(self, key: str, required: bool = True) -> "_Block | None":
        if key not in self.data:
            if required:
                raise self.error(key, "missing required block")
            return None
        self.used.add(key)
        return _Block(self.data[key], self._full(key), self.lines)

    def finish(self) -> None:
        for key in self.data:
            if key in self.used:
                continue
            if key in _QUANTITIES or key.rpartition("_")[0] in _QUANTITIES:
                self._unit_error(key)
            raise self.error(key, "unknown key")

    def _unit_error(self, key: str) -> None:
        if key in _QUANTITIES:
            options = ", ".join(f"{key}_{s}" for s in _QUANTITIES[key])
            raise self.error(key, f"missing unit suffix; use one of {options}")
        base = key.rpartition("_")[0]
        options = ", ".join(f"{base}_{s}" for s in _QUANTITIES[base])
        raise self.error(key, f"unit suffix mismatch; use one of {options}")


def _grid(b: _Block, prefix: str = "detuning") -> tuple[float, float, float]:
    start = b.quantity(f"{prefix}_start")
    stop = b.quantity(f"{prefix}_stop")
    step = b.quantity(f"{prefix}_step")
    if step <= 0 or stop <= start:
        raise b.error(f"{prefix}_step", "grid needs stop > start and a positive step")
    return start, stop, step


def _state(b: _Block, key: str) -> tuple[float, float]:
    v = b.raw(key, kind=list)
    if len(v) != 2 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise b.error(key, "expected [m_J, m_I]")
    return float(v[0]), float(v[1])


def _transition(b: _Block) -> dict:
    out = {"ground": _state(b, "ground"), "excited": _state(b, "excited")}
    q = b.raw("q", None, int)
    if q is not None and q not in (-1, 0, 1):
        raise b.error("q", "q must be -1, 0 or 1")
    out["q"] = q
    return out


def _polarization(b: _Block) -> Any:
    pol = b.raw("polarization", "horizontal", (str, list))
    if isinstance(pol, str) and pol not in ("horizontal", "vertical"):
        raise b.error("polarization", "expected 'horizontal', 'vertical' or [w-, w0, w+]")
    if isinstance(pol, list):
        if len(pol) != 3 or any(isinstance(x, bool) or not isinstance(x, (int, float)) or x < 0 for x in pol):
            raise b.error("polarization", "custom weights must be three non-negative numbers")
        pol = [float(x) for x in pol]
    return pol


def _line(b: _Block, default: str = "D2") -> str:
    line = b.raw("line", default, str)
    if line not in ("D1", "D2"):
        raise b.error("line", "line must be D1 or D2")
    return line


def _medium(b: _Block) -> dict:
    frac = b.number("rb87_fraction", 0.9)
    if not 0 <= frac <= 1:
        raise b.error("rb87_fraction", "must lie in [0, 1]")
    temperature = b.quantity("temperature")
    if temperature <= 0:
        raise b.error("temperature", "absolute temperature must be positive")
    field_ = b.quantity("field")
    if field_ < 0:
        raise b.error("field", "field must be non-negative")
    length = b.quantity("cell_length")
    if length <= 0:
        raise b.error("cell_length", "cell length must be positive")
    out = {
        "rb87_fraction": frac,
        "B": field_,
        "temperature": temperature,
        "cell_length": length,
        "line": _line(b),
        "polarization": _polarization(b),
        "min_strength": b.number("min_strength", 1e-4),
        "buffer_shift": b.quantity("buffer_shift", 0.0),
    }
    pressure = b.quantity("buffer_pressure", required=False)
    width = b.quantity("buffer_broadening", required=False)
    if pressure is not None and width is not None:
        raise b.error("buffer_pressure_mbar", "give either buffer_pressure_mbar or buffer_broadening_*")
    out["buffer_pressure"] = pressure
    out["buffer_broadening"] = width
    return out


def _levels(root: _Block) -> dict:
    b = root.block("levels")
    terms = b.raw("terms", ["S1/2", "P1/2", "P3/2"], list)
    for t in terms:
        if t not in ("S1/2", "P1/2", "P3/2"):
            raise b.error("terms", f"unknown term {t!r}")
    out = {"isotope": b.raw("isotope", "Rb87", str), "B": b.quantity("field"), "terms": terms}
    b.finish()
    return out


def _lines(root: _Block) -> dict:
    b = root.block("lines")
    out = {
        "isotope": b.raw("isotope", "Rb87", str),
        "B": b.quantity("field"),
        "line": _line(b),
        "min_strength": b.number("min_strength", 1e-4),
    }
    b.finish()
    return out


def _spectrum(root: _Block) -> dict:
    m = root.block("medium")
    medium = _medium(m)
    m.finish()
    g = root.block("grid", required=False)
    grid = (-60e9, 60e9, 10e6)
    if g is not None:
        grid = _grid(g)
        g.finish()
    return {"medium": medium, "grid": grid}


def _eit(root: _Block) -> dict:
    b = root.block("eit")
    out: dict[str, Any] = {
        "isotope": b.raw("isotope", "Rb87", str),
        "B": b.quantity("field"),
        "temperature": b.quantity("temperature"),
        "line": _line(b),
        "ground_decoherence": b.quantity("ground_decoherence", 100e3),
        "buffer_broadening": b.quantity("buffer_broadening", 0.0),
        "doppler": b.raw("doppler", True, bool),
    }
    for key in ("probe", "control"):
        sub = b.block(key)
        out[key] = _transition(sub)
        sub.finish()
    out["wavevector_ratio"] = b.number("wavevector_ratio", None)

    rabi = b.quantity("rabi", required=False)
    power = b.quantity("control_power", required=False)
    if (rabi is None) == (power is None):
        raise b.error("rabi_mhz", "give exactly one of rabi_* or control_power_*")
    if power is not None:
        cal = b.number("calibration_mhz_per_sqrt_mw")
        if cal <= 0:
            raise b.error("calibration_mhz_per_sqrt_mw", "calibration must be positive")
        out["power"] = power
        out["calibration"] = cal * 1e6 / (1e-3) ** 0.5  # Hz per sqrt(W)
    out["rabi"] = rabi

    pg = b.block("probe_grid")
    out["probe_grid"] = _grid(pg)
    pg.finish()
    if b.has("control_grid"):
        cg = b.block("control_grid")
        out["control_grid"] = _grid(cg, "control")
        cg.finish()
        if b.has("control_detuning_mhz") or b.has("control_detuning_ghz"):
            raise b.error("control_grid", "give either control_grid or control_detuning_*")
    else:
        out["control_grid"] = None
        out["control_detuning"] = b.quantity("control_detuning", 0.0)
    b.finish()
    return out


def _pump(root: _Block) -> dict:
    spec = _spectrum(root)
    b = root.block("pump")
    out = {
        "isotope": b.raw("isotope", "Rb87", str),
        "line": _line(b),
        "relaxation": b.quantity("relaxation", 0.0),
        "pumps": [],
    }
    pumps = b.raw("pumps", kind=list)
    for i, entry in enumerate(pumps):
        pb = _Block(entry, f"{b.path}.pumps[{i}]", b.lines)
        t = _transition(pb)
        rate = pb.quantity("rate")
        if rate < 0:
            raise pb.error("rate", "pump rate must be non-negative")
        t["rate"] = rate
        t["enabled"] = pb.raw("enabled", True, bool)
        pb.finish()
        out["pumps"].append(t)
    if out["relaxation"] < 0:
        raise b.error("relaxation", "relaxation rate must be non-negative")
    b.finish()
    spec["pump"] = out
    return spec


_FIT_KINDS = ("sqrt_scaling", "avoided_crossing", "spectrum")


def _fit(root: _Block, base_dir: Path) -> dict:
    b = root.block("fit")
    kind = b.raw("kind", kind=str)
    if kind not in _FIT_KINDS:
        raise b.error("kind", f"expected one of {', '.join(_FIT_KINDS)}")
    data = Path(b.raw("data", kind=str))
    if not data.is_absolute():
        data = base_dir / data
    if not data.exists():
        raise b.error("data", f"data file {str(data)!r} does not exist")
    out: dict[str, Any] = {"kind": kind, "data": data}
    defaults = {
        "sqrt_scaling": ("power_mW", "splitting_MHz"),
        "avoided_crossing": ("delta_c_GHz", "peak_GHz"),
        "spectrum": ("detuning_GHz", "transmission"),
    }[kind]
    out["x_column"] = b.raw("x_column", defaults[0], str)
    out["y_column"] = b.raw("y_column", defaults[1], str)
    out["sigma_column"] = b.raw("sigma_column", None, str)
    if kind == "avoided_crossing":
        out["branch_column"] = b.raw("branch_column", "branch", str)
    if kind == "spectrum":
        free = b.raw("free", ["temperature", "field"], list)
        allowed = {"temperature": "temperature", "field": "B", "rb87_fraction": "rb87_fraction",
                   "buffer_broadening": "buffer_broadening_fwhm"}
        bad = [f for f in free if f not in allowed]
        if bad:
            raise b.error("free", f"unknown free parameters {bad}; choose from {sorted(allowed)}")
        out["free"] = [allowed[f] for f in free]
        init = b.block("initial", required=False)
        initial: dict[str, float] = {}
        if init is not None:
            for name, key in (("temperature", "temperature"), ("field", "B"),
                              ("buffer_broadening", "buffer_broadening_fwhm")):
                v = init.quantity(name, required=False)
                if v is not None:
                    initial[key] = v
            if init.has("rb87_fraction"):
                initial["rb87_fraction"] = init.number("rb87_fraction")
            init.finish()
        out["initial"] = initial
        b.finish()
        m = root.block("medium")
        out["medium"] = _medium(m)
        m.finish()
        return out
    b.finish()
    return out


def parse_config(
    text: str, base_dir: str | os.PathLike | None = None, command: str | None = None
) -> RunConfig:
    """Validate YAML text into a :class:`RunConfig`.

    ``command`` (from the command line) may stand in for a missing
    ``command`` key and must agree with it otherwise.
    """
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          line=mark.line + 1 if mark else None) from None
    if node is None:
        raise ConfigError("empty configuration")
    lines: dict[str, int] = {}
    data = _construct(node, "", lines)
    root = _Block(data, "", lines)

    if command is not None and command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    given = root.raw("command", command, str)
    if command is not None and given != command:
        raise root.error("command", f"config is for '{given}', not '{command}'")
    command = given
    if command is None:
        raise root.error("command", "missing required key")
    if command not in COMMANDS:
        raise root.error("command", f"expected one of {', '.join(COMMANDS)}")
    fmt = root.raw("format", "csv", str)
    if fmt not in FORMATS:
        raise root.error("format", "expected csv or json")
    output = root.raw("output", None, str)

    parsers = {
        "levels": _levels,
        "lines": _lines,
        "spectrum": _spectrum,
        "eit": _eit,
        "pump": _pump,
        "fit": lambda r: _fit(r, base),
    }
    params = parsers[command](root)
    root.finish()
    out_path = None
    if output is not None:
        out_path = Path(output)
        if not out_path.is_absolute():
            out_path = base / out_path
    return RunConfig(command, params, out_path, fmt, base)


def load_config(path: str | os.PathLike, command: str | None = None) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), path.parent, command)
