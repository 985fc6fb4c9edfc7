"""Strict INI experiment configuration.

Every experiment has a fixed schema of ``[section] key = value`` entries with
defaults.  Unknown sections or keys, duplicates, unparsable values and
constraint violations raise :class:`ConfigurationError` naming the line.

Example::

    [experiment]
    name = plate_hole

    [driver]
    eps_list = 1.0, 0.5, 0.1, 0.05
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .exceptions import ConfigurationError

EXPERIMENTS = (
    "plate_hole",
    "jacobi_demo",
    "void_plasticity",
    "fracture_mode_i",
    "fracture_l_shape",
    "topopt_cantilever",
)


@dataclass(frozen=True)
class Field:
    parse: Callable[[str], Any]
    default: Any
    check: Optional[Callable[[Any], bool]] = None
    rule: str = ""


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    vals = [float(v) for v in re.split(r"[,\s]+", s.strip()) if v]
    if not vals:
        raise ValueError("empty list")
    return tuple(vals)


def _words(s):
    vals = [v for v in re.split(r"[,\s]+", s.strip()) if v]
    if not vals:
        raise ValueError("empty list")
    return tuple(vals)


def _optional_int(s):
    return None if s.strip().lower() in ("", "auto", "none") else int(s)


def _choice(*options):
    def parse(s):
        v = s.strip()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {v!r}")
        return v

    return parse


def positive(v):
    return v > 0 and math.isfinite(v) if isinstance(v, float) else v > 0


def nonneg(v):
    return v >= 0


def unit(v):
    return 0 <= v <= 1


def F(default, check=None, rule=""):
    parse = {bool: _bool, int: int, float: float}.get(type(default), str)
    return Field(parse, default, check, rule)


POS = dict(check=positive, rule="must be > 0")
NONNEG = dict(check=nonneg, rule="must be >= 0")

SOLVER = {
    "tol_rel": F(1e-8, **POS),
    "max_iter": F(200, **POS),
    "omega": Field(float, 2.0 / 3.0, lambda v: 0 < v <= 1, "must lie in (0, 1]"),
    "nu1": F(4, **NONNEG),
    "nu2": F(4, **NONNEG),
    "nu_coarse": F(200, **POS),
    "nlevels": Field(_optional_int, None, lambda v: v is None or v >= 1, "must be >= 1 or auto"),
}
OUTPUT = {"snapshot_every": F(0, **NONNEG), "vtk": F(True)}

FRACTURE_COMMON = {
    "grid": {"ncells": F(128, **POS), "half_width": F(0.01, **POS)},
    "material": {"lam": F(121.15e9, **POS), "mu": F(80.77e9, **POS)},
    "crack": {
        "xi": F(1.0e-5, **POS),
        "Gc": F(2700.0, **POS),
        "M": F(1.0e-5, **POS),
        "eta_res": F(1e-4, **POS),
        "seed": Field(float, 0.0, lambda v: 0 <= v < 1, "must lie in [0, 1)"),
    },
    "driver": {"dt": F(1.0e-4, **POS), "nsteps": F(50, **POS), "top_displacement": F(1.5e-5)},
}

SCHEMAS = {
    "plate_hole": {
        "grid": {"ncells": F(512, **POS), "half_width": F(16.0, **POS)},
        "geometry": {"radius": F(1.0, **POS)},
        "material": {"E": F(1.0, **POS), "nu": Field(float, 0.3, lambda v: -1 < v < 0.5, "must lie in (-1, 0.5)")},
        "driver": {
            "eps_list": Field(_floats, (1.0, 0.5, 0.1, 0.05), lambda v: all(e > 0 for e in v), "entries must be > 0"),
            "sigma_inf": F(1.0, **POS),
            "load": Field(_choice("kirsch", "traction", "displacement"), "kirsch"),
            "phi_min": Field(float, 0.99, lambda v: 0 < v < 1, "must lie in (0, 1)"),
        },
    },
    "jacobi_demo": {
        "grid": {"ncells": F(32, check=lambda v: v >= 4, rule="must be >= 4")},
        "driver": {
            "interface": Field(float, 0.5, lambda v: 0 < v < 1, "must lie in (0, 1)"),
            "body_force": F(1.0),
            "modulus": F(1.0, **POS),
            "node_sweeps": F(100, **POS),
            "cell_sweeps": F(10_000, **POS),
            "phi": Field(_choice("step", "uniform"), "step"),
        },
    },
    "void_plasticity": {
        "grid": {"ncells": F(64, **POS), "half_width": F(16.0, **POS)},
        "geometry": {"voids": Field(_words, ("r1", "r3", "r6")), "eps": F(0.4, **POS)},
        "material": {
            "E": F(210.0, **POS),
            "nu": Field(float, 0.3, lambda v: -1 < v < 0.5, "must lie in (-1, 0.5)"),
            "sigma_y": F(0.2, **POS),
            "H": F(50.0, **NONNEG),
            "theta": Field(float, 1.0, unit, "must lie in [0, 1]"),
        },
        "driver": {
            "step": F(0.004, **POS),
            "peak": F(0.1, **POS),
            "inner_tol": F(1e-6, **POS),
            "max_inner": F(50, **POS),
        },
    },
    "fracture_mode_i": {
        **FRACTURE_COMMON,
        "crack": {**FRACTURE_COMMON["crack"], "notch_history": F(1.0e3, **NONNEG)},
        "driver": {**FRACTURE_COMMON["driver"], "notch_length": F(1.5e-4, **POS)},
    },
    "fracture_l_shape": {
        **FRACTURE_COMMON,
        "driver": {**FRACTURE_COMMON["driver"], "geometry_eps": F(4.0e-5, **POS)},
    },
    "topopt_cantilever": {
        "grid": {"length": F(1.0, **POS), "height": F(1.0, **POS), "nx": F(64, **POS), "ny": F(64, **POS)},
        "material": {"E": F(1480.0, **POS), "nu": Field(float, 0.22, lambda v: -1 < v < 0.5, "must lie in (-1, 0.5)")},
        "design": {
            "alpha": F(200.0, **POS),
            "beta": F(0.01, **POS),
            "zeta": F(0.01, **POS),
            "lam_max": F(400.0, **NONNEG),
            "fill": Field(float, 0.25, lambda v: 0 < v < 1, "must lie in (0, 1)"),
            "mobility": F(1.0, **POS),
            "ramp_fraction": Field(float, 0.1, unit, "must lie in [0, 1]"),
        },
        "driver": {
            "dt": F(1e-3, **POS),
            "t_end": F(5.0, **POS),
            "load": F(-0.1),
            "load_height": F(0.01, **POS),
        },
    },
}

for _s in SCHEMAS.values():
    _s["solver"] = SOLVER
    _s["output"] = OUTPUT


@dataclass
class ExperimentConfig:
    name: str
    sections: dict
    text: str = ""
    seed: int = 0

    def __getitem__(self, section):
        return self.sections[section]

    def solver_settings(self):
        from .multigrid import SolverSettings

        return SolverSettings(**self.sections["solver"])


_SECTION = re.compile(r"^\s*\[([^\]]+)\]\s*$")
_KEY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _line_index(text):
    """Map ``(section, key)`` and ``section`` to 1-based line numbers."""
    where = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        if line.lstrip().startswith(("#", ";")) or not line.strip():
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            where.setdefault(section, no)
            continue
        m = _KEY.match(line)
        if m and not line[:1].isspace():
            where.setdefault((section, m.group(1).strip().lower()), no)
    return where


def parse_config(text: str, source="<config>") -> ExperimentConfig:
    """Parse and validate configuration text; defaults fill missing keys."""
    parser = configparser.ConfigParser(strict=True, interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text, source=source)
    except configparser.DuplicateOptionError as e:
        raise ConfigurationError(f"{source}:{e.lineno}: duplicate key '{e.option}' in [{e.section}]") from None
    except configparser.DuplicateSectionError as e:
        raise ConfigurationError(f"{source}:{e.lineno}: duplicate section [{e.section}]") from None
    except configparser.MissingSectionHeaderError as e:
        raise ConfigurationError(f"{source}:{e.lineno}: key outside of any section") from None
    except configparser.ParsingError as e:
        lines = ", ".join(str(ln) for ln, _ in e.errors)
        raise ConfigurationError(f"{source}:{lines}: malformed line") from None

    lines = _line_index(text)

    def where(section, key=None):
        no = lines.get((section, key) if key else section)
        return f"{source}:{no}" if no else source

    if not parser.has_section("experiment") or not parser.has_option("experiment", "name"):
        raise ConfigurationError(f"{source}: missing required key 'name' in [experiment]")
    name = parser.get("experiment", "name").strip()
    if name not in SCHEMAS:
        raise ConfigurationError(f"{where('experiment', 'name')}: unknown experiment '{name}' (choose from {', '.join(EXPERIMENTS)})")
    for key in parser.options("experiment"):
        if key not in ("name", "seed"):
            raise ConfigurationError(f"{where('experiment', key)}: unknown key '{key}' in [experiment]")
    try:
        seed = int(parser.get("experiment", "seed", fallback="0"))
    except ValueError:
        raise ConfigurationError(f"{where('experiment', 'seed')}: seed must be an integer") from None

    schema = SCHEMAS[name]
    out = {}
    for section in parser.sections():
        if section == "experiment":
            continue
        if section not in schema:
            raise ConfigurationError(f"{where(section)}: unknown section [{section}] for experiment '{name}'")
        for key in parser.options(section):
            if key not in {k.lower() for k in schema[section]}:
                raise ConfigurationError(f"{where(section, key)}: unknown key '{key}' in [{section}]")
    for section, fields in schema.items():
        vals = {}
        for key, spec in fields.items():
            raw = parser.get(section, key.lower(), fallback=None) if parser.has_section(section) else None
            if raw is None:
                vals[key] = spec.default
                continue
            try:
                v = spec.parse(raw)
            except (TypeError, ValueError) as e:
                raise ConfigurationError(f"{where(section, key.lower())}: bad value for '{key}' in [{section}]: {e}") from None
            if spec.check is not None and not spec.check(v):
                raise ConfigurationError(f"{where(section, key.lower())}: '{key}' in [{section}] {spec.rule} (got {raw.strip()})")
            vals[key] = v
        out[section] = vals
    _cross_checks(name, out, source)
    return ExperimentConfig(name, out, text, seed)


def _cross_checks(name, s, source):
    if name == "void_plasticity":
        from .experiments import VOID_RADII

        bad = [v for v in s["geometry"]["voids"] if v not in VOID_RADII]
        if bad:
            raise ConfigurationError(f"{source}: unknown void(s) {bad}; choose from {sorted(VOID_RADII)}")
    if name in ("fracture_mode_i", "fracture_l_shape"):
        dx = 2.0 * s["grid"]["half_width"] / s["grid"]["ncells"]
        c = s["crack"]
        bound = dx**2 / (8.0 * c["M"] * c["Gc"] * c["xi"])
        if s["driver"]["dt"] > bound:
            raise ConfigurationError(f"{source}: [driver] dt={s['driver']['dt']:g} exceeds the explicit bound {bound:g}")


def load_config(path) -> ExperimentConfig:
    from pathlib import Path

    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text, source=str(p))
