"""INI run configuration for the command line.

Sections are named after the package modules.  Every key has a default,
so an empty document is a valid configuration; keys that are not listed in
:data:`SCHEMA` are rejected, as is anything outside its allowed range.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass
from types import MappingProxyType

from .constitutive import GibbsModel
from .exceptions import ConfigError
from .harness import FLOW_BASE, SYSTEMS, StudyConfig
from .nondim import BaseScales

# widest temperature interval the solvers visit (the wall values)
_THETA_SPAN = (-0.5, 0.5)


@dataclass(frozen=True)
class Key:
    kind: str  # "float", "int", "bool", "choice", "floats", "float_or_auto", "str"
    default: object
    lo: float | None = None
    lo_open: bool = False
    choices: tuple = ()
    help: str = ""


def _pos(default, help=""):
    return Key("float", default, lo=0.0, lo_open=True, help=help)


def _nonneg(default, help=""):
    return Key("float", default, lo=0.0, help=help)


SCHEMA = {
    "constitutive": {
        "rho0": _pos(1000.0, "reference density"),
        "a": _nonneg(1e-3, "thermal parameter"),
        "b": _pos(1e-9, "compressibility parameter"),
        "c0": _pos(1.0, "specific-heat constant"),
        "p_min": _nonneg(0.0),
        "p_max": _nonneg(1e7),
        "theta_min": _pos(200.0),
        "theta_max": _pos(600.0),
        "points": Key("int", 5, lo=2),
    },
    "nondim": {
        "A": _pos(1e-2),
        "B": _nonneg(1e-4),
        "vartheta0": _pos(1.0),
        "pi0": _pos(1.0),
        "theta_r": Key("float", 10.0),
        "g": _pos(9.81),
        "mu": _nonneg(0.1),
        "lam": Key("float", 0.1),
        "kappa": _nonneg(0.1),
        "rho0": _pos(1.0),
        "c0": _pos(1.0),
        "length_coeff": _pos(1.0, "proportionality constant of the length scale"),
        "band_lo": _pos(1e-2),
        "band_hi": _pos(1e2),
        "p_range": Key("floats", (0.5, 1.5)),
        "theta_range": Key("floats", (0.5, 1.5)),
        "points": Key("int", 21, lo=2),
        "dps": Key("int", 50, lo=15),
    },
    "solver": {
        "system": Key("choice", "full", choices=SYSTEMS),
        "nx": Key("int", 64, lo=8),
        "ny": Key("int", 64, lo=8),
        "lx": _pos(2.0),
        "dt": Key("float_or_auto", None, lo=0.0, lo_open=True),
        "t_end": _pos(0.5),
        "amplitude": _nonneg(0.5),
        "upwind": Key("bool", False),
        "sweeps": Key("int", 4, lo=1),
        "cg_rtol": _pos(1e-12),
        "g": _pos(FLOW_BASE.g),
        "mu": _nonneg(FLOW_BASE.mu),
        "lam": Key("float", FLOW_BASE.lam),
        "kappa": _nonneg(FLOW_BASE.kappa),
        "c0": _pos(FLOW_BASE.c0_dim),
    },
    "limit_harness": {
        "A_sequence": Key("floats", (0.2, 0.1, 0.05, 0.025)),
        "b_coeff": _pos(1.0),
        "b_power": _pos(2.0),
        "norm": Key("choice", "space-time", choices=("space-time", "final")),
        "n_test_functions": Key("int", 8, lo=1),
        "system": Key("choice", "full", choices=SYSTEMS),
        "stride": Key("int", 1, lo=1),
        "record_wall_time": Key("bool", False),
    },
    "cli": {
        "out": Key("str", "oblimit-out"),
    },
}

_BOOLS = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}


def _line_of(text, section, key):
    """1-based line of ``key`` inside ``[section]``, or None."""
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]*)\]", line)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return no
    return None


def _where(text, section, key):
    no = _line_of(text, section, key)
    return f"{section}.{key}" + (f" (line {no})" if no else "")


def _convert(raw, rule: Key, name):
    s = raw.strip()
    try:
        if rule.kind == "int":
            return int(s)
        if rule.kind == "float":
            return float(s)
        if rule.kind == "float_or_auto":
            return None if s.lower() == "auto" else float(s)
        if rule.kind == "floats":
            return tuple(float(x) for x in s.replace(",", " ").split())
        if rule.kind == "bool":
            return _BOOLS[s.lower()]
    except (ValueError, KeyError):
        raise ConfigError(f"{name}: cannot read {raw.strip()!r} as {rule.kind.replace('_', ' ')}") from None
    if rule.kind == "choice" and s not in rule.choices:
        raise ConfigError(f"{name}: {s!r} is not one of {', '.join(rule.choices)}")
    return s


def _check_range(value, rule: Key, name):
    vals = value if isinstance(value, tuple) else (value,)
    for v in vals:
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f"{name} must be finite, got {v}")
        if rule.lo is None or v is None or isinstance(v, str):
            continue
        if v < rule.lo or (rule.lo_open and v == rule.lo):
            op = ">" if rule.lo_open else ">="
            raise ConfigError(f"{name} must be {op} {rule.lo:g}, got {v:g}")


@dataclass(frozen=True)
class RunConfig:
    """A validated configuration.

    ``values[section][key]`` holds the typed values with defaults filled in and
    ``text`` the document exactly as it was read.
    """

    values: MappingProxyType
    text: str = ""

    def __getitem__(self, section):
        return self.values[section]

    @property
    def out(self):
        return self.values["cli"]["out"]

    def gibbs_model(self) -> GibbsModel:
        c = self["constitutive"]
        return GibbsModel(c["rho0"], c["a"], c["b"], c["c0"])

    def coefficient_axes(self):
        c = self["constitutive"]
        n = c["points"]
        ps = [c["p_min"] + (c["p_max"] - c["p_min"]) * i / (n - 1) for i in range(n)]
        ts = [c["theta_min"] + (c["theta_max"] - c["theta_min"]) * j / (n - 1) for j in range(n)]
        return ps, ts

    def base_scales(self) -> BaseScales:
        """Scales for the assumption checks."""
        d = self["nondim"]
        return BaseScales(
            vartheta0=d["vartheta0"], pi0=d["pi0"], theta_r=d["theta_r"], g=d["g"], mu=d["mu"],
            lam=d["lam"], kappa=d["kappa"], rho0=d["rho0"], c0_dim=d["c0"], length_coeff=d["length_coeff"],
        )

    def flow_scales(self) -> BaseScales:
        """Scales for simulations: the shared constants plus the flow overrides of ``[solver]``."""
        s = self["solver"]
        return BaseScales(
            vartheta0=self["nondim"]["vartheta0"], pi0=self["nondim"]["pi0"], theta_r=self["nondim"]["theta_r"],
            rho0=self["nondim"]["rho0"], length_coeff=self["nondim"]["length_coeff"],
            g=s["g"], mu=s["mu"], lam=s["lam"], kappa=s["kappa"], c0_dim=s["c0"],
        )

    def verify_kwargs(self):
        d = self["nondim"]
        return dict(
            A=d["A"], B=d["B"], grid=(d["p_range"], d["theta_range"]), base=self.base_scales(),
            n=d["points"], dps=d["dps"],
        )

    def band(self):
        return self["nondim"]["band_lo"], self["nondim"]["band_hi"]

    def study_config(self) -> StudyConfig:
        h, s = self["limit_harness"], self["solver"]
        return StudyConfig(
            A_sequence=h["A_sequence"], b_coeff=h["b_coeff"], b_power=h["b_power"],
            nx=s["nx"], ny=s["ny"], lx=s["lx"], dt=s["dt"], t_end=s["t_end"], norm=h["norm"],
            n_test_functions=h["n_test_functions"], system=h["system"], amplitude=s["amplitude"],
            stride=h["stride"], base=self.flow_scales(), record_wall_time=h["record_wall_time"],
        )

    def as_dict(self):
        return {sec: {k: (list(v) if isinstance(v, tuple) else v) for k, v in vals.items()}
                for sec, vals in self.values.items()}


def _cross_checks(values, text):
    """Constraints that involve more than one key."""

    def fail(section, key, msg):
        raise ConfigError(f"{_where(text, section, key)}: {msg}")

    c = values["constitutive"]
    if c["p_max"] < c["p_min"]:
        fail("constitutive", "p_max", "must not be below p_min")
    if c["theta_max"] < c["theta_min"]:
        fail("constitutive", "theta_max", "must not be below theta_min")
    if 1 + c["b"] * c["p_min"] - c["a"] * c["theta_max"] <= 0:
        fail("constitutive", "theta_max", "1 + b p - a theta must stay positive on the coefficient grid")

    d = values["nondim"]
    thr = d["theta_r"]
    if _THETA_SPAN[0] + thr <= 0:
        fail("nondim", "theta_r", f"theta + theta_r must be positive for theta in [-1/2, 1/2], got theta_r = {thr:g}")
    if 3 * d["lam"] + 2 * d["mu"] < 0:
        fail("nondim", "lam", "3 lam + 2 mu must be nonnegative")
    if d["band_hi"] <= d["band_lo"]:
        fail("nondim", "band_hi", "must exceed band_lo")
    for key in ("p_range", "theta_range"):
        r = d[key]
        if len(r) != 2 or not r[0] < r[1]:
            fail("nondim", key, "needs two increasing values")
        if key == "theta_range" and r[0] + thr <= 0:
            fail("nondim", key, "theta + theta_r must stay positive")

    s = values["solver"]
    if 3 * s["lam"] + 2 * s["mu"] < 0:
        fail("solver", "lam", "3 lam + 2 mu must be nonnegative")
    h = min(s["lx"] / s["nx"], 1.0 / s["ny"])
    if s["dt"] is not None and s["dt"] > h:
        fail("solver", "dt", f"exceeds the advective bound h = {h:.4g}")

    h_ = values["limit_harness"]
    seq = h_["A_sequence"]
    if not seq:
        fail("limit_harness", "A_sequence", "is empty")
    if any(a <= 0 for a in seq):
        fail("limit_harness", "A_sequence", "values must be positive")
    if any(a2 >= a1 for a1, a2 in zip(seq, seq[1:])):
        fail("limit_harness", "A_sequence", "must be strictly decreasing")
    if h_["n_test_functions"] != 8:
        fail("limit_harness", "n_test_functions", "the dictionary has exactly 8 members")


def parse_config(text: str, out: str | None = None) -> RunConfig:
    """Parse and validate an INI document.

    ``out`` overrides ``[cli] out`` (the command-line flag).
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="\x00defaults",
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside any [section]") from None
    except configparser.ParsingError as exc:
        no, _ = exc.errors[0]
        raise ConfigError(f"line {no}: expected 'key = value' or '[section]'") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        what = f"key {exc.option!r} in" if hasattr(exc, "option") else "section"
        raise ConfigError(f"line {exc.lineno}: duplicate {what} [{exc.section}]") from None
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            no = next((i for i, ln in enumerate(text.splitlines(), 1) if ln.strip() == f"[{section}]"), None)
            raise ConfigError(f"line {no}: unknown section [{section}]; expected one of {', '.join(SCHEMA)}")
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{_where(text, section, key)}: unknown key")
    for section, keys in SCHEMA.items():
        sec = {}
        for key, rule in keys.items():
            if parser.has_option(section, key):
                name = _where(text, section, key)
                sec[key] = _convert(parser.get(section, key), rule, name)
                _check_range(sec[key], rule, name)
            else:
                sec[key] = rule.default
        values[section] = sec
    if out is not None:
        values["cli"]["out"] = out
    _cross_checks(values, text)
    frozen = MappingProxyType({k: MappingProxyType(v) for k, v in values.items()})
    return RunConfig(frozen, text)


def default_document() -> str:
    """A complete document that spells out every default."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, rule in keys.items():
            v = rule.default
            if v is None:
                v = "auto"
            elif isinstance(v, bool):
                v = str(v).lower()
            elif isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            lines.append(f"{key} = {v}")
        lines.append("")
    return "\n".join(lines)
