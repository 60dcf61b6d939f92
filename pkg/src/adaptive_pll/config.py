"""Simulation configuration and its key-value text format.

The format is INI-like::

    # comments start with '#' or ';'
    [plant]
    L = 9.5e-3
    r_g = 12.8

    [estimator]
    beta = 500

Every key has a default, so an empty file gives the laboratory setup.
Keys written before the first section are accepted when the name is
unique across sections (``L = 9.5e-3`` means ``plant.L``).  Sections
``references`` and ``run`` are informational (they appear in run
manifests) and ``scenario`` is read by :func:`adaptive_pll.engine.parse_scenario`;
all three are skipped here.
"""
import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from .ctrl import CurrentGains
from .gpebo import FilterParams
from .lsff import EstimatorGains
from .plant import GridTruth, PlantParams
from .pll import DETECTORS, SOURCES, PllConfig


class ConfigError(ValueError):
    """Bad configuration: missing file, syntax error or out-of-range value."""


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _choice(*opts):
    def check(x):
        return x in opts
    check.options = opts
    return check


def _floats3(text):
    vals = [float(v) for v in text.replace(",", " ").split()]
    if len(vals) != 3:
        raise ValueError("expected three numbers")
    return tuple(vals)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


# section -> key -> (parser, default, check)
SCHEMA = {
    "plant": {
        "L": (float, 9.5e-3, _pos),
        "r": (float, 0.64, _pos),
        "L_g": (float, 0.282, _pos),
        "r_g": (float, 12.8, _pos),
        "C": (float, 4.6e-6, _pos),
        "V_dc": (float, 700.0, _pos),
    },
    "grid": {
        "V_g": (float, 310.2687, _pos),
        "f": (float, 50.0, _pos),
    },
    "power": {
        "P_ref": (float, 600.0, _nonneg),
        "V_ref": (float, 380.0, _pos),
    },
    "pll": {
        "K_P": (float, 200.0, _pos),
        "K_I": (float, 5000.0, _pos),
        "detector": (str, "atan", _choice(*DETECTORS)),
        "variant": (str, "adaptive", _choice(*SOURCES)),
    },
    "current": {
        "K_P": (float, 1250.0, _pos),
        "K_I": (float, 50000.0, _pos),
    },
    "observer": {
        "lambda": (float, 1000.0, _pos),
    },
    "estimator": {
        "alpha": (float, 600.0, _pos),
        "beta": (float, 500.0, _nonneg),
        "M": (float, 100.0, _pos),
        "f0": (float, 1.0, _pos),
        "norm": (str, "fro", _choice("fro", "spectral")),
        "theta0": (_floats3, (0.0, 0.0, 0.0), lambda v: all(map(math.isfinite, v))),
    },
    "sim": {
        "dt": (float, 1e-5, _pos),
        "duration": (float, 3.0, _pos),
        "warmup": (float, 1.0, _nonneg),
        "output_rate": (float, 1000.0, _pos),
        "model": (str, "abc", _choice("abc", "dq")),
        "initial": (str, "rest", _choice("rest", "equilibrium")),
        "renorm_interval": (float, 0.01, _pos),
        "pe_window": (float, 0.1, _pos),
        "pe_threshold": (float, 1e-6, _nonneg),
        "saturation_warning": (_bool, False, lambda v: True),
    },
}

_PASSIVE_SECTIONS = {"references", "run", "scenario"}


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to run a scenario besides the event list."""

    plant: PlantParams = field(default_factory=PlantParams)
    grid: GridTruth = field(default_factory=GridTruth)
    pll: PllConfig = field(default_factory=PllConfig)
    current: CurrentGains = field(default_factory=CurrentGains)
    filt: FilterParams = field(default_factory=FilterParams)
    estimator: EstimatorGains = field(default_factory=EstimatorGains)
    theta0: tuple = (0.0, 0.0, 0.0)
    P_ref: float = 600.0
    V_ref: float = 380.0
    dt: float = 1e-5
    duration: float = 3.0
    warmup: float = 1.0
    output_rate: float = 1000.0
    model: str = "abc"
    initial: str = "rest"
    renorm_interval: float = 0.01
    pe_window: float = 0.1
    pe_threshold: float = 1e-6
    saturation_warning: bool = False

    @classmethod
    def from_values(cls, values):
        """Build from a ``{section: {key: value}}`` mapping of parsed values."""
        v = {s: {k: spec[1] for k, spec in keys.items()} for s, keys in SCHEMA.items()}
        for sec, keys in values.items():
            v[sec].update(keys)
        return cls(
            plant=PlantParams(**v["plant"]),
            grid=GridTruth(V_g=v["grid"]["V_g"], omega=2 * np.pi * v["grid"]["f"]),
            pll=PllConfig(K_P=v["pll"]["K_P"], K_I=v["pll"]["K_I"],
                          detector=v["pll"]["detector"], source=v["pll"]["variant"]),
            current=CurrentGains(**v["current"]),
            filt=FilterParams(lam=v["observer"]["lambda"]),
            estimator=EstimatorGains(**{k: v["estimator"][k]
                                        for k in ("alpha", "beta", "M", "f0", "norm")}),
            theta0=tuple(v["estimator"]["theta0"]),
            P_ref=v["power"]["P_ref"], V_ref=v["power"]["V_ref"],
            **v["sim"],
        )

    def values(self):
        """Inverse of :meth:`from_values`."""
        p = self.plant
        return {
            "plant": {k: getattr(p, k) for k in SCHEMA["plant"]},
            "grid": {"V_g": self.grid.V_g, "f": self.grid.omega / (2 * np.pi)},
            "power": {"P_ref": self.P_ref, "V_ref": self.V_ref},
            "pll": {"K_P": self.pll.K_P, "K_I": self.pll.K_I,
                    "detector": self.pll.detector, "variant": self.pll.source},
            "current": {"K_P": self.current.K_P, "K_I": self.current.K_I},
            "observer": {"lambda": self.filt.lam},
            "estimator": {"alpha": self.estimator.alpha, "beta": self.estimator.beta,
                          "M": self.estimator.M, "f0": self.estimator.f0,
                          "norm": self.estimator.norm, "theta0": self.theta0},
            "sim": {k: getattr(self, k) for k in SCHEMA["sim"]},
        }

    def replace(self, **changes):
        """Copy with ``section__key=value`` overrides, e.g. ``estimator__beta=0``."""
        vals = self.values()
        for name, value in changes.items():
            sec, key = name.split("__", 1)
            if sec not in SCHEMA or key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
            _check(sec, key, value)
            vals[sec][key] = value
        try:
            return SimConfig.from_values(vals)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_text(self):
        """Render as config text; :func:`parse_config_text` reads it back exactly."""
        lines = []
        for sec, keys in self.values().items():
            lines.append(f"[{sec}]")
            for k, val in keys.items():
                lines.append(f"{k} = {_format(val)}")
            lines.append("")
        return "\n".join(lines)


def _format(val):
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    if isinstance(val, tuple):
        return ", ".join(repr(float(x)) for x in val)
    return str(val)


def _check(sec, key, value):
    check = SCHEMA[sec][key][2]
    ok = check(value)
    if not ok:
        opts = getattr(check, "options", None)
        hint = f"one of {', '.join(opts)}" if opts else "out of range"
        raise ConfigError(f"{sec}.{key} = {value!r}: {hint}")
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{sec}.{key} must be finite")


def _resolve_bare(key):
    owners = [s for s, keys in SCHEMA.items() if key in keys]
    if not owners:
        raise ConfigError(f"unknown key {key!r}")
    if len(owners) > 1:
        raise ConfigError(f"key {key!r} is ambiguous; put it under one of "
                          + ", ".join(f"[{s}]" for s in owners))
    return owners[0]


def parse_config_text(text, source="<string>"):
    """Parse config text into a validated :class:`SimConfig`."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#", ";"),
                                       default_section="\x00none")
    parser.optionxform = str
    # a synthetic header lets keys precede the first section; line numbers shift by one
    try:
        parser.read_string("[__top__]\n" + text, source=source)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{source}:{exc.lineno - 1}: duplicate key {exc.option!r}") from exc
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{source}:{exc.lineno - 1}: duplicate section {exc.section!r}") from exc
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{source}:{lineno - 1}: cannot parse {line.strip()!r}") from exc

    values = {s: {} for s in SCHEMA}
    for sec in parser.sections():
        if sec in _PASSIVE_SECTIONS:
            continue
        if sec != "__top__" and sec not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key, raw in parser.items(sec):
            target = _resolve_bare(key) if sec == "__top__" else sec
            if key not in SCHEMA[target]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
            conv = SCHEMA[target][key][0]
            try:
                value = conv(raw.strip())
            except ValueError as exc:
                raise ConfigError(f"{source}: {target}.{key} = {raw!r}: {exc}") from exc
            _check(target, key, value)
            values[target][key] = value
    try:
        return SimConfig.from_values(values)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def parse_config(path):
    """Read and validate a config file; see the module docstring for the format."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    return parse_config_text(text, source=str(path))
