"""Plain-text experiment configuration (INI syntax) and its schema.

Example::

    [experiment]
    kind = lift-independence
    seed = 7
    tol = 1e-8

    [wavefunction]
    statistics = fermion      # boson | fermion | none
    evolution = free          # free | harmonic
    # omega = 1.0             # required for harmonic
    # mass = 1.0
    # hbar = 1.0

    [packet.0]
    center = -1.0             # comma-separated, one value per axis
    momentum = 0.5
    width = 0.7

    [packet.1]
    center = 1.0
    momentum = -0.5
    width = 0.7

    [integration]
    t1 = 2.0
    initial = -1.5; 1.7       # particles separated by ';', axes by ','

See ``SCHEMA`` for every key, its type and default.
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field

from .errors import SymbohmError
from .wavefunction import GaussianPacket, WaveFunction, antisymmetrize, product, single, symmetrize

KINDS = ("characters", "periodicity", "trajectory", "lift-independence", "equivariance",
         "grid-preservation", "non-crossing-1d", "mass-density")


class ConfigError(SymbohmError):
    """Schema violation; ``line`` points into the configuration text when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _floats(text):
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _points(text):
    return [tuple(float(v) for v in chunk.split(",")) for chunk in text.split(";") if chunk.strip()]


# section -> key -> (parser, default); default None means required when the section is used
_PACKET = {"center": (_floats, None), "momentum": (_floats, None), "width": (float, None)}
SCHEMA = {
    "experiment": {"kind": (str, None), "seed": (int, 0), "tol": (float, 1e-8)},
    "characters": {"n": (int, 4)},
    "wavefunction": {"statistics": (str, None), "evolution": (str, "free"), "omega": (float, 0.0),
                     "mass": (float, 1.0), "hbar": (float, 1.0)},
    "integration": {"t0": (float, 0.0), "t1": (float, 1.0), "samples": (int, 101),
                    "initial": (_points, ""), "runs": (int, 100)},
    "periodicity": {"samples": (int, 1000), "t_max": (float, 1.0), "threshold": (float, 1e-10)},
    "sampling": {"n": (int, 10000), "burn_in": (int, 1000), "thin": (int, 10),
                 "proposal_scale": (float, 0.5), "replicates": (int, 100), "shift": (float, 1.0),
                 "quantile": (float, 0.99)},
    "grid": {"lo": (float, -5.0), "hi": (float, 5.0), "spacing": (float, 0.1), "dt": (float, 0.005),
             "steps": (int, 10000), "depth": (float, 1.0), "separation": (float, 1.5),
             "coupling": (float, 0.5), "record_every": (int, 100), "threshold": (float, 1e-10)},
    "mass-density": {"times": (_floats, (0.0, 0.5, 1.0)), "points": (int, 64), "tolerance": (float, 1e-4)},
}

REQUIRED_SECTIONS = {
    "characters": (),
    "periodicity": ("wavefunction",),
    "trajectory": ("wavefunction", "integration"),
    "lift-independence": ("wavefunction", "integration"),
    "equivariance": ("wavefunction",),
    "grid-preservation": ("wavefunction",),
    "non-crossing-1d": ("wavefunction",),
    "mass-density": ("wavefunction",),
}


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    tol: float = 1e-8
    sections: dict = field(default_factory=dict)
    packets: list = field(default_factory=list)
    text: str = ""

    def get(self, section: str, key: str):
        values = self.sections.get(section, {})
        if key in values:
            return values[key]
        default = SCHEMA[section][key][1]
        if default is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return default

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


def _line_of(text: str, section: str, key: str | None = None):
    lines = text.splitlines()
    start = None
    for i, line in enumerate(lines, 1):
        if line.strip() == f"[{section}]":
            start = i
            if key is None:
                return i
        elif start and key and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return i
        elif start and line.strip().startswith("["):
            break
    return start


def parse_config(text: str, kind: str | None = None, seed: int | None = None, tol: float | None = None) -> ExperimentConfig:
    """Parse and validate configuration text; command-line overrides win over file values."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";;"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from exc

    sections, packets = {}, {}
    for name in parser.sections():
        raw = dict(parser[name])
        if name.startswith("packet."):
            try:
                index = int(name.split(".", 1)[1])
            except ValueError:
                raise ConfigError(f"packet sections are named packet.<index>, got [{name}]",
                                  _line_of(text, name)) from None
            schema = _PACKET
        elif name in SCHEMA:
            schema = SCHEMA[name]
        else:
            raise ConfigError(f"unknown section [{name}]", _line_of(text, name))
        values = {}
        for key, value in raw.items():
            if key not in schema:
                raise ConfigError(f"unknown key [{name}] {key}", _line_of(text, name, key))
            try:
                values[key] = schema[key][0](value)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{name}] {key}: {exc}", _line_of(text, name, key)) from None
        if name.startswith("packet."):
            for key in _PACKET:
                if key not in values:
                    raise ConfigError(f"missing required key [{name}] {key}", _line_of(text, name))
            packets[index] = values
        else:
            sections[name] = values

    exp = sections.get("experiment", {})
    kind = kind or exp.get("kind")
    if kind is None:
        raise ConfigError("missing required key [experiment] kind", _line_of(text, "experiment"))
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; choose from {', '.join(KINDS)}",
                          _line_of(text, "experiment", "kind"))
    for name in REQUIRED_SECTIONS[kind]:
        if name not in sections:
            raise ConfigError(f"experiment {kind!r} needs a [{name}] section")
    if "wavefunction" in REQUIRED_SECTIONS[kind]:
        if not packets:
            raise ConfigError(f"experiment {kind!r} needs at least one [packet.<i>] section")
        if sorted(packets) != list(range(len(packets))):
            raise ConfigError(f"packet sections must be numbered 0..{len(packets) - 1}")
        if "statistics" not in sections["wavefunction"]:
            raise ConfigError("missing required key [wavefunction] statistics", _line_of(text, "wavefunction"))
        stats = sections["wavefunction"]["statistics"]
        if stats not in ("boson", "fermion", "none"):
            raise ConfigError(f"statistics must be boson, fermion or none, got {stats!r}",
                              _line_of(text, "wavefunction", "statistics"))
        evo = sections["wavefunction"].get("evolution", "free")
        if evo not in ("free", "harmonic"):
            raise ConfigError(f"evolution must be free or harmonic, got {evo!r}",
                              _line_of(text, "wavefunction", "evolution"))
        if evo == "harmonic" and not sections["wavefunction"].get("omega", 0.0) > 0:
            raise ConfigError("harmonic evolution needs a positive [wavefunction] omega",
                              _line_of(text, "wavefunction"))
        dims = {len(p["center"]) for p in packets.values()} | {len(p["momentum"]) for p in packets.values()}
        if len(dims) != 1:
            raise ConfigError("packet centers and momenta must all have the same number of components")
        for i, p in packets.items():
            if not p["width"] > 0:
                raise ConfigError(f"[packet.{i}] width must be positive", _line_of(text, f"packet.{i}", "width"))

    cfg = ExperimentConfig(kind=kind, seed=exp.get("seed", 0) if seed is None else seed,
                           tol=exp.get("tol", 1e-8) if tol is None else tol, sections=sections,
                           packets=[packets[i] for i in sorted(packets)], text=text)
    return cfg


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), **overrides)


def packets_from_config(cfg: ExperimentConfig) -> list:
    wf = cfg.sections["wavefunction"]
    omega = wf.get("omega") if wf.get("evolution", "free") == "harmonic" else None
    return [GaussianPacket(p["center"], p["momentum"], p["width"], omega=omega,
                           mass=wf.get("mass", 1.0), hbar=wf.get("hbar", 1.0)) for p in cfg.packets]


def build_wavefunction(statistics: str, packets) -> WaveFunction:
    """Symmetrized, antisymmetrized or plain product state of ``packets`` (``statistics`` boson/fermion/none)."""
    packets = list(packets)
    if len(packets) == 1:
        return single(packets[0])
    return {"boson": symmetrize, "fermion": antisymmetrize, "none": product}[statistics](packets)


def wavefunction_from_config(cfg: ExperimentConfig) -> WaveFunction:
    return build_wavefunction(cfg.sections["wavefunction"]["statistics"], packets_from_config(cfg))
