"""Run configuration: INI sections with typed keys, overrides and a stable hash."""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field

from dul.coefficients import DIVERGENCE, NONDIVERGENCE, DegenerateCoefficient, Modulation
from dul.geometry import DISK_RADIAL, INTERVAL, DomainGeometry
from dul.solver.operator import CLAMP, DIRICHLET, FLUX_NONE, BoundaryTreatment

SECTIONS = ("geometry", "coefficient", "barrier", "solver", "experiment", "norm", "schedule", "output", "seed")


class ConfigError(ValueError):
    """Invalid or missing configuration key; the message names the key."""


def _float(v):
    return float(v)


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{v!r} is not a boolean")


def _floats(v):
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(x) for x in str(v).replace(";", ",").split(",") if x.strip()]


def _words(v):
    if isinstance(v, (list, tuple)):
        return [str(x) for x in v]
    return [x.strip() for x in str(v).split(",") if x.strip()]


def _str(v):
    return str(v).strip()


# key -> (parser, default); a default of None marks an optional key without value
SCHEMA = {
    "geometry": {
        "kind": (_str, None), "x_lo": (_float, 0.0), "x_hi": (_float, 1.0),
        "R": (_float, 1.0), "n": (_int, 2), "eps0": (_float, None),
    },
    "coefficient": {
        "gamma": (_float, None), "C0": (_float, 1.0), "modulation": (_str, "constant"),
        "form": (_str, DIVERGENCE), "upper_exponent_s": (_float, 0.0),
    },
    "barrier": {
        "eps": (_float, 0.1), "tau": (_float, 1.0), "theta": (_float, 1.0), "b": (_float, 1.0),
        "alpha1": (_float, None), "delta": (_float, None), "n_space": (_int, 10_000),
        "n_time": (_int, 100), "eps_sweep": (_floats, [0.2, 0.1, 0.05, 0.025]),
        "random_samples": (_int, 0),
    },
    "solver": {
        "n_nodes": (_int, 256), "grading": (_float, 2.0), "steps": (_int, 2048), "T": (_float, 0.5),
        "theta_scheme": (_float, 1.0), "start_steps": (_int, 0), "treatment": (_str, FLUX_NONE),
        "g_lo": (_float, 0.0), "g_hi": (_float, 0.0), "clamp_eps": (_float, 0.05), "u0": (_float, 0.0),
        "csv_every": (_int, 64),
    },
    "experiment": {
        "name": (_str, "uniqueness_probe"), "eps_sweep": (_floats, [0.2, 0.1, 0.05, 0.025]),
        "g_pair": (_floats, [0.0, 1.0]), "T": (_float, None), "refine": (_bool, False),
        "gammas": (_floats, [0.5, 1.5, 2.5]), "forms": (_words, [DIVERGENCE, NONDIVERGENCE]),
        "theta_or_mu": (_float, None), "beta": (_float, 2.0), "tau_w": (_float, 1.0),
    },
    "norm": {
        "snapshot": (_str, None), "T": (_float, None), "theta": (_floats, []), "mu": (_floats, []),
        "l": (_floats, []), "eps_sweep": (_floats, [0.2, 0.1, 0.05, 0.025]),
    },
    "schedule": {
        "eps": (_float, 0.5), "mu1": (_float, 1.0), "mu2": (_float, 2.0), "tau": (_float, 0.1),
        "c_cap": (_float, 1.0), "constant_cap": (_bool, False), "max_rungs": (_int, 100_000),
    },
    "output": {"dir": (_str, "runs"), "csv": (_bool, True)},
    "seed": {"value": (_int, 0)},
}


@dataclass
class RunConfig:
    """Parsed configuration: one dict of typed values per section.

    ``present`` records which sections appeared in the input so that
    commands can insist on blocks that have no sensible default.
    """

    values: dict
    present: frozenset = field(default_factory=frozenset)

    def __getitem__(self, section):
        return self.values[section]

    def get(self, dotted):
        sec, key = dotted.split(".", 1)
        return self.values[sec][key]

    def require(self, dotted):
        value = self.get(dotted)
        if value is None:
            raise ConfigError(f"missing required key {dotted}")
        return value

    def require_section(self, section):
        if section not in self.present:
            raise ConfigError(f"missing [{section}] block")

    def canonical(self):
        """Sorted JSON of every resolved value; the input of :meth:`digest`."""
        return json.dumps(self.values, sort_keys=True, separators=(",", ":"))

    def digest(self, command=""):
        return hashlib.sha256((command + "\n" + self.canonical()).encode()).hexdigest()[:12]

    # -- builders ---------------------------------------------------------

    def geometry(self):
        self.require_section("geometry")
        g = self["geometry"]
        kind = self.require("geometry.kind")
        try:
            if kind == INTERVAL:
                return DomainGeometry.interval(g["x_lo"], g["x_hi"], g["eps0"])
            if kind in (DISK_RADIAL, "disk"):
                return DomainGeometry.disk(g["R"], g["n"], g["eps0"])
        except ValueError as exc:
            raise ConfigError(f"geometry: {exc}") from exc
        raise ConfigError(f"geometry.kind must be {INTERVAL} or {DISK_RADIAL}, got {kind!r}")

    def coefficient(self, gamma=None):
        c = self["coefficient"]
        gamma = self.require("coefficient.gamma") if gamma is None else gamma
        if c["form"] not in (DIVERGENCE, NONDIVERGENCE):
            raise ConfigError(f"coefficient.form must be {DIVERGENCE} or {NONDIVERGENCE}")
        try:
            mod = Modulation.parse(c["modulation"])
        except ValueError as exc:
            raise ConfigError(f"coefficient.modulation: {exc}") from exc
        try:
            return DegenerateCoefficient(gamma, c["C0"], mod, c["form"], c["upper_exponent_s"])
        except ValueError as exc:
            raise ConfigError(f"coefficient: {exc}") from exc

    def treatment(self):
        s = self["solver"]
        kind = s["treatment"]
        if kind == FLUX_NONE:
            return BoundaryTreatment.flux_none()
        if kind == DIRICHLET:
            return BoundaryTreatment.dirichlet(s["g_lo"], s["g_hi"])
        if kind == CLAMP:
            try:
                return BoundaryTreatment.clamp(s["clamp_eps"], s["g_lo"], s["g_hi"])
            except ValueError as exc:
                raise ConfigError(f"solver.clamp_eps: {exc}") from exc
        raise ConfigError(f"solver.treatment must be one of {FLUX_NONE}, {DIRICHLET}, {CLAMP}")


def _apply(values, section, key, raw):
    if section not in SCHEMA:
        raise ConfigError(f"unknown section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key {section}.{key}")
    parse = SCHEMA[section][key][0]
    try:
        values[section][key] = parse(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc


def load_config(text=None, overrides=()):
    """Parse INI ``text`` and ``section.key=value`` overrides into a RunConfig."""
    values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    present = set()
    if text:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from exc
        for sec in parser.sections():
            present.add(sec)
            for key, raw in parser.items(sec):
                _apply(values, sec, key, raw)
    for item in overrides:
        dotted, sep, raw = item.partition("=")
        if not sep or "." not in dotted:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        sec, key = dotted.strip().split(".", 1)
        _apply(values, sec, key, raw.strip())
        present.add(sec)
    return RunConfig(values, frozenset(present))
