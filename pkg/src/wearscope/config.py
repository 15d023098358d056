"""Run configuration: defaults, then an INI-style file, then CLI flags.

Keys are ``section.name``; the file uses ``[section]`` headers::

    [layout]
    name = SED
    edge_width = 0.2

    [svm]
    C = 1
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

from .patching import LAYOUT_NAMES
from .texture import MAPPING_KINDS, parse_descriptor_name

ENV_VAR = "WEARSCOPE_CONFIG"


class ConfigError(ValueError):
    pass


def _frac(v):
    v = float(v)
    if not 0 < v < 0.5:
        raise ValueError("must lie in (0, 0.5)")
    return v


def _positive(cast):
    def check(v):
        v = cast(v)
        if not v > 0:
            raise ValueError("must be positive")
        return v
    return check


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _choice(options, upper=False):
    def check(v):
        s = str(v).strip()
        s = s.upper() if upper else s
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return check


def _descriptor(v):
    s = str(v).strip()
    parse_descriptor_name(s)
    return s


def _unit(v):
    v = float(v)
    if not 0 < v < 1:
        raise ValueError("must lie in (0, 1)")
    return v


SCHEMA = {
    "layout.name": (_choice(LAYOUT_NAMES, upper=True), "SED"),
    "layout.edge_width": (_frac, 0.20),
    "layout.band_height": (_frac, 0.15),
    "layout.sed_edge_width": (_frac, 0.25),
    "descriptor.name": (_descriptor, "LBP8NH+LBP16NH"),
    "descriptor.mapping": (_choice(MAPPING_KINDS), "riu2"),
    "svm.C": (_positive(float), 1.0),
    "svm.tol": (_positive(float), 1e-3),
    "svm.max_passes": (_positive(int), 100),
    "svm.tune": (_bool, False),
    "eval.threshold": (_positive(int), 1),
    "eval.strict": (_bool, False),
    "eval.seed": (int, 0),
    "eval.jobs": (_positive(int), 1),
    "edges.rmin": (_positive(int), 40),
    "edges.rmax": (_positive(int), 80),
    "edges.sigma": (_positive(float), 1.4),
    "edges.low_frac": (_unit, 0.1),
    "edges.high_frac": (_positive(float), 0.3),
    "edges.crop_width": (_positive(float), 0.35),
    "edges.vertical_tol": (_positive(float), 5.0),
    "edges.left_margin": (int, 10),
}


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def layout_params(self) -> dict:
        return {k: self.values[f"layout.{k}"] for k in ("edge_width", "band_height",
                                                         "sed_edge_width")}


def read_config_file(path) -> dict:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep "C" as written
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            out[f"{section}.{key}"] = value
    return out


def resolve(file_path=None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, config file (or ``$WEARSCOPE_CONFIG``) and overrides.

    Every key is validated before returning; unknown keys are errors.
    """
    raw = {k: default for k, (_, default) in SCHEMA.items()}
    file_path = file_path or os.environ.get(ENV_VAR) or None
    if file_path:
        raw.update(read_config_file(file_path))
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    values = {}
    for key, value in raw.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        check, _ = SCHEMA[key]
        try:
            values[key] = check(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}={value!r}: {exc}") from None
    if values["edges.rmin"] > values["edges.rmax"]:
        raise ConfigError("edges.rmin must not exceed edges.rmax")
    if not values["edges.low_frac"] < values["edges.high_frac"] <= 1:
        raise ConfigError("need edges.low_frac < edges.high_frac <= 1")
    return RunConfig(values)
