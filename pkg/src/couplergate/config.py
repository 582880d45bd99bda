"""Experiment configuration: YAML files validated against a strict schema.

Frequencies are GHz, couplings, anharmonicities, amplitudes and detunings
are MHz, times are ns and coherence times are microseconds.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from .hilbert import CouplingSpec, DeviceSpec, ModeSpec

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """The configuration is malformed or inconsistent."""


def _obj(properties: dict, required=()) -> dict:
    return {"type": "object", "properties": properties, "required": list(required),
            "additionalProperties": False}


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NUM_OR_NULL = {"type": ["number", "null"], "exclusiveMinimum": 0}
_RANGE = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}  # start, stop, count
_NUM_LIST = {"type": "array", "items": _NUM, "minItems": 1}
_LABELS = {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2}

_MODE = _obj({"label": {"type": "string"}, "frequency_GHz": _POS, "anharmonicity_MHz": _NUM,
              "levels": {"type": "integer", "minimum": 2}}, ("label", "frequency_GHz"))
_COUPLING = _obj({"modes": _LABELS, "strength_MHz": _NUM}, ("modes", "strength_MHz"))
_PROTOCOL = _obj({
    "pair": _LABELS,
    "coupler": {"type": "string"},
    "amplitude_MHz": _NUM,
    "detuning_MHz": _NUM,
    "frequencies_GHz": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
    "sigma_ns": _POS,
    "duration_ns": _POS,
    "ramp_ratio": _POS,
}, ("pair", "coupler", "amplitude_MHz", "detuning_MHz", "sigma_ns", "duration_ns"))

SCHEMA = _obj({
    "schema_version": {"const": SCHEMA_VERSION},
    "scenario": {"type": "string"},
    "device": _obj({"levels": {"type": "integer", "minimum": 2},
                    "modes": {"type": "array", "items": _MODE, "minItems": 1},
                    "couplings": {"type": "array", "items": _COUPLING}}, ("modes",)),
    "protocols": {"type": "object", "additionalProperties": _PROTOCOL, "minProperties": 1},
    "propagation": _obj({"rtol": _POS, "atol": _POS, "max_step_ns": _POS}),
    "calibration": _obj({"scan_window_MHz": _POS, "scan_step_MHz": _POS,
                         "horizon_ns": _POS, "samples": {"type": "integer", "minimum": 3},
                         "sigma_grid_ns": _NUM_LIST, "duration_grid_ns": _NUM_LIST,
                         "rtol": _POS, "atol": _POS}),
    "decoherence": _obj({
        "points": {"type": "array", "minItems": 1,
                   "items": _obj({"T1_us": _NUM_OR_NULL, "Tphi_us": _NUM_OR_NULL})},
        "rtol": _POS, "atol": _POS}),
    "zz_map": _obj({"omega1_GHz": _RANGE, "omega2_GHz": _RANGE,
                    "min_overlap": {"type": "number", "minimum": 0, "maximum": 1}},
                   ("omega1_GHz", "omega2_GHz")),
    "j12_scan": _obj({"alpha_c_MHz": _RANGE, "dynamics": {"type": "boolean"},
                      "horizon_ns": _POS}, ("alpha_c_MHz",)),
    "floquet": _obj({"scales": _RANGE, "window_MHz": _POS,
                     "states": {"type": "array", "items": {"type": "string"}}}),
    "trajectory": _obj({"step_ns": _POS}),
    "output": _obj({"directory": {"type": "string"}}),
    "seed": {"type": "integer"},
}, ("schema_version", "device", "protocols"))


@dataclass(frozen=True)
class ProtocolConfig:
    name: str
    pair: tuple[str, str]
    coupler: str
    amplitude: float  # GHz
    detuning: float  # GHz
    frequencies: tuple[float, float] | None  # GHz
    sigma: float
    duration: float
    ramp_ratio: float = 0.5


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    device: DeviceSpec
    protocols: dict[str, ProtocolConfig]
    scenario: str

    @property
    def protocol(self) -> ProtocolConfig:
        return self.protocols[self.scenario]

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))

    def digest(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_levels(self, levels: int) -> ExperimentConfig:
        raw = copy.deepcopy(self.raw)
        raw["device"]["levels"] = levels
        for m in raw["device"]["modes"]:
            m.pop("levels", None)
        return parse_config(raw)

    def with_scenario(self, name: str) -> ExperimentConfig:
        if name not in self.protocols:
            raise ConfigError(f"unknown scenario {name!r}; config defines {sorted(self.protocols)}")
        raw = copy.deepcopy(self.raw)
        raw["scenario"] = name
        return parse_config(raw)


def parse_config(raw: Any) -> ExperimentConfig:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    dev = raw["device"]
    default_levels = dev.get("levels", 4)
    try:
        modes = tuple(ModeSpec(m["label"], m["frequency_GHz"], m.get("anharmonicity_MHz", 0.0) / 1e3,
                               m.get("levels", default_levels)) for m in dev["modes"])
        couplings = tuple(CouplingSpec(c["modes"][0], c["modes"][1], c["strength_MHz"] / 1e3)
                          for c in dev.get("couplings", []))
        device = DeviceSpec(modes, couplings)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"device: {exc}") from None
    protocols = {}
    for name, p in raw["protocols"].items():
        for label in (*p["pair"], p["coupler"]):
            if label not in device.labels:
                raise ConfigError(f"protocols/{name}: unknown mode {label!r}")
        freqs = tuple(p["frequencies_GHz"]) if "frequencies_GHz" in p else None
        protocols[name] = ProtocolConfig(name, tuple(p["pair"]), p["coupler"], p["amplitude_MHz"] / 1e3,
                                         p["detuning_MHz"] / 1e3, freqs, p["sigma_ns"],
                                         p["duration_ns"], p.get("ramp_ratio", 0.5))
    scenario = raw.get("scenario", next(iter(protocols)))
    if scenario not in protocols:
        raise ConfigError(f"scenario {scenario!r} is not among the protocols {sorted(protocols)}")
    return ExperimentConfig(raw, device, protocols, scenario)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw)


TABLES = {"aba": "aba.yaml", "abc": "abc.yaml", "threeq": "threeq.yaml"}


def shipped_config(name: str) -> ExperimentConfig:
    """One of the bundled scenario files: ``aba``, ``abc`` or ``threeq``."""
    if name not in TABLES:
        raise ConfigError(f"no shipped table {name!r}; choose from {sorted(TABLES)}")
    text = resources.files("couplergate.tables").joinpath(TABLES[name]).read_text(encoding="utf-8")
    return parse_config(yaml.safe_load(text))


SCENARIO_TABLES = {"ABA": "aba", "ABC": "abc", "3Q-Q1Q2": "threeq", "3Q-Q1Q3": "threeq"}


def scenario_config(scenario: str) -> ExperimentConfig:
    """Shipped configuration with ``scenario`` selected."""
    if scenario not in SCENARIO_TABLES:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIO_TABLES)}")
    return shipped_config(SCENARIO_TABLES[scenario]).with_scenario(scenario)
