"""JSON experiment configs: comment stripping, schema validation, overrides.

Schema (all keys besides ``model``, ``fault`` and ``methods`` optional)::

    {
      "name": "case1",
      "model": {"A": [[...]], "B": [[...]], "C": [[...]],
                "sigma_w": [[...]], "sigma_v": [[...]], "sigma_wv": [[...]]},
      "fault": {"kind": "step|drift|sine|none", "amplitude": 30, "omega": 0.4},
      "methods": [{"name": "OEF", "residual": "OE|PE|KF", "evaluation": "t2|jkf",
                   "alpha": 0.993, "s": 0,
                   "filter": {"shape": "lowpass", "order": 4, "cutoff": 0.02}}],
      "N_train": 10000, "N_test": 10000, "fault_onset": 5000,
      "runs": 500, "seed": 1
    }

Full-line comments starting with ``//`` or ``#`` are ignored.
"""
from __future__ import annotations

import copy
import json
import re
from importlib import resources
from pathlib import Path

import jsonschema

from .harness import ExperimentConfig, MethodSpec
from .lti import StateSpaceModel, ValidationError
from .residuals import FilterSpec
from .signals import FaultSpec

_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 1}, "minItems": 1}

SCHEMA = {
    "type": "object",
    "required": ["model", "fault", "methods"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "model": {
            "type": "object",
            "required": ["A", "B", "C", "sigma_w", "sigma_v"],
            "additionalProperties": False,
            "properties": {k: _matrix for k in ("A", "B", "C", "sigma_w", "sigma_v", "sigma_wv")},
        },
        "fault": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["none", "step", "drift", "sine"]},
                "amplitude": {"type": "number"},
                "omega": {"type": ["number", "null"]},
                "onset": {"type": "integer", "minimum": 1},
            },
        },
        "methods": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "residual", "evaluation"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "residual": {"enum": ["OE", "PE", "KF"]},
                    "evaluation": {"enum": ["t2", "jkf"]},
                    "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    "s": {"type": "integer", "minimum": 0},
                    "filter": {
                        "type": ["object", "null"],
                        "required": ["shape"],
                        "additionalProperties": False,
                        "properties": {
                            "shape": {"enum": ["lowpass", "bandpass"]},
                            "order": {"type": "integer", "minimum": 1},
                            "cutoff": {"type": "number"},
                            "low": {"type": "number"},
                            "high": {"type": "number"},
                        },
                    },
                },
            },
        },
        "N_train": {"type": "integer", "minimum": 100},
        "N_test": {"type": "integer", "minimum": 2},
        "fault_onset": {"type": "integer", "minimum": 1},
        "runs": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
    },
}

BUNDLED = ("case1", "case2", "case3")


class ConfigError(ValueError):
    """Config failed to parse or validate; ``path`` names the offending key."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def strip_comments(text: str) -> str:
    return "\n".join("" if re.match(r"^\s*(//|#)", line) else line for line in text.splitlines())


def _path_str(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _coerce(value: str):
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``key=value`` overrides; dotted keys walk into objects and lists
    (``methods.0.alpha=0.99``); values are parsed as JSON when possible."""
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = raw
        for i, part in enumerate(parts[:-1]):
            node = node[int(part)] if isinstance(node, list) else node.setdefault(part, {})
        last = parts[-1]
        if isinstance(node, list):
            node[int(last)] = _coerce(value)
        else:
            node[last] = _coerce(value)
    return raw


def parse_text(text: str, source: str = "<config>") -> dict:
    try:
        return json.loads(strip_comments(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def build_config(raw: dict) -> ExperimentConfig:
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _path_str(e.absolute_path))
    try:
        model = StateSpaceModel.from_dict(raw["model"])
    except ValidationError as exc:
        raise ConfigError(str(exc), "model") from None
    f = raw["fault"]
    onset = raw.get("fault_onset", f.get("onset", 5000))
    try:
        fault = FaultSpec(f["kind"], f.get("amplitude", 0.0), onset, f.get("omega"))
    except ValidationError as exc:
        raise ConfigError(str(exc), "fault") from None
    methods = []
    for i, m in enumerate(raw["methods"]):
        try:
            filt = FilterSpec(**m["filter"]) if m.get("filter") else None
            methods.append(MethodSpec(m["name"], m["residual"], m["evaluation"], m.get("alpha", 0.99),
                                      m.get("s", 0), filt))
        except (ValidationError, TypeError) as exc:
            raise ConfigError(str(exc), f"methods[{i}]") from None
    try:
        return ExperimentConfig(model, fault, methods, N_train=raw.get("N_train", 10_000),
                                N_test=raw.get("N_test", 10_000), runs=raw.get("runs", 500),
                                seed=raw.get("seed", 0), name=raw.get("name", "experiment"))
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def bundled_text(name: str) -> str:
    return resources.files("fdresid").joinpath("configs", f"{name}.json").read_text()


def load_raw(path_or_name) -> dict:
    """Read a config file, or a bundled config by name (case1, case2, case3)."""
    p = Path(str(path_or_name))
    if not p.exists() and str(path_or_name) in BUNDLED:
        return parse_text(bundled_text(str(path_or_name)), str(path_or_name))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_text(text, str(p))


def load_config(path_or_name, overrides=()) -> ExperimentConfig:
    return build_config(apply_overrides(load_raw(path_or_name), overrides))


def config_to_raw(config: ExperimentConfig) -> dict:
    d = config.to_dict()
    d["fault_onset"] = d["fault"].pop("onset")
    return d
