"""Experiment configuration: INI file + flag overrides, validated by JSON Schema.

Each command declares an ``input_schema`` assembled from the section schemas
below. Values read from the file (or ``--set section.field=value``) are
strings; they are coerced by the type their schema declares and the result
is validated with jsonschema before the command sees it.

Arrays are written inline. Numeric arrays split on commas or whitespace;
string arrays (policy and estimator descriptors, which use commas for their
options) split on whitespace or ``;``.

Mixture components live in ``[workload.<name>]`` sections listed by
``components = <name> <name>`` in ``[workload]``. A component inherits
lam, r, num_keys, zipf_s and duration from ``[workload]`` unless it sets them.
"""

import configparser
import copy
import logging
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import jsonschema
import numpy as np

from .costs import CostProfile, derive_costs
from .discovery import parse_bool
from .errors import ConfigError
from .freshmodel import CostParams
from .workload import PoissonWorkload, WorkloadSpec, workload_spec_from_dict

logger = logging.getLogger(__name__)

ALL_POLICY_DESCRIPTORS = [
    "ttl-expiry",
    "ttl-polling",
    "update",
    "invalidate",
    "adaptive",
    "adaptive-cs",
    "opt",
]

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_NON_NEGATIVE = {"type": "number", "minimum": 0}
_PROBABILITY = {"type": "number", "minimum": 0, "maximum": 1}

WORKLOAD_FIELDS: Dict[str, Dict[str, Any]] = {
    "kind": {"type": "string", "enum": ["poisson", "mixture", "trace"], "default": "poisson"},
    "lam": dict(_POSITIVE, default=10.0),
    "r": dict(_PROBABILITY, default=0.9),
    "num_keys": {"type": "integer", "minimum": 1, "default": 1000},
    "zipf_s": dict(_POSITIVE, default=1.3),
    "duration": dict(_POSITIVE, default=1000.0),
    "seed": {"type": "integer", "minimum": 0, "default": 0},
    "path": {"type": "string", "default": ""},
    "format": {"type": "string", "enum": ["csv"], "default": "csv"},
    "components": {"type": "array", "items": {"type": "string"}, "default": []},
}

COMPONENT_FIELDS: Dict[str, Dict[str, Any]] = {
    "weight": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    "kind": {"type": "string", "enum": ["poisson", "trace"], "default": "poisson"},
    "lam": dict(_POSITIVE, default=10.0),
    "r": dict(_PROBABILITY, default=0.9),
    "num_keys": {"type": "integer", "minimum": 1, "default": 1000},
    "zipf_s": dict(_POSITIVE, default=1.3),
    "duration": dict(_POSITIVE, default=1000.0),
    "path": {"type": "string", "default": ""},
    "format": {"type": "string", "enum": ["csv"], "default": "csv"},
}

COSTS_FIELDS: Dict[str, Dict[str, Any]] = {
    "bottleneck": {"type": "string", "enum": ["cpu", "network", "custom"], "default": "cpu"},
    "ser_per_byte": dict(_NON_NEGATIVE, default=1.0),
    "deser_per_byte": dict(_NON_NEGATIVE, default=1.0),
    "fixed_read": dict(_NON_NEGATIVE, default=0.0),
    "fixed_update_apply": dict(_NON_NEGATIVE, default=0.0),
    "fixed_delete": dict(_NON_NEGATIVE, default=0.0),
    "bytes_per_message_overhead": dict(_NON_NEGATIVE, default=0.0),
    "network_per_byte": dict(_NON_NEGATIVE, default=1.0),
    "c_update": dict(_NON_NEGATIVE),
    "c_invalidate": dict(_NON_NEGATIVE),
    "c_miss": dict(_NON_NEGATIVE),
    "prioritize_latency": {"type": "boolean", "default": False},
    "key_size": {"type": "integer", "minimum": 1, "default": 16},
    "value_size": {"type": "integer", "minimum": 0, "default": 128},
    "c_serve": dict(_POSITIVE, default=1.0),
}

SIM_FIELDS: Dict[str, Dict[str, Any]] = {
    "policies": {
        "type": "array",
        "items": {"type": "string", "minLength": 1},
        "minItems": 1,
        "default": list(ALL_POLICY_DESCRIPTORS),
    },
    "staleness_bounds": {"type": "array", "items": _POSITIVE, "default": [0.1]},
    "t_min": dict(_POSITIVE, default=0.001),
    "t_max": dict(_POSITIVE, default=10.0),
    "t_points": {"type": "integer", "minimum": 0, "default": 0},
    "capacity": {"type": "integer", "minimum": 1, "default": 1000},
    "horizon": dict(_POSITIVE),
    "warmup_fraction": {"type": "number", "minimum": 0, "exclusiveMaximum": 1, "default": 0.0},
    "ttl_alignment": {"type": "string", "enum": ["fetch", "interval"], "default": "fetch"},
    "invalidation_tracking_limit": {"type": "integer", "minimum": 0, "default": 0},
    "estimator": {"type": "string", "default": "exact"},
    "seed": {"type": "integer", "minimum": 0, "default": 0},
    "workers": {"type": "integer", "minimum": 1, "default": 1},
}

MODEL_FIELDS: Dict[str, Dict[str, Any]] = {
    "lam": dict(_POSITIVE, default=10.0),
    "r": dict(_PROBABILITY, default=0.9),
    "horizon": {"type": "number", "minimum": 0, "default": 0.0},
    "policies": {
        "type": "array",
        "items": {"type": "string", "enum": ["ttl-expiry", "ttl-polling", "update", "invalidate"]},
        "minItems": 1,
        "default": ["ttl-expiry", "ttl-polling", "update", "invalidate"],
    },
    "staleness_bounds": {"type": "array", "items": _POSITIVE, "default": []},
    "t_min": dict(_POSITIVE, default=0.001),
    "t_max": dict(_POSITIVE, default=10.0),
    "t_points": {"type": "integer", "minimum": 0, "default": 9},
}

SKETCH_FIELDS: Dict[str, Dict[str, Any]] = {
    "estimators": {
        "type": "array",
        "items": {"type": "string", "minLength": 1},
        "minItems": 2,
        "default": ["exact", "cms:d=4,w=4096", "topk:k=1000,d=4,w=4096"],
    },
    "timing": {"type": "boolean", "default": False},
    "seed": {"type": "integer", "minimum": 0, "default": 0},
}

OUTPUT_FIELDS: Dict[str, Dict[str, Any]] = {
    "dir": {"type": "string", "minLength": 1, "default": "results"},
    "format": {"type": "string", "enum": ["csv", "json", "gnuplot"], "default": "csv"},
    "transcript": {"type": "boolean", "default": False},
    "per_key": {"type": "boolean", "default": False},
}

SECTION_FIELDS: Dict[str, Dict[str, Dict[str, Any]]] = {
    "workload": WORKLOAD_FIELDS,
    "costs": COSTS_FIELDS,
    "sim": SIM_FIELDS,
    "model": MODEL_FIELDS,
    "sketch": SKETCH_FIELDS,
    "output": OUTPUT_FIELDS,
}

INHERITED_FIELDS = ("lam", "r", "num_keys", "zipf_s", "duration")

_STRING_ARRAY_SPLIT = re.compile(r"[\s;]+")
_NUMBER_ARRAY_SPLIT = re.compile(r"[\s,;]+")


def section_schema(fields: Dict[str, Dict[str, Any]]) -> Dict[str, Any]:
    return {"type": "object", "properties": copy.deepcopy(fields), "additionalProperties": False}


def command_schema(*sections: str, overrides: Optional[Dict[str, Dict[str, Any]]] = None) -> Dict[str, Any]:
    """JSON Schema over the given sections; ``overrides`` replaces field schemas."""
    properties: Dict[str, Any] = {}
    for name in sections:
        fields = dict(SECTION_FIELDS[name])
        for field_name, field_schema in (overrides or {}).get(name, {}).items():
            fields[field_name] = field_schema
        properties[name] = section_schema(fields)
    if "workload" in sections:
        properties["components"] = {
            "type": "object",
            "additionalProperties": section_schema(COMPONENT_FIELDS),
        }
    return {"type": "object", "properties": properties, "additionalProperties": False}


def defaults_for(schema: Dict[str, Any]) -> Dict[str, Any]:
    """Nested dict of every declared default."""
    result: Dict[str, Any] = {}
    for section, section_def in schema.get("properties", {}).items():
        props = section_def.get("properties")
        if props is None:
            result[section] = {}
            continue
        result[section] = {
            name: copy.deepcopy(field["default"]) for name, field in props.items() if "default" in field
        }
    return result


def coerce_value(raw: str, field: Dict[str, Any]) -> Any:
    """Convert a config string to the type its schema declares.

    Raises:
        ValueError: the string does not parse as that type
    """
    kind = field.get("type")
    text = raw.strip()
    if kind == "integer":
        return int(text)
    if kind == "number":
        return float(text)
    if kind == "boolean":
        return parse_bool(text)
    if kind == "array":
        item = field.get("items", {})
        splitter = _STRING_ARRAY_SPLIT if item.get("type") == "string" else _NUMBER_ARRAY_SPLIT
        return [coerce_value(part, item) for part in splitter.split(text) if part]
    return text


def _line_of(lines: Sequence[str], section: str, option: Optional[str] = None) -> int:
    header = re.compile(r"^\s*\[\s*" + re.escape(section) + r"\s*\]")
    in_section = False
    for number, line in enumerate(lines, 1):
        if header.match(line):
            if option is None:
                return number
            in_section = True
            continue
        if in_section:
            if line.lstrip().startswith("["):
                in_section = False
                continue
            name = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            if name == option:
                return number
    return 0


class ConfigLoader:
    """Assembles a command's argument dict from defaults, file and flags."""

    def __init__(self, schema: Dict[str, Any]):
        self.schema = schema
        self.arguments = defaults_for(schema)
        self._properties = schema.get("properties", {})

    def _field(self, section: str, name: str, where: str) -> Dict[str, Any]:
        section_def = self._properties.get(section)
        if section_def is None:
            raise ConfigError(f"{where}: unknown section [{section}]")
        props = section_def.get("properties", {})
        if name not in props:
            known = ", ".join(sorted(props))
            raise ConfigError(f"{where}: [{section}] unknown field {name!r} (known: {known})")
        return props[name]

    def _set(self, section: str, name: str, raw: str, where: str) -> None:
        field = self._field(section, name, where)
        try:
            value = coerce_value(raw, field)
        except ValueError as e:
            raise ConfigError(f"{where}: [{section}] {name}: {e}") from None
        self.arguments.setdefault(section, {})[name] = value

    def _set_component(self, component: str, name: str, raw: str, where: str) -> None:
        if name not in COMPONENT_FIELDS:
            known = ", ".join(sorted(COMPONENT_FIELDS))
            raise ConfigError(f"{where}: [workload.{component}] unknown field {name!r} (known: {known})")
        try:
            value = coerce_value(raw, COMPONENT_FIELDS[name])
        except ValueError as e:
            raise ConfigError(f"{where}: [workload.{component}] {name}: {e}") from None
        self.arguments.setdefault("components", {}).setdefault(component, {})[name] = value

    def load_file(self, path: Path) -> None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as e:
            raise ConfigError(f"{path}: {e}") from None
        lines = text.splitlines()

        for section in parser.sections():
            if section.startswith("workload."):
                if "workload" not in self._properties:
                    continue
                component = section.split(".", 1)[1]
                for name, raw in parser.items(section):
                    where = f"{path}:{_line_of(lines, section, name)}"
                    self._set_component(component, name, raw, where)
                continue
            if section not in SECTION_FIELDS:
                raise ConfigError(f"{path}:{_line_of(lines, section)}: unknown section [{section}]")
            if section not in self._properties:
                logger.debug("section [%s] not used by this command", section)
                continue
            for name, raw in parser.items(section):
                where = f"{path}:{_line_of(lines, section, name)}"
                self._set(section, name, raw, where)

    def apply_override(self, assignment: str) -> None:
        """Apply ``section.field=value`` (``workload.<name>.field=value`` for components)."""
        target, sep, raw = assignment.partition("=")
        parts = target.strip().split(".")
        if not sep or len(parts) not in (2, 3) or not all(parts):
            raise ConfigError(f"--set: expected section.field=value, got {assignment!r}")
        if len(parts) == 3:
            if parts[0] != "workload":
                raise ConfigError(f"--set: only workload.<component>.field nests, got {assignment!r}")
            self._set_component(parts[1], parts[2].lower(), raw, "--set")
        else:
            self._set(parts[0], parts[1].lower(), raw, "--set")

    def apply_value(self, section: str, name: str, value: Any) -> None:
        if section in self._properties:
            self._field(section, name, "flag")
            self.arguments.setdefault(section, {})[name] = value

    def validate(self) -> Dict[str, Any]:
        validator = jsonschema.Draft7Validator(self.schema)
        errors = sorted(validator.iter_errors(self.arguments), key=lambda e: list(e.absolute_path))
        if errors:
            error = errors[0]
            location = ".".join(str(p) for p in error.absolute_path) or "config"
            raise ConfigError(f"{location}: {error.message}")
        return self.arguments


def load_arguments(
    schema: Dict[str, Any],
    config_path: Optional[Path] = None,
    overrides: Iterable[str] = (),
    flags: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """Defaults <- config file <- ``--set`` overrides <- common flags, validated."""
    loader = ConfigLoader(schema)
    if config_path is not None:
        loader.load_file(config_path)
    for assignment in overrides:
        loader.apply_override(assignment)
    for (section, name), value in (flags or {}).items():
        loader.apply_value(section, name, value)
    return loader.validate()


def staleness_bounds(section: Dict[str, Any]) -> List[float]:
    """Explicit ``staleness_bounds`` if given, else ``t_points`` log-spaced over [t_min, t_max]."""
    bounds = list(section.get("staleness_bounds") or [])
    if bounds:
        return [float(t) for t in bounds]
    points = section.get("t_points", 0)
    if points:
        t_min, t_max = section["t_min"], section["t_max"]
        if t_min > t_max:
            raise ConfigError(f"t_min ({t_min}) must not exceed t_max ({t_max})")
        if points == 1:
            return [float(t_min)]
        return [float(t) for t in np.logspace(np.log10(t_min), np.log10(t_max), points)]
    raise ConfigError("no staleness bound given: set staleness_bounds or t_points")


def build_cost_params(arguments: Dict[str, Any]) -> CostParams:
    costs = dict(arguments["costs"])
    key_size = costs.pop("key_size")
    value_size = costs.pop("value_size")
    c_serve = costs.pop("c_serve")
    return derive_costs(CostProfile.from_dict(costs), key_size, value_size, c_serve)


def build_workload_spec(arguments: Dict[str, Any]) -> WorkloadSpec:
    """WorkloadSpec from the workload section and its component sections."""
    workload = dict(arguments["workload"])
    costs = arguments.get("costs", {})
    sizes = {
        "key_size": costs.get("key_size", PoissonWorkload.key_size),
        "value_size": costs.get("value_size", PoissonWorkload.value_size),
    }
    kind = workload.get("kind", "poisson")
    if kind == "mixture":
        names = workload.get("components") or []
        if not names:
            raise ConfigError("mixture workload lists no components")
        sections = arguments.get("components", {})
        components = []
        for name in names:
            if name not in sections:
                raise ConfigError(f"mixture component [workload.{name}] is not defined")
            component = {k: workload[k] for k in INHERITED_FIELDS if k in workload}
            component.update(sections[name])
            if "weight" not in component:
                raise ConfigError(f"[workload.{name}] needs a weight")
            component.setdefault("seed", workload.get("seed", 0))
            component.update(sizes)
            components.append(component)
        return workload_spec_from_dict({"kind": "mixture", "components": components, "seed": workload.get("seed", 0)})
    if kind == "trace" and not workload.get("path"):
        raise ConfigError("trace workload needs workload.path")
    workload.pop("components", None)
    workload.update(sizes)
    return workload_spec_from_dict(workload)
