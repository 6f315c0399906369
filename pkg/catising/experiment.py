"""Experiment documents: YAML with a fixed set of top-level keys and a
kind-specific `parameters` section. See docs/experiment_files.md."""

import os
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any

import yaml

from catising.config import WORKERS_ENV
from catising.errors import ParseError, ValidationError


class Kind(str, Enum):
    ISING_MEMORY = "ising-memory"
    CAVITY_STEADY = "cavity-steady"
    GAP_SCAN = "gap-scan"
    TOY_FIDELITY = "toy-fidelity"
    MEANFIELD_PHASE = "meanfield-phase"
    ORACLE_CHECK = "oracle-check"
    TOOM_DEMO = "toom-demo"


REQUIRED = object()


@dataclass(frozen=True)
class Param:
    type: str  # "int", "float", "floats", "str", "bool"
    default: Any = REQUIRED
    minimum: float | None = None
    strict: bool = False  # minimum excluded
    choices: tuple = ()

    @property
    def sweepable(self) -> bool:
        return self.type in ("int", "float", "floats")


RATE = Param("float", minimum=0.0)

SCHEMAS: dict[Kind, dict[str, Param]] = {
    Kind.ISING_MEMORY: {
        "M": Param("int", minimum=1),
        "beta": Param("float", minimum=0.0, strict=True),
        "kappa": Param("float", 1.0, minimum=0.0, strict=True),
        "T": Param("float", None, minimum=0.0),
        "n_traj": Param("int", 10_000, minimum=1),
        "decoder": Param("str", "majority", choices=("majority", "components")),
        "initial": Param("int", 0, choices=(0, 1)),
    },
    Kind.CAVITY_STEADY: {
        "model": Param("str", "model1", choices=("model1", "model2")),
        "N": Param("floats", minimum=0.0, strict=True),
        "kappa1": Param("floats", minimum=0.0),
        "kappa2": Param("float", 1.0, minimum=0.0, strict=True),
        "method": Param("str", "evolve", choices=("evolve", "projected", "steady")),
        "t_settle": Param("float", 200.0, minimum=0.0, strict=True),
        "check_cutoff": Param("bool", True),
    },
    Kind.GAP_SCAN: {
        "model": Param("str", "model1", choices=("model1", "model2")),
        "N": Param("floats", minimum=0.0, strict=True),
        "kappa1": Param("float", 1e-3, minimum=0.0),
        "kappa2": Param("float", 1.0, minimum=0.0, strict=True),
        "check_cutoff": Param("bool", True),
    },
    Kind.TOY_FIDELITY: {
        "N": Param("floats", minimum=0.0, strict=True),
        "kappa2": Param("float", 1.0, minimum=0.0, strict=True),
        "kappa1": Param("float", 0.1, minimum=0.0),
        "kappad": Param("float", 0.1, minimum=0.0),
        "kappann": Param("float", 0.3, minimum=0.0),
        "T_noisy": Param("float", 15.0, minimum=0.0),
        "T_recovery": Param("float", 15.0, minimum=0.0),
        "recovery_mode": Param("str", "keep_knn", choices=("keep_knn", "zero_knn")),
        "check_cutoff": Param("bool", True),
    },
    Kind.MEANFIELD_PHASE: {
        "kappa1_min": Param("float", 0.0, minimum=0.0),
        "kappa1_max": Param("float", 0.6, minimum=0.0),
        "n_kappa1": Param("int", 50, minimum=1),
        "kappad_min": Param("float", 0.0, minimum=0.0),
        "kappad_max": Param("float", 0.6, minimum=0.0),
        "n_kappad": Param("int", 50, minimum=1),
        "diagonal": Param("bool", False),
        "kappann": Param("float", 0.3, minimum=0.0),
        "lam": Param("float", 1.0, minimum=0.0),
        "kappa2": Param("float", 1.0, minimum=0.0, strict=True),
    },
    Kind.ORACLE_CHECK: {
        "M": Param("int", 3, minimum=1),
        "beta": Param("floats", [0.1, 0.3, 0.6], minimum=0.0, strict=True),
        "kappa": Param("float", 1.0, minimum=0.0, strict=True),
    },
    Kind.TOOM_DEMO: {
        "M": Param("int", 8, minimum=1),
        "island": Param("str", "single", choices=("single", "square")),
        "max_steps": Param("int", 5, minimum=0),
        "flip_prob": Param("float", 0.0, minimum=0.0),
    },
}

STOCHASTIC = {Kind.ISING_MEMORY, Kind.TOOM_DEMO}
TOP_LEVEL = ("kind", "parameters", "seed", "workers", "output", "format")
FORMATS = ("csv", "json")


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(value))
    except ValueError:
        raise ValidationError([f"{WORKERS_ENV}={value!r} is not an integer"]) from None


@dataclass(frozen=True)
class ExperimentSpec:
    kind: Kind
    parameters: dict[str, Any]
    seed: int = 0
    workers: int = field(default_factory=default_workers)
    output: Path | None = None
    format: str = "csv"

    @property
    def output_path(self) -> Path:
        if self.output is not None:
            return self.output
        return Path(f"{self.kind.value}.{self.format}")

    def with_parameter(self, key: str, value: Any, seed: int | None = None) -> "ExperimentSpec":
        parameters = dict(self.parameters)
        parameters[key] = value
        return replace(self, parameters=parameters, seed=self.seed if seed is None else seed)

    def echo(self) -> dict[str, Any]:
        """Everything needed to re-run this spec."""
        return {
            "kind": self.kind.value,
            "parameters": dict(self.parameters),
            "seed": self.seed,
            "workers": self.workers,
            "output": str(self.output_path),
            "format": self.format,
        }


def _key_lines(node) -> dict[str, int]:
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {key.value: key.start_mark.line + 1 for key, _ in node.value}


def _coerce(name: str, param: Param, value: Any, problems: list[str]) -> Any:
    def number(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            problems.append(f"'{name}' must be a number, got {v!r}")
            return None
        return float(v)

    if param.type == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"'{name}' must be an integer, got {value!r}")
            return None
        result = value
    elif param.type == "float":
        if value is None and param.default is None:
            return None
        result = number(value)
    elif param.type == "floats":
        items = value if isinstance(value, list) else [value]
        if not items:
            problems.append(f"'{name}' must not be empty")
            return None
        result = [number(v) for v in items]
        if None in result:
            return None
    elif param.type == "bool":
        if not isinstance(value, bool):
            problems.append(f"'{name}' must be true or false, got {value!r}")
            return None
        result = value
    else:
        if not isinstance(value, str):
            problems.append(f"'{name}' must be a string, got {value!r}")
            return None
        result = value

    if param.choices and result not in param.choices:
        problems.append(f"'{name}' must be one of {list(param.choices)}, got {result!r}")
    if param.minimum is not None and result is not None:
        for v in result if isinstance(result, list) else [result]:
            if v < param.minimum or (param.strict and v == param.minimum):
                relation = ">" if param.strict else ">="
                problems.append(f"'{name}' must be {relation} {param.minimum}, got {v}")
                break
    return result


def validate_parameters(kind: Kind, given: dict[str, Any], lines: dict[str, int] | None = None) -> dict[str, Any]:
    schema = SCHEMAS[kind]
    lines = lines or {}
    for key in given:
        if key not in schema:
            raise ParseError(f"unknown parameter for {kind.value}", lines.get(key), key)
    problems: list[str] = []
    parameters = {}
    for name, param in schema.items():
        if name in given:
            parameters[name] = _coerce(name, param, given[name], problems)
        elif param.default is REQUIRED:
            problems.append(f"'{name}' is required for {kind.value}")
        else:
            parameters[name] = param.default
    if problems:
        raise ValidationError(problems)
    return parameters


def parse_spec(text: str) -> ExperimentSpec:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        document = yaml.safe_load(text)
    except yaml.MarkedYAMLError as error:
        line = error.problem_mark.line + 1 if error.problem_mark else None
        raise ParseError(f"malformed document: {error.problem}", line) from None
    if not isinstance(document, dict):
        raise ParseError("document must be a mapping of keys to values", 1)

    lines = _key_lines(node)
    for key in document:
        if key not in TOP_LEVEL:
            raise ParseError("unknown top-level key", lines.get(key), str(key))
    if "kind" not in document:
        raise ParseError("missing 'kind'", None, "kind")
    try:
        kind = Kind(document["kind"])
    except ValueError:
        raise ParseError(
            f"unknown kind {document['kind']!r}", lines.get("kind"), "kind"
        ) from None

    section = document.get("parameters") or {}
    if not isinstance(section, dict):
        raise ParseError("'parameters' must be a mapping", lines.get("parameters"), "parameters")
    section_node = next(
        (value for key, value in node.value if key.value == "parameters"), None
    )

    problems: list[str] = []
    try:
        parameters = validate_parameters(kind, section, _key_lines(section_node))
    except ValidationError as error:
        problems.extend(error.violations)
        parameters = {}

    seed = document.get("seed")
    if seed is None:
        if kind in STOCHASTIC:
            problems.append(f"'seed' is required for {kind.value}")
        seed = 0
    elif isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        problems.append(f"'seed' must be an integer in [0, 2^64), got {seed!r}")
    workers = document.get("workers", default_workers())
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        problems.append(f"'workers' must be a positive integer, got {workers!r}")
    fmt = document.get("format", "csv")
    if fmt not in FORMATS:
        problems.append(f"'format' must be one of {list(FORMATS)}, got {fmt!r}")
    output = document.get("output")
    if output is not None and not isinstance(output, str):
        problems.append(f"'output' must be a path string, got {output!r}")
    if problems:
        raise ValidationError(problems)

    return ExperimentSpec(
        kind, parameters, seed, workers, Path(output) if output else None, fmt
    )


def load_spec(path: str | Path) -> ExperimentSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as error:
        raise ParseError(f"cannot read {path}: {error.strerror}") from None
    return parse_spec(text)
