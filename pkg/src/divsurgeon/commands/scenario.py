"""Scenario models: one run's domain, fields, regions, maps and parameters."""

from importlib.resources import files
from pathlib import Path
from typing import Any, Literal, Optional, Union, get_args

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from divsurgeon.constructors import FIELD_TAGS, MAP_TAGS
from divsurgeon.errors import ScenarioError
from divsurgeon.grid.domain import Domain
from divsurgeon.grid.regions import (
    Annulus,
    Ball,
    Band,
    Box,
    Complement,
    Region,
    whole,
)
from divsurgeon.parsers import ScenarioText, Section, parse_scenario_text

Operation = Literal[
    "paste",
    "obstruct",
    "solve-div",
    "smooth",
    "extend",
    "linearize-field",
    "moser",
    "franks",
    "norms",
    "dump",
]
OPERATIONS: tuple[str, ...] = get_args(Operation)

# Named fields, regions and maps each operation reads
REQUIRED = {
    "paste": {"fields": ("X", "Y"), "regions": ("K", "U")},
    "obstruct": {"fields": ("X", "Y"), "regions": ("K", "U")},
    "extend": {"fields": ("X", "Y"), "regions": ("K", "U")},
    "smooth": {"fields": ("X",)},
    "solve-div": {"regions": ("omega1", "omega")},
    "linearize-field": {"fields": ("v",)},
    "franks": {"maps": ("f",)},
}

BUNDLED_SUFFIX = ".cfg"


def _listify(value: Any) -> Any:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [value]
    if isinstance(value, tuple):
        return list(value)
    return value


class DomainSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["box", "torus"]
    lengths: list[float]
    resolution: Union[int, list[int]]
    lower: Optional[list[float]] = None

    @field_validator("lengths", "lower", mode="before")
    @classmethod
    def listify(cls, value: Any) -> Any:
        return _listify(value)

    @field_validator("resolution", mode="before")
    @classmethod
    def resolution_list(cls, value: Any) -> Any:
        return list(value) if isinstance(value, tuple) else value

    def build(self, resolution_override: Optional[int] = None) -> Domain:
        resolution = resolution_override or self.resolution
        lower = self.lower or [0.0] * len(self.lengths)
        return Domain(
            self.kind,
            tuple(lower),
            tuple(self.lengths),
            tuple(resolution if isinstance(resolution, list) else [resolution] * len(self.lengths)),
        )


class RegionSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: Literal["ball", "annulus", "band", "box", "complement-ball", "whole"]
    center: Optional[list[float]] = None
    radius: Optional[float] = None
    inner: Optional[float] = None
    outer: Optional[float] = None
    axis: Optional[int] = None
    width: Optional[float] = None
    lower: Optional[list[float]] = None
    upper: Optional[list[float]] = None

    @field_validator("center", "lower", "upper", mode="before")
    @classmethod
    def listify(cls, value: Any) -> Any:
        return _listify(value)

    @model_validator(mode="after")
    def check_needs(self) -> "RegionSpec":
        needed = {
            "ball": ("center", "radius"),
            "complement-ball": ("center", "radius"),
            "annulus": ("center", "inner", "outer"),
            "band": ("axis", "center", "width"),
            "box": ("lower", "upper"),
            "whole": (),
        }[self.shape]
        missing = [name for name in needed if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.shape} region needs {', '.join(missing)}")
        return self

    def build(self) -> Region:
        if self.shape == "ball":
            return Ball(tuple(self.center), self.radius)
        if self.shape == "complement-ball":
            return Complement(Ball(tuple(self.center), self.radius))
        if self.shape == "annulus":
            return Annulus(tuple(self.center), self.inner, self.outer)
        if self.shape == "band":
            return Band(self.axis, self.center[0], self.width)
        if self.shape == "box":
            return Box(tuple(self.lower), tuple(self.upper))
        return whole()


class FieldSpec(BaseModel):
    """A field by formula tag; base names another field added to it."""

    model_config = ConfigDict(extra="forbid")

    tag: str
    base: Optional[str] = None
    params: dict[str, Any] = Field(default_factory=dict)

    @field_validator("tag")
    @classmethod
    def known_tag(cls, value: str) -> str:
        if value not in FIELD_TAGS:
            raise ValueError(f"unknown field tag '{value}', expected one of {', '.join(FIELD_TAGS)}")
        return value


class MapSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tag: str
    params: dict[str, Any] = Field(default_factory=dict)

    @field_validator("tag")
    @classmethod
    def known_tag(cls, value: str) -> str:
        if value not in MAP_TAGS:
            raise ValueError(f"unknown map tag '{value}', expected one of {', '.join(MAP_TAGS)}")
        return value


class ParamsSpec(BaseModel):
    """Operation parameters; each operation reads the keys it needs."""

    model_config = ConfigDict(extra="forbid")

    r: int = Field(default=1, ge=0, le=3)
    alpha: Optional[float] = Field(default=None, gt=0, le=1)
    t_sweep: Optional[list[float]] = None
    eps: float = Field(default=0.1, gt=0)
    eps_sweep: Optional[list[float]] = None
    eps0: float = Field(default=0.1, gt=0, le=1)
    x: Optional[list[float]] = None
    matrix: Optional[list[float]] = None
    direction: Optional[list[float]] = None
    support_radius: float = Field(default=0.2, gt=0)
    width: Optional[float] = Field(default=None, gt=0)
    cube_side: Optional[float] = Field(default=None, gt=0, le=1)
    cube_sweep: Optional[list[float]] = None
    samples: int = Field(default=4, ge=1)
    amplitude: float = Field(default=0.1, ge=0, lt=1)
    transport_log2: int = Field(default=14, ge=4, le=20)
    field: Optional[str] = None
    csv: bool = False

    @field_validator(
        "t_sweep", "eps_sweep", "x", "matrix", "direction", "cube_sweep", mode="before"
    )
    @classmethod
    def listify(cls, value: Any) -> Any:
        return _listify(value)

    def square(self, name: str, n: int) -> Optional[np.ndarray]:
        """A flat row-major parameter reshaped to n×n."""
        values = getattr(self, name)
        if values is None:
            return None
        if len(values) != n * n:
            raise ScenarioError(f"params.{name} needs {n * n} entries, got {len(values)}")
        return np.asarray(values, dtype=float).reshape(n, n)


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    operation: Optional[Operation] = None
    seed: int = 0
    domain: DomainSpec
    fields: dict[str, FieldSpec] = Field(default_factory=dict)
    regions: dict[str, RegionSpec] = Field(default_factory=dict)
    maps: dict[str, MapSpec] = Field(default_factory=dict)
    params: ParamsSpec = Field(default_factory=ParamsSpec)
    source: Optional[Path] = None

    @model_validator(mode="after")
    def check_references(self) -> "Scenario":
        for label, spec in self.fields.items():
            if spec.base is not None and spec.base not in self.fields:
                raise ValueError(f"field {label} names unknown base field '{spec.base}'")
            if spec.base == label:
                raise ValueError(f"field {label} cannot be its own base")
        return self

    def require(self, operation: str) -> None:
        """
        Check that the fields, regions and maps operation reads are present.

        Raises:
            ScenarioError: something is missing
        """
        if self.operation is not None and self.operation != operation:
            raise ScenarioError(
                f"Scenario '{self.name}' is written for '{self.operation}', not '{operation}'"
            )
        for group, labels in REQUIRED.get(operation, {}).items():
            present = getattr(self, group)
            missing = [label for label in labels if label not in present]
            if missing:
                raise ScenarioError(
                    f"'{operation}' needs {group} {', '.join(missing)} in scenario '{self.name}'"
                )
        if operation in ("norms", "dump"):
            name = self.params.field
            if name is None or (name not in self.fields and name not in self.maps):
                raise ScenarioError(f"'{operation}' needs params.field naming a field or map")
        if operation == "linearize-field" and self.params.x is None:
            raise ScenarioError("'linearize-field' needs params.x")
        if operation == "franks" and self.params.matrix is None and self.params.direction is None:
            raise ScenarioError("'franks' needs params.matrix or params.direction")

    @property
    def base_dir(self) -> Path:
        return self.source.parent if self.source is not None else Path.cwd()


def _section_payload(section: Section) -> dict[str, Any]:
    values = section.values()
    if section.kind in ("field", "map"):
        payload: dict[str, Any] = {"tag": values.pop("tag", None)}
        if section.kind == "field" and "base" in values:
            payload["base"] = values.pop("base")
        payload["params"] = values
        return payload
    return values


def _payload(parsed: ScenarioText) -> tuple[dict[str, Any], dict[tuple, int]]:
    """Raw model input plus the line of every location."""
    lines: dict[tuple, int] = {}
    payload: dict[str, Any] = {}
    for entry in parsed.top.entries:
        payload[entry.key] = entry.value
        lines[(entry.key,)] = entry.line

    groups = {"field": "fields", "region": "regions", "map": "maps"}
    for section in parsed.sections[1:]:
        if section.kind in groups:
            if section.label is None:
                raise ScenarioError(
                    f"line {section.line}: [{section.kind}] sections need a label"
                )
            location = (groups[section.kind], section.label)
            payload.setdefault(groups[section.kind], {})[section.label] = _section_payload(section)
        elif section.kind in ("domain", "params"):
            if section.label is not None:
                raise ScenarioError(f"line {section.line}: [{section.kind}] takes no label")
            location = (section.kind,)
            payload[section.kind] = _section_payload(section)
        else:
            raise ScenarioError(f"line {section.line}: unknown section [{section.kind}]")
        lines[location] = section.line
        for entry in section.entries:
            key = entry.key
            if section.kind in ("field", "map") and key not in ("tag", "base"):
                lines[(*location, "params", key)] = entry.line
            lines[(*location, key)] = entry.line
    return payload, lines


def _line_of(location: tuple, lines: dict[tuple, int]) -> Optional[int]:
    for end in range(len(location), 0, -1):
        if location[:end] in lines:
            return lines[location[:end]]
    return None


def scenario_from_text(text: str, source: Optional[Path] = None) -> Scenario:
    """
    Parse and validate scenario text.

    Raises:
        ScenarioParseError: malformed text, with line and column
        ScenarioError: well-formed text with invalid or missing values
    """
    parsed = parse_scenario_text(text)
    payload, lines = _payload(parsed)
    if source is not None:
        payload["source"] = source
    try:
        scenario = Scenario.model_validate(payload)
    except ValidationError as e:
        messages = []
        for error in e.errors():
            location = tuple(error["loc"])
            line = _line_of(location, lines)
            where = ".".join(str(part) for part in location) or "scenario"
            prefix = f"line {line}: " if line is not None else ""
            messages.append(f"{prefix}{where}: {error['msg']}")
        raise ScenarioError("; ".join(messages)) from e
    _check_files(scenario)
    return scenario


def _check_files(scenario: Scenario) -> None:
    for group in (scenario.fields, scenario.maps):
        for label, spec in group.items():
            if spec.tag != "file":
                continue
            path = spec.params.get("path")
            if path is None:
                raise ScenarioError(f"{label}: file tag needs a path")
            resolved = Path(str(path))
            if not resolved.is_absolute():
                resolved = scenario.base_dir / resolved
            if not resolved.exists():
                raise ScenarioError(f"{label}: {resolved} does not exist")


def bundled_scenarios() -> list[str]:
    folder = files("divsurgeon") / "scenarios"
    return sorted(
        item.name.removesuffix(BUNDLED_SUFFIX)
        for item in folder.iterdir()
        if item.name.endswith(BUNDLED_SUFFIX)
    )


def load_scenario(config: Union[str, Path]) -> Scenario:
    """
    Load a scenario file, or a bundled scenario by name.

    Args:
        config: Path to a scenario file or the name of a bundled scenario

    Returns:
        Validated Scenario

    Raises:
        ScenarioError: no such file or bundled scenario
    """
    path = Path(config)
    if path.exists():
        return scenario_from_text(path.read_text(encoding="utf-8"), source=path)
    bundled = files("divsurgeon") / "scenarios" / f"{config}{BUNDLED_SUFFIX}"
    if bundled.is_file():
        return scenario_from_text(bundled.read_text(encoding="utf-8"))
    raise ScenarioError(
        f"No scenario file '{config}' and no bundled scenario of that name "
        f"(bundled: {', '.join(bundled_scenarios())})"
    )
