import enum
import logging
import math
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from src.core.config import MAX_ENUMERATION_SIZE, REJECTION_BUDGET
from src.core.errors import (
    SpaceTooConstrainedError,
    SpaceTooLargeError,
    SpaceValidationError,
    UnsupportedSpaceError,
)
from src.models.space import (
    INACTIVE,
    Configuration,
    ParamKind,
    ParameterSpace,
    ParameterSpec,
    native,
)

_SIGNIFICANT_DIGITS = 10


def default_configuration(space: ParameterSpace) -> Configuration:
    return Configuration(space, {spec.name: spec.default for spec in space.parameters})


def is_active(space: ParameterSpace, config: Mapping[str, Any], name: str) -> bool:
    """True iff every clause on `name` holds and all of its condition ancestors are active."""
    return space.is_active(config, name)


# --- Validation ---


class ViolationKind(str, enum.Enum):
    MISSING = "missing"
    OUT_OF_DOMAIN = "out-of-domain"
    NON_CANONICAL_INACTIVE = "non-canonical-inactive"
    FORBIDDEN = "forbidden"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    detail: str
    parameter: str | None = None


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def kinds(self) -> set[ViolationKind]:
        return {v.kind for v in self.violations}


def validate(space: ParameterSpace, values: Mapping[str, Any]) -> ValidationReport:
    report = ValidationReport()
    for name in space.names:
        if name not in values:
            report.violations.append(Violation(ViolationKind.MISSING, f"no value for '{name}'", name))
    if not report.ok:
        return report

    active = space.active_names(values)
    for spec in space.parameters:
        value = values[spec.name]
        if spec.name in active:
            if not spec.contains(value):
                report.violations.append(
                    Violation(ViolationKind.OUT_OF_DOMAIN, f"{value!r} outside the domain of '{spec.name}'", spec.name)
                )
        elif value is not INACTIVE:
            report.violations.append(
                Violation(
                    ViolationKind.NON_CANONICAL_INACTIVE,
                    f"inactive parameter '{spec.name}' carries {value!r}",
                    spec.name,
                )
            )
    for clause in space.matching_forbidden(values):
        report.violations.append(Violation(ViolationKind.FORBIDDEN, f"matches forbidden clause {clause.as_dict()}"))
    return report


# --- Sampling ---


def sample_value(spec: ParameterSpec, rng: np.random.Generator) -> Any:
    """One uniform draw from a parameter's domain (log-uniform when log-scaled)."""
    if spec.kind is ParamKind.CATEGORICAL:
        return spec.choices[int(rng.integers(len(spec.choices)))]
    if spec.kind is ParamKind.INTEGER:
        if spec.log_scale:
            draw = math.exp(rng.uniform(math.log(spec.lower), math.log(spec.upper + 1)))
            return min(int(math.floor(draw)), spec.upper)
        return int(rng.integers(spec.lower, spec.upper + 1))
    if spec.log_scale:
        value = math.exp(rng.uniform(math.log(spec.lower), math.log(spec.upper)))
    else:
        value = float(rng.uniform(spec.lower, spec.upper))
    return min(max(value, spec.lower), spec.upper)


def _sample_once(space: ParameterSpace, rng: np.random.Generator) -> dict[str, Any]:
    values: dict[str, Any] = {}
    active: set[str] = set()
    for name in space.topological_order:
        if all(c.parent in active and c.satisfied_by(values[c.parent]) for c in space.clauses_for(name)):
            active.add(name)
            values[name] = sample_value(space[name], rng)
        else:
            values[name] = INACTIVE
    return values


def sample_uniform(
    space: ParameterSpace, rng: np.random.Generator, max_attempts: int = REJECTION_BUDGET
) -> Configuration:
    """Uniform top-down sample; forbidden draws are rejected and redrawn."""
    for _ in range(max_attempts):
        values = _sample_once(space, rng)
        if not space.is_forbidden(values):
            return Configuration(space, values)
    raise SpaceTooConstrainedError(f"No non-forbidden configuration found in {max_attempts} attempts.")


# --- Discretization ---


def _round(value: float) -> float:
    return float(f"{value:.{_SIGNIFICANT_DIGITS}g}")


def _anchor_values(space: ParameterSpace, name: str) -> set:
    """Values a grid must keep so conditions and forbidden clauses still mean the same."""
    anchors = set()
    for clause in space.conditions:
        if clause.parent == name:
            anchors.update(clause.allowed_values)
    for clause in space.forbidden:
        for param, value in clause.assignments:
            if param == name:
                anchors.add(value)
    return anchors


def _grid(spec: ParameterSpec, grid_size: int, anchors: set) -> tuple:
    lower, upper = float(spec.lower), float(spec.upper)
    if spec.log_scale:
        points = np.geomspace(lower, upper, grid_size)
    else:
        points = np.linspace(lower, upper, grid_size)
    grid = [_round(float(p)) for p in points]
    grid[0], grid[-1] = lower, upper

    default = float(spec.default)
    if default not in grid:
        interior = range(1, len(grid) - 1)
        if interior:
            nearest = min(interior, key=lambda i: (abs(grid[i] - default), i))
            grid[nearest] = default
        else:
            grid.append(default)
    grid.extend(float(a) for a in anchors)

    if spec.kind is ParamKind.INTEGER:
        return tuple(sorted({int(round(v)) for v in grid}))
    return tuple(sorted(set(grid)))


def discretize(space: ParameterSpace, grid_size: int) -> ParameterSpace:
    """
    Replaces every numeric parameter by a categorical one over `grid_size` evenly spaced
    values (log-spaced when declared), endpoints and default included. Grid values stay
    numeric, so configurations of the discretized space share values with the original.
    """
    if grid_size < 2:
        raise SpaceValidationError(f"grid_size must be at least 2, got {grid_size}.")
    parameters = []
    for spec in space.parameters:
        if not spec.is_numeric:
            parameters.append(spec)
            continue
        choices = _grid(spec, grid_size, _anchor_values(space, spec.name))
        parameters.append(ParameterSpec(name=spec.name, kind=ParamKind.CATEGORICAL, choices=choices, default=spec.default))
    discrete = ParameterSpace(parameters, space.conditions, space.forbidden)
    logging.debug(f"Discretized space to {space_size(discrete)} configurations (upper bound).")
    return discrete


# --- Neighbourhoods and enumeration ---


def _require_discrete(space: ParameterSpace):
    if not space.is_discrete:
        raise UnsupportedSpaceError("Operation requires a discrete (categorical-only) space; discretize it first.")


def neighbors(space: ParameterSpace, config: Configuration) -> list[Configuration]:
    """One-exchange neighbourhood: change one active parameter; children re-enter at defaults."""
    _require_discrete(space)
    seen = {config}
    result = []
    for name, value in config.active_items():
        for candidate in space[name].choices:
            if candidate == value:
                continue
            neighbor = config.replace(**{name: candidate})
            if neighbor in seen or space.is_forbidden(neighbor):
                continue
            seen.add(neighbor)
            result.append(neighbor)
    return result


def space_size(space: ParameterSpace) -> int:
    """Product of domain sizes; an upper bound on the number of distinct configurations."""
    _require_discrete(space)
    return math.prod(len(spec.choices) for spec in space.parameters)


def enumerate_configurations(
    space: ParameterSpace, limit: int = MAX_ENUMERATION_SIZE
) -> Iterator[Configuration]:
    """Every distinct non-forbidden configuration of a discrete space, in a deterministic order."""
    _require_discrete(space)
    if space_size(space) > limit:
        raise SpaceTooLargeError(f"Space has up to {space_size(space)} configurations; the limit is {limit}.")
    yield from _enumerate(space, space.topological_order, {}, set())


def _enumerate(space, order, values, active) -> Iterator[Configuration]:
    if not order:
        if not space.is_forbidden(values):
            yield Configuration(space, values)
        return
    name, rest = order[0], order[1:]
    if not all(c.parent in active and c.satisfied_by(values[c.parent]) for c in space.clauses_for(name)):
        yield from _enumerate(space, rest, {**values, name: INACTIVE}, active)
        return
    for choice in space[name].choices:
        yield from _enumerate(space, rest, {**values, name: native(choice)}, active | {name})


def grid_points(space: ParameterSpace, per_dimension: int) -> Iterator[Configuration]:
    """Dense grid over a possibly numeric space, used for oracle scans of continuous surfaces."""
    discrete = discretize(space, per_dimension) if not space.is_discrete else space
    for config in enumerate_configurations(discrete):
        yield Configuration(space, config.as_dict())


__all__ = [
    "ValidationReport",
    "Violation",
    "ViolationKind",
    "default_configuration",
    "discretize",
    "enumerate_configurations",
    "grid_points",
    "is_active",
    "neighbors",
    "sample_uniform",
    "sample_value",
    "space_size",
    "validate",
]

