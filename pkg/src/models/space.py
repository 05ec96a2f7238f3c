import enum
import hashlib
import math
import re
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, Iterator

import numpy as np

from src.core.errors import SpaceValidationError

NAME_PATTERN = re.compile(r"[A-Za-z0-9_@:.\-]+")


class ParamKind(str, enum.Enum):
    CATEGORICAL = "categorical"
    INTEGER = "integer"
    REAL = "real"


class _Sentinel(enum.Enum):
    INACTIVE = "INACTIVE"

    def __repr__(self):
        return "INACTIVE"

    def __str__(self):
        return "INACTIVE"


# Value carried by parameters whose conditions are not satisfied.
INACTIVE = _Sentinel.INACTIVE


def native(value: Any) -> Any:
    """Converts numpy scalars to plain Python values so hashing and equality stay exact."""
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass(frozen=True)
class ParameterSpec:
    """
    One dimension of a configuration space.
    Categorical parameters carry `choices`; numeric ones carry `lower`/`upper`.
    """

    name: str
    kind: ParamKind
    default: Any
    choices: tuple = ()
    lower: float | None = None
    upper: float | None = None
    log_scale: bool = False

    def __post_init__(self):
        if not NAME_PATTERN.fullmatch(self.name or ""):
            raise SpaceValidationError(f"Invalid parameter name: {self.name!r}")
        object.__setattr__(self, "default", native(self.default))

        if self.kind is ParamKind.CATEGORICAL:
            choices = tuple(native(c) for c in self.choices)
            if not choices:
                raise SpaceValidationError(f"Categorical parameter '{self.name}' has an empty domain.")
            if len(set(choices)) != len(choices):
                raise SpaceValidationError(f"Categorical parameter '{self.name}' has duplicate values.")
            if self.log_scale:
                raise SpaceValidationError(f"Categorical parameter '{self.name}' cannot be log-scaled.")
            object.__setattr__(self, "choices", choices)
        else:
            if self.lower is None or self.upper is None:
                raise SpaceValidationError(f"Numeric parameter '{self.name}' needs bounds.")
            lower, upper = float(self.lower), float(self.upper)
            if not (math.isfinite(lower) and math.isfinite(upper)) or not lower < upper:
                raise SpaceValidationError(
                    f"Numeric parameter '{self.name}' needs finite bounds with lo < hi, got [{lower}, {upper}]."
                )
            if self.log_scale and lower <= 0:
                raise SpaceValidationError(f"Log-scaled parameter '{self.name}' needs lo > 0.")
            if self.kind is ParamKind.INTEGER:
                if not (lower.is_integer() and upper.is_integer()):
                    raise SpaceValidationError(f"Integer parameter '{self.name}' has non-integral bounds.")
                object.__setattr__(self, "lower", int(lower))
                object.__setattr__(self, "upper", int(upper))
                if isinstance(self.default, float) and self.default.is_integer():
                    object.__setattr__(self, "default", int(self.default))
            else:
                object.__setattr__(self, "lower", lower)
                object.__setattr__(self, "upper", upper)
                if isinstance(self.default, int) and not isinstance(self.default, bool):
                    object.__setattr__(self, "default", float(self.default))

        if not self.contains(self.default):
            raise SpaceValidationError(
                f"Default {self.default!r} of parameter '{self.name}' lies outside its domain."
            )

    @property
    def is_numeric(self) -> bool:
        return self.kind is not ParamKind.CATEGORICAL

    def contains(self, value: Any) -> bool:
        value = native(value)
        if value is INACTIVE:
            return False
        if self.kind is ParamKind.CATEGORICAL:
            return value in self.choices
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return False
        if not math.isfinite(value):
            return False
        if self.kind is ParamKind.INTEGER and not float(value).is_integer():
            return False
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class ConditionClause:
    """`child` is active only while `parent` takes one of `allowed_values`."""

    child: str
    parent: str
    allowed_values: tuple

    def __post_init__(self):
        if self.child == self.parent:
            raise SpaceValidationError(f"Parameter '{self.child}' cannot be conditional on itself.")
        values = tuple(native(v) for v in self.allowed_values)
        if not values:
            raise SpaceValidationError(f"Condition on '{self.child}' has no allowed values.")
        object.__setattr__(self, "allowed_values", values)

    def satisfied_by(self, parent_value: Any) -> bool:
        return parent_value is not INACTIVE and native(parent_value) in self.allowed_values


@dataclass(frozen=True)
class ForbiddenClause:
    """A partial assignment no configuration may match; stored sorted by name."""

    assignments: tuple

    def __post_init__(self):
        items = tuple(sorted(((name, native(v)) for name, v in self.assignments), key=lambda kv: kv[0]))
        if not items:
            raise SpaceValidationError("Forbidden clause must name at least one parameter.")
        if len({name for name, _ in items}) != len(items):
            raise SpaceValidationError("Forbidden clause names a parameter twice.")
        object.__setattr__(self, "assignments", items)

    @classmethod
    def of(cls, assignments: Mapping[str, Any]) -> "ForbiddenClause":
        return cls(tuple(assignments.items()))

    def as_dict(self) -> dict[str, Any]:
        return dict(self.assignments)

    def matches(self, values: Mapping[str, Any]) -> bool:
        """True iff every named parameter is assigned (active) to exactly the forbidden value."""
        for name, forbidden_value in self.assignments:
            value = values.get(name, INACTIVE)
            if value is INACTIVE or native(value) != forbidden_value:
                return False
        return True


class ParameterSpace:
    """
    An immutable configuration space: ordered parameters, conjunctive conditions
    and forbidden partial assignments. Safe to share between threads.
    """

    def __init__(self, parameters, conditions=(), forbidden=()):
        self.parameters: tuple[ParameterSpec, ...] = tuple(parameters)
        self.conditions: tuple[ConditionClause, ...] = tuple(conditions)
        self.forbidden: tuple[ForbiddenClause, ...] = tuple(forbidden)

        self._by_name: dict[str, ParameterSpec] = {}
        for spec in self.parameters:
            if spec.name in self._by_name:
                raise SpaceValidationError(f"Duplicate parameter name: '{spec.name}'")
            self._by_name[spec.name] = spec

        clauses: dict[str, list[ConditionClause]] = {name: [] for name in self._by_name}
        for clause in self.conditions:
            for name in (clause.child, clause.parent):
                if name not in self._by_name:
                    raise SpaceValidationError(f"Condition references unknown parameter '{name}'.")
            parent = self._by_name[clause.parent]
            for value in clause.allowed_values:
                if not parent.contains(value):
                    raise SpaceValidationError(
                        f"Condition on '{clause.child}' allows {value!r}, outside the domain of '{clause.parent}'."
                    )
            clauses[clause.child].append(clause)
        self._clauses = {name: tuple(items) for name, items in clauses.items()}
        self._order = self._topological_order()

        for clause in self.forbidden:
            for name, value in clause.assignments:
                if name not in self._by_name:
                    raise SpaceValidationError(f"Forbidden clause references unknown parameter '{name}'.")
                if not self._by_name[name].contains(value):
                    raise SpaceValidationError(
                        f"Forbidden clause value {value!r} lies outside the domain of '{name}'."
                    )

        defaults = self.canonicalize({spec.name: spec.default for spec in self.parameters})
        if self.is_forbidden(defaults):
            raise SpaceValidationError("The default configuration matches a forbidden clause.")

    def _topological_order(self) -> tuple[str, ...]:
        # Kahn's algorithm, stable with respect to declaration order.
        parents = {name: {c.parent for c in self._clauses[name]} for name in self._by_name}
        remaining = [spec.name for spec in self.parameters]
        placed: set[str] = set()
        order: list[str] = []
        while remaining:
            ready = [name for name in remaining if parents[name] <= placed]
            if not ready:
                raise SpaceValidationError(f"Cyclic conditions among: {', '.join(remaining)}")
            for name in ready:
                order.append(name)
                placed.add(name)
            remaining = [name for name in remaining if name not in placed]
        return tuple(order)

    # --- Structural queries ---

    def __getitem__(self, name: str) -> ParameterSpec:
        try:
            return self._by_name[name]
        except KeyError:
            raise SpaceValidationError(f"Unknown parameter: '{name}'") from None

    def __contains__(self, name: object) -> bool:
        return name in self._by_name

    def __iter__(self) -> Iterator[ParameterSpec]:
        return iter(self.parameters)

    def __len__(self) -> int:
        return len(self.parameters)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(spec.name for spec in self.parameters)

    @property
    def topological_order(self) -> tuple[str, ...]:
        return self._order

    @property
    def is_discrete(self) -> bool:
        return all(spec.kind is ParamKind.CATEGORICAL for spec in self.parameters)

    def clauses_for(self, name: str) -> tuple[ConditionClause, ...]:
        self[name]
        return self._clauses[name]

    def parents_of(self, name: str) -> tuple[str, ...]:
        return tuple(dict.fromkeys(c.parent for c in self.clauses_for(name)))

    def is_conditional(self, name: str) -> bool:
        return bool(self.clauses_for(name))

    # --- Activity and canonical form ---

    def active_names(self, values: Mapping[str, Any]) -> set[str]:
        active: set[str] = set()
        for name in self._order:
            if all(
                c.parent in active and c.satisfied_by(values.get(c.parent, INACTIVE))
                for c in self._clauses[name]
            ):
                active.add(name)
        return active

    def is_active(self, values: Mapping[str, Any], name: str) -> bool:
        self[name]
        return name in self.active_names(values)

    def canonicalize(self, values: Mapping[str, Any], fill_defaults: bool = True) -> dict[str, Any]:
        """
        Returns the canonical value map: inactive parameters become INACTIVE and,
        with `fill_defaults`, active parameters without a value re-enter at their default.
        """
        resolved: dict[str, Any] = {}
        active: set[str] = set()
        for name in self._order:
            is_active = all(
                c.parent in active and c.satisfied_by(resolved[c.parent]) for c in self._clauses[name]
            )
            if not is_active:
                resolved[name] = INACTIVE
                continue
            active.add(name)
            value = native(values.get(name, INACTIVE))
            if value is INACTIVE and fill_defaults:
                value = self._by_name[name].default
            resolved[name] = value
        return {spec.name: resolved[spec.name] for spec in self.parameters}

    def is_forbidden(self, values: Mapping[str, Any]) -> bool:
        return any(clause.matches(values) for clause in self.forbidden)

    def matching_forbidden(self, values: Mapping[str, Any]) -> list[ForbiddenClause]:
        return [clause for clause in self.forbidden if clause.matches(values)]

    def condition_depth(self) -> int:
        """Longest chain of parameters linked by conditions, counted in parameters."""
        depth: dict[str, int] = {}
        for name in self._order:
            parents = self.parents_of(name)
            depth[name] = 1 + max((depth[p] for p in parents), default=0)
        return max(depth.values(), default=0)

    # --- Equality ---

    def _identity(self):
        return (self.parameters, frozenset(self.conditions), frozenset(self.forbidden))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParameterSpace):
            return NotImplemented
        return self._identity() == other._identity()

    def __hash__(self) -> int:
        return hash(self._identity())

    def __repr__(self) -> str:
        return (
            f"<ParameterSpace(params={len(self.parameters)}, conditions={len(self.conditions)}, "
            f"forbidden={len(self.forbidden)})>"
        )


class Configuration(Mapping):
    """
    A point of a ParameterSpace in canonical form. Equality and hashing use the
    canonical values only, so inactive leftovers never distinguish two configurations.
    """

    __slots__ = ("space", "_values", "_key", "_hash")

    def __init__(self, space: ParameterSpace, values: Mapping[str, Any]):
        canonical = space.canonicalize(values)
        for name, value in canonical.items():
            if value is not INACTIVE and not space[name].contains(value):
                raise SpaceValidationError(f"Value {value!r} lies outside the domain of '{name}'.")
        self.space = space
        self._values = canonical
        self._key = tuple(canonical.items())
        self._hash = hash(self._key)

    def __getitem__(self, name: str) -> Any:
        return self._values[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Configuration):
            return self._key == other._key
        return NotImplemented

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{name}={value!r}" for name, value in self._key)
        return f"Configuration({body})"

    @property
    def config_id(self) -> str:
        digest = hashlib.sha1(repr(self._key).encode("utf-8")).hexdigest()
        return digest[:12]

    def as_dict(self) -> dict[str, Any]:
        return dict(self._values)

    def active_items(self) -> list[tuple[str, Any]]:
        return [(name, value) for name, value in self._key if value is not INACTIVE]

    def sort_key(self) -> tuple[str, ...]:
        """Lexicographic key used for deterministic tie-breaking."""
        return tuple(str(value) for _, value in self._key)

    def replace(self, **changes: Any) -> "Configuration":
        """Copy with some values changed; newly activated children re-enter at their defaults."""
        return Configuration(self.space, {**self._values, **changes})
