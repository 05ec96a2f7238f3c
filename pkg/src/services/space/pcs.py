"""
Reader and writer for the line-based PCS parameter-space format:

    name {v1,v2,...} [default]           categorical
    name {1,10,0.5} [10] n               categorical over numbers
    name [lo,hi] [default] i             integer   ("il" for log scale)
    name [lo,hi] [default]               real      ("l" for log scale)
    child | parent in {v1,v2,...}        condition
    {name1=v1, name2=v2, ...}            forbidden combination

'#' starts a comment; blank lines are ignored.
"""
import logging
import re
from typing import Any

from src.core.errors import PcsSyntaxError, SpaceValidationError
from src.models.space import (
    ConditionClause,
    Configuration,
    ForbiddenClause,
    ParamKind,
    ParameterSpace,
    ParameterSpec,
)

_NAME = r"[A-Za-z0-9_@:.\-]+"
_CATEGORICAL = re.compile(rf"^({_NAME})\s*\{{(.*)\}}\s*\[([^\]]*)\]\s*([A-Za-z]*)$")
_FLOAT_LITERAL = re.compile(r"[.eE]|inf|nan")
_NUMERIC = re.compile(rf"^({_NAME})\s*\[([^,\]]+),([^\]]+)\]\s*\[([^\]]+)\]\s*([A-Za-z]*)$")
_CONDITION = re.compile(rf"^({_NAME})\s*\|\s*({_NAME})\s+in\s*\{{(.*)\}}$")
_FORBIDDEN = re.compile(r"^\{(.*)\}$")
_FLAGS = {"": (False, False), "i": (True, False), "l": (False, True), "il": (True, True), "li": (True, True)}


def _split_values(body: str, line_no: int) -> list[str]:
    values = [token.strip() for token in body.split(",")]
    if not values or any(not v for v in values):
        raise PcsSyntaxError("empty value in list", line_no)
    return values


def _parse_number(token: str, line_no: int) -> float:
    try:
        return float(token.strip())
    except ValueError:
        raise PcsSyntaxError(f"expected a number, got {token.strip()!r}", line_no) from None


def _numeric_choice(token: str, line_no: int) -> int | float:
    number = _parse_number(token, line_no)
    if _FLOAT_LITERAL.search(token):
        return number
    if not number.is_integer():
        raise PcsSyntaxError(f"expected an integer literal, got {token!r}", line_no)
    return int(number)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _coerce(spec: ParameterSpec, token: str, line_no: int) -> Any:
    """Types a textual value according to the parameter it belongs to."""
    if spec.kind is ParamKind.CATEGORICAL:
        by_text = {format_value(choice): choice for choice in spec.choices}
        if token in by_text or not all(_is_number(c) for c in spec.choices):
            return by_text.get(token, token)
        return _numeric_choice(token, line_no)
    number = _parse_number(token, line_no)
    if spec.kind is ParamKind.INTEGER:
        if not number.is_integer():
            raise PcsSyntaxError(f"'{spec.name}' is integer-valued, got {token!r}", line_no)
        return int(number)
    return number


def _parse_parameter(line: str, line_no: int) -> ParameterSpec | None:
    match = _CATEGORICAL.match(line)
    if match:
        name, body, default, flags = match.groups()
        if flags not in ("", "n"):
            raise PcsSyntaxError(f"unknown categorical flags {flags!r}", line_no)
        choices: list[Any] = _split_values(body, line_no)
        default = default.strip()
        if flags == "n":
            choices = [_numeric_choice(token, line_no) for token in choices]
            default = _numeric_choice(default, line_no)
        return ParameterSpec(name=name, kind=ParamKind.CATEGORICAL, choices=tuple(choices), default=default)
    match = _NUMERIC.match(line)
    if match:
        name, lo, hi, default, flags = match.groups()
        if flags not in _FLAGS:
            raise PcsSyntaxError(f"unknown parameter flags {flags!r}", line_no)
        is_integer, log_scale = _FLAGS[flags]
        lower, upper = _parse_number(lo, line_no), _parse_number(hi, line_no)
        value = _parse_number(default, line_no)
        kind = ParamKind.INTEGER if is_integer else ParamKind.REAL
        if is_integer:
            if not value.is_integer():
                raise PcsSyntaxError(f"integer parameter '{name}' has a non-integral default", line_no)
            value = int(value)
        return ParameterSpec(
            name=name, kind=kind, lower=lower, upper=upper, default=value, log_scale=log_scale
        )
    return None


def parse_pcs(text: str) -> ParameterSpace:
    """Parses PCS text into a validated ParameterSpace."""
    parameters: dict[str, ParameterSpec] = {}
    raw_conditions: list[tuple[int, str, str, str]] = []
    raw_forbidden: list[tuple[int, str]] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _CONDITION.match(line)
        if match:
            raw_conditions.append((line_no, *match.groups()))
            continue
        match = _FORBIDDEN.match(line)
        if match:
            raw_forbidden.append((line_no, match.group(1)))
            continue
        try:
            spec = _parse_parameter(line, line_no)
        except SpaceValidationError as e:
            raise PcsSyntaxError(str(e), line_no) from e
        if spec is None:
            raise PcsSyntaxError(f"unrecognised line: {line!r}", line_no)
        if spec.name in parameters:
            raise PcsSyntaxError(f"duplicate parameter '{spec.name}'", line_no)
        parameters[spec.name] = spec

    conditions = []
    for line_no, child, parent, body in raw_conditions:
        for name in (child, parent):
            if name not in parameters:
                raise PcsSyntaxError(f"condition references unknown parameter '{name}'", line_no)
        parent_spec = parameters[parent]
        values = tuple(_coerce(parent_spec, token, line_no) for token in _split_values(body, line_no))
        try:
            conditions.append(ConditionClause(child=child, parent=parent, allowed_values=values))
        except SpaceValidationError as e:
            raise PcsSyntaxError(str(e), line_no) from e

    forbidden = []
    for line_no, body in raw_forbidden:
        assignments = {}
        for item in _split_values(body, line_no):
            if "=" not in item:
                raise PcsSyntaxError(f"expected name=value in forbidden clause, got {item!r}", line_no)
            name, value = (part.strip() for part in item.split("=", 1))
            if name not in parameters:
                raise PcsSyntaxError(f"forbidden clause references unknown parameter '{name}'", line_no)
            assignments[name] = _coerce(parameters[name], value, line_no)
        try:
            forbidden.append(ForbiddenClause.of(assignments))
        except SpaceValidationError as e:
            raise PcsSyntaxError(str(e), line_no) from e

    try:
        space = ParameterSpace(parameters.values(), conditions, forbidden)
    except SpaceValidationError as e:
        # Structural errors (cycles, bad condition values) point at the first condition line.
        line_no = raw_conditions[0][0] if raw_conditions else None
        raise PcsSyntaxError(str(e), line_no) from e
    logging.debug(f"Parsed PCS space with {len(space)} parameters.")
    return space


def format_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _format_parameter(spec: ParameterSpec) -> str:
    if spec.kind is ParamKind.CATEGORICAL:
        choices = ",".join(format_value(c) for c in spec.choices)
        line = f"{spec.name} {{{choices}}} [{format_value(spec.default)}]"
        return f"{line} n" if all(_is_number(c) for c in spec.choices) else line
    flags = ("i" if spec.kind is ParamKind.INTEGER else "") + ("l" if spec.log_scale else "")
    line = f"{spec.name} [{format_value(spec.lower)},{format_value(spec.upper)}] [{format_value(spec.default)}]"
    return f"{line} {flags}" if flags else line


def serialize_pcs(space: ParameterSpace) -> str:
    """Writes a space back to PCS text; parse_pcs(serialize_pcs(s)) == s."""
    lines = [_format_parameter(spec) for spec in space.parameters]
    if space.conditions:
        lines.append("")
        lines.append("# conditions")
        for clause in space.conditions:
            values = ",".join(format_value(v) for v in clause.allowed_values)
            lines.append(f"{clause.child} | {clause.parent} in {{{values}}}")
    if space.forbidden:
        lines.append("")
        lines.append("# forbidden")
        for clause in space.forbidden:
            body = ", ".join(f"{name}={format_value(value)}" for name, value in clause.assignments)
            lines.append(f"{{{body}}}")
    return "\n".join(lines) + "\n"


def parse_configuration(space: ParameterSpace, assignments: dict[str, str]) -> Configuration:
    """
    Builds a configuration from textual `name -> value` pairs, e.g. a wrapper's
    `-name value` arguments. Unassigned active parameters take their defaults.
    """
    values: dict[str, Any] = {}
    for name, token in assignments.items():
        if name not in space:
            raise SpaceValidationError(f"Unknown parameter '{name}'.")
        spec = space[name]
        if spec.kind is ParamKind.CATEGORICAL:
            by_text = {format_value(choice): choice for choice in spec.choices}
            if token not in by_text:
                raise SpaceValidationError(f"Value {token!r} lies outside the domain of '{name}'.")
            values[name] = by_text[token]
        else:
            try:
                values[name] = _coerce(spec, token, None)
            except PcsSyntaxError as e:
                raise SpaceValidationError(str(e)) from e
    config = Configuration(space, values)
    if space.is_forbidden(config):
        raise SpaceValidationError(f"Configuration {config.as_dict()} matches a forbidden clause.")
    return config
