"""Minimal JSON-Schema-style validation for the hub's form schemas.

Supports the subset the shipped schemas use: type, required, properties,
additionalProperties (boolean), items, enum, minLength, minItems, minimum.
Violations come back as "path: message" strings so the API and the portal
can surface them per field.
"""

from __future__ import annotations

from typing import Any

_TYPES = {
    "object": dict,
    "array": list,
    "string": str,
    "boolean": bool,
    "integer": int,
    "number": (int, float),
}


def validate(schema: dict, value: Any, path: str = "$") -> list[str]:
    violations: list[str] = []
    expected = schema.get("type")
    if expected is not None:
        py = _TYPES.get(expected)
        ok = isinstance(value, py) if py else True
        if expected in ("integer", "number") and isinstance(value, bool):
            ok = False
        if not ok:
            violations.append(f"{path}: expected {expected}")
            return violations

    if "enum" in schema and value not in schema["enum"]:
        violations.append(f"{path}: must be one of {schema['enum']}")

    if isinstance(value, str) and "minLength" in schema and len(value) < schema["minLength"]:
        violations.append(f"{path}: shorter than {schema['minLength']}")

    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if "minimum" in schema and value < schema["minimum"]:
            violations.append(f"{path}: below minimum {schema['minimum']}")

    if isinstance(value, dict):
        for name in schema.get("required", []):
            if name not in value:
                violations.append(f"{path}.{name}: required field missing")
        props = schema.get("properties", {})
        for name, sub in props.items():
            if name in value:
                violations.extend(validate(sub, value[name], f"{path}.{name}"))
        if schema.get("additionalProperties") is False:
            for name in value:
                if name not in props:
                    violations.append(f"{path}.{name}: unexpected field")

    if isinstance(value, list):
        if "minItems" in schema and len(value) < schema["minItems"]:
            violations.append(f"{path}: fewer than {schema['minItems']} items")
        items = schema.get("items")
        if items:
            for i, item in enumerate(value):
                violations.extend(validate(items, item, f"{path}[{i}]"))

    return violations
