"""The Frictionless-style data-dictionary model.

A dictionary is a versioned list of variable descriptors. Serialization is
deterministic: fixed key order, two-space indent, trailing newline, so the
same input always produces a byte-identical document.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

SCHEMA_VERSION = "1.0"

VARIABLE_TYPES = ("integer", "number", "string", "boolean", "date", "datetime")

NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

SOURCE_KINDS = ("csv_inferred", "dictionary_csv", "redcap")


def normalize_name(raw: str) -> str:
    """Header text to a safe variable name: trim, squash separators to
    underscores, prefix names that would start with a digit."""
    name = raw.strip()
    name = re.sub(r"[^A-Za-z0-9_]+", "_", name)
    name = name.strip("_") or "_"
    if name[0].isdigit():
        name = "_" + name
    return name


@dataclass
class VariableDescriptor:
    name: str
    title: Optional[str] = None
    description: Optional[str] = None
    type: str = "string"
    constraints: dict = field(default_factory=dict)
    missing_values: list[str] = field(default_factory=list)
    cde_ref: Optional[str] = None
    custom: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict[str, Any] = {"name": self.name}
        if self.title is not None:
            out["title"] = self.title
        if self.description is not None:
            out["description"] = self.description
        out["type"] = self.type
        if self.constraints:
            constraints = {}
            for key in ("enum", "required", "min", "max"):
                if key in self.constraints:
                    constraints[key] = self.constraints[key]
            out["constraints"] = constraints
        if self.missing_values:
            out["missing_values"] = list(self.missing_values)
        if self.cde_ref is not None:
            out["cde_ref"] = self.cde_ref
        if self.custom:
            out["custom"] = dict(sorted(self.custom.items()))
        return out

    @classmethod
    def from_json(cls, data: dict) -> "VariableDescriptor":
        return cls(
            name=data["name"],
            title=data.get("title"),
            description=data.get("description"),
            type=data.get("type", "string"),
            constraints=dict(data.get("constraints", {})),
            missing_values=list(data.get("missing_values", [])),
            cde_ref=data.get("cde_ref"),
            custom=dict(data.get("custom", {})),
        )


@dataclass
class DataDictionary:
    schema_version: str = SCHEMA_VERSION
    variables: list[VariableDescriptor] = field(default_factory=list)
    source_kind: str = "csv_inferred"
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "source_kind": self.source_kind,
            "provenance": dict(sorted(self.provenance.items())),
            "variables": [v.to_json() for v in self.variables],
        }

    @classmethod
    def from_json(cls, data: dict) -> "DataDictionary":
        return cls(
            schema_version=data.get("schema_version", SCHEMA_VERSION),
            variables=[VariableDescriptor.from_json(v) for v in data.get("variables", [])],
            source_kind=data.get("source_kind", "csv_inferred"),
            provenance=dict(data.get("provenance", {})),
        )


def dictionary_to_json_text(dictionary: DataDictionary) -> str:
    return json.dumps(dictionary.to_json(), indent=2, ensure_ascii=False) + "\n"


def dictionary_from_json(data: dict | str) -> DataDictionary:
    if isinstance(data, str):
        data = json.loads(data)
    return DataDictionary.from_json(data)


def validate_vlmd(dictionary: DataDictionary) -> list[str]:
    """Empty list iff schema-conformant. Violations name the variable."""
    violations: list[str] = []
    if not isinstance(dictionary.schema_version, str) or not dictionary.schema_version:
        violations.append("schema_version: required")
    if dictionary.source_kind not in SOURCE_KINDS:
        violations.append(f"source_kind: must be one of {SOURCE_KINDS}")
    if not dictionary.variables:
        violations.append("variables: dictionary is empty")
    seen: set[str] = set()
    for v in dictionary.variables:
        where = f"variables.{v.name or '?'}"
        if not NAME_RE.match(v.name or ""):
            violations.append(f"{where}: bad name {v.name!r}")
        if v.name in seen:
            violations.append(f"{where}: duplicate name")
        seen.add(v.name)
        if v.type not in VARIABLE_TYPES:
            violations.append(f"{where}: unknown type {v.type!r}")
        enum = v.constraints.get("enum")
        if enum is not None:
            if not isinstance(enum, list) or not enum:
                violations.append(f"{where}: enum must be a nonempty list")
            elif len(set(map(str, enum))) != len(enum):
                violations.append(f"{where}: enum values must be distinct")
        lo, hi = v.constraints.get("min"), v.constraints.get("max")
        if lo is not None and not isinstance(lo, (int, float)):
            violations.append(f"{where}: min must be numeric")
        if hi is not None and not isinstance(hi, (int, float)):
            violations.append(f"{where}: max must be numeric")
        if (isinstance(lo, (int, float)) and isinstance(hi, (int, float)) and lo > hi):
            violations.append(f"{where}: min {lo} exceeds max {hi}")
        required = v.constraints.get("required")
        if required is not None and not isinstance(required, bool):
            violations.append(f"{where}: required must be boolean")
        if not all(isinstance(m, str) for m in v.missing_values):
            violations.append(f"{where}: missing_values must be strings")
        if v.cde_ref is not None and not isinstance(v.cde_ref, str):
            violations.append(f"{where}: cde_ref must be a string")
    return violations


_CDE_NAMES: Optional[dict[str, str]] = None


def cde_lookup(name: str) -> Optional[str]:
    """Exact case-insensitive match against the bundled CDE name list."""
    global _CDE_NAMES
    if _CDE_NAMES is None:
        path = resources.files("meshhub") / "vlmd" / "data" / "cde_names.json"
        raw = json.loads(path.read_text(encoding="utf-8"))
        _CDE_NAMES = {k.lower(): v for k, v in raw.items()}
    return _CDE_NAMES.get(name.lower())
