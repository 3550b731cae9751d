"""Extractors: CSV datasets, data-dictionary CSVs, REDCap exports.

Type inference over a CSV column tries each type in a fixed precedence
(boolean, integer, number, date, datetime, string) and keeps the first one
under which every sampled non-missing value parses. Low-cardinality string
columns get an enum constraint.
"""

from __future__ import annotations

import csv
import hashlib
import math
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Optional

from ..errors import (
    DuplicateHeader,
    DuplicateVariable,
    EmptyFile,
    MissingNameColumn,
    RaggedRows,
    UnrecognizedHeader,
)
from .model import (
    DataDictionary,
    VariableDescriptor,
    cde_lookup,
    normalize_name,
)

DEFAULT_MISSING_TOKENS = ["", "NA", "N/A", "."]
DEFAULT_ENUM_THRESHOLD = 10
DEFAULT_SAMPLE_LIMIT = 10_000

TYPE_PRECEDENCE = ("boolean", "integer", "number", "date", "datetime", "string")

_BOOLEAN_TOKENS = {"0", "1", "true", "false"}
_INTEGER_RE = re.compile(r"^[+-]?\d+$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_DATETIME_RE = re.compile(
    r"^\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:\d{2})?$")


@dataclass
class ExtractOptions:
    enum_threshold: int = DEFAULT_ENUM_THRESHOLD
    missing_tokens: list[str] = field(default_factory=lambda: list(DEFAULT_MISSING_TOKENS))
    sample_limit: int = DEFAULT_SAMPLE_LIMIT


def value_parses_as(value: str, vtype: str) -> bool:
    """Per-cell classifier; the column rule is 'all sampled cells parse'."""
    if vtype == "string":
        return True
    if vtype == "boolean":
        return value.lower() in _BOOLEAN_TOKENS
    if vtype == "integer":
        return bool(_INTEGER_RE.match(value))
    if vtype == "number":
        if not re.match(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$", value):
            return False
        try:
            return math.isfinite(float(value))
        except ValueError:
            return False
    if vtype == "date":
        if not _DATE_RE.match(value):
            return False
        try:
            datetime.strptime(value, "%Y-%m-%d")
            return True
        except ValueError:
            return False
    if vtype == "datetime":
        if not _DATETIME_RE.match(value):
            return False
        try:
            datetime.fromisoformat(value.replace("Z", "+00:00"))
            return True
        except ValueError:
            return False
    raise ValueError(f"unknown type {vtype!r}")


def infer_column_type(values: list[str]) -> str:
    for vtype in TYPE_PRECEDENCE:
        if all(value_parses_as(v, vtype) for v in values):
            return vtype
    return "string"


def _file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open("r", encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise EmptyFile(str(path))
    header, data = rows[0], rows[1:]
    width = len(header)
    for i, row in enumerate(data, start=2):
        if len(row) != width:
            raise RaggedRows(f"{path}: line {i} has {len(row)} cells, header has {width}")
    return header, data


def extract_from_csv(path: str | Path, options: Optional[ExtractOptions] = None) -> DataDictionary:
    path = Path(path)
    opts = options or ExtractOptions()
    header, data = _read_csv(path)
    names = [normalize_name(h) for h in header]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise DuplicateHeader(f"{path}: duplicate column names {sorted(dupes)}")

    sample = data[:opts.sample_limit]
    variables = []
    for col, name in enumerate(names):
        raw = [row[col] for row in sample]
        present = [v for v in raw if v not in opts.missing_tokens]
        seen_missing = [t for t in opts.missing_tokens if t in raw]
        vtype = infer_column_type(present) if present else "string"
        constraints: dict = {}
        if vtype == "string" and present:
            distinct = sorted(set(present))
            if len(distinct) <= opts.enum_threshold:
                constraints["enum"] = distinct
        variables.append(VariableDescriptor(
            name=name,
            title=header[col].strip() if header[col].strip() != name else None,
            type=vtype,
            constraints=constraints,
            missing_values=seen_missing,
            cde_ref=cde_lookup(name),
        ))
    return DataDictionary(
        variables=variables,
        source_kind="csv_inferred",
        provenance={"input_sha256": _file_digest(path)},
    )


# -- existing dictionary CSVs ------------------------------------------------

# columns an extraction map may target
_DICT_FIELDS = ("name", "title", "description", "type", "cde_ref",
                "min", "max", "required", "enum", "missing_values")


def extract_from_dictionary(path: str | Path, column_map: dict[str, str]) -> DataDictionary:
    """``column_map`` maps dictionary-CSV column names to descriptor fields.
    Unmapped columns are preserved verbatim under each variable's custom
    extension subtree."""
    path = Path(path)
    header, data = _read_csv(path)
    targets = {col: fld for col, fld in column_map.items()}
    unknown = [f for f in targets.values() if f not in _DICT_FIELDS]
    if unknown:
        raise MissingNameColumn(f"unknown mapping targets {unknown}")
    if "name" not in targets.values():
        raise MissingNameColumn("column_map must map some column to 'name'")
    name_col = next(c for c, f in targets.items() if f == "name")
    if name_col not in header:
        raise MissingNameColumn(f"{name_col!r} not in header {header}")
    positions = {col: header.index(col) for col in targets if col in header}
    unmapped = [(i, h) for i, h in enumerate(header) if h not in targets]

    variables = []
    seen: dict[str, int] = {}
    for line, row in enumerate(data, start=2):
        fields: dict = {}
        for col, pos in positions.items():
            fields[targets[col]] = row[pos]
        raw_name = fields.pop("name", "")
        name = normalize_name(raw_name)
        if name in seen:
            raise DuplicateVariable(
                f"{path}: variable {name!r} on line {line} already defined on line {seen[name]}")
        seen[name] = line
        descriptor = VariableDescriptor(name=name, cde_ref=cde_lookup(name))
        if fields.get("title"):
            descriptor.title = fields["title"]
        if fields.get("description"):
            descriptor.description = fields["description"]
        vtype = (fields.get("type") or "").strip().lower()
        descriptor.type = vtype if vtype in TYPE_PRECEDENCE else "string"
        if fields.get("cde_ref"):
            descriptor.cde_ref = fields["cde_ref"]
        for bound in ("min", "max"):
            raw = (fields.get(bound) or "").strip()
            if raw:
                try:
                    descriptor.constraints[bound] = float(raw) if "." in raw else int(raw)
                except ValueError:
                    pass
        if (fields.get("required") or "").strip().lower() in ("1", "true", "yes"):
            descriptor.constraints["required"] = True
        raw_enum = (fields.get("enum") or "").strip()
        if raw_enum:
            descriptor.constraints["enum"] = sorted(
                {v.strip() for v in raw_enum.split("|") if v.strip()})
        raw_missing = (fields.get("missing_values") or "").strip()
        if raw_missing:
            descriptor.missing_values = [v.strip() for v in raw_missing.split("|")]
        custom = {h: row[i] for i, h in unmapped if row[i] != ""}
        if custom:
            descriptor.custom = custom
        variables.append(descriptor)
    return DataDictionary(
        variables=variables,
        source_kind="dictionary_csv",
        provenance={"input_sha256": _file_digest(path)},
    )


# -- REDCap exports -------------------------------------------------------------

REDCAP_HEADER = ["field_name", "form_name", "field_type", "field_label",
                 "choices", "text_validation"]

_REDCAP_VALIDATION_TYPES = {"integer": "integer", "number": "number", "date_ymd": "date"}
_REDCAP_CHOICE_TYPES = {"radio", "dropdown", "checkbox"}


def _parse_choices(raw: str) -> list[tuple[str, str]]:
    pairs = []
    for part in raw.split("|"):
        part = part.strip()
        if not part:
            continue
        code, _, label = part.partition(",")
        pairs.append((code.strip(), label.strip()))
    return pairs


def extract_from_redcap(path: str | Path) -> DataDictionary:
    path = Path(path)
    header, data = _read_csv(path)
    if header != REDCAP_HEADER:
        raise UnrecognizedHeader(
            f"{path}: expected REDCap header {REDCAP_HEADER}, got {header}")
    variables = []
    seen: dict[str, int] = {}
    for line, row in enumerate(data, start=2):
        field_name, form_name, field_type, field_label, choices, validation = row
        name = normalize_name(field_name)
        if name in seen:
            raise DuplicateVariable(
                f"{path}: field {name!r} on line {line} already defined on line {seen[name]}")
        seen[name] = line
        descriptor = VariableDescriptor(
            name=name,
            title=field_label or None,
            cde_ref=cde_lookup(name),
        )
        if form_name:
            descriptor.custom["form_name"] = form_name
        ftype = field_type.strip().lower()
        if ftype in _REDCAP_CHOICE_TYPES:
            pairs = _parse_choices(choices)
            descriptor.type = "string"
            if pairs:
                descriptor.constraints["enum"] = [code for code, _ in pairs]
                labeled = "; ".join(f"{code}={label}" for code, label in pairs if label)
                if labeled:
                    descriptor.description = labeled
        elif ftype == "yesno":
            descriptor.type = "boolean"
        elif ftype == "text":
            descriptor.type = _REDCAP_VALIDATION_TYPES.get(
                validation.strip().lower(), "string")
        else:  # notes, calc, file, descriptive ...
            descriptor.type = "string"
        variables.append(descriptor)
    return DataDictionary(
        variables=variables,
        source_kind="redcap",
        provenance={"input_sha256": _file_digest(path)},
    )
