"""Tree values and dot-paths.

A "tree" is any JSON-representable value: dicts with string keys, lists,
strings, ints, floats, bools, None. Dot-paths address positions inside a
tree: segments separated by ``.``, list indices as ``[n]``. No wildcards.
"""

from __future__ import annotations

import json
import math
import re
from typing import Any, Iterator

from .errors import InvalidQuery, MalformedPayload

_SEGMENT_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)((?:\[\d+\])*)$")
_INDEX_RE = re.compile(r"\[(\d+)\]")

# Parsed path: tuple of str (key) and int (index) steps.
PathSteps = tuple


def validate_tree(value: Any, *, max_bytes: int | None = None) -> None:
    """Reject values that cannot round-trip through JSON byte-identically."""
    _check_node(value)
    if max_bytes is not None:
        size = len(canonical_json(value).encode("utf-8"))
        if size > max_bytes:
            raise MalformedPayload(f"tree serializes to {size} bytes, cap is {max_bytes}")


def _check_node(value: Any) -> None:
    if value is None or isinstance(value, (str, bool, int)):
        return
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise MalformedPayload("non-finite numbers are not representable")
        return
    if isinstance(value, list):
        for item in value:
            _check_node(item)
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise MalformedPayload(f"non-string key {key!r}")
            _check_node(item)
        return
    raise MalformedPayload(f"unsupported node type {type(value).__name__}")


def canonical_json(value: Any) -> str:
    """Sorted-key, no-whitespace serialization used for diffing and hashing."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def parse_path(path: str) -> PathSteps:
    """Parse ``a.b[0].c`` into key and index steps.

    Raises InvalidQuery on empty paths, bad characters, or stray brackets.
    """
    if not isinstance(path, str) or not path:
        raise InvalidQuery("empty path")
    steps: list = []
    for segment in path.split("."):
        m = _SEGMENT_RE.match(segment)
        if not m:
            raise InvalidQuery(f"bad path segment {segment!r} in {path!r}")
        steps.append(m.group(1))
        for idx in _INDEX_RE.findall(m.group(2)):
            steps.append(int(idx))
    return tuple(steps)


def resolve_path(tree: Any, steps: PathSteps) -> tuple[bool, Any]:
    """Walk a parsed path. Returns (found, value); value is None when not found."""
    node = tree
    for step in steps:
        if isinstance(step, str):
            if not isinstance(node, dict) or step not in node:
                return False, None
            node = node[step]
        else:
            if not isinstance(node, list) or step >= len(node):
                return False, None
            node = node[step]
    return True, node


def set_path(tree: dict, steps: PathSteps, value: Any) -> None:
    """Set a key-only path, creating intermediate dicts. Index steps rejected."""
    if not steps or any(not isinstance(s, str) for s in steps):
        raise InvalidQuery("target paths must be non-empty key paths")
    node = tree
    for step in steps[:-1]:
        child = node.get(step)
        if not isinstance(child, dict):
            child = {}
            node[step] = child
        node = child
    node[steps[-1]] = value


def iter_string_leaves(tree: Any) -> Iterator[str]:
    """Every string value anywhere in the tree, in document order."""
    if isinstance(tree, str):
        yield tree
    elif isinstance(tree, dict):
        for item in tree.values():
            yield from iter_string_leaves(item)
    elif isinstance(tree, list):
        for item in tree:
            yield from iter_string_leaves(item)
