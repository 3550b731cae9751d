"""HTTP client side of dictionary attachment."""

from __future__ import annotations

from ..errors import SchemaViolation
from ..httpkit import fetch_json
from .model import DataDictionary, validate_vlmd


def attach_to_study(api_base: str, token: str, guid: str, dictionary: DataDictionary) -> dict:
    """Validate locally, then attach through the hub API. The server
    re-validates; client validation only saves a round trip."""
    violations = validate_vlmd(dictionary)
    if violations:
        raise SchemaViolation(violations)
    url = f"{api_base.rstrip('/')}/studies/{guid}/vlmd"
    return fetch_json("POST", url, body=dictionary.to_json(), token=token)
