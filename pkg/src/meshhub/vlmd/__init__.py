"""Variable-level metadata tooling: extraction, validation, attachment."""

from .model import (
    DataDictionary,
    VariableDescriptor,
    dictionary_from_json,
    dictionary_to_json_text,
    normalize_name,
    validate_vlmd,
)
from .extract import extract_from_csv, extract_from_dictionary, extract_from_redcap

__all__ = [
    "DataDictionary",
    "VariableDescriptor",
    "dictionary_from_json",
    "dictionary_to_json_text",
    "normalize_name",
    "validate_vlmd",
    "extract_from_csv",
    "extract_from_dictionary",
    "extract_from_redcap",
]
