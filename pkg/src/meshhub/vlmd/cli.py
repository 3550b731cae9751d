"""vlmd command line: extract, validate, attach.

Exit codes: 0 ok, 1 validation violations, 2 I/O or parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import MeshHubError, SchemaViolation
from ..httpkit import HttpError
from .client import attach_to_study
from .extract import ExtractOptions, extract_from_csv, extract_from_dictionary, extract_from_redcap
from .model import dictionary_from_json, dictionary_to_json_text, validate_vlmd

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_IO = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlmd",
                                     description="Extract and manage variable-level metadata")
    sub = parser.add_subparsers(dest="command", required=True)

    p_extract = sub.add_parser("extract", help="build a data dictionary from a file")
    p_extract.add_argument("--from", dest="source", required=True,
                           choices=["csv", "dict", "redcap"])
    p_extract.add_argument("--input", required=True)
    p_extract.add_argument("--output", required=True)
    p_extract.add_argument("--enum-threshold", type=int, default=10)
    p_extract.add_argument("--missing", action="append", default=None,
                           metavar="TOKEN", help="missing-value token (repeatable)")
    p_extract.add_argument("--map", action="append", default=[],
                           metavar="COLUMN=FIELD",
                           help="dictionary-CSV column to descriptor field (dict mode)")

    p_validate = sub.add_parser("validate", help="check a dictionary file")
    p_validate.add_argument("--input", required=True)

    p_attach = sub.add_parser("attach", help="attach a dictionary to a study")
    p_attach.add_argument("--study", required=True, metavar="GUID")
    p_attach.add_argument("--api", required=True, metavar="URL")
    p_attach.add_argument("--token-file", required=True)
    p_attach.add_argument("--input", required=True)
    return parser


def _load_dictionary(path: str):
    return dictionary_from_json(Path(path).read_text(encoding="utf-8"))


def cmd_extract(args) -> int:
    if args.source == "csv":
        options = ExtractOptions(enum_threshold=args.enum_threshold)
        if args.missing is not None:
            options.missing_tokens = args.missing
        dictionary = extract_from_csv(args.input, options)
    elif args.source == "dict":
        column_map = {}
        for item in args.map:
            column, _, fld = item.partition("=")
            column_map[column] = fld
        dictionary = extract_from_dictionary(args.input, column_map)
    else:
        dictionary = extract_from_redcap(args.input)
    violations = validate_vlmd(dictionary)
    Path(args.output).write_text(dictionary_to_json_text(dictionary), encoding="utf-8")
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return EXIT_VIOLATIONS
    print(f"wrote {len(dictionary.variables)} variables to {args.output}")
    return EXIT_OK


def cmd_validate(args) -> int:
    violations = validate_vlmd(_load_dictionary(args.input))
    for v in violations:
        print(v, file=sys.stderr)
    if violations:
        return EXIT_VIOLATIONS
    print("ok")
    return EXIT_OK


def cmd_attach(args) -> int:
    token = Path(args.token_file).read_text(encoding="utf-8").strip()
    dictionary = _load_dictionary(args.input)
    try:
        attach_to_study(args.api, token, args.study, dictionary)
    except SchemaViolation as exc:
        for v in exc.violations:
            print(v, file=sys.stderr)
        return EXIT_VIOLATIONS
    except HttpError as exc:
        print(f"attach failed: {exc}", file=sys.stderr)
        return EXIT_VIOLATIONS if exc.status == 400 else EXIT_IO
    print(f"attached {args.input} to {args.study}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            return cmd_extract(args)
        if args.command == "validate":
            return cmd_validate(args)
        return cmd_attach(args)
    except MeshHubError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
