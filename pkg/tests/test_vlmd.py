from __future__ import annotations

import csv
import json
import random
from pathlib import Path

import pytest

from meshhub.errors import (
    DuplicateHeader,
    DuplicateVariable,
    EmptyFile,
    MissingNameColumn,
    RaggedRows,
    UnrecognizedHeader,
)
from meshhub.vlmd import (
    dictionary_from_json,
    dictionary_to_json_text,
    extract_from_csv,
    extract_from_dictionary,
    extract_from_redcap,
    normalize_name,
    validate_vlmd,
)
from meshhub.vlmd.extract import (
    DEFAULT_MISSING_TOKENS,
    ExtractOptions,
    TYPE_PRECEDENCE,
    infer_column_type,
    value_parses_as,
)
from meshhub.vlmd.model import DataDictionary, VariableDescriptor

FIXTURES = Path(__file__).parent / "fixtures"


def write_csv(tmp_path, rows, name="data.csv"):
    path = tmp_path / name
    with path.open("w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)
    return path


# -- type inference -------------------------------------------------------------


def test_boolean_precedence_beats_integer(tmp_path):
    path = write_csv(tmp_path, [["flag"], ["0"], ["1"], ["0"]])
    d = extract_from_csv(path)
    assert d.variables[0].type == "boolean"


def test_mixed_column_is_string(tmp_path):
    path = write_csv(tmp_path, [["v"], ["1"], ["2"], ["x"]])
    d = extract_from_csv(path)
    assert d.variables[0].type == "string"


def test_precedence_ladder(tmp_path):
    path = write_csv(tmp_path, [
        ["b", "i", "n", "d", "dt", "s"],
        ["true", "7", "2.5", "2024-03-01", "2024-03-01T10:00:00", "hello world"],
        ["false", "-12", "1e3", "1999-12-31", "2024-03-01 10:00:00Z", "other"],
    ])
    d = extract_from_csv(path)
    assert [v.type for v in d.variables] == [
        "boolean", "integer", "number", "date", "datetime", "string"]


def test_missing_tokens_ignored_for_inference(tmp_path):
    path = write_csv(tmp_path, [["v"], ["NA"], ["3"], [""], ["7"], ["."]])
    d = extract_from_csv(path)
    assert d.variables[0].type == "integer"
    assert d.variables[0].missing_values == ["", "NA", "."]


def test_all_missing_column_defaults_to_string(tmp_path):
    path = write_csv(tmp_path, [["v"], ["NA"], [""]])
    d = extract_from_csv(path)
    assert d.variables[0].type == "string"


def test_enum_for_low_cardinality_strings(tmp_path):
    rows = [["color"]] + [[c] for c in ["red", "blue", "red", "green", "blue"]]
    d = extract_from_csv(write_csv(tmp_path, rows))
    assert d.variables[0].constraints["enum"] == ["blue", "green", "red"]


def test_enum_threshold_respected(tmp_path):
    rows = [["v"]] + [[f"val{i}"] for i in range(12)]
    d = extract_from_csv(write_csv(tmp_path, rows))
    assert "enum" not in d.variables[0].constraints
    d = extract_from_csv(write_csv(tmp_path, rows), ExtractOptions(enum_threshold=20))
    assert len(d.variables[0].constraints["enum"]) == 12


def test_integer_column_gets_no_enum(tmp_path):
    path = write_csv(tmp_path, [["v"], ["1"], ["2"], ["3"]])
    d = extract_from_csv(path)
    assert "enum" not in d.variables[0].constraints


def test_cde_matched_case_insensitively(tmp_path):
    path = write_csv(tmp_path, [["Age", "shoe_size"], ["34", "9"]])
    d = extract_from_csv(path)
    assert d.variables[0].cde_ref == "HEALCDE:0001"
    assert d.variables[1].cde_ref is None


def test_header_normalization():
    assert normalize_name("Pain Score (0-10)") == "Pain_Score_0_10"
    assert normalize_name("2nd visit") == "_2nd_visit"
    assert normalize_name("  ok_name ") == "ok_name"


def test_csv_error_cases(tmp_path):
    with pytest.raises(EmptyFile):
        extract_from_csv(write_csv(tmp_path, []))
    with pytest.raises(DuplicateHeader):
        extract_from_csv(write_csv(tmp_path, [["a", "a"], ["1", "2"]]))
    with pytest.raises(RaggedRows) as exc:
        extract_from_csv(write_csv(tmp_path, [["a", "b"], ["1", "2"], ["only-one"]]))
    assert "line 3" in str(exc.value)


def test_determinism_same_input_same_bytes(tmp_path):
    rows = [["age", "visit_date"], ["30", "2024-01-01"], ["40", "2024-02-02"]]
    path = write_csv(tmp_path, rows)
    one = dictionary_to_json_text(extract_from_csv(path))
    two = dictionary_to_json_text(extract_from_csv(path))
    assert one == two


def test_inference_matches_per_cell_classifier_oracle(tmp_path):
    """Columns of every type with injected missing tokens; the oracle
    classifies each cell independently and takes the first precedence type
    that covers all of them."""
    rng = random.Random(4242)
    generators = {
        "boolean": lambda: rng.choice(["0", "1", "true", "false"]),
        "integer": lambda: str(rng.randint(-5000, 5000)),
        "number": lambda: f"{rng.uniform(-100, 100):.3f}",
        "date": lambda: f"{rng.randint(1990, 2025):04d}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}",
        "datetime": lambda: (f"{rng.randint(1990, 2025):04d}-{rng.randint(1, 12):02d}-"
                             f"{rng.randint(1, 28):02d}T{rng.randint(0, 23):02d}:"
                             f"{rng.randint(0, 59):02d}:{rng.randint(0, 59):02d}"),
        "string": lambda: rng.choice(["abc", "x y", "12a", "n/a?", "zz-9"]),
    }
    n_cols, n_rows = 60, 25
    header, columns = [], []
    for c in range(n_cols):
        kind = rng.choice(list(generators))
        header.append(f"col{c}")
        cells = [generators[kind]() for _ in range(n_rows)]
        for i in range(len(cells)):
            if rng.random() < 0.15:
                cells[i] = rng.choice(DEFAULT_MISSING_TOKENS)
        columns.append(cells)
    rows = [header] + [[columns[c][r] for c in range(n_cols)] for r in range(n_rows)]
    path = write_csv(tmp_path, rows)

    def oracle_cell_types(cell):
        out = set()
        if cell.lower() in ("0", "1", "true", "false"):
            out.add("boolean")
        import re as _re

        if _re.fullmatch(r"[+-]?\d+", cell):
            out.add("integer")
        try:
            f = float(cell)
            if f == f and abs(f) != float("inf") and not _re.search(r"[^\d.eE+-]", cell):
                out.add("number")
        except ValueError:
            pass
        if _re.fullmatch(r"\d{4}-\d{2}-\d{2}", cell):
            out.add("date")
        if _re.fullmatch(r"\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:\d{2})?",
                         cell):
            out.add("datetime")
        out.add("string")
        return out

    d = extract_from_csv(path)
    for c, variable in enumerate(d.variables):
        present = [cell for cell in columns[c] if cell not in DEFAULT_MISSING_TOKENS]
        if not present:
            assert variable.type == "string"
            continue
        allowed = set.intersection(*(oracle_cell_types(cell) for cell in present))
        expected = next(t for t in TYPE_PRECEDENCE if t in allowed)
        assert variable.type == expected, (header[c], present[:5])


def test_inference_soundness_every_value_parses(tmp_path):
    rng = random.Random(5)
    rows = [["a", "b", "c"]]
    for _ in range(30):
        rows.append([str(rng.randint(0, 9)), f"{rng.random():.2f}", rng.choice(["x", "NA"])])
    d = extract_from_csv(write_csv(tmp_path, rows))
    raw_cols = list(zip(*rows[1:]))
    for variable, col in zip(d.variables, raw_cols):
        for cell in col:
            if cell in DEFAULT_MISSING_TOKENS:
                continue
            assert value_parses_as(cell, variable.type)


# -- dictionary CSV ---------------------------------------------------------------


def dict_csv(tmp_path):
    return write_csv(tmp_path, [
        ["Variable", "Label", "Type", "Units"],
        ["age", "Age in years", "integer", "years"],
        ["sex", "Sex at birth", "string", ""],
        ["pain_score", "Pain NRS", "integer", "0-10"],
    ], name="dict.csv")


def test_extract_from_dictionary_basic(tmp_path):
    d = extract_from_dictionary(dict_csv(tmp_path),
                                {"Variable": "name", "Label": "title", "Type": "type"})
    assert [v.name for v in d.variables] == ["age", "sex", "pain_score"]
    assert d.variables[0].title == "Age in years"
    assert d.variables[0].type == "integer"
    assert d.variables[0].custom == {"Units": "years"}  # unmapped column preserved
    assert d.variables[1].custom == {}


def test_extract_from_dictionary_requires_name(tmp_path):
    with pytest.raises(MissingNameColumn):
        extract_from_dictionary(dict_csv(tmp_path), {"Label": "title"})
    with pytest.raises(MissingNameColumn):
        extract_from_dictionary(dict_csv(tmp_path), {"Ghost": "name"})


def test_extract_from_dictionary_duplicate_rows(tmp_path):
    path = write_csv(tmp_path, [
        ["Variable"], ["age"], ["age"],
    ], name="dup.csv")
    with pytest.raises(DuplicateVariable) as exc:
        extract_from_dictionary(path, {"Variable": "name"})
    assert "line 3" in str(exc.value) and "line 2" in str(exc.value)


def test_dictionary_roundtrip_identity(tmp_path):
    d = extract_from_dictionary(dict_csv(tmp_path),
                                {"Variable": "name", "Label": "title", "Type": "type"})
    text = dictionary_to_json_text(d)
    again = dictionary_from_json(text)
    assert dictionary_to_json_text(again) == text


# -- REDCap --------------------------------------------------------------------


def test_redcap_golden_file_byte_exact():
    d = extract_from_redcap(FIXTURES / "redcap_dictionary.csv")
    golden = (FIXTURES / "redcap_golden.json").read_text(encoding="utf-8")
    assert dictionary_to_json_text(d) == golden


def test_redcap_radio_mapping(tmp_path):
    path = write_csv(tmp_path, [
        ["field_name", "form_name", "field_type", "field_label", "choices", "text_validation"],
        ["sex", "demo", "radio", "Sex", "1, Male | 2, Female", ""],
    ], name="rc.csv")
    d = extract_from_redcap(path)
    v = d.variables[0]
    assert v.type == "string"
    assert v.constraints["enum"] == ["1", "2"]
    assert v.description == "1=Male; 2=Female"


def test_redcap_yesno_and_validation(tmp_path):
    path = write_csv(tmp_path, [
        ["field_name", "form_name", "field_type", "field_label", "choices", "text_validation"],
        ["enrolled", "f", "yesno", "Enrolled?", "", ""],
        ["age", "f", "text", "Age", "", "integer"],
        ["bp", "f", "text", "BP", "", "number"],
        ["dob", "f", "text", "DOB", "", "date_ymd"],
        ["misc", "f", "text", "Misc", "", ""],
    ], name="rc2.csv")
    d = extract_from_redcap(path)
    assert [v.type for v in d.variables] == ["boolean", "integer", "number", "date", "string"]


def test_redcap_unrecognized_header(tmp_path):
    path = write_csv(tmp_path, [["whatever", "nope"], ["a", "b"]], name="bad.csv")
    with pytest.raises(UnrecognizedHeader):
        extract_from_redcap(path)


# -- validation ------------------------------------------------------------------


def test_validate_clean_dictionary():
    d = DataDictionary(variables=[VariableDescriptor(name="age", type="integer")])
    assert validate_vlmd(d) == []


def test_validate_min_greater_than_max():
    d = DataDictionary(variables=[VariableDescriptor(
        name="v", type="number", constraints={"min": 10, "max": 2})])
    violations = validate_vlmd(d)
    assert len(violations) == 1 and "variables.v" in violations[0]


def test_validate_catches_bad_names_types_enums():
    d = DataDictionary(variables=[
        VariableDescriptor(name="9bad", type="integer"),
        VariableDescriptor(name="v2", type="wat"),
        VariableDescriptor(name="v3", constraints={"enum": ["a", "a"]}),
        VariableDescriptor(name="v3"),
    ])
    violations = validate_vlmd(d)
    assert any("9bad" in v for v in violations)
    assert any("unknown type" in v for v in violations)
    assert any("distinct" in v for v in violations)
    assert any("duplicate" in v for v in violations)


def test_validate_empty_dictionary():
    assert validate_vlmd(DataDictionary()) != []


# -- CLI ----------------------------------------------------------------------


def test_cli_extract_and_validate(tmp_path, capsys):
    from meshhub.vlmd.cli import main

    data = write_csv(tmp_path, [["age"], ["30"], ["41"]])
    out = tmp_path / "out.json"
    assert main(["extract", "--from", "csv", "--input", str(data),
                 "--output", str(out)]) == 0
    assert out.exists()
    assert main(["validate", "--input", str(out)]) == 0


def test_cli_exit_codes(tmp_path):
    from meshhub.vlmd.cli import main

    missing = tmp_path / "missing.csv"
    assert main(["extract", "--from", "csv", "--input", str(missing),
                 "--output", str(tmp_path / "o.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": "1.0", "variables": [
        {"name": "v", "type": "nope"}]}))
    assert main(["validate", "--input", str(bad)]) == 1


def test_cli_custom_missing_tokens(tmp_path):
    from meshhub.vlmd.cli import main

    data = write_csv(tmp_path, [["v"], ["-9"], ["3"], ["-9"]])
    out = tmp_path / "o.json"
    assert main(["extract", "--from", "csv", "--input", str(data),
                 "--output", str(out), "--missing", "-9"]) == 0
    d = dictionary_from_json(out.read_text())
    assert d.variables[0].type == "integer"
    assert d.variables[0].missing_values == ["-9"]
