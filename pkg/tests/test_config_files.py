"""The repo-root schema/config artifacts must stay in sync with what the
package ships and actually loads."""

from __future__ import annotations

import json
from pathlib import Path

from meshhub.hub import Hub, HubConfig
from meshhub.registration import load_slmd_schema
from meshhub.search import load_facets

ROOT = Path(__file__).parent.parent


def test_root_slmd_schema_matches_packaged():
    root_schema = json.loads((ROOT / "schemas" / "slmd.schema.json").read_text())
    assert root_schema == load_slmd_schema()


def test_root_facets_load():
    facets = load_facets(json.loads((ROOT / "config" / "facets.json").read_text()))
    assert [f.facet_name for f in facets] == [
        "repository", "registration_state", "nih_institute", "study_type"]


def test_example_hub_config_loads(tmp_path):
    config = HubConfig.from_file(ROOT / "config" / "hub.json")
    config.data_dir = None
    config.port = 0
    hub = Hub(config)
    try:
        assert hub.search.facet_names() == sorted(
            ["repository", "registration_state", "nih_institute", "study_type"])
    finally:
        hub.close()


def test_shipped_scenarios_validate():
    from meshhub.harness.scenario import load_scenario

    names = sorted(p.name for p in (ROOT / "scenarios").glob("*.json"))
    assert names == ["controlled_access_denied.json", "register_and_discover.json",
                     "zero_data_at_rest.json"]
    for name in names:
        load_scenario(ROOT / "scenarios" / name)
