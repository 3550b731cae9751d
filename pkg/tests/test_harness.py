from __future__ import annotations

import json
from pathlib import Path

import pytest

from meshhub.errors import Denied, NonEmptyStore, ScriptError
from meshhub.harness import (
    ScenarioRunner,
    load_scenario,
    seed_fixture,
    spawn_mock_repo,
    spawn_mock_source,
)
from meshhub.harness.fixtures import TABLE1_EXPECTED, TINY_EXPECTED
from meshhub.httpkit import download_discard, fetch_json
from meshhub.hub import Hub, HubConfig

SCENARIOS = Path(__file__).parent.parent / "scenarios"


@pytest.fixture
def hub():
    h = Hub(HubConfig(test_mode=True, enable_mock_idp=True, pid_seed=11))
    yield h
    h.close()


def test_full_api_mock_serves_its_tier(hub):
    mock = spawn_mock_repo(hub, "FULL_API", [{"key": "x.bin", "size": 1000}],
                           repository_id="m1")
    try:
        objects = fetch_json("GET", f"{mock.base_url}/md/objects")
        assert len(objects) == 1 and objects[0]["pid"].startswith("heal/")
        body = fetch_json("POST", f"{mock.base_url}/auth/token",
                          body={"username": "probe"})
        validated = fetch_json(
            "GET", f"{mock.base_url}/auth/validate?token={body['token']}")
        assert validated["valid"]
    finally:
        mock.stop()


def test_bucket_mock_rejects_bad_signature(hub):
    mock = spawn_mock_repo(hub, "BUCKET_ONLY", [{"key": "d.bin", "size": 500}],
                           allow_list=["alice"], repository_id="m2")
    try:
        from meshhub.httpkit import request_json

        url = f"{mock.base_url}/bucket/{mock.bucket_name}/d.bin?user=alice&expires=9999999999&sig=forged"
        status, body = request_json("GET", url)
        assert status == 403
    finally:
        mock.stop()


def test_hub_signed_url_downloads_exact_bytes(hub):
    mock = spawn_mock_repo(hub, "BUCKET_ONLY", [{"key": "d.bin", "size": 12345}],
                           allow_list=["alice"], repository_id="m3")
    try:
        from meshhub.auth import Principal

        hub.auth.register_user(Principal(user_id="alice"))
        token = hub.auth.workspace_token("alice").signed
        pid = hub.pids.list_by_repository("m3")[0].pid
        url, _ = hub.gateway.fetch_access_url(token, pid)
        nbytes, digest = download_discard(url)
        assert nbytes == 12345
        nbytes2, digest2 = download_discard(url)
        assert digest2 == digest  # deterministic stream
    finally:
        mock.stop()


def test_expired_hub_url_rejected(hub):
    from meshhub.clock import ManualClock

    clock_hub = Hub(HubConfig(test_mode=True, pid_seed=1), clock=ManualClock())
    mock = spawn_mock_repo(clock_hub, "BUCKET_ONLY", [{"key": "d", "size": 10}],
                           allow_list=["alice"], repository_id="m4")
    try:
        from meshhub.auth import Principal
        from meshhub.httpkit import request_json

        clock_hub.auth.register_user(Principal(user_id="alice"))
        token = clock_hub.auth.workspace_token("alice").signed
        pid = clock_hub.pids.list_by_repository("m4")[0].pid
        url, _ = clock_hub.gateway.fetch_access_url(token, pid)
        clock_hub.clock.advance(600)  # past the 300 s URL lifetime
        status, _ = request_json("GET", url)
        assert status == 403
    finally:
        mock.stop()
        clock_hub.close()


def test_force_deny_repo_overrides_everything(hub):
    mock = spawn_mock_repo(hub, "FULL_API", [{"key": "k", "size": 10}],
                           repository_id="m5", force_deny=True)
    try:
        from meshhub.auth import Principal

        hub.auth.register_user(Principal(user_id="alice"))
        hub.auth.add_policy("/", "hub_admin", "alice")
        token = hub.auth.workspace_token("alice").signed
        pid = hub.pids.list_by_repository("m5")[0].pid
        with pytest.raises(Denied):
            hub.gateway.fetch_access_url(token, pid)
    finally:
        mock.stop()


def test_spawn_19_repos_listed(hub):
    mocks = [spawn_mock_repo(hub, ["FULL_API", "METADATA_ONLY", "BUCKET_ONLY"][i % 3],
                             [{"key": f"o{i}", "size": 10}], allow_list=["a"],
                             repository_id=f"swarm-{i:02d}")
             for i in range(19)]
    try:
        server = hub.start_server()
        try:
            repos = fetch_json("GET", f"{server.base_url}/repositories")["repositories"]
            assert len(repos) == 19
        finally:
            server.stop()
    finally:
        for m in mocks:
            m.stop()


def test_mock_source_drives_scheduled_harvest(hub):
    source = spawn_mock_source(
        hub, "grant_registry",
        [{"guid": "heal/h-1", "proj_title": "One"},
         {"guid": "heal/h-2", "proj_title": "Two"}],
        source_id="grants",
        mapping=[{"source_path": "proj_title", "target_path": "title"}])
    try:
        run = hub.adapters.harvest_once("grants")
        assert run.created == 2
        source.records[0]["proj_title"] = "One v2"
        run = hub.adapters.harvest_once("grants")
        assert (run.updated, run.unchanged) == (1, 1)
        source.down = True
        run = hub.adapters.harvest_once("grants")
        assert run.failure is not None and run.accounting_holds()
    finally:
        source.stop()


def test_scrape_source_through_mock(hub):
    source = spawn_mock_source(
        hub, "scrape",
        [{"id": "heal/s-1", "title": "Scraped One"}],
        source_id="scraper",
        mapping=[{"source_path": "title", "target_path": "title"}],
        scrape=True)
    try:
        run = hub.adapters.harvest_once("scraper")
        assert run.created == 1
        doc = hub.metadata.get_document("heal/s-1")
        assert doc.block("scrape_source") == {"title": "Scraped One"}
    finally:
        source.stop()


# -- fixtures --------------------------------------------------------------------


def test_tiny_fixture_counts(hub):
    stats = seed_fixture(hub, "tiny")
    assert stats == TINY_EXPECTED


def test_table1_fixture_counts():
    hub = Hub(HubConfig(test_mode=True))
    try:
        stats = seed_fixture(hub, "table1")
        assert stats == TABLE1_EXPECTED
    finally:
        hub.close()


def test_seeding_twice_rejected(hub):
    seed_fixture(hub, "tiny")
    with pytest.raises(NonEmptyStore):
        seed_fixture(hub, "tiny")


# -- scenario runner -----------------------------------------------------------------


def run_scenario_fresh(name, seed=0, data_dir=None):
    hub = Hub(HubConfig(test_mode=True, enable_mock_idp=True, pid_seed=5,
                        data_dir=data_dir))
    runner = ScenarioRunner(hub, seed=seed)
    try:
        return runner.run(load_scenario(SCENARIOS / name))
    finally:
        runner.close()
        hub.close()


def test_register_and_discover_scenario():
    report = run_scenario_fresh("register_and_discover.json")
    assert report.passed, report.to_json()
    assert all(a["ok"] for a in report.assertions)


def test_controlled_access_denied_scenario():
    report = run_scenario_fresh("controlled_access_denied.json")
    assert report.passed, report.to_json()
    assert report.event_counts["denied"] == 1


def test_zero_data_at_rest_scenario(tmp_path):
    report = run_scenario_fresh("zero_data_at_rest.json",
                                data_dir=str(tmp_path / "hub-data"))
    assert report.passed, report.to_json()
    assert report.bytes_moved >= 10 * 1024 * 1024


def test_scenario_determinism_identical_reports():
    a = run_scenario_fresh("controlled_access_denied.json", seed=42).to_json()
    b = run_scenario_fresh("controlled_access_denied.json", seed=42).to_json()
    a.pop("wall_time_s"), b.pop("wall_time_s")
    assert a == b


def test_script_validation():
    with pytest.raises(ScriptError):
        load_scenario_from_dict({"name": "x", "steps": []})
    with pytest.raises(ScriptError):
        load_scenario_from_dict({"name": "x", "steps": [{"op": "warp"}]})
    with pytest.raises(ScriptError):
        load_scenario_from_dict({"name": "x", "steps": [{"op": "seed"}]})


def load_scenario_from_dict(script):
    from meshhub.harness.scenario import validate_script

    validate_script(script)
    return script


def test_module_invariants_hold_after_scenarios(tmp_path):
    """Shipped scenarios leave the per-module invariants intact."""
    hub = Hub(HubConfig(test_mode=True, enable_mock_idp=True, pid_seed=5))
    runner = ScenarioRunner(hub, seed=0)
    try:
        report = runner.run(load_scenario(SCENARIOS / "register_and_discover.json"))
        assert report.passed
        # registration: claimed studies have exactly one study_admin grant
        for study in hub.registration.list_studies():
            if study.state != "UNREGISTERED":
                grants = [p for p in hub.auth.policies_for(study.owner)
                          if p.resource_path == f"/studies/{study.guid}"
                          and p.role == "study_admin"]
                assert len(grants) == 1
        # pid partition invariant
        total = sum(len(hub.pids.list_by_repository(r.repository_id))
                    for r in hub.registry.list())
        assert total == hub.pids.count()
        # harvest runs all satisfy the accounting identity
        assert all(r.accounting_holds() for r in hub.adapters.runs())
    finally:
        runner.close()
        hub.close()
