"""Acceptance suite: one test per shipping criterion, each printing a
PASS/FAIL line. Tolerances are fixed here, not tuned elsewhere:

 1. table1 fixture reproduces the published overview counts exactly, < 60 s
 2. conformance matrix over the three tiers equals the golden file
 3. zero-data-at-rest: >= 10 MiB moved, hub disk delta < 64 KiB
 4. authorization locality: >= 100 combos, zero violations
 5. harvest idempotence: >= 50 random source states, accounting always holds
 6. search equals the brute-force oracle on >= 1,000 random queries
 7. registration state machine: >= 10,000 random sequences stay legal
 8. VLMD inference matches the per-cell oracle on >= 200 columns, 100%;
    REDCap golden file byte-exact
 9. usage-report conservation with an injected sink failure
10. 100,000 seeded PID mints, zero collisions, round-trip field-exact
"""

from __future__ import annotations

import csv
import json
import random
import time
from pathlib import Path

import pytest

from meshhub.adapters import AdapterFramework, FieldMapping, SourceDescriptor
from meshhub.auth import AuthService, Principal
from meshhub.clock import ManualClock
from meshhub.errors import Denied
from meshhub.harness import ScenarioRunner, load_scenario, seed_fixture, spawn_mock_repo
from meshhub.harness.fixtures import TABLE1_EXPECTED
from meshhub.hub import Hub, HubConfig
from meshhub.httpkit import fetch_json
from meshhub.metadata import MetadataStore
from meshhub.pid_index import AccessMethod, PidIndex
from meshhub.search import FacetConfig, SearchService

FIXTURES = Path(__file__).parent / "fixtures"
SCENARIOS = Path(__file__).parent.parent / "scenarios"


def report(criterion: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}" + (f" - {detail}" if detail else ""))
    assert ok, f"{criterion}: {detail}"


# -- 1 ---------------------------------------------------------------------------


def test_criterion_1_table1_reproduction(tmp_path):
    from meshhub.cli import main as meshhub_main

    data_dir = tmp_path / "hub-data"
    started = time.monotonic()
    rc = meshhub_main(["sim", "seed", "--profile", "table1",
                       "--data-dir", str(data_dir)])
    assert rc == 0
    hub = Hub(HubConfig(test_mode=True, data_dir=str(data_dir)))
    server = hub.start_server()
    try:
        stats = fetch_json("GET", f"{server.base_url}/stats")
        elapsed = time.monotonic() - started
        report("1 table1 stats",
               stats == TABLE1_EXPECTED and elapsed < 60.0,
               f"stats={stats} elapsed={elapsed:.1f}s")
    finally:
        server.stop()
        hub.close()


# -- 2 ---------------------------------------------------------------------------


def test_criterion_2_conformance_matrix():
    golden = json.loads((FIXTURES / "conformance_golden.json").read_text())
    hub = Hub(HubConfig(test_mode=True, pid_seed=2))
    mocks = []
    try:
        got = {}
        requirements = None
        for tier in ("FULL_API", "METADATA_ONLY", "BUCKET_ONLY"):
            mock = spawn_mock_repo(
                hub, tier,
                [{"key": "open.csv", "size": 64},
                 {"key": "locked.csv", "size": 64, "controlled": True}],
                allow_list=["alice"], repository_id=f"conf-{tier.lower()}")
            mocks.append(mock)
            probe = hub.gateway.probe_capabilities(mock.repository_id)
            got[tier] = probe.matrix()
            requirements = [[r.number, r.requirement] for r in probe.results]
        ok = got == golden["matrix"] and requirements == golden["requirements"]
        report("2 conformance matrix", ok, f"got={got}")
    finally:
        for m in mocks:
            m.stop()
        hub.close()


# -- 3 ---------------------------------------------------------------------------


def test_criterion_3_zero_data_at_rest(tmp_path):
    hub = Hub(HubConfig(test_mode=True, enable_mock_idp=True, pid_seed=3,
                        data_dir=str(tmp_path / "hub-data")))
    runner = ScenarioRunner(hub, seed=0)
    try:
        result = runner.run(load_scenario(SCENARIOS / "zero_data_at_rest.json"))
        delta = hub.store_size_bytes() - runner.disk_baseline
        ok = (result.passed and result.bytes_moved >= 10 * 1024 * 1024
              and delta < 64 * 1024)
        report("3 zero-data-at-rest", ok,
               f"moved={result.bytes_moved} disk_delta={delta}")
    finally:
        runner.close()
        hub.close()


# -- 4 ---------------------------------------------------------------------------


def test_criterion_4_authorization_locality():
    hub = Hub(HubConfig(test_mode=True, pid_seed=4))
    full = spawn_mock_repo(hub, "FULL_API",
                           [{"key": "c.bin", "size": 16, "controlled": True}],
                           allow_list=set(), repository_id="loc-full")
    bucket = spawn_mock_repo(hub, "BUCKET_ONLY",
                             [{"key": "c.bin", "size": 16, "controlled": True}],
                             allow_list=set(), repository_id="loc-bucket")
    bucket_desc = hub.registry.get("loc-bucket")
    full_pid = hub.pids.list_by_repository("loc-full")[0].pid
    bucket_pid = hub.pids.list_by_repository("loc-bucket")[0].pid
    rng = random.Random(4)
    hub_roles = [None, "reader", "metadata_editor", "study_admin", "hub_admin"]
    violations = []
    trials = 0
    try:
        for tier in ("FULL_API", "BUCKET_ONLY"):
            for role in hub_roles:
                for repo_allows in (True, False):
                    for repeat in range(6):
                        trials += 1
                        user = f"u-{tier}-{role}-{repo_allows}-{repeat}"
                        hub.auth.register_user(Principal(user_id=user))
                        if role:
                            hub.auth.add_policy("/", role, user)
                        if tier == "FULL_API":
                            full.allow_list.clear()
                            if repo_allows:
                                full.allow_list.add(user)
                            pid = full_pid
                        else:
                            bucket_desc.bucket.allow_list.clear()
                            if repo_allows:
                                bucket_desc.bucket.allow_list.add(user)
                            pid = bucket_pid
                        token = hub.auth.workspace_token(user).signed
                        try:
                            hub.gateway.fetch_access_url(token, pid)
                            outcome = True
                        except Denied:
                            outcome = False
                        if outcome != repo_allows:
                            violations.append((tier, role, repo_allows, outcome))
        ok = trials >= 100 and not violations
        report("4 authorization locality", ok,
               f"trials={trials} violations={violations[:3]}")
    finally:
        full.stop()
        bucket.stop()
        hub.close()


# -- 5 ---------------------------------------------------------------------------


def test_criterion_5_harvest_idempotence():
    rng = random.Random(5)
    words = ["alpha", "beta", "gamma", "delta", "epsilon"]
    failures = []
    for trial in range(50):
        clock = ManualClock()
        store = MetadataStore(clock=clock)
        records = []
        for i in range(rng.randint(1, 12)):
            record = {"guid": f"heal/t{trial}-r{i}",
                      "title": " ".join(rng.sample(words, k=2))}
            if rng.random() < 0.5:
                record["date"] = rng.choice(["Mar 1, 2024", "2024-05-05", "not a date"])
            if rng.random() < 0.3:
                record["tags"] = rng.sample(words, k=2)
            if rng.random() < 0.15:
                record.pop("guid")  # dirty upstream record
            records.append(record)
        payload = json.dumps(records).encode()
        framework = AdapterFramework(store, clock=clock,
                                     fetcher=lambda url: payload, min_interval_s=0)
        framework.register_source(SourceDescriptor(
            source_id="s", kind="grant_registry", endpoint="http://x/records",
            mapping=[FieldMapping("title", "title"),
                     FieldMapping("date", "date", "date_normalize_iso8601"),
                     FieldMapping("tags", "tags", "list_join_semicolon")]))
        first = framework.harvest_once("s")
        after_first = store.content_hash()
        second = framework.harvest_once("s")
        if store.content_hash() != after_first:
            failures.append((trial, "hash changed"))
        if not (first.accounting_holds() and second.accounting_holds()):
            failures.append((trial, "accounting broken"))
        if second.created or second.updated:
            failures.append((trial, "second run wrote"))
    report("5 harvest idempotence", not failures, f"50 states, failures={failures[:3]}")


# -- 6 ---------------------------------------------------------------------------


def test_criterion_6_search_oracle_equivalence():
    from test_search import FACETS, oracle_search

    rng = random.Random(6)
    words = ["opioid", "pain", "sleep", "cohort", "tapering", "buprenorphine"]
    states = ["UNREGISTERED", "CLAIMED", "SLMD_SUBMITTED", "VLMD_ATTACHED"]
    clock = ManualClock()
    store = MetadataStore(clock=clock)
    docs = {}
    for i in range(800):
        payload = {"title": " ".join(rng.sample(words, k=2)),
                   "registration": {"state": rng.choice(states)}}
        if rng.random() < 0.8:
            payload["repository"] = {"name": f"repo{rng.randrange(4)}"}
        if rng.random() < 0.3:
            payload["keywords"] = rng.sample(words, k=2)
        docs[f"heal/a-{i:04d}"] = payload
        store.create_document(f"heal/a-{i:04d}", payload)
    svc = SearchService(store, FACETS, clock=clock)
    svc.rebuild_index()
    facet_defs = {"repository": ("repository.name", False),
                  "state": ("registration.state", False),
                  "keywords": ("keywords", True)}
    mismatches = 0
    for q in range(1000):
        text = rng.choice([None, rng.choice(words), " ".join(rng.sample(words, 2))])
        selections = {}
        if rng.random() < 0.5:
            selections["repository"] = [f"repo{rng.randrange(4)}"]
        if rng.random() < 0.4:
            selections["state"] = rng.sample(states, k=rng.randint(1, 2))
        got, total = svc.search(text=text, facet_selections=selections, limit=2000)
        expected = oracle_search(docs, text, selections, facet_defs)
        if got != expected or total != len(expected):
            mismatches += 1
    # facet-count partition identity for a single-valued facet
    counts = svc.facet_counts()
    with_repo = sum(1 for p in docs.values() if "repository" in p)
    partition_ok = sum(counts["repository"].values()) == with_repo
    report("6 search oracle equivalence",
           mismatches == 0 and partition_ok,
           f"1000 queries, mismatches={mismatches}, partition_ok={partition_ok}")


# -- 7 ---------------------------------------------------------------------------


def test_criterion_7_registration_state_machine():
    from meshhub.errors import (AlreadyClaimed, BadClaimToken, NotAuthorized,
                                SchemaViolation, WrongState)
    from meshhub.registration import RegistrationService, STATES

    clock = ManualClock()
    store = MetadataStore(clock=clock)
    auth = AuthService(signing_key="k", clock=clock)
    alice = auth.register_user(Principal(user_id="alice"))
    reg = RegistrationService(store, auth, clock=clock)
    rng = random.Random(7)
    slmd = {
        "objectives": {"primary_objective": "o"},
        "design": {"study_type": "other"},
        "population": {"description": "d"},
        "data_collection_methods": {"methods": ["m"]},
        "availability": {"status": "planned"},
    }
    dictionary = {"schema_version": "1.0",
                  "variables": [{"name": "v", "type": "string"}]}
    order = {s: i for i, s in enumerate(STATES)}
    sequences = 10_000
    illegal = 0
    double_claims = 0
    awards = [(f"AWD-A{i:05d}", {}) for i in range(sequences)]
    studies = reg.seed_from_awards(awards)
    for i, study in enumerate(studies):
        guid = study.guid
        token = reg.issue_claim_token(guid)
        claims = 0
        previous = "UNREGISTERED"
        for _ in range(rng.randint(0, 12)):
            op = rng.choice(["claim", "claim_bad", "slmd", "vlmd", "slmd_bad"])
            try:
                if op == "claim":
                    reg.claim_study(alice, guid, token)
                    claims += 1
                elif op == "claim_bad":
                    reg.claim_study(alice, guid, "wrong")
                elif op == "slmd":
                    reg.submit_slmd(alice, guid, slmd)
                elif op == "slmd_bad":
                    reg.submit_slmd(alice, guid, {})
                else:
                    reg.attach_vlmd(alice, guid, dictionary)
            except (AlreadyClaimed, BadClaimToken, NotAuthorized, WrongState,
                    SchemaViolation):
                pass
            state = reg.get_study(guid).state
            if state not in STATES or order[state] < order[previous]:
                illegal += 1
            previous = state
        if claims > 1:
            double_claims += 1
    report("7 registration state machine",
           illegal == 0 and double_claims == 0,
           f"{sequences} sequences, illegal={illegal}, double_claims={double_claims}")


# -- 8 ---------------------------------------------------------------------------


def test_criterion_8_vlmd_inference(tmp_path):
    from meshhub.vlmd import dictionary_to_json_text, extract_from_csv, extract_from_redcap
    from meshhub.vlmd.extract import DEFAULT_MISSING_TOKENS, TYPE_PRECEDENCE
    from test_vlmd import test_inference_matches_per_cell_classifier_oracle  # noqa: F401

    rng = random.Random(8)
    generators = {
        "boolean": lambda: rng.choice(["0", "1", "true", "false", "TRUE"]),
        "integer": lambda: str(rng.randint(-10_000, 10_000)),
        "number": lambda: rng.choice([f"{rng.uniform(-9, 9):.4f}",
                                      f"{rng.uniform(-9, 9):.1e}"]),
        "date": lambda: f"{rng.randint(1980, 2025):04d}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}",
        "datetime": lambda: (f"{rng.randint(1980, 2025):04d}-{rng.randint(1, 12):02d}-"
                             f"{rng.randint(1, 28):02d}T{rng.randint(0, 23):02d}:"
                             f"{rng.randint(0, 59):02d}:{rng.randint(0, 59):02d}"),
        "string": lambda: rng.choice(["ab c", "x-01?", "zzz", "NA?x", "12 34"]),
    }
    n_cols, n_rows = 240, 20
    header, columns, kinds = [], [], []
    for c in range(n_cols):
        kind = list(generators)[c % 6]  # every type gets >= 40 columns
        kinds.append(kind)
        header.append(f"c{c:03d}")
        cells = [generators[kind]() for _ in range(n_rows)]
        for r in range(n_rows):
            if rng.random() < 0.2:
                cells[r] = rng.choice(DEFAULT_MISSING_TOKENS)
        columns.append(cells)
    path = tmp_path / "wide.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in range(n_rows):
            writer.writerow([columns[c][r] for c in range(n_cols)])

    def oracle_types(cell):
        import math
        import re as _re

        out = {"string"}
        if cell.lower() in ("0", "1", "true", "false"):
            out.add("boolean")
        if _re.fullmatch(r"[+-]?\d+", cell):
            out.add("integer")
        if _re.fullmatch(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?", cell):
            try:
                if math.isfinite(float(cell)):
                    out.add("number")
            except ValueError:
                pass
        if _re.fullmatch(r"\d{4}-\d{2}-\d{2}", cell):
            try:
                time.strptime(cell, "%Y-%m-%d")
                out.add("date")
            except ValueError:
                pass
        if _re.fullmatch(r"\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?"
                         r"(Z|[+-]\d{2}:\d{2})?", cell):
            out.add("datetime")
        return out

    extracted = extract_from_csv(path)
    wrong = []
    for c, variable in enumerate(extracted.variables):
        present = [x for x in columns[c] if x not in DEFAULT_MISSING_TOKENS]
        if not present:
            expected = "string"
        else:
            allowed = set.intersection(*(oracle_types(x) for x in present))
            expected = next(t for t in TYPE_PRECEDENCE if t in allowed)
        if variable.type != expected:
            wrong.append((header[c], variable.type, expected))
    golden = (FIXTURES / "redcap_golden.json").read_text(encoding="utf-8")
    redcap_ok = dictionary_to_json_text(
        extract_from_redcap(FIXTURES / "redcap_dictionary.csv")) == golden
    report("8 vlmd inference",
           not wrong and redcap_ok and n_cols >= 200,
           f"{n_cols} columns, wrong={wrong[:3]}, redcap_golden={redcap_ok}")


# -- 9 ---------------------------------------------------------------------------


def test_criterion_9_usage_report_conservation():
    hub = Hub(HubConfig(test_mode=True, pid_seed=9))
    rng = random.Random(9)
    mocks = [
        spawn_mock_repo(hub, "BUCKET_ONLY",
                        [{"key": f"o{i}", "size": 32, "controlled": i % 2 == 0}
                         for i in range(3)],
                        allow_list=["alice"], repository_id=f"cons-{j}")
        for j in range(3)
    ]
    try:
        for user_id in ("alice", "bob"):
            hub.auth.register_user(Principal(user_id=user_id))
        tokens = {u: hub.auth.workspace_token(u).signed for u in ("alice", "bob")}
        pids = [r.pid for m in mocks
                for r in hub.pids.list_by_repository(m.repository_id)]
        for _ in range(120):
            try:
                hub.gateway.fetch_access_url(tokens[rng.choice(["alice", "bob"])],
                                             rng.choice(pids))
            except Denied:
                pass
        day = hub.clock.now().date()
        digest_total = 0
        for m in mocks:
            digest = hub.gateway.usage_report(m.repository_id, day)
            digest_total += sum(digest["counts"].values())
        conserved = digest_total == hub.usage.count() == 120

        # injected sink failure: at-least-once delivery, idempotent keys
        target = mocks[0]
        target.sink.fail_next = 1
        attempts = hub.gateway.deliver_report(target.repository_id, day)
        key = f"{target.repository_id}:{day.isoformat()}"
        delivered_once = list(target.sink.by_key) == [key]
        retried = attempts == 2
        # second delivery under the same key stays one logical digest
        hub.gateway.deliver_report(target.repository_id, day)
        still_one = list(target.sink.by_key) == [key]
        ok = conserved and delivered_once and retried and still_one
        report("9 usage-report conservation", ok,
               f"digest_total={digest_total} events={hub.usage.count()} "
               f"attempts={attempts}")
    finally:
        for m in mocks:
            m.stop()
        hub.close()


# -- 10 ---------------------------------------------------------------------------


def test_criterion_10_pid_properties():
    class Repos:
        class _R:
            tier = "FULL_API"

        def get(self, repository_id):
            return self._R()

    clock = ManualClock()
    index = PidIndex(Repos(), seed=10, clock=clock)
    method = AccessMethod(kind="repo_api", locator="https://r/x", requires_authorization=False)
    checksums = {"sha256": "f" * 64}
    n = 100_000
    pids = set()
    sample = []
    for i in range(n):
        record = index.mint_pid("r", i, checksums, [method])
        pids.add(record.pid)
        if i % 10_000 == 0:
            sample.append(record)
    collisions = n - len(pids)
    roundtrip_ok = all(index.resolve_pid(r.pid) == r for r in sample)
    report("10 pid properties", collisions == 0 and roundtrip_ok and index.count() == n,
           f"minted={n} collisions={collisions} roundtrip_ok={roundtrip_ok}")
