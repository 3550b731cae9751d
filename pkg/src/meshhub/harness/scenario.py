"""Scenario scripts: ordered steps driving a hub plus its mocks, ending in
assertions over mesh-wide invariants.

Scripts are JSON. Steps run sequentially; entity references are by the
order of creation (study 0 is the first seeded study, pid 2 the third
minted object). Reports are deterministic for a fixed script and seed,
wall time aside.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from ..errors import Denied, RegistryMiss, ScriptError
from ..httpkit import download_discard, fetch_json
from .fixtures import seed_fixture
from .mocks import spawn_mock_repo, spawn_mock_source

KNOWN_OPS = (
    "seed", "seed_awards", "spawn_repo", "register_source", "login",
    "claim", "link_nct", "submit_slmd", "attach_vlmd", "harvest",
    "fetch_url", "tick", "rebuild_index", "deliver_reports", "assert",
)


@dataclass
class ScenarioReport:
    name: str
    seed: int
    passed: bool = True
    steps_run: int = 0
    assertions: list = field(default_factory=list)  # {"kind", "ok", "detail"}
    event_counts: dict = field(default_factory=dict)
    bytes_moved: int = 0
    first_failure: Optional[str] = None
    wall_time_s: float = 0.0

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "passed": self.passed,
            "steps_run": self.steps_run,
            "assertions": self.assertions,
            "event_counts": self.event_counts,
            "bytes_moved": self.bytes_moved,
            "first_failure": self.first_failure,
            "wall_time_s": round(self.wall_time_s, 3),
        }


def load_scenario(path: str | Path) -> dict:
    script = json.loads(Path(path).read_text(encoding="utf-8"))
    validate_script(script)
    return script


def validate_script(script: dict) -> None:
    if not isinstance(script, dict) or "name" not in script or "steps" not in script:
        raise ScriptError("script needs 'name' and 'steps'")
    steps = script["steps"]
    if not isinstance(steps, list) or not steps:
        raise ScriptError("steps must be a nonempty list")
    for i, step in enumerate(steps):
        if not isinstance(step, dict) or step.get("op") not in KNOWN_OPS:
            raise ScriptError(f"step {i}: unknown op {step.get('op')!r}")
    if steps[-1].get("op") != "assert" and not any(
            s.get("op") == "assert" for s in steps):
        raise ScriptError("every scenario ends with at least one assert step")


class ScenarioRunner:
    def __init__(self, hub, seed: int = 0):
        self.hub = hub
        self.seed = seed
        self.rng = random.Random(seed)
        self.mocks = []
        self.sources = {}
        self.tokens: dict[str, str] = {}
        self.claim_tokens: dict[str, str] = {}
        self.studies: list[str] = []
        self.pids: list[str] = []
        self.bytes_moved = 0
        self.disk_baseline = hub.store_size_bytes()

    # -- reference resolution ------------------------------------------------

    def _study(self, ref) -> str:
        if isinstance(ref, int):
            if ref >= len(self.studies):
                raise ScriptError(f"study {ref} not created yet")
            return self.studies[ref]
        return ref

    def _pid(self, ref) -> str:
        if isinstance(ref, int):
            if ref >= len(self.pids):
                raise ScriptError(f"pid {ref} not minted yet")
            return self.pids[ref]
        return ref

    def _token(self, user: str) -> str:
        if user not in self.tokens:
            raise ScriptError(f"user {user!r} has not logged in")
        return self.tokens[user]

    def _refresh_pids(self) -> None:
        self.pids = sorted(
            {r.pid for repo in self.hub.registry.list()
             for r in self.hub.pids.list_by_repository(repo.repository_id)})

    # -- runner ------------------------------------------------------------------

    def run(self, script: dict) -> ScenarioReport:
        validate_script(script)
        report = ScenarioReport(name=script["name"], seed=self.seed)
        start = time.monotonic()
        try:
            for step in script["steps"]:
                self._apply(step, report)
                report.steps_run += 1
        except ScriptError:
            raise
        except Exception as exc:  # failed step ends the scenario, not the run
            report.passed = False
            report.first_failure = f"step {report.steps_run}: {type(exc).__name__}: {exc}"
        finally:
            report.wall_time_s = time.monotonic() - start
            report.bytes_moved = self.bytes_moved
            counts = {"resolved": 0, "url_issued": 0, "denied": 0}
            for event in self.hub.usage.events():
                counts[event.action] += 1
            report.event_counts = counts
            if any(not a["ok"] for a in report.assertions):
                report.passed = False
                if report.first_failure is None:
                    bad = next(a for a in report.assertions if not a["ok"])
                    report.first_failure = f"assert {bad['kind']}: {bad['detail']}"
        return report

    def close(self) -> None:
        for mock in self.mocks:
            mock.stop()
        for source in self.sources.values():
            source.stop()

    # -- steps -------------------------------------------------------------------

    def _apply(self, step: dict, report: ScenarioReport) -> None:
        op = step["op"]
        if op == "seed":
            seed_fixture(self.hub, step.get("profile", "tiny"),
                         rng_seed=step.get("rng_seed", 20251101))
            self.studies = [s.guid for s in self.hub.registration.list_studies()]
            self._refresh_pids()
        elif op == "seed_awards":
            count = step.get("count", 1)
            awards = [(f"AWD-S{i:04d}", {"title": t})
                      for i, t in enumerate(step.get("titles") or
                                            [f"Study {i}" for i in range(count)])]
            for s in self.hub.registration.seed_from_awards(awards):
                self.studies.append(s.guid)
        elif op == "spawn_repo":
            mock = spawn_mock_repo(
                self.hub, step["tier"], step.get("objects", []),
                allow_list=step.get("allow_list"),
                repository_id=step.get("repository_id"),
                force_deny=step.get("force_deny", False))
            self.mocks.append(mock)
            self._refresh_pids()
        elif op == "register_source":
            source = spawn_mock_source(
                self.hub, step["kind"], step.get("records", []),
                source_id=step["source_id"], mapping=step.get("mapping", []),
                scrape=step.get("scrape", False))
            self.sources[step["source_id"]] = source
        elif op == "login":
            user = step["user"]
            base = getattr(self, "api_base", None)
            if base:
                body = fetch_json("POST", f"{base}/mock-idp/login",
                                  body={"username": user})
                self.tokens[user] = body["token"]
            else:
                from ..auth import Principal

                if not self.hub.auth.has_user(user):
                    self.hub.auth.register_user(Principal(
                        user_id=user, email=f"{user}@mock-idp.local"))
                self.tokens[user] = self.hub.auth.issue_token(
                    user, ["read", "metadata_write"], audience="portal").signed
        elif op == "claim":
            guid = self._study(step["study"])
            user = self.hub.auth.get_user(step["user"])
            token = self.claim_tokens.get(guid) or self.hub.registration.issue_claim_token(guid)
            self.hub.registration.claim_study(user, guid, token)
        elif op == "link_nct":
            guid = self._study(step["study"])
            user = self.hub.auth.get_user(step["user"])
            try:
                self.hub.registration.link_nct(user, guid, step["nct_id"])
            except RegistryMiss:
                if not step.get("expect_miss", False):
                    raise
        elif op == "submit_slmd":
            guid = self._study(step["study"])
            user = self.hub.auth.get_user(step["user"])
            self.hub.registration.submit_slmd(user, guid, step["fields"])
        elif op == "attach_vlmd":
            guid = self._study(step["study"])
            user = self.hub.auth.get_user(step["user"])
            self.hub.registration.attach_vlmd(user, guid, step["dictionary"])
        elif op == "harvest":
            self.hub.adapters.harvest_once(step["source_id"])
        elif op == "fetch_url":
            self._fetch_url(step, report)
        elif op == "tick":
            seconds = step.get("seconds", 1)
            if hasattr(self.hub.clock, "advance"):
                self.hub.clock.advance(seconds)
            self.hub.adapters.schedule_tick(self.hub.clock.now())
        elif op == "rebuild_index":
            self.hub.search.rebuild_index()
        elif op == "deliver_reports":
            day = self.hub.clock.now().date()
            for repo in self.hub.registry.list():
                self.hub.gateway.deliver_report(repo.repository_id, day)
        elif op == "assert":
            self._assert(step, report)

    def _fetch_url(self, step: dict, report: ScenarioReport) -> None:
        token = self._token(step["user"])
        pid = self._pid(step["pid"])
        expect = step.get("expect", "issued")
        try:
            url, _expires = self.hub.gateway.fetch_access_url(token, pid)
            outcome = "issued"
        except Denied:
            outcome = "denied"
            url = None
        if outcome != expect:
            raise ScriptError(f"fetch_url expected {expect}, got {outcome}")
        if url and step.get("download", False):
            if url.startswith("bucket://"):
                raise ScriptError("bucket URL not resolvable without a service URL")
            nbytes, _digest = download_discard(url)
            self.bytes_moved += nbytes

    # -- assertions ---------------------------------------------------------------

    def _assert(self, step: dict, report: ScenarioReport) -> None:
        kind = step["kind"]
        ok, detail = False, ""
        if kind == "stats_equals":
            got = self.hub.search.overview_stats()
            expect = step["expect"]
            ok = got == expect
            detail = f"expected {expect}, got {got}"
        elif kind == "search_hits":
            self.hub.search.maybe_rebuild(force=True)
            guids, total = self.hub.search.search(
                text=step.get("text"),
                facet_selections=step.get("facets"),
                limit=step.get("limit", 1000))
            expect_guids = [self._study(r) for r in step.get("expect_guids", [])]
            if "expect_total" in step:
                ok = total == step["expect_total"]
                detail = f"total {total}, expected {step['expect_total']}"
            else:
                ok = guids == sorted(expect_guids)
                detail = f"guids {guids}, expected {sorted(expect_guids)}"
            if ok and "expect_contains" in step:
                needed = {self._study(r) for r in step["expect_contains"]}
                ok = needed.issubset(set(guids))
                detail = f"{needed} not all in {guids}" if not ok else detail
        elif kind == "usage_counts":
            events = self.hub.usage.events(repository_id=step.get("repository_id"))
            got = sum(1 for e in events if e.action == step["action"])
            ok = got == step["expect"]
            detail = f"{step['action']} count {got}, expected {step['expect']}"
        elif kind == "bytes_moved_gte":
            ok = self.bytes_moved >= step["bytes"]
            detail = f"moved {self.bytes_moved} bytes, need >= {step['bytes']}"
        elif kind == "disk_delta_lt":
            delta = self.hub.store_size_bytes() - self.disk_baseline
            ok = delta < step["bytes"]
            detail = f"hub disk delta {delta} bytes, cap {step['bytes']}"
        elif kind == "study_state":
            state = self.hub.registration.get_study(self._study(step["study"])).state
            ok = state == step["expect"]
            detail = f"state {state}, expected {step['expect']}"
        elif kind == "doc_block_exists":
            doc = self.hub.metadata.get_document(self._study(step["study"]))
            ok = step["block"] in doc.blocks
            detail = f"blocks {doc.blocks}, wanted {step['block']}"
        elif kind == "event_conservation":
            issued_or_denied = [e for e in self.hub.usage.events()
                                if e.action in ("url_issued", "denied")]
            ok = len(issued_or_denied) == step["expect"]
            detail = f"{len(issued_or_denied)} access events, expected {step['expect']}"
        else:
            raise ScriptError(f"unknown assert kind {kind!r}")
        report.assertions.append({"kind": kind, "ok": ok, "detail": detail})
