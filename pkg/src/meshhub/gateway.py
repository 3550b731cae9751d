"""The hub's edge to mesh members.

Three capability tiers reflect how much of a FAIR API a repository offers:

* FULL_API: metadata, data, and auth endpoints. Data access is brokered
  on behalf of the user and the repository makes the authorization call.
* METADATA_ONLY: a metadata endpoint plus a cloud bucket; the hub issues
  signed bucket URLs against the repository's allow list.
* BUCKET_ONLY: just the bucket and allow list; the hub also mints the PIDs.

The hub relays or signs time-limited URLs and records a usage event for
every access decision. It never reads, caches, or re-serves object bytes.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import logging
import threading
import urllib.parse
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import Optional

from .clock import SystemClock
from .errors import Denied, MalformedPayload, UnknownRepository
from .httpkit import request_json
from .ids import PID_RE
from .journal import Journal
from .pid_index import validate_checksums

logger = logging.getLogger(__name__)

TIERS = ("FULL_API", "METADATA_ONLY", "BUCKET_ONLY")
ACTIONS = ("resolved", "url_issued", "denied")

BUCKET_URL_TTL_S = 300
REPORT_MAX_ATTEMPTS = 3

REQUIREMENTS = (
    (1, "objects carry persistent identifiers"),
    (2, "metadata retrievable by PID"),
    (3, "data access method retrievable by PID"),
    (4, "authentication and authorization API"),
    (5, "on-behalf-of access for analysis environments"),
)


@dataclass
class CapabilityDescriptor:
    supported_object_kinds: list[str] = field(default_factory=lambda: ["file"])
    minimum_metadata_fields: list[str] = field(default_factory=lambda: ["title"])
    governance_note: str = ""

    def to_json(self) -> dict:
        return {
            "supported_object_kinds": list(self.supported_object_kinds),
            "minimum_metadata_fields": list(self.minimum_metadata_fields),
            "governance_note": self.governance_note,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CapabilityDescriptor":
        return cls(
            supported_object_kinds=list(data.get("supported_object_kinds", ["file"])),
            minimum_metadata_fields=list(data.get("minimum_metadata_fields", [])),
            governance_note=data.get("governance_note", ""),
        )


@dataclass
class BucketSpec:
    name: str
    allow_list: set[str] = field(default_factory=set)
    # simulation plumbing: where hub-signed URLs resolve; bucket:// when absent
    service_url: Optional[str] = None

    def to_json(self) -> dict:
        return {"name": self.name, "allow_list": sorted(self.allow_list),
                "service_url": self.service_url}

    @classmethod
    def from_json(cls, data: dict) -> "BucketSpec":
        return cls(name=data["name"], allow_list=set(data.get("allow_list", [])),
                   service_url=data.get("service_url"))


@dataclass
class RepositoryDescriptor:
    repository_id: str
    display_name: str
    tier: str
    endpoints: dict[str, str] = field(default_factory=dict)
    bucket: Optional[BucketSpec] = None
    report_sink: str = ""
    sia: CapabilityDescriptor = field(default_factory=CapabilityDescriptor)

    def to_json(self) -> dict:
        return {
            "repository_id": self.repository_id,
            "display_name": self.display_name,
            "tier": self.tier,
            "endpoints": dict(self.endpoints),
            "bucket": self.bucket.to_json() if self.bucket else None,
            "report_sink": self.report_sink,
            "sia": self.sia.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "RepositoryDescriptor":
        return cls(
            repository_id=data["repository_id"],
            display_name=data.get("display_name", data["repository_id"]),
            tier=data["tier"],
            endpoints=dict(data.get("endpoints", {})),
            bucket=BucketSpec.from_json(data["bucket"]) if data.get("bucket") else None,
            report_sink=data.get("report_sink", ""),
            sia=CapabilityDescriptor.from_json(data.get("sia", {})),
        )


@dataclass(frozen=True)
class UsageEvent:
    event_id: str
    pid: str
    user_id: str
    repository_id: str
    timestamp: datetime
    action: str

    def to_json(self) -> dict:
        return {
            "event_id": self.event_id,
            "pid": self.pid,
            "user_id": self.user_id,
            "repository_id": self.repository_id,
            "timestamp": self.timestamp.isoformat(),
            "action": self.action,
        }


@dataclass
class RequirementResult:
    number: int
    requirement: str
    status: str  # pass | fallback | fail
    evidence: str

    def to_json(self) -> dict:
        return {"number": self.number, "requirement": self.requirement,
                "status": self.status, "evidence": self.evidence}


@dataclass
class ConformanceReport:
    repository_id: str
    tier: str
    probed_at: datetime
    results: list[RequirementResult]

    def matrix(self) -> list[str]:
        return [r.status for r in sorted(self.results, key=lambda r: r.number)]

    def to_json(self) -> dict:
        return {"repository_id": self.repository_id, "tier": self.tier,
                "probed_at": self.probed_at.isoformat(),
                "results": [r.to_json() for r in self.results]}


class RepositoryRegistry:
    def __init__(self, config_path=None):
        self._repos: dict[str, RepositoryDescriptor] = {}
        self._lock = threading.Lock()
        self._config_path = config_path
        if config_path is not None:
            from pathlib import Path

            p = Path(config_path)
            if p.exists():
                for data in json.loads(p.read_text()):
                    self.register(RepositoryDescriptor.from_json(data), persist=False)

    def register(self, desc: RepositoryDescriptor, persist: bool = True) -> RepositoryDescriptor:
        self._validate(desc)
        with self._lock:
            self._repos[desc.repository_id] = desc
        if persist:
            self._save()
        return desc

    @staticmethod
    def _validate(desc: RepositoryDescriptor) -> None:
        if desc.tier not in TIERS:
            raise MalformedPayload(f"unknown tier {desc.tier!r}")
        if not desc.report_sink:
            raise MalformedPayload("report_sink required for every repository")
        if not desc.sia.minimum_metadata_fields:
            raise MalformedPayload("sia.minimum_metadata_fields must be nonempty")
        needs = {"FULL_API": ("metadata", "data", "auth"), "METADATA_ONLY": ("metadata",),
                 "BUCKET_ONLY": ()}[desc.tier]
        missing = [k for k in needs if not desc.endpoints.get(k)]
        if missing:
            raise MalformedPayload(f"tier {desc.tier} requires endpoints {missing}")
        if desc.tier in ("METADATA_ONLY", "BUCKET_ONLY") and desc.bucket is None:
            raise MalformedPayload(f"tier {desc.tier} requires a bucket")

    def _save(self) -> None:
        if self._config_path is None:
            return
        from pathlib import Path

        p = Path(self._config_path)
        p.parent.mkdir(parents=True, exist_ok=True)
        with self._lock:
            data = [r.to_json() for r in sorted(self._repos.values(),
                                                key=lambda r: r.repository_id)]
        p.write_text(json.dumps(data, indent=2) + "\n")

    def get(self, repository_id: str) -> Optional[RepositoryDescriptor]:
        with self._lock:
            return self._repos.get(repository_id)

    def require(self, repository_id: str) -> RepositoryDescriptor:
        desc = self.get(repository_id)
        if desc is None:
            raise UnknownRepository(repository_id)
        return desc

    def list(self) -> list[RepositoryDescriptor]:
        with self._lock:
            return sorted(self._repos.values(), key=lambda r: r.repository_id)

    def count(self) -> int:
        with self._lock:
            return len(self._repos)


class UsageLog:
    def __init__(self, journal_path=None, clock=None):
        self._clock = clock or SystemClock()
        self._journal = Journal(journal_path)
        self._events: list[UsageEvent] = []
        self._counter = 0
        self._lock = threading.Lock()
        for rec in self._journal.replay():
            self._events.append(UsageEvent(
                event_id=rec["event_id"], pid=rec["pid"], user_id=rec["user_id"],
                repository_id=rec["repository_id"],
                timestamp=datetime.fromisoformat(rec["timestamp"]), action=rec["action"]))
            self._counter = len(self._events)

    def record(self, pid: str, user_id: str, repository_id: str, action: str) -> UsageEvent:
        if action not in ACTIONS:
            raise MalformedPayload(f"unknown usage action {action!r}")
        with self._lock:
            self._counter += 1
            event = UsageEvent(
                event_id=f"evt-{self._counter:06d}",
                pid=pid, user_id=user_id, repository_id=repository_id,
                timestamp=self._clock.now(), action=action)
            self._events.append(event)
        self._journal.append(event.to_json())
        return event

    def events(self, repository_id: Optional[str] = None,
               day: Optional[date] = None) -> list[UsageEvent]:
        with self._lock:
            out = list(self._events)
        if repository_id is not None:
            out = [e for e in out if e.repository_id == repository_id]
        if day is not None:
            out = [e for e in out if e.timestamp.date() == day]
        return out

    def count(self) -> int:
        with self._lock:
            return len(self._events)


class RepositoryGateway:
    def __init__(self, registry: RepositoryRegistry, pid_index, auth, usage: UsageLog,
                 clock=None, signing_key: str | bytes = "hub-bucket-key",
                 http=request_json):
        self._registry = registry
        self._pids = pid_index
        self._auth = auth
        self._usage = usage
        self._clock = clock or SystemClock()
        self._key = signing_key.encode() if isinstance(signing_key, str) else signing_key
        self._http = http
        self._delivered: dict[str, int] = {}

    # -- data access -------------------------------------------------------

    def fetch_access_url(self, token_str: str, pid: str) -> tuple[str, datetime]:
        token = self._auth.validate_token(token_str)
        record = self._pids.resolve_pid(pid)
        repo = self._registry.require(record.repository_id)
        if repo.tier == "FULL_API":
            return self._forward_on_behalf(token.user_id, record, repo)
        return self._issue_bucket_url(token.user_id, record, repo)

    def _forward_on_behalf(self, user_id, record, repo) -> tuple[str, datetime]:
        url = (f"{repo.endpoints['data'].rstrip('/')}"
               f"/objects/{urllib.parse.quote(record.pid, safe='')}/url"
               f"?user={urllib.parse.quote(user_id, safe='')}")
        try:
            status, body = self._http("GET", url, headers={"X-On-Behalf-Of": user_id})
        except OSError as exc:
            self._usage.record(record.pid, user_id, repo.repository_id, "denied")
            raise Denied(f"repository unreachable: {exc}") from exc
        if status == 200 and isinstance(body, dict) and body.get("url"):
            self._usage.record(record.pid, user_id, repo.repository_id, "url_issued")
            return body["url"], datetime.fromisoformat(body["expires_at"])
        self._usage.record(record.pid, user_id, repo.repository_id, "denied")
        raise Denied(f"repository {repo.repository_id} refused access to {record.pid}")

    def _issue_bucket_url(self, user_id, record, repo) -> tuple[str, datetime]:
        method = next((m for m in record.access_methods if m.kind == "bucket"), None)
        if method is None or repo.bucket is None:
            self._usage.record(record.pid, user_id, repo.repository_id, "denied")
            raise Denied(f"{record.pid} has no bucket access method")
        # controlled data requires the repository's allow list; open data
        # needs only an authenticated caller (paper's bucket fallback)
        if method.requires_authorization and user_id not in repo.bucket.allow_list:
            self._usage.record(record.pid, user_id, repo.repository_id, "denied")
            raise Denied(f"user {user_id} not on allow list for {repo.repository_id}")
        bucket_name, key = self._split_bucket_locator(method.locator)
        expires = self._clock.now() + timedelta(seconds=BUCKET_URL_TTL_S)
        expires_ts = int(expires.timestamp())
        sig = self.sign_bucket_url(bucket_name, key, user_id, expires_ts)
        qs = urllib.parse.urlencode({"user": user_id, "expires": expires_ts, "sig": sig})
        if repo.bucket.service_url:
            base = repo.bucket.service_url.rstrip("/")
            url = f"{base}/bucket/{bucket_name}/{key}?{qs}"
        else:
            url = f"bucket://{bucket_name}/{key}?{qs}"
        self._usage.record(record.pid, user_id, repo.repository_id, "url_issued")
        return url, expires

    def sign_bucket_url(self, bucket: str, key: str, user_id: str, expires_ts: int) -> str:
        message = f"{bucket}\n{key}\n{user_id}\n{expires_ts}".encode("utf-8")
        return hmac.new(self._key, message, hashlib.sha256).hexdigest()

    @staticmethod
    def _split_bucket_locator(locator: str) -> tuple[str, str]:
        if not locator.startswith("bucket://"):
            raise MalformedPayload(f"not a bucket locator: {locator!r}")
        rest = locator[len("bucket://"):]
        bucket, _, key = rest.partition("/")
        if not bucket or not key:
            raise MalformedPayload(f"bucket locator needs name and key: {locator!r}")
        return bucket, key

    # -- usage reporting ------------------------------------------------------

    def record_usage(self, pid: str, user_id: str, repository_id: str, action: str) -> UsageEvent:
        return self._usage.record(pid, user_id, repository_id, action)

    def usage_report(self, repository_id: str, day: date) -> dict:
        self._registry.require(repository_id)
        events = self._usage.events(repository_id=repository_id, day=day)
        counts = {action: 0 for action in ACTIONS}
        by_user: dict[str, list] = {}
        for e in events:
            counts[e.action] += 1
            by_user.setdefault(e.user_id, []).append(e.to_json())
        return {
            "repository_id": repository_id,
            "day": day.isoformat(),
            "counts": counts,
            "users": {u: sorted(evs, key=lambda d: d["event_id"])
                      for u, evs in sorted(by_user.items())},
        }

    def deliver_report(self, repository_id: str, day: date) -> int:
        """POST the daily digest to the repository's report sink.

        At-least-once: retries on failure; the idempotency key lets the sink
        drop duplicates. Returns the number of attempts made."""
        repo = self._registry.require(repository_id)
        digest = self.usage_report(repository_id, day)
        payload = {"idempotency_key": f"{repository_id}:{day.isoformat()}", "digest": digest}
        attempts = 0
        last_error = None
        while attempts < REPORT_MAX_ATTEMPTS:
            attempts += 1
            try:
                status, _ = self._http("POST", repo.report_sink, body=payload)
            except OSError as exc:
                last_error = str(exc)
                continue
            if 200 <= status < 300:
                self._delivered[payload["idempotency_key"]] = attempts
                return attempts
            last_error = f"sink returned {status}"
        raise Denied(f"report delivery to {repository_id} failed after "
                     f"{attempts} attempts: {last_error}")

    # -- conformance ---------------------------------------------------------

    def probe_capabilities(self, repository_id: str) -> ConformanceReport:
        repo = self._registry.require(repository_id)
        results = [
            self._probe_pids(repo),
            self._probe_metadata_by_pid(repo),
            self._probe_data_by_pid(repo),
            self._probe_auth(repo),
            self._probe_on_behalf(repo),
        ]
        return ConformanceReport(
            repository_id=repository_id, tier=repo.tier,
            probed_at=self._clock.now(), results=results)

    def _repo_objects(self, repo) -> tuple[list, Optional[str]]:
        url = f"{repo.endpoints['metadata'].rstrip('/')}/objects"
        try:
            status, body = self._http("GET", url)
        except OSError as exc:
            return [], f"metadata endpoint unreachable: {exc}"
        if status != 200 or not isinstance(body, list):
            return [], f"metadata endpoint returned {status}"
        return body, None

    def _probe_pids(self, repo) -> RequirementResult:
        number, requirement = REQUIREMENTS[0]
        if repo.tier == "BUCKET_ONLY":
            n = len(self._pids.list_by_repository(repo.repository_id))
            return RequirementResult(number, requirement, "pass",
                                     f"hub-minted PIDs cover {n} bucket objects")
        objects, err = self._repo_objects(repo)
        if err:
            return RequirementResult(number, requirement, "fail", err)
        bad = []
        for obj in objects:
            pid = obj.get("pid", "")
            if not PID_RE.match(pid or ""):
                bad.append(f"{pid!r}: malformed pid")
                continue
            try:
                validate_checksums(obj.get("checksums") or {})
            except Exception as exc:
                bad.append(f"{pid}: {exc}")
            if not isinstance(obj.get("size_bytes"), int) or obj["size_bytes"] < 0:
                bad.append(f"{pid}: bad size")
        if bad:
            return RequirementResult(number, requirement, "fail",
                                     "invalid records: " + "; ".join(bad[:5]))
        return RequirementResult(number, requirement, "pass",
                                 f"{len(objects)} objects, all with valid PIDs and checksums")

    def _probe_metadata_by_pid(self, repo) -> RequirementResult:
        number, requirement = REQUIREMENTS[1]
        if repo.tier == "BUCKET_ONLY":
            records = self._pids.list_by_repository(repo.repository_id)
            return RequirementResult(number, requirement, "pass",
                                     f"hub index resolves {len(records)} PIDs")
        objects, err = self._repo_objects(repo)
        if err:
            return RequirementResult(number, requirement, "fail", err)
        if not objects:
            return RequirementResult(number, requirement, "pass", "no objects to probe")
        pid = objects[0].get("pid", "")
        url = (f"{repo.endpoints['metadata'].rstrip('/')}"
               f"/objects/{urllib.parse.quote(pid, safe='')}")
        try:
            status, body = self._http("GET", url)
        except OSError as exc:
            return RequirementResult(number, requirement, "fail", str(exc))
        if status == 200 and isinstance(body, dict) and body.get("pid") == pid:
            return RequirementResult(number, requirement, "pass",
                                     f"metadata for {pid} retrievable")
        return RequirementResult(number, requirement, "fail",
                                 f"lookup of {pid} returned {status}")

    def _probe_data_by_pid(self, repo) -> RequirementResult:
        number, requirement = REQUIREMENTS[2]
        if repo.tier == "BUCKET_ONLY":
            return RequirementResult(number, requirement, "pass",
                                     "bucket locators served under hub-signed URLs")
        if repo.tier == "METADATA_ONLY":
            if repo.bucket is not None:
                return RequirementResult(number, requirement, "fallback",
                                         "no data API; hub issues signed bucket URLs")
            return RequirementResult(number, requirement, "fail",
                                     "no data API and no bucket fallback")
        objects, err = self._repo_objects(repo)
        if err or not objects:
            return RequirementResult(number, requirement, "fail", err or "no objects")
        pid = objects[0]["pid"]
        url = (f"{repo.endpoints['data'].rstrip('/')}"
               f"/objects/{urllib.parse.quote(pid, safe='')}/url?user=conformance-probe")
        try:
            status, body = self._http("GET", url)
        except OSError as exc:
            return RequirementResult(number, requirement, "fail", str(exc))
        if status == 200 and isinstance(body, dict) and body.get("url"):
            return RequirementResult(number, requirement, "pass",
                                     f"data URL issued for {pid}")
        if status == 403:
            return RequirementResult(number, requirement, "pass",
                                     "data API answers; probe user denied by repository")
        return RequirementResult(number, requirement, "fail", f"data endpoint returned {status}")

    def _probe_auth(self, repo) -> RequirementResult:
        number, requirement = REQUIREMENTS[3]
        if repo.tier != "FULL_API":
            return RequirementResult(number, requirement, "fallback",
                                     "no repository auth API; hub authentication substitutes")
        base = repo.endpoints["auth"].rstrip("/")
        try:
            status, body = self._http("POST", f"{base}/token",
                                      body={"username": "conformance-probe"})
            if status != 200 or not isinstance(body, dict) or "token" not in body:
                return RequirementResult(number, requirement, "fail",
                                         f"token endpoint returned {status}")
            token = body["token"]
            status, body = self._http(
                "GET", f"{base}/validate?token={urllib.parse.quote(token, safe='')}")
        except OSError as exc:
            return RequirementResult(number, requirement, "fail", str(exc))
        if status == 200 and isinstance(body, dict) and body.get("valid"):
            return RequirementResult(number, requirement, "pass",
                                     "token issued and validated")
        return RequirementResult(number, requirement, "fail",
                                 f"validate endpoint returned {status}")

    def _probe_on_behalf(self, repo) -> RequirementResult:
        number, requirement = REQUIREMENTS[4]
        if repo.tier != "FULL_API":
            return RequirementResult(number, requirement, "fallback",
                                     "hub brokers access against the bucket allow list")
        objects, err = self._repo_objects(repo)
        if err or not objects:
            return RequirementResult(number, requirement, "fail", err or "no objects")
        pid = objects[0]["pid"]
        url = (f"{repo.endpoints['data'].rstrip('/')}"
               f"/objects/{urllib.parse.quote(pid, safe='')}/url?user=conformance-probe")
        try:
            status, body = self._http("GET", url,
                                      headers={"X-On-Behalf-Of": "conformance-probe"})
        except OSError as exc:
            return RequirementResult(number, requirement, "fail", str(exc))
        if status in (200, 403):
            return RequirementResult(number, requirement, "pass",
                                     "on-behalf-of channel answers with a decision")
        return RequirementResult(number, requirement, "fail",
                                 f"on-behalf-of request returned {status}")
