"""In-process mock mesh members on loopback ephemeral ports.

A mock repository serves whichever endpoints its tier owes the mesh:

* FULL_API: metadata + data + auth APIs, its own signed object URLs, and
  its own per-object authorization (the hub has no say).
* METADATA_ONLY: metadata API plus a bucket service.
* BUCKET_ONLY: just the bucket service, verifying hub-signed URLs.

Object bytes are generated deterministically on the fly; nothing is stored,
so multi-MiB scenarios stay cheap. Every mock also hosts a report sink that
dedupes digests by idempotency key and can fail on demand.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
import threading
from dataclasses import dataclass, field
from datetime import timedelta
from typing import Optional

from ..clock import SystemClock
from ..errors import PortExhausted
from ..gateway import BucketSpec, CapabilityDescriptor, RepositoryDescriptor
from ..httpkit import JsonHttpServer, RawResponse, Request, Router
from ..pid_index import AccessMethod

URL_TTL_S = 300
_CHUNK = 1 << 16


@dataclass
class MockObject:
    key: str
    size: int
    controlled: bool = False
    checksum: Optional[str] = None

    def __post_init__(self):
        if self.checksum is None:
            # claimed digest; the hub never verifies bytes, only shape
            self.checksum = hashlib.sha256(self.key.encode()).hexdigest()


def _byte_stream(seed: str, size: int):
    """Deterministic pseudo-random bytes, never materialized at once."""
    counter = 0
    remaining = size
    while remaining > 0:
        block = b""
        while len(block) < min(_CHUNK, remaining):
            block += hashlib.sha256(f"{seed}:{counter}".encode()).digest()
            counter += 1
        yield block[:min(_CHUNK, remaining)]
        remaining -= min(_CHUNK, remaining)


class _ReportSink:
    def __init__(self):
        self.by_key: dict[str, dict] = {}
        self.deliveries: list[str] = []
        self.fail_next = 0
        self._lock = threading.Lock()

    def handle(self, req: Request, **_):
        with self._lock:
            if self.fail_next > 0:
                self.fail_next -= 1
                return 503, {"error": "sink unavailable"}
            body = req.json() or {}
            key = body.get("idempotency_key", "")
            self.deliveries.append(key)
            self.by_key[key] = body.get("digest", {})
        return 200, {"accepted": True}


class MockRepository:
    def __init__(self, repository_id: str, tier: str, objects: list[MockObject],
                 allow_list: Optional[set[str]] = None, clock=None,
                 hub_bucket_key: str | bytes = "dev-bucket-signing-key",
                 force_deny: bool = False):
        self.repository_id = repository_id
        self.tier = tier
        self.objects = list(objects)
        self.allow_list = set(allow_list or ())
        self.force_deny = force_deny
        self.clock = clock or SystemClock()
        self._hub_key = (hub_bucket_key.encode()
                         if isinstance(hub_bucket_key, str) else hub_bucket_key)
        self._own_key = secrets.token_bytes(16)
        self._tokens: dict[str, str] = {}
        self.pid_map: dict[str, MockObject] = {}
        self.sink = _ReportSink()
        self.bytes_served = 0
        self._lock = threading.Lock()
        self.server = self._build_server()

    # -- wiring -------------------------------------------------------------

    def _build_server(self) -> JsonHttpServer:
        router = Router()
        router.add("POST", "/reports", self.sink.handle)
        if self.tier in ("FULL_API", "METADATA_ONLY"):
            router.add("GET", "/md/objects", self._list_objects)
            router.add("GET", "/md/objects/{pid:path}", self._object_metadata)
        if self.tier == "FULL_API":
            router.add("GET", "/data/objects/{pid:path}/url", self._issue_url)
            router.add("GET", "/objects/{key:path}", self._serve_repo_signed)
            router.add("POST", "/auth/token", self._auth_token)
            router.add("GET", "/auth/validate", self._auth_validate)
        if self.tier in ("METADATA_ONLY", "BUCKET_ONLY"):
            router.add("GET", "/bucket/{bucket}/{key:path}", self._serve_hub_signed)
            router.add("GET", "/bucket/{bucket}", self._bucket_listing)
        try:
            server = JsonHttpServer(router)
        except OSError as exc:
            raise PortExhausted(str(exc)) from exc
        return server.start()

    @property
    def base_url(self) -> str:
        return self.server.base_url

    @property
    def bucket_name(self) -> str:
        return f"{self.repository_id}-store"

    def descriptor(self) -> RepositoryDescriptor:
        endpoints = {}
        bucket = None
        if self.tier in ("FULL_API", "METADATA_ONLY"):
            endpoints["metadata"] = f"{self.base_url}/md"
        if self.tier == "FULL_API":
            endpoints["data"] = f"{self.base_url}/data"
            endpoints["auth"] = f"{self.base_url}/auth"
        if self.tier in ("METADATA_ONLY", "BUCKET_ONLY"):
            bucket = BucketSpec(name=self.bucket_name, allow_list=set(self.allow_list),
                                service_url=self.base_url)
        return RepositoryDescriptor(
            repository_id=self.repository_id,
            display_name=f"Mock {self.repository_id} ({self.tier})",
            tier=self.tier,
            endpoints=endpoints,
            bucket=bucket,
            report_sink=f"{self.base_url}/reports",
            sia=CapabilityDescriptor(
                supported_object_kinds=["file"],
                minimum_metadata_fields=["title", "size_bytes"],
                governance_note="simulated interoperability agreement"),
        )

    def access_method(self, obj: MockObject, pid: str) -> AccessMethod:
        if self.tier == "FULL_API":
            return AccessMethod(kind="repo_api",
                                locator=f"{self.base_url}/data/objects/{pid}/url",
                                requires_authorization=obj.controlled)
        return AccessMethod(kind="bucket",
                            locator=f"bucket://{self.bucket_name}/{obj.key}",
                            requires_authorization=obj.controlled)

    def bind_pid(self, pid: str, obj: MockObject) -> None:
        self.pid_map[pid] = obj

    def stop(self) -> None:
        self.server.stop()

    # -- repository-side authorization ------------------------------------------

    def authorizes(self, user: str, obj: MockObject) -> bool:
        if self.force_deny:
            return False
        if not obj.controlled:
            return True
        return user in self.allow_list

    # -- handlers -----------------------------------------------------------------

    def _list_objects(self, req: Request, **_):
        return 200, [
            {"pid": pid, "size_bytes": obj.size,
             "checksums": {"sha256": obj.checksum}}
            for pid, obj in sorted(self.pid_map.items())]

    def _object_metadata(self, req: Request, pid):
        obj = self.pid_map.get(pid)
        if obj is None:
            return 404, {"error": "unknown pid"}
        return 200, {"pid": pid, "size_bytes": obj.size,
                     "checksums": {"sha256": obj.checksum},
                     "key": obj.key, "controlled": obj.controlled}

    def _issue_url(self, req: Request, pid):
        obj = self.pid_map.get(pid)
        if obj is None:
            return 404, {"error": "unknown pid"}
        user = req.param("user") or req.headers.get("x-on-behalf-of", "")
        if not self.authorizes(user, obj):
            return 403, {"error": "Denied", "message": f"{user} not authorized"}
        expires = self.clock.now() + timedelta(seconds=URL_TTL_S)
        ts = int(expires.timestamp())
        sig = hmac.new(self._own_key, f"{obj.key}\n{ts}".encode(),
                       hashlib.sha256).hexdigest()
        return 200, {"url": f"{self.base_url}/objects/{obj.key}?expires={ts}&sig={sig}",
                     "expires_at": expires.isoformat()}

    def _serve_repo_signed(self, req: Request, key):
        obj = next((o for o in self.objects if o.key == key), None)
        if obj is None:
            return 404, {"error": "unknown key"}
        try:
            ts = int(req.param("expires", "0"))
        except ValueError:
            return 403, {"error": "bad expiry"}
        expected = hmac.new(self._own_key, f"{key}\n{ts}".encode(),
                            hashlib.sha256).hexdigest()
        if not hmac.compare_digest(expected, req.param("sig", "")):
            return 403, {"error": "bad signature"}
        if self.clock.now().timestamp() > ts:
            return 403, {"error": "expired"}
        return self._stream(obj)

    def _serve_hub_signed(self, req: Request, bucket, key):
        if bucket != self.bucket_name:
            return 404, {"error": "unknown bucket"}
        obj = next((o for o in self.objects if o.key == key), None)
        if obj is None:
            return 404, {"error": "unknown key"}
        user = req.param("user", "")
        try:
            ts = int(req.param("expires", "0"))
        except ValueError:
            return 403, {"error": "bad expiry"}
        message = f"{bucket}\n{key}\n{user}\n{ts}".encode("utf-8")
        expected = hmac.new(self._hub_key, message, hashlib.sha256).hexdigest()
        if not hmac.compare_digest(expected, req.param("sig", "")):
            return 403, {"error": "bad signature"}
        if self.clock.now().timestamp() > ts:
            return 403, {"error": "expired"}
        return self._stream(obj)

    def _bucket_listing(self, req: Request, bucket):
        if bucket != self.bucket_name:
            return 404, {"error": "unknown bucket"}
        return 200, [{"key": o.key, "size": o.size} for o in self.objects]

    def _stream(self, obj: MockObject) -> RawResponse:
        with self._lock:
            self.bytes_served += obj.size
        stream = _byte_stream(f"{self.repository_id}/{obj.key}", obj.size)
        return RawResponse(200, stream, content_length=obj.size)

    def _auth_token(self, req: Request, **_):
        body = req.json() or {}
        username = body.get("username", "")
        if not username:
            return 400, {"error": "username required"}
        token = secrets.token_hex(12)
        self._tokens[token] = username
        return 200, {"token": token}

    def _auth_validate(self, req: Request, **_):
        token = req.param("token", "")
        user = self._tokens.get(token)
        return 200, {"valid": user is not None, "user": user}


def spawn_mock_repo(hub, tier: str, objects: list[dict | MockObject],
                    allow_list=None, repository_id: Optional[str] = None,
                    force_deny: bool = False) -> MockRepository:
    """Start a mock, register it with the hub, and mint PIDs for its objects."""
    repository_id = repository_id or f"mock-{tier.lower()}-{hub.registry.count() + 1}"
    objs = [o if isinstance(o, MockObject) else MockObject(**o) for o in objects]
    mock = MockRepository(repository_id, tier, objs, allow_list=allow_list,
                          clock=hub.clock, hub_bucket_key=hub.config.bucket_signing_key,
                          force_deny=force_deny)
    hub.registry.register(mock.descriptor())
    for obj in objs:
        record = hub.pids.mint_pid(
            repository_id, obj.size, {"sha256": obj.checksum},
            [mock.access_method(obj, pid="pending")])
        if mock.tier == "FULL_API":
            # repo_api locators carry the pid; rebind now that it exists
            hub.pids.replace_access_methods(
                record.pid, [mock.access_method(obj, pid=record.pid)])
        mock.bind_pid(record.pid, obj)
    return mock


@dataclass
class MockSource:
    """External metadata source: GET /mock/{kind}/records [?key=...]."""

    kind: str
    records: list = field(default_factory=list)
    down: bool = False
    server: Optional[JsonHttpServer] = None

    def start(self) -> "MockSource":
        router = Router()
        router.add("GET", "/mock/{kind}/records", self._records)
        router.add("GET", "/mock/{kind}/page", self._page)
        self.server = JsonHttpServer(router).start()
        return self

    @property
    def endpoint(self) -> str:
        return f"{self.server.base_url}/mock/{self.kind}/records"

    @property
    def page_endpoint(self) -> str:
        return f"{self.server.base_url}/mock/{self.kind}/page"

    def _records(self, req: Request, kind):
        if self.down:
            return 503, {"error": "source down"}
        key = req.param("key")
        records = self.records
        if key is not None:
            records = [r for r in records
                       if r.get("guid") == key or r.get("id") == key]
        return 200, records

    def _page(self, req: Request, kind):
        """Static HTML rendering of the records, for scrape sources."""
        if self.down:
            return 503, {"error": "source down"}
        rows = []
        for r in self.records:
            fields = "".join(
                f'<span data-field="{k}">{v}</span>'
                for k, v in r.items() if k != "id")
            rows.append(f'<div data-record="{r.get("id", "")}">{fields}</div>')
        html = f"<html><body>{''.join(rows)}</body></html>"
        data = html.encode("utf-8")
        return RawResponse(200, [data], content_length=len(data), content_type="text/html")

    def stop(self) -> None:
        if self.server:
            self.server.stop()


def spawn_mock_source(hub, kind: str, records: list, source_id: str,
                      mapping: list[dict], interval_s: int = 3600,
                      scrape: bool = False) -> MockSource:
    from ..adapters import FieldMapping, SourceDescriptor

    source = MockSource(kind=kind, records=list(records)).start()
    desc = SourceDescriptor(
        source_id=source_id,
        kind=kind,
        endpoint=source.page_endpoint if scrape else source.endpoint,
        mapping=[FieldMapping(**m) for m in mapping],
        schedule_interval_s=interval_s)
    hub.adapters.register_source(desc)
    if kind == "trial_registry":
        hub.set_trial_source(source_id)
    return source
