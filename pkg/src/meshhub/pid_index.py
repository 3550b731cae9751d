"""Persistent-identifier index for data objects.

Each record binds a PID to checksums, a size, and per-repository access
methods. The hub mints PIDs; it never touches the bytes they name.
Records are immutable after mint except access_methods, which a repository
may rotate atomically.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional

from .clock import SystemClock
from .errors import (
    InvalidChecksum,
    MalformedPayload,
    NoAccessMethod,
    UnknownPid,
    UnknownRepository,
)
from .ids import PidMinter, require_pid
from .journal import Journal

ACCESS_KINDS = ("repo_api", "bucket")
BUCKET_TIERS = ("METADATA_ONLY", "BUCKET_ONLY")

# hex digest lengths by algorithm
_DIGEST_LEN = {"md5": 32, "sha1": 40, "sha256": 64, "sha512": 128}
_HEX = set("0123456789abcdef")


@dataclass(frozen=True)
class AccessMethod:
    kind: str
    locator: str
    requires_authorization: bool = False

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "locator": self.locator,
            "requires_authorization": self.requires_authorization,
        }

    @classmethod
    def from_json(cls, data: dict) -> "AccessMethod":
        return cls(
            kind=data["kind"],
            locator=data["locator"],
            requires_authorization=bool(data.get("requires_authorization", False)),
        )


@dataclass(frozen=True)
class DataObjectRecord:
    pid: str
    size_bytes: int
    checksums: dict[str, str]
    access_methods: tuple[AccessMethod, ...]
    repository_id: str
    created_at: datetime

    def to_json(self) -> dict:
        return {
            "pid": self.pid,
            "size_bytes": self.size_bytes,
            "checksums": dict(self.checksums),
            "access_methods": [m.to_json() for m in self.access_methods],
            "repository_id": self.repository_id,
            "created_at": self.created_at.isoformat(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "DataObjectRecord":
        return cls(
            pid=data["pid"],
            size_bytes=data["size_bytes"],
            checksums=dict(data["checksums"]),
            access_methods=tuple(AccessMethod.from_json(m) for m in data["access_methods"]),
            repository_id=data["repository_id"],
            created_at=datetime.fromisoformat(data["created_at"]),
        )


def validate_checksums(checksums: dict) -> dict[str, str]:
    if not isinstance(checksums, dict) or not checksums:
        raise InvalidChecksum("at least one checksum required")
    out = {}
    for algo, digest in checksums.items():
        if algo not in _DIGEST_LEN:
            raise InvalidChecksum(f"unsupported algorithm {algo!r}")
        if not isinstance(digest, str):
            raise InvalidChecksum(f"{algo}: digest must be a string")
        d = digest.lower()
        if len(d) != _DIGEST_LEN[algo] or any(c not in _HEX for c in d):
            raise InvalidChecksum(f"{algo}: non-hex or wrong length digest")
        out[algo] = d
    if "md5" not in out and "sha256" not in out:
        raise InvalidChecksum("md5 or sha256 required")
    return out


class PidIndex:
    """Mint and resolve PIDs. ``repositories`` is any object with a
    ``get(repository_id)`` returning a descriptor with a ``tier`` attribute,
    or None for unknown repositories."""

    def __init__(self, repositories, prefix: str = "heal", seed: Optional[int] = None,
                 journal_path=None, clock=None):
        self._repos = repositories
        self._minter = PidMinter(prefix=prefix, seed=seed)
        self._clock = clock or SystemClock()
        self._journal = Journal(journal_path)
        self._records: dict[str, DataObjectRecord] = {}
        self._by_repo: dict[str, list[str]] = {}
        self._lock = threading.Lock()
        for rec in self._journal.replay():
            self._insert(DataObjectRecord.from_json(rec), log=False)

    @property
    def prefix(self) -> str:
        return self._minter.prefix

    def mint_pid(self, repository_id: str, size_bytes: int, checksums: dict,
                 access_methods: list) -> DataObjectRecord:
        repo = self._repos.get(repository_id) if self._repos is not None else None
        if repo is None:
            raise UnknownRepository(repository_id)
        if not isinstance(size_bytes, int) or size_bytes < 0:
            raise MalformedPayload("size_bytes must be a non-negative integer")
        checksums = validate_checksums(checksums)
        methods = tuple(
            m if isinstance(m, AccessMethod) else AccessMethod.from_json(m)
            for m in access_methods
        )
        if not methods:
            raise NoAccessMethod(repository_id)
        self._validate_methods(methods, repo)

        with self._lock:
            while True:
                pid = self._minter.mint()
                if pid not in self._records:
                    break
            record = DataObjectRecord(
                pid=pid,
                size_bytes=size_bytes,
                checksums=checksums,
                access_methods=methods,
                repository_id=repository_id,
                created_at=self._clock.now(),
            )
            self._insert(record, log=True)
        return record

    def _validate_methods(self, methods, repo) -> None:
        for m in methods:
            if m.kind not in ACCESS_KINDS:
                raise MalformedPayload(f"unknown access method kind {m.kind!r}")
            if not m.locator:
                raise MalformedPayload("access method locator must be nonempty")
            if m.kind == "bucket":
                tier = getattr(repo, "tier", None)
                if tier not in BUCKET_TIERS:
                    raise MalformedPayload(
                        f"bucket access methods require tier in {BUCKET_TIERS}, repo is {tier}"
                    )
                if not m.locator.startswith("bucket://"):
                    raise MalformedPayload(f"bucket locator must be bucket://name/key, got {m.locator!r}")

    def _insert(self, record: DataObjectRecord, log: bool) -> None:
        # replays see a pid twice when access methods were rotated
        if record.pid not in self._records:
            self._by_repo.setdefault(record.repository_id, []).append(record.pid)
        self._records[record.pid] = record
        if log:
            self._journal.append(record.to_json())

    def resolve_pid(self, pid: str) -> DataObjectRecord:
        require_pid(pid)
        with self._lock:
            record = self._records.get(pid)
        if record is None:
            raise UnknownPid(pid)
        return record

    def list_by_repository(self, repository_id: str) -> list[DataObjectRecord]:
        if self._repos is not None and self._repos.get(repository_id) is None:
            raise UnknownRepository(repository_id)
        with self._lock:
            pids = sorted(self._by_repo.get(repository_id, []))
            return [self._records[p] for p in pids]

    def replace_access_methods(self, pid: str, access_methods: list) -> DataObjectRecord:
        """Repositories rotate URLs; everything else about a record is permanent."""
        methods = tuple(
            m if isinstance(m, AccessMethod) else AccessMethod.from_json(m)
            for m in access_methods
        )
        if not methods:
            raise NoAccessMethod(pid)
        with self._lock:
            record = self._records.get(pid)
            if record is None:
                raise UnknownPid(pid)
            repo = self._repos.get(record.repository_id) if self._repos is not None else None
            self._validate_methods(methods, repo)
            updated = DataObjectRecord(
                pid=record.pid,
                size_bytes=record.size_bytes,
                checksums=record.checksums,
                access_methods=methods,
                repository_id=record.repository_id,
                created_at=record.created_at,
            )
            self._records[pid] = updated
            self._journal.append(updated.to_json())
        return updated

    def count(self) -> int:
        with self._lock:
            return len(self._records)

    def close(self) -> None:
        self._journal.close()
