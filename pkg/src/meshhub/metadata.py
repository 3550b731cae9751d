"""Versioned, semi-structured key-value metadata store.

Documents are trees keyed by GUID. Top-level keys of a document are its
provenance blocks (grant_source, registry_source, slmd, ...). Every write
bumps the version by exactly one. All reads and queries are public.

Storage is an append-only journal of ``{guid, version, block, subtree, ts}``
lines with a materialized latest view in memory; replay rebuilds the view.
A create is journaled with ``block: null`` and the full payload as subtree.
"""

from __future__ import annotations

import copy
import threading
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Callable, Optional

from .clock import SystemClock
from .errors import DuplicateGuid, InvalidQuery, MalformedPayload, UnknownGuid
from .ids import BLOCK_RE, require_guid
from .journal import Journal
from .treepath import canonical_json, iter_string_leaves, parse_path, resolve_path, validate_tree

MAX_DOCUMENT_BYTES = 1 << 20  # metadata, not data
DEFAULT_QUERY_LIMIT = 1000

PREDICATES = ("equals", "contains", "exists")


@dataclass(frozen=True)
class MetadataDocument:
    guid: str
    payload: Any
    version: int
    created_at: datetime
    updated_at: datetime

    def block(self, name: str) -> Any:
        if isinstance(self.payload, dict):
            return self.payload.get(name)
        return None

    @property
    def blocks(self) -> list[str]:
        if isinstance(self.payload, dict):
            return sorted(self.payload)
        return []


@dataclass
class PathFilter:
    path: str
    predicate: str
    value: Any = None

    def __post_init__(self):
        if self.predicate not in PREDICATES:
            raise InvalidQuery(f"unknown predicate {self.predicate!r}")
        self.steps = parse_path(self.path)

    def matches(self, payload: Any) -> bool:
        found, node = resolve_path(payload, self.steps)
        if self.predicate == "exists":
            return found
        if not found:
            return False
        if self.predicate == "equals":
            return node == self.value
        # contains: substring for strings, membership for lists
        if isinstance(node, str):
            return isinstance(self.value, str) and self.value in node
        if isinstance(node, list):
            return self.value in node
        return False


@dataclass
class MetadataQuery:
    path_filters: list[PathFilter] = field(default_factory=list)
    free_text: Optional[str] = None
    limit: int = DEFAULT_QUERY_LIMIT
    offset: int = 0


@dataclass
class _Entry:
    payload: Any
    version: int
    created_at: datetime
    updated_at: datetime


class MetadataStore:
    """Concurrent-read store with single-writer-per-guid serialization."""

    def __init__(self, journal_path=None, clock=None, max_query_limit: int = DEFAULT_QUERY_LIMIT):
        self._clock = clock or SystemClock()
        self._journal = Journal(journal_path)
        self._max_limit = max_query_limit
        self._docs: dict[str, _Entry] = {}
        self._store_lock = threading.Lock()
        self._guid_locks: dict[str, threading.Lock] = {}
        self._listeners: list[Callable[[str], None]] = []
        self._replay()

    # -- persistence ------------------------------------------------------

    def _replay(self) -> None:
        for rec in self._journal.replay():
            guid = rec["guid"]
            ts = datetime.fromisoformat(rec["ts"])
            if rec["block"] is None:
                self._docs[guid] = _Entry(rec["subtree"], rec["version"], ts, ts)
            else:
                entry = self._docs[guid]
                entry.payload = {**entry.payload, rec["block"]: rec["subtree"]}
                entry.version = rec["version"]
                entry.updated_at = ts

    def _log(self, guid: str, version: int, block, subtree, ts: datetime) -> None:
        self._journal.append(
            {"guid": guid, "version": version, "block": block, "subtree": subtree,
             "ts": ts.isoformat()}
        )

    # -- change notification (search rebuild hook) ------------------------

    def add_listener(self, fn: Callable[[str], None]) -> None:
        self._listeners.append(fn)

    def _notify(self, guid: str) -> None:
        for fn in self._listeners:
            fn(guid)

    # -- locks -------------------------------------------------------------

    def _lock_for(self, guid: str) -> threading.Lock:
        with self._store_lock:
            lock = self._guid_locks.get(guid)
            if lock is None:
                lock = self._guid_locks[guid] = threading.Lock()
            return lock

    # -- operations --------------------------------------------------------

    def create_document(self, guid: str, payload: Any) -> MetadataDocument:
        require_guid(guid)
        validate_tree(payload, max_bytes=MAX_DOCUMENT_BYTES)
        payload = copy.deepcopy(payload)
        with self._lock_for(guid):
            if guid in self._docs:
                raise DuplicateGuid(guid)
            now = self._clock.now()
            entry = _Entry(payload, 1, now, now)
            with self._store_lock:
                self._docs[guid] = entry
            self._log(guid, 1, None, payload, now)
        self._notify(guid)
        return self._as_document(guid, entry)

    def update_document(self, guid: str, block: str, subtree: Any) -> MetadataDocument:
        if not BLOCK_RE.match(block or ""):
            raise MalformedPayload(f"bad block name {block!r}")
        validate_tree(subtree)
        subtree = copy.deepcopy(subtree)
        with self._lock_for(guid):
            entry = self._docs.get(guid)
            if entry is None:
                raise UnknownGuid(guid)
            if not isinstance(entry.payload, dict):
                raise MalformedPayload(f"document {guid} has no block structure")
            candidate = dict(entry.payload)
            candidate[block] = subtree
            validate_tree(candidate, max_bytes=MAX_DOCUMENT_BYTES)
            now = self._clock.now()
            # replace, never mutate: readers may hold the previous payload
            with self._store_lock:
                entry.payload = candidate
                entry.version += 1
                entry.updated_at = now
                version = entry.version
            self._log(guid, version, block, subtree, now)
            doc = self._as_document(guid, entry)
        self._notify(guid)
        return doc

    def get_document(self, guid: str) -> MetadataDocument:
        with self._store_lock:
            entry = self._docs.get(guid)
            if entry is None:
                raise UnknownGuid(guid)
            return self._as_document(guid, entry)

    def has_document(self, guid: str) -> bool:
        with self._store_lock:
            return guid in self._docs

    def query_documents(self, q: MetadataQuery) -> list[MetadataDocument]:
        if q.offset < 0:
            raise InvalidQuery("offset must be non-negative")
        if q.limit < 0 or q.limit > self._max_limit:
            raise InvalidQuery(f"limit must be in 0..{self._max_limit}")
        with self._store_lock:
            snapshot = [(guid, entry) for guid, entry in self._docs.items()]
        matched = []
        needle = q.free_text.lower() if q.free_text else None
        for guid, entry in sorted(snapshot, key=lambda kv: kv[0]):
            if not all(f.matches(entry.payload) for f in q.path_filters):
                continue
            if needle is not None and not self._text_match(entry.payload, needle):
                continue
            matched.append((guid, entry))
        page = matched[q.offset:q.offset + q.limit]
        with self._store_lock:
            return [self._as_document(guid, entry) for guid, entry in page]

    def count(self) -> int:
        with self._store_lock:
            return len(self._docs)

    def all_guids(self) -> list[str]:
        with self._store_lock:
            return sorted(self._docs)

    def content_hash(self) -> str:
        """Hash of the full store content (payloads only, not versions)."""
        import hashlib

        with self._store_lock:
            snapshot = sorted((g, e.payload) for g, e in self._docs.items())
        blob = canonical_json([[g, p] for g, p in snapshot])
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    # -- helpers -----------------------------------------------------------

    @staticmethod
    def _text_match(payload: Any, needle: str) -> bool:
        return any(needle in leaf.lower() for leaf in iter_string_leaves(payload))

    @staticmethod
    def _as_document(guid: str, entry: _Entry) -> MetadataDocument:
        return MetadataDocument(
            guid=guid,
            payload=copy.deepcopy(entry.payload),
            version=entry.version,
            created_at=entry.created_at,
            updated_at=entry.updated_at,
        )

    def close(self) -> None:
        self._journal.close()
