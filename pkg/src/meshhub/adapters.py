"""Pluggable metadata harvesters.

An adapter pulls records from an external source, harmonizes them through
declarative field mappings, and writes the result into the source's own
provenance block of the matching document. Re-running against an unchanged
source is a no-op: writes happen only when the canonical serialization of
the block differs.

Sources never write outside their own block. The block name is derived
from the source kind (grant_registry -> grant_source, and so on), and
mapping targets are paths relative to that block.
"""

from __future__ import annotations

import json
import logging
import threading
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from datetime import datetime
from html.parser import HTMLParser
from typing import Any, Callable, Optional

from .clock import SystemClock
from .errors import (
    DuplicateGuid,
    DuplicateSource,
    InvalidMapping,
    MalformedPayload,
    TransformFailure,
    UnknownSource,
)
from .treepath import canonical_json, parse_path, resolve_path, set_path

logger = logging.getLogger(__name__)

SOURCE_KINDS = ("grant_registry", "trial_registry", "repository_api", "scrape")

# provenance block written by each source kind
KIND_BLOCKS = {
    "grant_registry": "grant_source",
    "trial_registry": "registry_source",
    "repository_api": "repository",
    "scrape": "scrape_source",
}

TRANSFORMS = ("identity", "to_string", "date_normalize_iso8601", "list_join_semicolon", "lowercase")

_DATE_FORMATS = (
    "%Y-%m-%d",
    "%b %d, %Y",
    "%B %d, %Y",
    "%m/%d/%Y",
    "%Y/%m/%d",
    "%d %b %Y",
    "%d %B %Y",
)

MIN_PRODUCTION_INTERVAL_S = 60


@dataclass(frozen=True)
class FieldMapping:
    source_path: str
    target_path: str
    transform: str = "identity"

    def to_json(self) -> dict:
        return {"source_path": self.source_path, "target_path": self.target_path,
                "transform": self.transform}


@dataclass
class SourceDescriptor:
    source_id: str
    kind: str
    endpoint: str
    mapping: list[FieldMapping]
    schedule_interval_s: int = 3600
    enabled: bool = True

    @property
    def block(self) -> str:
        return KIND_BLOCKS[self.kind]

    def to_json(self) -> dict:
        return {
            "source_id": self.source_id,
            "kind": self.kind,
            "endpoint": self.endpoint,
            "mapping": [m.to_json() for m in self.mapping],
            "schedule_interval_s": self.schedule_interval_s,
            "enabled": self.enabled,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SourceDescriptor":
        return cls(
            source_id=data["source_id"],
            kind=data["kind"],
            endpoint=data["endpoint"],
            mapping=[FieldMapping(**m) for m in data["mapping"]],
            schedule_interval_s=int(data.get("schedule_interval_s", 3600)),
            enabled=bool(data.get("enabled", True)),
        )


@dataclass
class HarvestRun:
    run_id: str
    source_id: str
    started_at: datetime
    finished_at: Optional[datetime] = None
    fetched: int = 0
    created: int = 0
    updated: int = 0
    unchanged: int = 0
    errors: list = field(default_factory=list)          # (record_key, message)
    field_warnings: list = field(default_factory=list)  # (record_key, target, message)
    failure: Optional[str] = None                       # source-level, e.g. unreachable

    def accounting_holds(self) -> bool:
        return self.fetched == self.created + self.updated + self.unchanged + len(self.errors)

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "source_id": self.source_id,
            "started_at": self.started_at.isoformat(),
            "finished_at": self.finished_at.isoformat() if self.finished_at else None,
            "fetched": self.fetched,
            "created": self.created,
            "updated": self.updated,
            "unchanged": self.unchanged,
            "errors": [list(e) for e in self.errors],
            "field_warnings": [list(w) for w in self.field_warnings],
            "failure": self.failure,
        }


# -- transforms ---------------------------------------------------------------


def apply_transform(transform: str, value: Any) -> Any:
    if transform == "identity":
        return value
    if transform == "to_string":
        if isinstance(value, str):
            return value
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, (int, float)):
            return json.dumps(value)
        if isinstance(value, (list, dict)):
            return canonical_json(value)
        raise TransformFailure(f"to_string: cannot stringify {value!r}")
    if transform == "date_normalize_iso8601":
        if not isinstance(value, str):
            raise TransformFailure(f"date: expected string, got {type(value).__name__}")
        text = value.strip()
        for fmt in _DATE_FORMATS:
            try:
                return datetime.strptime(text, fmt).strftime("%Y-%m-%d")
            except ValueError:
                continue
        try:
            return datetime.fromisoformat(text).strftime("%Y-%m-%d")
        except ValueError:
            raise TransformFailure(f"date: unparseable {value!r}") from None
    if transform == "list_join_semicolon":
        if not isinstance(value, list):
            raise TransformFailure("list_join: expected a list")
        parts = []
        for item in value:
            if isinstance(item, str):
                parts.append(item)
            elif isinstance(item, bool):
                parts.append("true" if item else "false")
            elif isinstance(item, (int, float)):
                parts.append(json.dumps(item))
            else:
                raise TransformFailure(f"list_join: non-scalar element {item!r}")
        return "; ".join(parts)
    if transform == "lowercase":
        if not isinstance(value, str):
            raise TransformFailure("lowercase: expected a string")
        return value.lower()
    raise TransformFailure(f"unknown transform {transform!r}")


def harmonize(mapping: list[FieldMapping], source_record: Any) -> dict:
    """Pure mapping interpreter. Missing source paths and failed transforms
    are skipped; the output holds exactly the targets that mapped cleanly."""
    tree, _ = harmonize_with_warnings(mapping, source_record)
    return tree


def harmonize_with_warnings(mapping: list[FieldMapping], source_record: Any) -> tuple[dict, list]:
    out: dict = {}
    warnings = []
    for fm in mapping:
        found, value = resolve_path(source_record, parse_path(fm.source_path))
        if not found:
            continue
        try:
            result = apply_transform(fm.transform, value)
        except TransformFailure as exc:
            warnings.append((fm.target_path, str(exc)))
            continue
        set_path(out, parse_path(fm.target_path), result)
    return out, warnings


# -- scrape record extraction ---------------------------------------------------


class _ScrapeParser(HTMLParser):
    """Records are elements carrying a data-record attribute; fields are
    descendants carrying data-field, contributing their text content."""

    def __init__(self):
        super().__init__()
        self.records: list[dict] = []
        self._record_depth = 0
        self._current: Optional[dict] = None
        self._field: Optional[str] = None
        self._text: list[str] = []

    def handle_starttag(self, tag, attrs):
        attrs = dict(attrs)
        if "data-record" in attrs and self._current is None:
            self._current = {}
            key = attrs.get("data-record") or ""
            if key:
                self._current["id"] = key
            self._record_depth = 1
            return
        if self._current is not None:
            self._record_depth += 1
            if "data-field" in attrs and self._field is None:
                self._field = attrs["data-field"]
                self._text = []

    def handle_endtag(self, tag):
        if self._current is None:
            return
        if self._field is not None:
            self._current[self._field] = "".join(self._text).strip()
            self._field = None
        self._record_depth -= 1
        if self._record_depth <= 0:
            self.records.append(self._current)
            self._current = None

    def handle_data(self, data):
        if self._field is not None:
            self._text.append(data)


def parse_scrape_records(html: str) -> list[dict]:
    parser = _ScrapeParser()
    parser.feed(html)
    return parser.records


# -- framework ---------------------------------------------------------------


def _default_fetcher(url: str, timeout: float = 10.0) -> bytes:
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read()


class AdapterFramework:
    def __init__(self, metadata_store, clock=None, fetcher: Callable[[str], bytes] | None = None,
                 min_interval_s: int = MIN_PRODUCTION_INTERVAL_S):
        self._store = metadata_store
        self._clock = clock or SystemClock()
        self._fetch = fetcher or _default_fetcher
        self._min_interval = min_interval_s
        self._sources: dict[str, SourceDescriptor] = {}
        self._runs: list[HarvestRun] = []
        self._run_counter = 0
        self._lock = threading.Lock()
        self._source_locks: dict[str, threading.Lock] = {}
        self._last_finished: dict[str, datetime] = {}

    # -- registration -----------------------------------------------------

    def register_source(self, desc: SourceDescriptor) -> str:
        if desc.kind not in SOURCE_KINDS:
            raise InvalidMapping(f"unknown source kind {desc.kind!r}")
        if desc.schedule_interval_s < self._min_interval:
            raise InvalidMapping(
                f"interval {desc.schedule_interval_s}s below minimum {self._min_interval}s")
        self._validate_mapping(desc)
        with self._lock:
            if desc.source_id in self._sources:
                raise DuplicateSource(desc.source_id)
            self._sources[desc.source_id] = desc
            self._source_locks[desc.source_id] = threading.Lock()
        return desc.source_id

    def _validate_mapping(self, desc: SourceDescriptor) -> None:
        foreign_blocks = set(KIND_BLOCKS.values()) - {desc.block}
        foreign_blocks.update({"slmd", "vlmd", "vlmd_refs"})
        for fm in desc.mapping:
            if fm.transform not in TRANSFORMS:
                raise InvalidMapping(f"unknown transform {fm.transform!r}")
            parse_path(fm.source_path)
            steps = parse_path(fm.target_path)
            if any(not isinstance(s, str) for s in steps):
                raise InvalidMapping(f"target {fm.target_path!r} may not use list indices")
            # targets are relative to the source's own block; naming another
            # block would smuggle foreign provenance inside
            if steps[0] in foreign_blocks:
                raise InvalidMapping(
                    f"target {fm.target_path!r} crosses into block {steps[0]!r}")

    def get_source(self, source_id: str) -> SourceDescriptor:
        with self._lock:
            desc = self._sources.get(source_id)
        if desc is None:
            raise UnknownSource(source_id)
        return desc

    def list_sources(self) -> list[SourceDescriptor]:
        with self._lock:
            return sorted(self._sources.values(), key=lambda d: d.source_id)

    def load_config(self, sources: list[dict]) -> None:
        for data in sources:
            self.register_source(SourceDescriptor.from_json(data))

    # -- fetching -----------------------------------------------------------

    def _fetch_records(self, desc: SourceDescriptor, key: Optional[str] = None) -> list:
        url = desc.endpoint
        if key is not None:
            sep = "&" if "?" in url else "?"
            url = f"{url}{sep}key={urllib.parse.quote(key, safe='')}"
        raw = self._fetch(url)
        if desc.kind == "scrape":
            return parse_scrape_records(raw.decode("utf-8", errors="replace"))
        records = json.loads(raw)
        if not isinstance(records, list):
            raise ValueError("source endpoint must return a JSON list")
        return records

    # -- harvest ------------------------------------------------------------

    def harvest_once(self, source_id: str) -> HarvestRun:
        desc = self.get_source(source_id)
        lock = self._source_locks[source_id]
        with lock:
            return self._run_harvest(desc, records=None)

    def harvest_for_key(self, source_id: str, key: str, guid: str) -> HarvestRun:
        """Targeted harvest: fetch the record matching ``key`` and apply it to
        ``guid``'s document. Used by registration when an NCT id is linked."""
        desc = self.get_source(source_id)
        lock = self._source_locks[source_id]
        with lock:
            return self._run_harvest(desc, records=None, key=key, guid_override=guid)

    def _next_run(self, source_id: str) -> HarvestRun:
        with self._lock:
            self._run_counter += 1
            run = HarvestRun(
                run_id=f"run-{self._run_counter:06d}",
                source_id=source_id,
                started_at=self._clock.now(),
            )
            self._runs.append(run)
        return run

    def _run_harvest(self, desc: SourceDescriptor, records, key=None, guid_override=None) -> HarvestRun:
        run = self._next_run(desc.source_id)
        try:
            if records is None:
                records = self._fetch_records(desc, key=key)
        except (urllib.error.URLError, OSError, ValueError, json.JSONDecodeError) as exc:
            run.failure = f"source unreachable: {exc}"
            logger.warning("harvest %s: %s", desc.source_id, run.failure)
            self._finish(run)
            return run

        for i, record in enumerate(records):
            record_key = self._record_key(record, i)
            try:
                guid = guid_override if guid_override is not None else self._record_guid(record)
                subtree, warnings = harmonize_with_warnings(desc.mapping, record)
                for target, message in warnings:
                    run.field_warnings.append((record_key, target, message))
                outcome = self.diff_and_apply(guid, desc.block, subtree)
                setattr(run, outcome, getattr(run, outcome) + 1)
            except Exception as exc:  # per-record isolation: dirty upstream data
                run.errors.append((record_key, f"{type(exc).__name__}: {exc}"))
            run.fetched += 1
        self._finish(run)
        return run

    def _finish(self, run: HarvestRun) -> None:
        run.finished_at = self._clock.now()
        with self._lock:
            self._last_finished[run.source_id] = run.finished_at

    @staticmethod
    def _record_key(record, index: int) -> str:
        if isinstance(record, dict):
            for k in ("guid", "id", "nct_id"):
                if isinstance(record.get(k), str):
                    return record[k]
        return f"#{index}"

    @staticmethod
    def _record_guid(record) -> str:
        if not isinstance(record, dict):
            raise MalformedPayload("record is not a tree")
        for k in ("guid", "id"):
            if isinstance(record.get(k), str) and record[k]:
                return record[k]
        raise MalformedPayload("record carries no guid/id key")

    # -- diffing write ---------------------------------------------------------

    def diff_and_apply(self, guid: str, block: str, new_subtree: Any) -> str:
        if not self._store.has_document(guid):
            try:
                self._store.create_document(guid, {block: new_subtree})
                return "created"
            except DuplicateGuid:
                pass  # lost a create race; fall through to update path
        doc = self._store.get_document(guid)
        payload = doc.payload if isinstance(doc.payload, dict) else {}
        if block in payload and canonical_json(payload[block]) == canonical_json(new_subtree):
            return "unchanged"
        self._store.update_document(guid, block, new_subtree)
        return "updated"

    # -- scheduling ---------------------------------------------------------

    def schedule_tick(self, now: Optional[datetime] = None) -> list[HarvestRun]:
        """Run every enabled source whose last run finished at least one
        interval ago. A source already in flight is skipped, never queued."""
        now = now or self._clock.now()
        runs = []
        for desc in self.list_sources():
            if not desc.enabled:
                continue
            with self._lock:
                last = self._last_finished.get(desc.source_id)
            if last is not None and (now - last).total_seconds() < desc.schedule_interval_s:
                continue
            lock = self._source_locks[desc.source_id]
            if not lock.acquire(blocking=False):
                continue  # in flight
            try:
                runs.append(self._run_harvest(desc, records=None))
            finally:
                lock.release()
        return runs

    def runs(self, source_id: Optional[str] = None) -> list[HarvestRun]:
        with self._lock:
            snapshot = list(self._runs)
        if source_id is None:
            return snapshot
        return [r for r in snapshot if r.source_id == source_id]
