"""Faceted and free-text search over the aggregated metadata.

The index is an immutable snapshot: tokens over every string leaf of every
document (which covers data-dictionary variable names attached under the
vlmd block), plus configured facet postings. Rebuilds swap the snapshot
atomically; searches read whichever snapshot was current when they began.

Overview statistics are computed live from the underlying stores, never
from the index, so they cannot lag registration.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Optional

from .clock import SystemClock
from .errors import UnknownFacet
from .treepath import iter_string_leaves, parse_path, resolve_path

logger = logging.getLogger(__name__)

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")
MIN_TOKEN_LEN = 2
REBUILD_DEBOUNCE_S = 5.0


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if len(t) >= MIN_TOKEN_LEN]


@dataclass(frozen=True)
class FacetConfig:
    facet_name: str
    source_path: str
    multi_valued: bool = False

    @classmethod
    def from_json(cls, data: dict) -> "FacetConfig":
        return cls(facet_name=data["facet_name"], source_path=data["source_path"],
                   multi_valued=bool(data.get("multi_valued", False)))


@dataclass
class SearchIndex:
    token_postings: dict[str, set[str]]
    facet_values: dict[str, dict[str, set[str]]]
    all_guids: set[str]
    built_at: datetime
    doc_count: int
    skipped: int = 0


def _facet_strings(value: Any, multi_valued: bool) -> list[str]:
    def scalar(v) -> Optional[str]:
        if isinstance(v, str):
            return v
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, float)):
            return json.dumps(v)
        return None

    if isinstance(value, list):
        if not multi_valued:
            return []
        return [s for s in (scalar(v) for v in value) if s is not None]
    s = scalar(value)
    return [s] if s is not None else []


class SearchService:
    def __init__(self, metadata_store, facets: list[FacetConfig], clock=None,
                 registration=None, registry=None, pid_index=None,
                 debounce_s: float = REBUILD_DEBOUNCE_S):
        self._store = metadata_store
        self._facets = {f.facet_name: f for f in facets}
        if len(self._facets) != len(facets):
            raise UnknownFacet("facet names must be unique")
        self._clock = clock or SystemClock()
        self._registration = registration
        self._registry = registry
        self._pids = pid_index
        self._debounce_s = debounce_s
        self._index: Optional[SearchIndex] = None
        self._dirty_since: Optional[datetime] = None
        self._lock = threading.Lock()

    # -- build ------------------------------------------------------------

    def rebuild_index(self) -> SearchIndex:
        postings: dict[str, set[str]] = {}
        facet_values: dict[str, dict[str, set[str]]] = {
            name: {} for name in self._facets}
        parsed = {name: parse_path(f.source_path) for name, f in self._facets.items()}
        all_guids: set[str] = set()
        count = 0
        skipped = 0
        for guid in self._store.all_guids():
            try:
                doc = self._store.get_document(guid)
            except Exception:
                skipped += 1
                continue
            count += 1
            all_guids.add(guid)
            tokens = set()
            for leaf in iter_string_leaves(doc.payload):
                tokens.update(tokenize(leaf))
            for token in tokens:
                postings.setdefault(token, set()).add(guid)
            for name, facet in self._facets.items():
                found, value = resolve_path(doc.payload, parsed[name])
                if not found:
                    continue
                for s in _facet_strings(value, facet.multi_valued):
                    facet_values[name].setdefault(s, set()).add(guid)
        index = SearchIndex(
            token_postings=postings, facet_values=facet_values, all_guids=all_guids,
            built_at=self._clock.now(), doc_count=count, skipped=skipped)
        with self._lock:
            self._index = index
            self._dirty_since = None
        if skipped:
            logger.warning("index rebuild skipped %d malformed documents", skipped)
        return index

    def notify_change(self, _guid: str = "") -> None:
        with self._lock:
            if self._dirty_since is None:
                self._dirty_since = self._clock.now()

    def maybe_rebuild(self, force: bool = False) -> bool:
        """Debounced event-driven rebuild; returns True when a rebuild ran."""
        with self._lock:
            if self._index is None or force:
                due = True
            elif self._dirty_since is None:
                due = False
            else:
                age = (self._clock.now() - self._dirty_since).total_seconds()
                due = age >= self._debounce_s
        if due:
            self.rebuild_index()
        return due

    def _current(self) -> SearchIndex:
        with self._lock:
            index = self._index
        if index is None:
            return self.rebuild_index()
        return index

    # -- query -------------------------------------------------------------

    def _match(self, index: SearchIndex, text: Optional[str],
               selections: dict[str, list[str]]) -> set[str]:
        """AND across facets, OR within a facet, AND with text-token conjunction."""
        for name in selections:
            if name not in self._facets:
                raise UnknownFacet(name)
        candidates = set(index.all_guids)
        if text:
            for token in tokenize(text):
                candidates &= index.token_postings.get(token, set())
        for name, values in selections.items():
            if not values:
                continue
            union: set[str] = set()
            for value in values:
                union |= index.facet_values[name].get(value, set())
            candidates &= union
        return candidates

    def search(self, text: Optional[str] = None,
               facet_selections: Optional[dict[str, list[str]]] = None,
               limit: int = 50, offset: int = 0) -> tuple[list[str], int]:
        index = self._current()
        matched = sorted(self._match(index, text, facet_selections or {}))
        return matched[offset:offset + limit], len(matched)

    def facet_counts(self, current_selections: Optional[dict[str, list[str]]] = None,
                     text: Optional[str] = None) -> dict[str, dict[str, int]]:
        index = self._current()
        guids = self._match(index, text, current_selections or {})
        out: dict[str, dict[str, int]] = {}
        for name in self._facets:
            per_value = {}
            for value, members in index.facet_values[name].items():
                n = len(members & guids)
                if n:
                    per_value[value] = n
            out[name] = dict(sorted(per_value.items()))
        return out

    def facet_names(self) -> list[str]:
        return sorted(self._facets)

    # -- stats ---------------------------------------------------------------

    def overview_stats(self) -> dict[str, int]:
        states = self._registration.state_counts() if self._registration else {}
        claimed = states.get("CLAIMED", 0)
        slmd = states.get("SLMD_SUBMITTED", 0)
        vlmd = states.get("VLMD_ATTACHED", 0)
        return {
            "searchable_studies": self._registration.count() if self._registration else 0,
            "connected_repositories": self._registry.count() if self._registry else 0,
            "registered_studies": claimed + slmd + vlmd,
            "studies_with_slmd": slmd + vlmd,
            "studies_with_vlmd": vlmd,
            "available_datasets": self._pids.count() if self._pids else 0,
        }


def load_facets(data: list[dict]) -> list[FacetConfig]:
    return [FacetConfig.from_json(d) for d in data]


DEFAULT_FACETS = [
    FacetConfig("repository", "repository.name"),
    FacetConfig("registration_state", "registration.state"),
    FacetConfig("nih_institute", "grant_source.institute"),
    FacetConfig("study_type", "slmd.fields.design.study_type"),
]
