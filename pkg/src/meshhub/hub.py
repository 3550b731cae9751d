"""Assembles every service into one runnable hub.

A Hub owns the stores and services, wires the cross-service hooks
(search rebuilds on metadata writes, registration drives the trial-registry
adapter), and optionally persists everything under one data directory:

    data_dir/
      metadata.jsonl   index.jsonl   auth.jsonl   studies.jsonl   events.jsonl
      repositories.json

Memory-only hubs (data_dir=None) are used by tests and scenarios that do
not measure disk.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .adapters import AdapterFramework
from .auth import AuthService
from .clock import SystemClock
from .gateway import RepositoryGateway, RepositoryRegistry, UsageLog
from .journal import tree_size_bytes
from .metadata import MetadataStore
from .pid_index import PidIndex
from .registration import RegistrationService
from .search import DEFAULT_FACETS, FacetConfig, SearchService, load_facets

logger = logging.getLogger(__name__)


@dataclass
class HubConfig:
    host: str = "127.0.0.1"
    port: int = 0
    data_dir: Optional[str] = None
    signing_key: str = "dev-hub-signing-key"
    bucket_signing_key: str = "dev-bucket-signing-key"
    token_lifetime_s: int = 3600
    pid_prefix: str = "heal"
    pid_seed: Optional[int] = None
    test_mode: bool = False
    enable_mock_idp: bool = False
    search_debounce_s: float = 5.0
    facets: list = field(default_factory=list)       # FacetConfig JSON dicts
    sources: list = field(default_factory=list)      # SourceDescriptor JSON dicts
    repositories: list = field(default_factory=list) # RepositoryDescriptor JSON dicts

    @classmethod
    def from_json(cls, data: dict) -> "HubConfig":
        server = data.get("server", {})
        auth = data.get("auth", {})
        return cls(
            host=server.get("host", "127.0.0.1"),
            port=int(server.get("port", 0)),
            data_dir=data.get("data_dir"),
            signing_key=auth.get("signing_key", "dev-hub-signing-key"),
            bucket_signing_key=auth.get("bucket_signing_key", "dev-bucket-signing-key"),
            token_lifetime_s=int(auth.get("token_lifetime_s", 3600)),
            pid_prefix=data.get("pid_prefix", "heal"),
            pid_seed=data.get("pid_seed"),
            test_mode=bool(data.get("test_mode", False)),
            enable_mock_idp=bool(data.get("enable_mock_idp", False)),
            search_debounce_s=float(data.get("search_debounce_s", 5.0)),
            facets=data.get("facets", []),
            sources=data.get("adapters", {}).get("sources", []),
            repositories=data.get("repositories", []),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "HubConfig":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


class Hub:
    def __init__(self, config: Optional[HubConfig] = None, clock=None):
        self.config = config or HubConfig()
        self.clock = clock or SystemClock()
        data = Path(self.config.data_dir) if self.config.data_dir else None

        def journal(name):
            return data / name if data else None

        self.auth = AuthService(
            signing_key=self.config.signing_key, clock=self.clock,
            max_lifetime_s=self.config.token_lifetime_s,
            journal_path=journal("auth.jsonl"))
        self.registry = RepositoryRegistry(
            config_path=data / "repositories.json" if data else None)
        self.metadata = MetadataStore(
            journal_path=journal("metadata.jsonl"), clock=self.clock)
        self.pids = PidIndex(
            self.registry, prefix=self.config.pid_prefix, seed=self.config.pid_seed,
            journal_path=journal("index.jsonl"), clock=self.clock)
        self.usage = UsageLog(journal_path=journal("events.jsonl"), clock=self.clock)
        self.adapters = AdapterFramework(
            self.metadata, clock=self.clock,
            min_interval_s=0 if self.config.test_mode else 60)
        self.gateway = RepositoryGateway(
            self.registry, self.pids, self.auth, self.usage, clock=self.clock,
            signing_key=self.config.bucket_signing_key)

        for src in self.config.sources:
            self.adapters.load_config([src])
        for repo in self.config.repositories:
            from .gateway import RepositoryDescriptor

            self.registry.register(RepositoryDescriptor.from_json(repo), persist=False)

        trial_source = next(
            (s.source_id for s in self.adapters.list_sources() if s.kind == "trial_registry"),
            None)
        self.registration = RegistrationService(
            self.metadata, self.auth, adapters=self.adapters, clock=self.clock,
            journal_path=journal("studies.jsonl"), guid_prefix=self.config.pid_prefix,
            trial_source_id=trial_source)

        facets = load_facets(self.config.facets) if self.config.facets else list(DEFAULT_FACETS)
        self.search = SearchService(
            self.metadata, facets, clock=self.clock,
            registration=self.registration, registry=self.registry, pid_index=self.pids,
            debounce_s=self.config.search_debounce_s)
        self.metadata.add_listener(self.search.notify_change)

        self._background: Optional[threading.Thread] = None
        self._stop = threading.Event()

    # registration may be constructed before a trial source is registered at
    # runtime; keep it wired
    def set_trial_source(self, source_id: str) -> None:
        self.registration._trial_source_id = source_id

    def store_size_bytes(self) -> int:
        """Persistent footprint; the zero-data-at-rest checks watch this."""
        if not self.config.data_dir:
            return 0
        return tree_size_bytes(self.config.data_dir)

    # -- serving ------------------------------------------------------------

    def build_router(self, portal_dir: Optional[str] = None):
        from .httpapi import build_router

        return build_router(self, portal_dir=portal_dir)

    def start_server(self, portal_dir: Optional[str] = None):
        from .httpkit import JsonHttpServer

        server = JsonHttpServer(self.build_router(portal_dir=portal_dir),
                                host=self.config.host, port=self.config.port)
        server.start()
        return server

    def start_background_loop(self, interval_s: float = 1.0) -> None:
        """Production loop: scheduler tick plus debounced index rebuilds."""
        if self._background is not None:
            return

        def loop():
            while not self._stop.wait(interval_s):
                try:
                    self.adapters.schedule_tick(self.clock.now())
                    self.search.maybe_rebuild()
                except Exception:
                    logger.exception("background tick failed")

        self._background = threading.Thread(target=loop, daemon=True)
        self._background.start()

    def close(self) -> None:
        self._stop.set()
        if self._background is not None:
            self._background.join(timeout=5)
            self._background = None
        self.metadata.close()
        self.pids.close()
        self.auth.close()
        self.registration.close()
