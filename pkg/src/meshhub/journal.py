"""Line-delimited JSON journals: append-only persistence for every store.

One JSON object per line. Recovery is replay from the top. Appends are
flushed but not fsynced; crash safety at desk scale means "replayable",
not "durable against power loss".
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any, Iterator


class Journal:
    def __init__(self, path: str | Path | None):
        self._path = Path(path) if path else None
        self._lock = threading.Lock()
        self._fh = None
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)

    @property
    def path(self) -> Path | None:
        return self._path

    def append(self, record: dict) -> None:
        if self._path is None:
            return
        line = json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        with self._lock:
            if self._fh is None:
                self._fh = self._path.open("a", encoding="utf-8")
            self._fh.write(line + "\n")
            self._fh.flush()

    def replay(self) -> Iterator[dict]:
        if self._path is None or not self._path.exists():
            return
        with self._path.open("r", encoding="utf-8") as fh:
            for n, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{self._path}:{n}: corrupt journal line") from exc

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None


def tree_size_bytes(root: str | Path) -> int:
    """Total size of all regular files under a directory. 0 if absent."""
    root = Path(root)
    if not root.exists():
        return 0
    return sum(p.stat().st_size for p in root.rglob("*") if p.is_file())
