"""Identifier grammars and minting.

Two identifier shapes share the ``prefix/suffix`` layout:

* GUID: any hub record key, e.g. ``heal/study-0001``. Prefix and suffix are
  lowercase alphanumerics plus ``.`` and ``-``.
* PID: a data-object identifier whose suffix is a lowercase UUID, e.g.
  ``heal/2f1a...-...``. Every PID is a valid GUID; the reverse is not true.
"""

from __future__ import annotations

import random
import re
import uuid

from .errors import MalformedPayload, MalformedPid

GUID_RE = re.compile(r"^[a-z][a-z0-9.-]*/[a-z0-9][a-z0-9.-]*$")
PID_RE = re.compile(
    r"^[a-z][a-z0-9.-]*/"
    r"[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$"
)
NCT_RE = re.compile(r"^NCT\d{8}$")
BLOCK_RE = re.compile(r"^[a-z][a-z0-9_]*$")


def require_guid(guid: str) -> str:
    if not isinstance(guid, str) or not GUID_RE.match(guid):
        raise MalformedPayload(f"malformed GUID {guid!r}")
    return guid


def require_pid(pid: str) -> str:
    if not isinstance(pid, str) or not PID_RE.match(pid):
        raise MalformedPid(f"malformed PID {pid!r}")
    return pid


class PidMinter:
    """UUIDv4 PIDs under a fixed prefix.

    With a seed the sequence is deterministic (test mode); without one it
    draws from the process RNG.
    """

    def __init__(self, prefix: str = "heal", seed: int | None = None):
        if not GUID_RE.match(f"{prefix}/0"):
            raise MalformedPid(f"bad PID prefix {prefix!r}")
        self.prefix = prefix
        self._rng = random.Random(seed) if seed is not None else None

    def mint(self) -> str:
        if self._rng is not None:
            u = uuid.UUID(int=self._rng.getrandbits(128), version=4)
        else:
            u = uuid.uuid4()
        return f"{self.prefix}/{u}"
