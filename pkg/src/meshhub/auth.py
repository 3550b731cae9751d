"""Authentication, policy engine, and short-lived signed tokens.

Tokens are compact three-part strings (header.payload.signature) signed
with a hub-held HMAC-SHA256 key. Policies grant a role on a slash-path;
a role on a path applies to the whole subtree, and roles form a total
order so a higher role satisfies any lower check.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Optional

from .clock import SystemClock
from .errors import (
    DuplicateUser,
    Expired,
    MalformedPath,
    ScopeNotGrantable,
    TokenInvalid,
    UnknownUser,
)
from .journal import Journal

ROLES = ("reader", "metadata_editor", "study_admin", "hub_admin")
ROLE_RANK = {role: i for i, role in enumerate(ROLES)}
AUDIENCES = ("portal", "api", "workspace")

DEFAULT_MAX_LIFETIME_S = 3600
DEFAULT_GRANTABLE_SCOPES = ("read", "metadata_write", "data_access")


@dataclass(frozen=True)
class Principal:
    user_id: str
    display_name: str = ""
    email: str = ""
    idp: str = "mock-idp"


@dataclass(frozen=True)
class AccessPolicy:
    resource_path: str
    role: str
    principal: str


@dataclass(frozen=True)
class AuthToken:
    token_id: str
    user_id: str
    scopes: tuple[str, ...]
    issued_at: datetime
    expires_at: datetime
    audience: str
    signed: str = ""


def normalize_path(path: str) -> str:
    if not isinstance(path, str) or not path.startswith("/"):
        raise MalformedPath(f"path must be absolute: {path!r}")
    if "\x00" in path:
        raise MalformedPath("NUL in path")
    segments = [s for s in path.split("/")[1:] if s != ""]
    if any(s in (".", "..") for s in segments):
        raise MalformedPath(f"relative segments not allowed: {path!r}")
    if path != "/" and path.rstrip("/") != "/" + "/".join(segments):
        raise MalformedPath(f"path not normalized: {path!r}")
    return "/" if not segments else "/" + "/".join(segments)


def _ancestors(path: str) -> list[str]:
    """The path itself plus every ancestor, ending at the root."""
    out = [path]
    while path != "/":
        path = path.rsplit("/", 1)[0] or "/"
        out.append(path)
    return out


def _b64(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def _unb64(text: str) -> bytes:
    pad = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + pad)


class AuthService:
    def __init__(self, signing_key: str | bytes = "", clock=None,
                 max_lifetime_s: int = DEFAULT_MAX_LIFETIME_S, journal_path=None):
        if isinstance(signing_key, str):
            signing_key = signing_key.encode("utf-8")
        self._key = signing_key or secrets.token_bytes(32)
        self._clock = clock or SystemClock()
        self._max_lifetime_s = max_lifetime_s
        self._users: dict[str, Principal] = {}
        self._grantable: dict[str, set[str]] = {}
        self._email_index: dict[tuple[str, str], str] = {}
        # keyed by principal: check_access touches one user's grants only
        self._policies: dict[str, list[AccessPolicy]] = {}
        self._lock = threading.Lock()
        self._journal = Journal(journal_path)
        for rec in self._journal.replay():
            if rec["kind"] == "user":
                self._apply_user(Principal(**rec["user"]), tuple(rec["scopes"]))
            else:
                policy = AccessPolicy(**rec["policy"])
                self._policies.setdefault(policy.principal, []).append(policy)

    # -- users ---------------------------------------------------------------

    def register_user(self, user: Principal, grantable_scopes=DEFAULT_GRANTABLE_SCOPES) -> Principal:
        with self._lock:
            if user.user_id in self._users:
                raise DuplicateUser(user.user_id)
            key = (user.idp, user.email)
            if user.email and key in self._email_index:
                raise DuplicateUser(f"{user.idp}:{user.email} already mapped")
            self._apply_user(user, tuple(grantable_scopes))
        self._journal.append({
            "kind": "user",
            "user": {"user_id": user.user_id, "display_name": user.display_name,
                     "email": user.email, "idp": user.idp},
            "scopes": list(grantable_scopes),
        })
        return user

    def _apply_user(self, user: Principal, scopes: tuple[str, ...]) -> None:
        self._users[user.user_id] = user
        self._grantable[user.user_id] = set(scopes)
        if user.email:
            self._email_index[(user.idp, user.email)] = user.user_id

    def get_user(self, user_id: str) -> Principal:
        with self._lock:
            user = self._users.get(user_id)
        if user is None:
            raise UnknownUser(user_id)
        return user

    def has_user(self, user_id: str) -> bool:
        with self._lock:
            return user_id in self._users

    # -- tokens ----------------------------------------------------------------

    def issue_token(self, user_id: str, scopes, audience: str = "api",
                    lifetime_s: Optional[int] = None) -> AuthToken:
        with self._lock:
            if user_id not in self._users:
                raise UnknownUser(user_id)
            grantable = self._grantable[user_id]
        scopes = tuple(scopes)
        bad = [s for s in scopes if s not in grantable]
        if bad:
            raise ScopeNotGrantable(f"{user_id} cannot be granted {bad}")
        if audience not in AUDIENCES:
            raise TokenInvalid(f"unknown audience {audience!r}")
        lifetime = min(lifetime_s or self._max_lifetime_s, self._max_lifetime_s)
        issued = self._clock.now()
        expires = issued + timedelta(seconds=lifetime)
        token_id = secrets.token_hex(16)
        header = {"alg": "HS256", "typ": "meshtoken"}
        payload = {
            "jti": token_id,
            "sub": user_id,
            "scopes": list(scopes),
            "iat": issued.isoformat(),
            "exp": expires.isoformat(),
            "aud": audience,
        }
        signing_input = _b64(json.dumps(header, sort_keys=True).encode()) + "." + _b64(
            json.dumps(payload, sort_keys=True).encode())
        sig = hmac.new(self._key, signing_input.encode("ascii"), hashlib.sha256).digest()
        return AuthToken(
            token_id=token_id, user_id=user_id, scopes=scopes,
            issued_at=issued, expires_at=expires, audience=audience,
            signed=signing_input + "." + _b64(sig),
        )

    def workspace_token(self, user_id: str) -> AuthToken:
        """Token analysis environments present to the gateway. Carries identity
        only; per-repository authorization happens at access time."""
        return self.issue_token(user_id, scopes=("data_access",), audience="workspace")

    def validate_token(self, signed: str) -> AuthToken:
        if not isinstance(signed, str) or signed.count(".") != 2:
            raise TokenInvalid("token must have three sections")
        head_b64, payload_b64, sig_b64 = signed.split(".")
        signing_input = head_b64 + "." + payload_b64
        try:
            expected = hmac.new(self._key, signing_input.encode("ascii"), hashlib.sha256).digest()
            actual = _unb64(sig_b64)
        except Exception as exc:
            raise TokenInvalid(f"undecodable token: {exc}") from exc
        if not hmac.compare_digest(expected, actual):
            raise TokenInvalid("bad signature")
        try:
            header = json.loads(_unb64(head_b64))
            payload = json.loads(_unb64(payload_b64))
        except Exception as exc:
            raise TokenInvalid(f"undecodable token: {exc}") from exc
        if header.get("alg") != "HS256" or header.get("typ") != "meshtoken":
            raise TokenInvalid("unexpected header")
        expires = datetime.fromisoformat(payload["exp"])
        if self._clock.now() >= expires:
            raise Expired(f"token expired at {payload['exp']}")
        return AuthToken(
            token_id=payload["jti"],
            user_id=payload["sub"],
            scopes=tuple(payload["scopes"]),
            issued_at=datetime.fromisoformat(payload["iat"]),
            expires_at=expires,
            audience=payload["aud"],
            signed=signed,
        )

    # -- policies ----------------------------------------------------------------

    def add_policy(self, resource_path: str, role: str, principal: str) -> AccessPolicy:
        path = normalize_path(resource_path)
        if role not in ROLES:
            raise MalformedPath(f"unknown role {role!r}")
        if not self.has_user(principal):
            raise UnknownUser(principal)
        policy = AccessPolicy(resource_path=path, role=role, principal=principal)
        with self._lock:
            self._policies.setdefault(principal, []).append(policy)
        self._journal.append({"kind": "policy", "policy": {
            "resource_path": path, "role": role, "principal": principal}})
        return policy

    def check_access(self, user_id: str, resource_path: str, role: str) -> bool:
        path = normalize_path(resource_path)
        if role not in ROLES:
            raise MalformedPath(f"unknown role {role!r}")
        want = ROLE_RANK[role]
        lineage = set(_ancestors(path))
        with self._lock:
            policies = list(self._policies.get(user_id, ()))
        return any(
            p.resource_path in lineage and ROLE_RANK[p.role] >= want
            for p in policies
        )

    def policies_for(self, user_id: str) -> list[AccessPolicy]:
        with self._lock:
            return list(self._policies.get(user_id, ()))

    def close(self) -> None:
        self._journal.close()
