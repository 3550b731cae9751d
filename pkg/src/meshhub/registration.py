"""Study registration: claim, trial-registry linking, SLMD, delegation.

A study record moves along a single line:

    UNREGISTERED -> CLAIMED -> SLMD_SUBMITTED -> VLMD_ATTACHED

Claiming is exactly-once and verified with an admin-issued single-use claim
token (only its hash is stored). The claim grants the claimant study_admin
on /studies/{guid}; collaborators get roles through delegation. SLMD and
VLMD blocks may be resubmitted later without moving the state backwards.
"""

from __future__ import annotations

import hashlib
import json
import logging
import secrets
import threading
from dataclasses import dataclass
from importlib import resources
from typing import Any, Optional

from .auth import Principal
from .clock import SystemClock
from .errors import (
    AlreadyClaimed,
    BadClaimToken,
    DuplicateAward,
    MalformedNct,
    NotAuthorized,
    RegistryMiss,
    SchemaViolation,
    UnknownStudy,
    WrongState,
)
from .formschema import validate as validate_form
from .ids import NCT_RE
from .journal import Journal
from .treepath import canonical_json

logger = logging.getLogger(__name__)

STATES = ("UNREGISTERED", "CLAIMED", "SLMD_SUBMITTED", "VLMD_ATTACHED")
STATE_RANK = {s: i for i, s in enumerate(STATES)}

DELEGATABLE_ROLES = ("metadata_editor", "study_admin")


def load_slmd_schema() -> dict:
    path = resources.files("meshhub") / "schemas" / "slmd.schema.json"
    return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class StudyRecord:
    guid: str
    award_number: str
    state: str = "UNREGISTERED"
    owner: Optional[str] = None
    nct_id: Optional[str] = None
    repository_id: Optional[str] = None
    claim_token_hash: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "guid": self.guid,
            "award_number": self.award_number,
            "state": self.state,
            "owner": self.owner,
            "nct_id": self.nct_id,
            "repository_id": self.repository_id,
            "claim_token_hash": self.claim_token_hash,
        }

    @classmethod
    def from_json(cls, data: dict) -> "StudyRecord":
        return cls(**data)


class RegistrationService:
    def __init__(self, metadata_store, auth, adapters=None, clock=None,
                 journal_path=None, guid_prefix: str = "heal",
                 trial_source_id: Optional[str] = None, slmd_schema: Optional[dict] = None):
        self._store = metadata_store
        self._auth = auth
        self._adapters = adapters
        self._clock = clock or SystemClock()
        self._prefix = guid_prefix
        self._trial_source_id = trial_source_id
        self._schema = slmd_schema or load_slmd_schema()
        self._studies: dict[str, StudyRecord] = {}
        self._seq = 0
        self._lock = threading.Lock()
        self._journal = Journal(journal_path)
        for rec in self._journal.replay():
            study = StudyRecord.from_json(rec["study"])
            self._studies[study.guid] = study
            self._seq = max(self._seq, rec.get("seq", 0))

    # -- persistence: full study snapshots, metadata writes live elsewhere --

    def _log(self, study: StudyRecord) -> None:
        self._journal.append({"study": study.to_json(), "seq": self._seq})

    @property
    def trial_source_id(self) -> Optional[str]:
        return self._trial_source_id

    # -- lookups ----------------------------------------------------------

    def get_study(self, guid: str) -> StudyRecord:
        with self._lock:
            study = self._studies.get(guid)
        if study is None:
            raise UnknownStudy(guid)
        return study

    def list_studies(self, state: Optional[str] = None) -> list[StudyRecord]:
        with self._lock:
            studies = sorted(self._studies.values(), key=lambda s: s.guid)
        if state is None:
            return studies
        if state not in STATES:
            raise WrongState(f"unknown state {state!r}")
        return [s for s in studies if s.state == state]

    def count(self) -> int:
        with self._lock:
            return len(self._studies)

    def state_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in STATES}
        with self._lock:
            for study in self._studies.values():
                counts[study.state] += 1
        return counts

    def _study_path(self, guid: str) -> str:
        return f"/studies/{guid}"

    def _require_role(self, user: Principal, guid: str, role: str) -> None:
        if not self._auth.check_access(user.user_id, self._study_path(guid), role):
            raise NotAuthorized(f"{user.user_id} lacks {role} on {guid}")

    # -- seeding ------------------------------------------------------------

    def seed_from_awards(self, awards: list[tuple[str, Any]]) -> list[StudyRecord]:
        numbers = [a[0] for a in awards]
        if len(set(numbers)) != len(numbers):
            raise DuplicateAward("duplicate award numbers in batch")
        with self._lock:
            existing = {s.award_number for s in self._studies.values()}
            dupes = [n for n in numbers if n in existing]
            if dupes:
                raise DuplicateAward(f"awards already seeded: {dupes[:5]}")
        out = []
        for award_number, grant_block in awards:
            with self._lock:
                self._seq += 1
                guid = f"{self._prefix}/study-{self._seq:04d}"
                study = StudyRecord(guid=guid, award_number=award_number)
                self._studies[guid] = study
            self._store.create_document(guid, {
                "grant_source": grant_block,
                "registration": {"state": study.state, "award_number": award_number},
            })
            self._log(study)
            out.append(study)
        return out

    # -- claiming -------------------------------------------------------------

    def issue_claim_token(self, guid: str) -> str:
        """Admin-side: mint the out-of-band token an investigator claims with."""
        token = secrets.token_urlsafe(16)
        with self._lock:
            study = self._studies.get(guid)
            if study is None:
                raise UnknownStudy(guid)
            study.claim_token_hash = hashlib.sha256(token.encode()).hexdigest()
            self._log(study)
        return token

    def claim_study(self, user: Principal, guid: str, claim_token: str) -> StudyRecord:
        digest = hashlib.sha256(claim_token.encode()).hexdigest()
        with self._lock:
            study = self._studies.get(guid)
            if study is None:
                raise UnknownStudy(guid)
            if study.state != "UNREGISTERED":
                raise AlreadyClaimed(guid)
            if not study.claim_token_hash or digest != study.claim_token_hash:
                raise BadClaimToken(guid)
            study.state = "CLAIMED"
            study.owner = user.user_id
            study.claim_token_hash = None  # single use
            self._log(study)
        self._auth.add_policy(self._study_path(guid), "study_admin", user.user_id)
        self._sync_registration_block(guid)
        return study

    # -- registry linking --------------------------------------------------------

    def link_nct(self, user: Principal, guid: str, nct_id: str):
        study = self.get_study(guid)
        self._require_role(user, guid, "study_admin")
        if not NCT_RE.match(nct_id or ""):
            raise MalformedNct(f"{nct_id!r} does not match NCT + 8 digits")
        if STATE_RANK[study.state] < STATE_RANK["CLAIMED"]:
            raise WrongState(f"{guid} must be claimed before linking a trial")
        with self._lock:
            study.nct_id = nct_id
            self._log(study)
        self._sync_registration_block(guid)
        if self._adapters is None or self._trial_source_id is None:
            raise RegistryMiss("no trial registry source configured; nct_id stored")
        run = self._adapters.harvest_for_key(self._trial_source_id, nct_id, guid)
        if run.fetched == 0 or run.created + run.updated + run.unchanged == 0:
            raise RegistryMiss(f"{nct_id} not found at trial registry; nct_id stored")
        return run

    # -- SLMD ------------------------------------------------------------------

    def submit_slmd(self, user: Principal, guid: str, fields: Any) -> StudyRecord:
        study = self.get_study(guid)
        self._require_role(user, guid, "metadata_editor")
        if STATE_RANK[study.state] < STATE_RANK["CLAIMED"]:
            raise WrongState(f"{guid} must be claimed before SLMD submission")
        violations = validate_form(self._schema, fields)
        if violations:
            raise SchemaViolation(violations)
        block = {
            "schema_version": self._schema.get("schema_version", "1.0"),
            "submitted_by": user.user_id,
            "submitted_at": self._clock.now().isoformat(),
            "fields": fields,
        }
        self._store.update_document(guid, "slmd", block)
        with self._lock:
            if study.state == "CLAIMED":
                study.state = "SLMD_SUBMITTED"
            self._log(study)
        self._sync_registration_block(guid)
        return study

    # -- VLMD -------------------------------------------------------------------

    def attach_vlmd(self, user: Principal, guid: str, dictionary: dict) -> StudyRecord:
        study = self.get_study(guid)
        self._require_role(user, guid, "metadata_editor")
        if STATE_RANK[study.state] < STATE_RANK["SLMD_SUBMITTED"]:
            raise WrongState(f"{guid} needs SLMD before a data dictionary")
        variables = dictionary.get("variables") or []
        names = [v.get("name", "") for v in variables]
        digest = hashlib.sha256(canonical_json(dictionary).encode()).hexdigest()
        dict_guid = f"{guid}-vlmd"
        if self._store.has_document(dict_guid):
            self._store.update_document(dict_guid, "vlmd_dictionary", dictionary)
        else:
            self._store.create_document(dict_guid, {"vlmd_dictionary": dictionary})
        self._store.update_document(guid, "vlmd", {
            "schema_version": dictionary.get("schema_version", ""),
            "dictionary_guid": dict_guid,
            "dictionary_digest": digest,
            "variable_count": len(names),
            "variables": names,
            "cde_refs": sorted({v["cde_ref"] for v in variables if v.get("cde_ref")}),
        })
        with self._lock:
            if study.state == "SLMD_SUBMITTED":
                study.state = "VLMD_ATTACHED"
            self._log(study)
        self._sync_registration_block(guid)
        return study

    # -- delegation -----------------------------------------------------------

    def delegate(self, owner: Principal, guid: str, delegate_user: str, role: str) -> None:
        self.get_study(guid)
        self._require_role(owner, guid, "study_admin")
        if role not in DELEGATABLE_ROLES:
            raise NotAuthorized(f"role {role!r} cannot be delegated")
        self._auth.get_user(delegate_user)  # UnknownUser surfaces
        self._auth.add_policy(self._study_path(guid), role, delegate_user)

    # -- repository declaration ---------------------------------------------------

    def set_repository(self, user: Principal, guid: str, repository_id: str) -> StudyRecord:
        study = self.get_study(guid)
        self._require_role(user, guid, "study_admin")
        # declared repository may change until data dictionary attachment
        if study.state == "VLMD_ATTACHED" and study.repository_id:
            raise WrongState(f"{guid} is VLMD_ATTACHED; repository is frozen")
        with self._lock:
            study.repository_id = repository_id
            self._log(study)
        self._store.update_document(guid, "repository", {"name": repository_id})
        self._sync_registration_block(guid)
        return study

    # -- document sync ---------------------------------------------------------

    def _sync_registration_block(self, guid: str) -> None:
        study = self.get_study(guid)
        block = {"state": study.state, "award_number": study.award_number}
        if study.owner:
            block["owner"] = study.owner
        if study.nct_id:
            block["nct_id"] = study.nct_id
        if study.repository_id:
            block["repository_id"] = study.repository_id
        self._store.update_document(guid, "registration", block)

    def close(self) -> None:
        self._journal.close()
