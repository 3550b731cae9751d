"""Seed profiles.

``tiny`` is a two-repo, ten-study sandbox. ``table1`` synthesizes a
platform whose overview statistics land exactly on the published snapshot:
1,078 searchable studies, 19 connected repositories, 516 registered,
398 with study-level metadata, 74 with variable-level metadata, and
118 available datasets.
"""

from __future__ import annotations

import random

from ..auth import Principal
from ..errors import NonEmptyStore
from ..gateway import BucketSpec, CapabilityDescriptor, RepositoryDescriptor
from ..pid_index import AccessMethod

TABLE1_EXPECTED = {
    "searchable_studies": 1078,
    "connected_repositories": 19,
    "registered_studies": 516,
    "studies_with_slmd": 398,
    "studies_with_vlmd": 74,
    "available_datasets": 118,
}

TINY_EXPECTED = {
    "searchable_studies": 10,
    "connected_repositories": 2,
    "registered_studies": 3,
    "studies_with_slmd": 2,
    "studies_with_vlmd": 1,
    "available_datasets": 4,
}

_INSTITUTES = ["NIDA", "NINDS", "NCCIH", "NIAMS", "NICHD", "NIMH", "NHLBI"]
_TITLE_WORDS = ["opioid", "pain", "chronic", "tapering", "recovery", "sleep",
                "buprenorphine", "mindfulness", "exercise", "pediatric",
                "telehealth", "naloxone"]
_STUDY_TYPES = ["interventional", "observational", "registry", "other"]

_TIER_CYCLE = ["FULL_API", "METADATA_ONLY", "BUCKET_ONLY"]


def _slmd_fields(rng: random.Random, title: str) -> dict:
    return {
        "objectives": {"primary_objective": f"Evaluate {title}"},
        "design": {"study_type": rng.choice(_STUDY_TYPES),
                   "randomized": rng.random() < 0.5},
        "population": {"description": "Adults reporting chronic pain",
                       "target_enrollment": rng.randrange(40, 800)},
        "data_collection_methods": {"methods": rng.sample(
            ["survey", "EHR extraction", "wearable", "interview"], k=2)},
        "availability": {"status": rng.choice(["planned", "submitted", "available"])},
    }


def _dictionary(rng: random.Random, i: int) -> dict:
    names = ["pain_intensity", "age", "sex", "opioid_use", "sleep_quality",
             f"study_score_{i % 7}"]
    variables = [{"name": n, "type": "integer" if n != "sex" else "string"}
                 for n in rng.sample(names, k=3)]
    variables[0]["cde_ref"] = "HEALCDE:0101"
    return {"schema_version": "1.0", "variables": variables,
            "source_kind": "csv_inferred"}


def _placeholder_repo(i: int, tier: str) -> RepositoryDescriptor:
    """Registry entry without a live server; statistics and facets only."""
    rid = f"repo-{i:02d}"
    endpoints = {}
    bucket = None
    if tier in ("FULL_API", "METADATA_ONLY"):
        endpoints["metadata"] = f"http://127.0.0.1:1/{rid}/md"
    if tier == "FULL_API":
        endpoints["data"] = f"http://127.0.0.1:1/{rid}/data"
        endpoints["auth"] = f"http://127.0.0.1:1/{rid}/auth"
    if tier in ("METADATA_ONLY", "BUCKET_ONLY"):
        bucket = BucketSpec(name=f"{rid}-store", allow_list={"inv-001"})
    return RepositoryDescriptor(
        repository_id=rid,
        display_name=f"Repository {i:02d} ({tier})",
        tier=tier,
        endpoints=endpoints,
        bucket=bucket,
        report_sink=f"http://127.0.0.1:1/{rid}/reports",
        sia=CapabilityDescriptor(minimum_metadata_fields=["title"]),
    )


def _require_empty(hub) -> None:
    if (hub.metadata.count() or hub.registration.count()
            or hub.registry.count() or hub.pids.count()):
        raise NonEmptyStore("seed requires empty stores")


def seed_fixture(hub, profile: str, rng_seed: int = 20251101) -> dict:
    if profile == "tiny":
        return _seed(hub, rng_seed, studies=10, repos=2, claimed=3, slmd=2, vlmd=1,
                     datasets=4)
    if profile == "table1":
        return _seed(hub, rng_seed, studies=1078, repos=19, claimed=516, slmd=398,
                     vlmd=74, datasets=118)
    raise ValueError(f"unknown profile {profile!r}")


def _seed(hub, rng_seed: int, studies: int, repos: int, claimed: int, slmd: int,
          vlmd: int, datasets: int) -> dict:
    _require_empty(hub)
    rng = random.Random(rng_seed)

    tiers = [_TIER_CYCLE[i % 3] for i in range(repos)]
    for i, tier in enumerate(tiers, start=1):
        hub.registry.register(_placeholder_repo(i, tier), persist=True)
    repo_ids = [r.repository_id for r in hub.registry.list()]

    # well-known administrative identity; claim tokens come from here
    hub.auth.register_user(Principal(
        user_id="admin", display_name="Hub Admin", email="admin@hub.local"))
    hub.auth.add_policy("/", "hub_admin", "admin")

    investigators = [f"inv-{i:03d}" for i in range(1, min(40, claimed) + 1)]
    for user_id in investigators:
        hub.auth.register_user(Principal(
            user_id=user_id, display_name=user_id,
            email=f"{user_id}@example.edu", idp="mock-idp"))

    awards = []
    for i in range(1, studies + 1):
        title = " ".join(rng.sample(_TITLE_WORDS, k=3)).capitalize()
        awards.append((f"AWD-{i:05d}", {
            "title": title,
            "institute": rng.choice(_INSTITUTES),
            "award_year": rng.randrange(2019, 2025),
        }))
    seeded = hub.registration.seed_from_awards(awards)

    for i, study in enumerate(seeded[:claimed]):
        user = hub.auth.get_user(rng.choice(investigators))
        token = hub.registration.issue_claim_token(study.guid)
        hub.registration.claim_study(user, study.guid, token)
        hub.registration.set_repository(user, study.guid, rng.choice(repo_ids))
        if i < slmd:
            title = hub.metadata.get_document(study.guid).block("grant_source")["title"]
            hub.registration.submit_slmd(user, study.guid, _slmd_fields(rng, title))
        if i < vlmd:
            hub.registration.attach_vlmd(user, study.guid, _dictionary(rng, i))

    bucket_repos = [r for r in hub.registry.list() if r.tier != "FULL_API"]
    api_repos = [r for r in hub.registry.list() if r.tier == "FULL_API"]
    for i in range(datasets):
        if bucket_repos and (i % 2 == 0 or not api_repos):
            repo = bucket_repos[i % len(bucket_repos)]
            method = AccessMethod(
                kind="bucket",
                locator=f"bucket://{repo.bucket.name}/dataset-{i:04d}.csv",
                requires_authorization=rng.random() < 0.5)
        else:
            repo = api_repos[i % len(api_repos)]
            method = AccessMethod(
                kind="repo_api",
                locator=f"{repo.endpoints['data']}/objects/dataset-{i:04d}/url",
                requires_authorization=rng.random() < 0.5)
        hub.pids.mint_pid(repo.repository_id, rng.randrange(1 << 10, 1 << 24),
                          {"sha256": f"{i:064x}"}, [method])

    hub.search.rebuild_index()
    return hub.search.overview_stats()
