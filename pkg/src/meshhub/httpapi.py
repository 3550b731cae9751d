"""HTTP JSON surface of the hub.

Reads and queries are open. Mutations need a bearer token; administrative
mutations (policies, repositories, adapter sources, claim-token minting)
need hub_admin on /.
"""

from __future__ import annotations

import json
import mimetypes
from datetime import date
from pathlib import Path
from typing import Optional

from .auth import Principal
from .errors import InvalidQuery, NotAuthorized, TokenInvalid, UnknownFacet
from .gateway import RepositoryDescriptor
from .httpkit import RawResponse, Request, Router
from .metadata import MetadataQuery, PathFilter
from .adapters import SourceDescriptor


def _doc_json(doc) -> dict:
    return {
        "guid": doc.guid,
        "payload": doc.payload,
        "version": doc.version,
        "created_at": doc.created_at.isoformat(),
        "updated_at": doc.updated_at.isoformat(),
    }


def _study_card(hub, guid: str) -> dict:
    """Compact view the portal renders in result lists."""
    doc = hub.metadata.get_document(guid)
    payload = doc.payload if isinstance(doc.payload, dict) else {}

    def dig(*path):
        node = payload
        for part in path:
            if not isinstance(node, dict) or part not in node:
                return None
            node = node[part]
        return node

    title = (dig("slmd", "fields", "objectives", "primary_objective")
             or dig("registry_source", "title")
             or dig("grant_source", "title")
             or dig("title"))
    return {
        "guid": guid,
        "title": title,
        "repository": dig("repository", "name"),
        "state": dig("registration", "state"),
        "blocks": doc.blocks,
    }


def _parse_path_filter(spec: str) -> PathFilter:
    for sep, predicate in (("=", "equals"), ("~", "contains")):
        if sep in spec:
            path, raw = spec.split(sep, 1)
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            return PathFilter(path, predicate, value)
    return PathFilter(spec, "exists")


def build_router(hub, portal_dir: Optional[str] = None) -> Router:
    router = Router()
    auth = hub.auth

    def principal(req: Request) -> Principal:
        token = req.bearer_token
        if not token:
            raise TokenInvalid("bearer token required")
        info = auth.validate_token(token)
        return auth.get_user(info.user_id)

    def require_admin(req: Request) -> Principal:
        user = principal(req)
        if not auth.check_access(user.user_id, "/", "hub_admin"):
            raise NotAuthorized(f"{user.user_id} is not a hub admin")
        return user

    # -- metadata ---------------------------------------------------------

    def metadata_query(req: Request, **_):
        filters = [_parse_path_filter(s) for s in req.query.get("path", [])]
        try:
            limit = int(req.param("limit", "1000"))
            offset = int(req.param("offset", "0"))
        except ValueError:
            raise InvalidQuery("limit and offset must be integers") from None
        docs = hub.metadata.query_documents(MetadataQuery(
            path_filters=filters, free_text=req.param("text"),
            limit=limit, offset=offset))
        return 200, {"documents": [_doc_json(d) for d in docs]}

    def metadata_create(req: Request, guid):
        principal(req)
        doc = hub.metadata.create_document(guid, req.json())
        return 201, _doc_json(doc)

    def metadata_update(req: Request, guid, block):
        principal(req)
        doc = hub.metadata.update_document(guid, block, req.json())
        return 200, _doc_json(doc)

    def metadata_get(req: Request, guid):
        return 200, _doc_json(hub.metadata.get_document(guid))

    router.add("GET", "/metadata", metadata_query)
    router.add("PUT", "/metadata/{guid:path}/{block}", metadata_update)
    router.add("POST", "/metadata/{guid:path}", metadata_create)
    router.add("GET", "/metadata/{guid:path}", metadata_get)

    # -- pid index -----------------------------------------------------------

    def index_mint(req: Request, **_):
        principal(req)
        body = req.json() or {}
        record = hub.pids.mint_pid(
            repository_id=body.get("repository_id", ""),
            size_bytes=body.get("size_bytes", -1),
            checksums=body.get("checksums") or {},
            access_methods=body.get("access_methods") or [])
        return 201, record.to_json()

    def index_list(req: Request, **_):
        repo = req.param("repository")
        if repo is None:
            raise InvalidQuery("repository query parameter required")
        return 200, {"records": [r.to_json() for r in hub.pids.list_by_repository(repo)]}

    def index_resolve(req: Request, pid):
        record = hub.pids.resolve_pid(pid)
        user = "anonymous"
        if req.bearer_token:
            try:
                user = auth.validate_token(req.bearer_token).user_id
            except TokenInvalid:
                pass
        hub.usage.record(pid, user, record.repository_id, "resolved")
        return 200, record.to_json()

    router.add("POST", "/index", index_mint)
    router.add("GET", "/index", index_list)
    router.add("GET", "/index/{pid:path}", index_resolve)

    # -- auth ------------------------------------------------------------------

    def auth_token(req: Request, **_):
        body = req.json() or {}
        token = auth.issue_token(
            body.get("user_id", ""), body.get("scopes", ["read"]),
            audience=body.get("audience", "api"))
        return 200, {"token": token.signed, "token_id": token.token_id,
                     "expires_at": token.expires_at.isoformat()}

    def auth_validate(req: Request, **_):
        token = req.param("token") or req.bearer_token or ""
        try:
            info = auth.validate_token(token)
        except TokenInvalid as exc:
            return 200, {"valid": False, "reason": str(exc)}
        return 200, {"valid": True, "user_id": info.user_id,
                     "scopes": list(info.scopes), "audience": info.audience,
                     "expires_at": info.expires_at.isoformat()}

    def auth_policy(req: Request, **_):
        require_admin(req)
        body = req.json() or {}
        policy = auth.add_policy(body.get("resource_path", ""), body.get("role", ""),
                                 body.get("principal", ""))
        return 201, {"resource_path": policy.resource_path, "role": policy.role,
                     "principal": policy.principal}

    def auth_check(req: Request, **_):
        ok = auth.check_access(req.param("user", ""), req.param("path", ""),
                               req.param("role", ""))
        return 200, {"allowed": ok}

    router.add("POST", "/auth/token", auth_token)
    router.add("GET", "/auth/validate", auth_validate)
    router.add("POST", "/auth/policy", auth_policy)
    router.add("GET", "/auth/check", auth_check)

    if hub.config.enable_mock_idp:
        def mock_login(req: Request, **_):
            body = req.json() or {}
            username = body.get("username", "")
            if not username:
                raise TokenInvalid("username required")
            if not auth.has_user(username):
                auth.register_user(Principal(
                    user_id=username, display_name=username,
                    email=f"{username}@mock-idp.local"))
            token = auth.issue_token(username, ["read", "metadata_write"],
                                     audience="portal")
            return 200, {"token": token.signed, "user_id": username,
                         "expires_at": token.expires_at.isoformat()}

        router.add("POST", "/mock-idp/login", mock_login)

    # -- adapters ------------------------------------------------------------------

    def adapters_register(req: Request, **_):
        require_admin(req)
        source_id = hub.adapters.register_source(SourceDescriptor.from_json(req.json()))
        desc = hub.adapters.get_source(source_id)
        if desc.kind == "trial_registry" and hub.registration.trial_source_id is None:
            hub.set_trial_source(source_id)
        return 201, {"source_id": source_id}

    def adapters_run(req: Request, source_id):
        principal(req)
        run = hub.adapters.harvest_once(source_id)
        hub.search.maybe_rebuild(force=True)
        return 200, run.to_json()

    def adapters_runs(req: Request, **_):
        runs = hub.adapters.runs(req.param("source"))
        return 200, {"runs": [r.to_json() for r in runs]}

    router.add("POST", "/adapters/sources", adapters_register)
    router.add("POST", "/adapters/{source_id}/run", adapters_run)
    router.add("GET", "/adapters/runs", adapters_runs)

    # -- data access gateway ----------------------------------------------------

    def data_url(req: Request, pid):
        token = req.bearer_token
        if not token:
            raise TokenInvalid("bearer token required")
        url, expires = hub.gateway.fetch_access_url(token, pid)
        return 200, {"url": url, "expires_at": expires.isoformat()}

    router.add("GET", "/data/{pid:path}/url", data_url)

    # -- repositories ---------------------------------------------------------------

    def repos_list(req: Request, **_):
        return 200, {"repositories": [r.to_json() for r in hub.registry.list()]}

    def repos_register(req: Request, **_):
        require_admin(req)
        desc = hub.registry.register(RepositoryDescriptor.from_json(req.json()))
        return 201, desc.to_json()

    def repos_conformance(req: Request, repository_id):
        return 200, hub.gateway.probe_capabilities(repository_id).to_json()

    def repos_usage(req: Request, repository_id):
        day = date.fromisoformat(req.param("day") or hub.clock.now().date().isoformat())
        return 200, hub.gateway.usage_report(repository_id, day)

    def repos_deliver_report(req: Request, repository_id):
        require_admin(req)
        body = req.json() or {}
        day = date.fromisoformat(body.get("day") or hub.clock.now().date().isoformat())
        attempts = hub.gateway.deliver_report(repository_id, day)
        return 200, {"delivered": True, "attempts": attempts}

    router.add("GET", "/repositories", repos_list)
    router.add("POST", "/repositories", repos_register)
    router.add("GET", "/repositories/{repository_id}/conformance", repos_conformance)
    router.add("GET", "/repositories/{repository_id}/usage", repos_usage)
    router.add("POST", "/repositories/{repository_id}/reports", repos_deliver_report)

    # -- studies ----------------------------------------------------------------------

    def studies_list(req: Request, **_):
        studies = hub.registration.list_studies(state=req.param("state"))
        return 200, {"studies": [s.to_json() for s in studies]}

    def study_get(req: Request, guid):
        study = hub.registration.get_study(guid)
        return 200, {"study": study.to_json(),
                     "document": _doc_json(hub.metadata.get_document(guid))}

    def study_claim_token(req: Request, guid):
        require_admin(req)
        return 201, {"claim_token": hub.registration.issue_claim_token(guid)}

    def study_claim(req: Request, guid):
        user = principal(req)
        body = req.json() or {}
        study = hub.registration.claim_study(user, guid, body.get("claim_token", ""))
        return 200, study.to_json()

    def study_nct(req: Request, guid):
        user = principal(req)
        body = req.json() or {}
        run = hub.registration.link_nct(user, guid, body.get("nct_id", ""))
        hub.search.maybe_rebuild(force=True)
        return 200, {"study": hub.registration.get_study(guid).to_json(),
                     "harvest": run.to_json()}

    def study_slmd(req: Request, guid):
        user = principal(req)
        study = hub.registration.submit_slmd(user, guid, req.json())
        hub.search.maybe_rebuild(force=True)
        return 200, study.to_json()

    def study_vlmd(req: Request, guid):
        user = principal(req)
        from .vlmd.model import DataDictionary, validate_vlmd
        from .errors import SchemaViolation

        dictionary = req.json() or {}
        violations = validate_vlmd(DataDictionary.from_json(dictionary))
        if violations:
            raise SchemaViolation(violations)
        study = hub.registration.attach_vlmd(user, guid, dictionary)
        hub.search.maybe_rebuild(force=True)
        return 200, study.to_json()

    def study_delegate(req: Request, guid):
        user = principal(req)
        body = req.json() or {}
        hub.registration.delegate(user, guid, body.get("user_id", ""),
                                  body.get("role", ""))
        return 200, {"delegated": True}

    def study_repository(req: Request, guid):
        user = principal(req)
        body = req.json() or {}
        study = hub.registration.set_repository(user, guid, body.get("repository_id", ""))
        return 200, study.to_json()

    router.add("GET", "/studies", studies_list)
    router.add("POST", "/studies/{guid:path}/claim-token", study_claim_token)
    router.add("POST", "/studies/{guid:path}/claim", study_claim)
    router.add("POST", "/studies/{guid:path}/nct", study_nct)
    router.add("POST", "/studies/{guid:path}/slmd", study_slmd)
    router.add("POST", "/studies/{guid:path}/vlmd", study_vlmd)
    router.add("POST", "/studies/{guid:path}/delegate", study_delegate)
    router.add("POST", "/studies/{guid:path}/repository", study_repository)
    router.add("GET", "/studies/{guid:path}", study_get)

    # -- search and stats ----------------------------------------------------------

    def search_route(req: Request, **_):
        hub.search.maybe_rebuild()
        selections = {}
        for key, values in req.query.items():
            if key.startswith("facet."):
                name = key[len("facet."):]
                if name not in hub.search.facet_names():
                    raise UnknownFacet(name)
                selections[name] = values
        try:
            limit = int(req.param("limit", "50"))
            offset = int(req.param("offset", "0"))
        except ValueError:
            raise InvalidQuery("limit and offset must be integers") from None
        guids, total = hub.search.search(
            text=req.param("text"), facet_selections=selections,
            limit=limit, offset=offset)
        return 200, {"guids": guids, "total": total,
                     "results": [_study_card(hub, g) for g in guids]}

    def facets_route(req: Request, **_):
        hub.search.maybe_rebuild()
        selections = {}
        for key, values in req.query.items():
            if key.startswith("facet."):
                selections[key[len("facet."):]] = values
        return 200, {"facets": hub.search.facet_names(),
                     "counts": hub.search.facet_counts(selections,
                                                       text=req.param("text"))}

    def stats_route(req: Request, **_):
        return 200, hub.search.overview_stats()

    router.add("GET", "/search", search_route)
    router.add("GET", "/facets", facets_route)
    router.add("GET", "/stats", stats_route)

    # -- static portal assets -------------------------------------------------------

    if portal_dir:
        root = Path(portal_dir).resolve()

        def portal_file(req: Request, asset="index.html"):
            target = (root / asset).resolve()
            if not str(target).startswith(str(root)) or not target.is_file():
                return 404, {"error": "NoRoute", "message": asset}
            data = target.read_bytes()
            ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
            return RawResponse(200, [data], content_length=len(data), content_type=ctype)

        router.add("GET", "/portal/{asset:path}",
                   lambda req, asset: portal_file(req, asset))
        router.add("GET", "/portal", lambda req: portal_file(req))
        router.add("GET", "/", lambda req: portal_file(req))

    return router
