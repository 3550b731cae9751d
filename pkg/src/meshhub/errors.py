"""Error types shared across hub services.

Every service raises subclasses of MeshHubError; the HTTP layer maps
``http_status`` to a response code and the class name becomes the
machine-readable error code on the wire.
"""

from __future__ import annotations


class MeshHubError(Exception):
    http_status = 500


# --- generic request shape ---

class BadRequest(MeshHubError):
    http_status = 400


class NotFound(MeshHubError):
    http_status = 404


class Conflict(MeshHubError):
    http_status = 409


class Forbidden(MeshHubError):
    http_status = 403


# --- metadata-service ---

class DuplicateGuid(Conflict):
    pass


class UnknownGuid(NotFound):
    pass


class MalformedPayload(BadRequest):
    pass


class InvalidQuery(BadRequest):
    pass


# --- pid-index ---

class UnknownRepository(NotFound):
    pass


class InvalidChecksum(BadRequest):
    pass


class NoAccessMethod(BadRequest):
    pass


class UnknownPid(NotFound):
    pass


class MalformedPid(BadRequest):
    pass


# --- auth-service ---

class UnknownUser(NotFound):
    pass


class DuplicateUser(Conflict):
    pass


class ScopeNotGrantable(Forbidden):
    pass


class MalformedPath(BadRequest):
    pass


class TokenInvalid(MeshHubError):
    http_status = 401


class Expired(TokenInvalid):
    pass


class NotAuthorized(Forbidden):
    pass


# --- adapter-framework ---

class DuplicateSource(Conflict):
    pass


class InvalidMapping(BadRequest):
    pass


class UnknownSource(NotFound):
    pass


class SourceUnreachable(MeshHubError):
    http_status = 502


class TransformFailure(BadRequest):
    pass


# --- repository-gateway ---

class Denied(Forbidden):
    pass


# --- registration-service ---

class DuplicateAward(Conflict):
    pass


class UnknownStudy(NotFound):
    pass


class AlreadyClaimed(Conflict):
    pass


class BadClaimToken(Forbidden):
    pass


class MalformedNct(BadRequest):
    pass


class RegistryMiss(NotFound):
    pass


class SchemaViolation(BadRequest):
    """Carries field-level messages in ``violations``."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "schema violation")


class WrongState(Conflict):
    pass


# --- vlmd-tool ---

class EmptyFile(BadRequest):
    pass


class DuplicateHeader(BadRequest):
    pass


class RaggedRows(BadRequest):
    pass


class MissingNameColumn(BadRequest):
    pass


class DuplicateVariable(BadRequest):
    pass


class UnrecognizedHeader(BadRequest):
    pass


# --- search-service ---

class UnknownFacet(BadRequest):
    pass


# --- mesh-harness ---

class ScriptError(BadRequest):
    pass


class NonEmptyStore(Conflict):
    pass


class PortExhausted(MeshHubError):
    http_status = 503
