"""Error taxonomy shared by the simulated backend components."""

from __future__ import annotations


class BackendError(Exception):
    """Base for all backend failures."""


# sandbox archives
class PathTraversalError(BackendError):
    """A sandbox path escapes its root (absolute, '..', or malformed)."""


class MalformedArchiveError(BackendError):
    """Bytes are not a readable sandbox archive."""


# authorization
class UnknownVoError(BackendError):
    """No such virtual organisation in the registry."""


class NotAMemberError(BackendError):
    """The DN is not a member of the requested organisation."""


class InvalidProxyError(BackendError):
    """The presented proxy bundle does not validate."""


# credential store
class InvalidRequestError(BackendError):
    """Store request is structurally unacceptable (e.g. empty username)."""


class BadPasswordError(BackendError):
    """Password does not match the stored credential."""


class UnknownCredentialError(BackendError):
    """No credential stored under that username."""


class CredentialExpiredError(BackendError):
    """The stored credential's bundle has expired."""


# workload management
class InvalidDescriptorError(BackendError):
    """Job description failed validation."""

    def __init__(self, message: str, issues=()):
        super().__init__(message)
        self.issues = tuple(issues)


class AssertionMismatchError(BackendError):
    """Authorization assertion absent, expired, or for a different identity."""


class ProxyExpiredError(BackendError):
    """The working proxy has no remaining lifetime."""


class UnknownJobError(BackendError):
    """No job with that id."""


class NotFinishedError(BackendError):
    """Output requested before the job reached a terminal state."""


class ClearedError(BackendError):
    """The job was cleared; its archives are gone."""


class NotTerminalError(BackendError):
    """Clear requested on a job that has not finished."""


class NoRenewalCredentialError(BackendError):
    """No external credential was registered for this job at submit time."""


class RenewalDeniedError(BackendError):
    """Renewal cannot extend the working proxy any further."""
