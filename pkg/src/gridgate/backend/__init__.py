"""Simulated grid back end: authorization, sandboxes, jobs, credential store."""

from gridgate.backend.errors import (
    AssertionMismatchError,
    BackendError,
    BadPasswordError,
    ClearedError,
    CredentialExpiredError,
    InvalidDescriptorError,
    InvalidProxyError,
    InvalidRequestError,
    MalformedArchiveError,
    NoRenewalCredentialError,
    NotAMemberError,
    NotFinishedError,
    NotTerminalError,
    PathTraversalError,
    ProxyExpiredError,
    RenewalDeniedError,
    UnknownCredentialError,
    UnknownJobError,
    UnknownVoError,
)
from gridgate.backend.myproxy import (
    DEFAULT_MAX_RENEWAL_LIFETIME,
    MyProxySimulator,
    StoredCredential,
)
from gridgate.backend.sandbox import (
    check_relative_path,
    compress_sandbox,
    decompress_sandbox,
)
from gridgate.backend.voms import (
    ASSERTION_VALIDITY,
    AttributeAssertion,
    VoRegistry,
    VomsSimulator,
    assertion_payload,
)
from gridgate.backend.wms import (
    LEGAL_TRANSITIONS,
    RENEWAL_QUANTUM,
    TERMINAL_STATUSES,
    JobRecord,
    JobSnapshot,
    JobStatus,
    Timetable,
    TimetableEntry,
    WorkloadManager,
    history_violations,
    is_legal_transition,
    validate_history,
)

__all__ = [
    "ASSERTION_VALIDITY",
    "AssertionMismatchError",
    "AttributeAssertion",
    "BackendError",
    "BadPasswordError",
    "ClearedError",
    "CredentialExpiredError",
    "DEFAULT_MAX_RENEWAL_LIFETIME",
    "InvalidDescriptorError",
    "InvalidProxyError",
    "InvalidRequestError",
    "JobRecord",
    "JobSnapshot",
    "JobStatus",
    "LEGAL_TRANSITIONS",
    "MalformedArchiveError",
    "MyProxySimulator",
    "NoRenewalCredentialError",
    "NotAMemberError",
    "NotFinishedError",
    "NotTerminalError",
    "PathTraversalError",
    "ProxyExpiredError",
    "RENEWAL_QUANTUM",
    "RenewalDeniedError",
    "StoredCredential",
    "TERMINAL_STATUSES",
    "Timetable",
    "TimetableEntry",
    "UnknownCredentialError",
    "UnknownJobError",
    "UnknownVoError",
    "VoRegistry",
    "VomsSimulator",
    "WorkloadManager",
    "assertion_payload",
    "check_relative_path",
    "compress_sandbox",
    "decompress_sandbox",
    "history_violations",
    "is_legal_transition",
    "validate_history",
]
