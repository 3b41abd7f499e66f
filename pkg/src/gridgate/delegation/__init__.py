"""Dynamic proxy delegation: wire messages, server session store, client side."""

from gridgate.delegation.client import (
    DelegationClient,
    Transport,
    client_sign_challenge,
    run_delegation,
)
from gridgate.delegation.messages import (
    CsrChallenge,
    DelegationAck,
    DelegationMessage,
    FRAME_HEADER_LEN,
    InitRequest,
    MalformedMessageError,
    ProtocolError,
    SignedUpload,
    decode_frames,
    encode_frame,
    encode_message,
    message_payload,
    parse_message,
)
from gridgate.delegation.server import (
    DelegationError,
    DelegationRefusedError,
    DelegationServer,
    DelegationSession,
    InvalidChallengeError,
    SESSION_TTL,
    SessionExpiredError,
    SessionState,
    SubjectMismatchError,
    TransportFailureError,
    UnknownSessionError,
)

__all__ = [
    "CsrChallenge",
    "DelegationAck",
    "DelegationClient",
    "DelegationError",
    "DelegationMessage",
    "DelegationRefusedError",
    "DelegationServer",
    "DelegationSession",
    "FRAME_HEADER_LEN",
    "InitRequest",
    "InvalidChallengeError",
    "MalformedMessageError",
    "ProtocolError",
    "SESSION_TTL",
    "SessionExpiredError",
    "SessionState",
    "SignedUpload",
    "SubjectMismatchError",
    "Transport",
    "TransportFailureError",
    "UnknownSessionError",
    "client_sign_challenge",
    "decode_frames",
    "encode_frame",
    "encode_message",
    "message_payload",
    "parse_message",
    "run_delegation",
]
