"""Client half of the delegation protocol.

The client owns the personal credential. It signs the server's CSR into a
proxy certificate with its long-lived private key; that key is used in place
and never serialized, so no frame can carry it.
"""

from __future__ import annotations

import datetime as dt
import struct
from dataclasses import dataclass
from typing import Callable, Optional

from gridgate.certs import (
    CsrSubjectMismatchError,
    DEFAULT_PROXY_LIFETIME,
    IdentityCredential,
    InvalidCsrSignatureError,
    sign_proxy_csr,
)
from gridgate.delegation.messages import (
    CsrChallenge,
    DelegationAck,
    InitRequest,
    ProtocolError,
    SignedUpload,
    encode_message,
    parse_message,
)
from gridgate.delegation.server import (
    DelegationRefusedError,
    InvalidChallengeError,
    SubjectMismatchError,
    TransportFailureError,
)
from gridgate.transcript import Transcript

# takes one canonical message, returns the peer's canonical reply
Transport = Callable[[bytes], bytes]


def client_sign_challenge(
    challenge: CsrChallenge,
    identity: IdentityCredential,
    lifetime: dt.timedelta = DEFAULT_PROXY_LIFETIME,
    now: dt.datetime | None = None,
) -> SignedUpload:
    """Step 4: sign the challenge CSR into a proxy cert, build the upload."""
    if challenge.csr.subject != identity.subject:
        raise SubjectMismatchError(
            f"challenge is for {challenge.csr.subject}, not {identity.subject}"
        )
    if not challenge.csr.self_signature_valid:
        raise InvalidChallengeError("challenge CSR self-signature does not verify")
    try:
        proxy_cert = sign_proxy_csr(challenge.csr, identity, lifetime, now=now)
    except CsrSubjectMismatchError as exc:  # pragma: no cover - pre-checked above
        raise SubjectMismatchError(str(exc)) from exc
    except InvalidCsrSignatureError as exc:  # pragma: no cover - pre-checked above
        raise InvalidChallengeError(str(exc)) from exc
    return SignedUpload(
        session_id=challenge.session_id,
        proxy_cert=proxy_cert,
        user_cert=identity.certificate,
    )


@dataclass(frozen=True)
class DelegationClient:
    """Binds an identity and a lifetime choice to the protocol steps."""

    identity: IdentityCredential
    lifetime: dt.timedelta = DEFAULT_PROXY_LIFETIME

    def initial_request(self) -> InitRequest:
        return InitRequest(client_dn=self.identity.subject)

    def sign_challenge(
        self, challenge: CsrChallenge, now: dt.datetime | None = None
    ) -> SignedUpload:
        return client_sign_challenge(challenge, self.identity, self.lifetime, now=now)


def _framed(body: bytes) -> bytes:
    return struct.pack(">I", len(body)) + body


def run_delegation(
    transport: Transport,
    identity: IdentityCredential,
    lifetime: dt.timedelta = DEFAULT_PROXY_LIFETIME,
    transcript: Optional[Transcript] = None,
    now: dt.datetime | None = None,
) -> dt.datetime:
    """Drive the full round trip; returns the granted effective expiry.

    Exactly four frames cross the transport on success: init, challenge,
    upload, ack. Each is recorded into the transcript when one is given.
    """
    client = DelegationClient(identity=identity, lifetime=lifetime)

    def exchange(label_out: str, label_in: str, message) -> bytes:
        body = encode_message(message)
        if transcript is not None:
            transcript.record("client", label_out, _framed(body))
        try:
            reply = transport(body)
        except (OSError, ConnectionError) as exc:
            raise TransportFailureError(f"transport failed during {label_out}: {exc}") from exc
        if transcript is not None:
            transcript.record("server", label_in, _framed(reply))
        return reply

    reply = parse_message(exchange("init", "challenge", client.initial_request()))
    if isinstance(reply, DelegationAck):
        raise DelegationRefusedError(reply.reason or "refused")
    if not isinstance(reply, CsrChallenge):
        raise ProtocolError(f"expected a challenge, got {type(reply).__name__}")

    upload = client.sign_challenge(reply, now=now)
    ack = parse_message(exchange("upload", "ack", upload))
    if not isinstance(ack, DelegationAck):
        raise ProtocolError(f"expected an ack, got {type(ack).__name__}")
    if ack.status != "ok":
        raise DelegationRefusedError(ack.reason or "refused")
    assert ack.effective_expiry is not None  # guaranteed by ack invariant
    return ack.effective_expiry
