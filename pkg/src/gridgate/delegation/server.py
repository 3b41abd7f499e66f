"""Server half of the delegation protocol: session store and state machine.

A session is born on InitRequest, holds the freshly generated keypair that
never leaves the process, and dies on its first completion attempt, on TTL
expiry, or on validation failure. Session ids are single-use: once a session
has left AwaitingSignature, any further message for it is UnknownSession.
"""

from __future__ import annotations

import datetime as dt
import enum
import secrets
from dataclasses import dataclass, field
from threading import Lock
from typing import Callable, Iterable, Optional

from gridgate.certs import (
    Certificate,
    DistinguishedName,
    IssuerMismatchError,
    KeyCertMismatchError,
    KeyPair,
    ProxyBundle,
    assemble_proxy_bundle,
    build_proxy_csr,
    generate_keypair,
    validate_proxy_chain,
)
from gridgate.certs.material import DEFAULT_STRENGTH
from gridgate.delegation.messages import (
    CsrChallenge,
    DelegationAck,
    DelegationMessage,
    InitRequest,
    ProtocolError,
    SignedUpload,
    encode_message,
    parse_message,
)

SESSION_TTL = dt.timedelta(seconds=120)


class DelegationError(Exception):
    """Base for delegation protocol failures."""


class SubjectMismatchError(DelegationError):
    """The challenge CSR is not for this identity."""


class InvalidChallengeError(DelegationError):
    """The challenge CSR's self-signature does not verify."""


class UnknownSessionError(DelegationError):
    """No live session with that id (never created, or already spent)."""


class SessionExpiredError(DelegationError):
    """The session outlived its TTL before the upload arrived."""


class TransportFailureError(DelegationError):
    """The byte channel failed mid-delegation."""


class DelegationRefusedError(DelegationError):
    """The server answered with an error ack."""

    def __init__(self, reason: str) -> None:
        super().__init__(reason)
        self.reason = reason


class SessionState(enum.Enum):
    AWAITING_SIGNATURE = "awaiting-signature"
    COMPLETED = "completed"
    EXPIRED = "expired"
    FAILED = "failed"


def _utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc).replace(microsecond=0)


@dataclass
class DelegationSession:
    session_id: str
    client_dn: DistinguishedName
    state: SessionState
    keypair: KeyPair = field(repr=False)
    challenge_csr_pem: str = field(repr=False)
    created_at: dt.datetime


class DelegationServer:
    """Holds pending sessions and turns signed uploads into proxy bundles."""

    def __init__(
        self,
        trust_anchors: Iterable[Certificate],
        *,
        strength: int = DEFAULT_STRENGTH,
        session_ttl: dt.timedelta = SESSION_TTL,
        clock: Callable[[], dt.datetime] = _utcnow,
        on_complete: Optional[Callable[[DelegationSession, ProxyBundle], None]] = None,
    ) -> None:
        self._anchors = list(trust_anchors)
        self._strength = strength
        self._ttl = session_ttl
        self._clock = clock
        self._on_complete = on_complete
        self._sessions: dict[str, DelegationSession] = {}
        self._lock = Lock()

    @property
    def pending_count(self) -> int:
        with self._lock:
            return len(self._sessions)

    def handle_init(self, request: InitRequest, now: dt.datetime | None = None) -> CsrChallenge:
        """Step 2 and 3: generate a keypair, answer with the CSR to sign."""
        now = now or self._clock()
        keypair = generate_keypair(self._strength)
        csr = build_proxy_csr(request.client_dn, keypair)
        session = DelegationSession(
            session_id=secrets.token_hex(16),
            client_dn=request.client_dn,
            state=SessionState.AWAITING_SIGNATURE,
            keypair=keypair,
            challenge_csr_pem=csr.pem(),
            created_at=now,
        )
        with self._lock:
            self._sessions[session.session_id] = session
        return CsrChallenge(session_id=session.session_id, csr=csr)

    def _take_awaiting(self, session_id: str, now: dt.datetime) -> DelegationSession:
        """Atomically claim the session; single-use is enforced here."""
        with self._lock:
            session = self._sessions.pop(session_id, None)
        if session is None or session.state is not SessionState.AWAITING_SIGNATURE:
            raise UnknownSessionError(f"no live session {session_id!r}")
        if now - session.created_at > self._ttl:
            session.state = SessionState.EXPIRED
            raise SessionExpiredError(f"session {session_id!r} exceeded its TTL")
        return session

    def complete(
        self, upload: SignedUpload, now: dt.datetime | None = None
    ) -> tuple[ProxyBundle | None, DelegationAck]:
        """Step 5: assemble the bundle and validate the full chain.

        Returns (bundle, ok ack) on success; (None, error ack) when the chain
        does not pass. Raises UnknownSessionError / SessionExpiredError for
        dead sessions.
        """
        now = now or self._clock()
        session = self._take_awaiting(upload.session_id, now)

        def refuse(reason: str) -> tuple[None, DelegationAck]:
            session.state = SessionState.FAILED
            return None, DelegationAck(
                session_id=session.session_id, status="error", reason=reason
            )

        try:
            bundle = assemble_proxy_bundle(
                upload.proxy_cert, session.keypair.private_key, upload.user_cert
            )
        except (KeyCertMismatchError, IssuerMismatchError) as exc:
            return refuse(f"chain-invalid: {exc}")
        if upload.user_cert.subject != session.client_dn:
            return refuse(
                f"chain-invalid: user certificate is for {upload.user_cert.subject}, "
                f"session is for {session.client_dn}"
            )
        report = validate_proxy_chain(bundle, self._anchors, now=now)
        if not report.valid:
            return refuse("chain-invalid: " + ",".join(sorted(report.codes())))

        session.state = SessionState.COMPLETED
        if self._on_complete is not None:
            self._on_complete(session, bundle)
        ack = DelegationAck(
            session_id=session.session_id,
            status="ok",
            effective_expiry=report.effective_expiry,
        )
        return bundle, ack

    def purge_expired(self, now: dt.datetime | None = None) -> int:
        """Drop sessions past their TTL; returns how many were dropped."""
        now = now or self._clock()
        dropped = 0
        with self._lock:
            for session_id in list(self._sessions):
                session = self._sessions[session_id]
                if now - session.created_at > self._ttl:
                    session.state = SessionState.EXPIRED
                    del self._sessions[session_id]
                    dropped += 1
        return dropped

    def handle_message(self, data: bytes, now: dt.datetime | None = None) -> bytes:
        """Byte-level entry point: one canonical message in, one reply out.

        Framing (and frame recording) belongs to the transport around this.
        Dead-session errors come back as error acks so remote peers get an
        answer instead of a dropped connection.
        """
        message: DelegationMessage = parse_message(data)
        if isinstance(message, InitRequest):
            return encode_message(self.handle_init(message, now=now))
        if isinstance(message, SignedUpload):
            try:
                _bundle, ack = self.complete(message, now=now)
            except UnknownSessionError:
                ack = DelegationAck(
                    session_id=message.session_id, status="error", reason="unknown-session"
                )
            except SessionExpiredError:
                ack = DelegationAck(
                    session_id=message.session_id, status="error", reason="session-expired"
                )
            return encode_message(ack)
        raise ProtocolError(f"server does not accept {type(message).__name__} frames")
