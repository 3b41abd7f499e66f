"""Delegation wire messages and their canonical framed encoding.

Four message kinds cross the wire: InitRequest, CsrChallenge, SignedUpload,
DelegationAck. None of them has a field that could carry private-key material.
The canonical byte form is compact sorted-key JSON, UTF-8, with a 4-byte
big-endian length prefix; parse(serialize(m)) == m for every constructible m.
"""

from __future__ import annotations

import datetime as dt
import json
import struct
from dataclasses import dataclass
from typing import Union

from gridgate.certs import (
    Certificate,
    CertSigningRequest,
    DistinguishedName,
    MalformedDnError,
    PemDecodeError,
)

FRAME_HEADER_LEN = 4
_MAX_FRAME_LEN = 1 << 24  # 16 MiB; no legitimate message comes close


class ProtocolError(ValueError):
    """The byte stream violates the framing or message grammar."""


class MalformedMessageError(ProtocolError):
    """A frame decoded to JSON but not to a valid message."""


@dataclass(frozen=True)
class InitRequest:
    client_dn: DistinguishedName


@dataclass(frozen=True)
class CsrChallenge:
    session_id: str
    csr: CertSigningRequest


@dataclass(frozen=True)
class SignedUpload:
    session_id: str
    proxy_cert: Certificate
    user_cert: Certificate


@dataclass(frozen=True)
class DelegationAck:
    session_id: str
    status: str  # "ok" | "error"
    effective_expiry: dt.datetime | None = None
    reason: str | None = None

    def __post_init__(self) -> None:
        if self.status not in ("ok", "error"):
            raise MalformedMessageError(f"ack status must be ok or error, got {self.status!r}")
        if self.status == "ok" and self.effective_expiry is None:
            raise MalformedMessageError("ok ack requires effective_expiry")
        if self.status == "error" and not self.reason:
            raise MalformedMessageError("error ack requires a reason")


DelegationMessage = Union[InitRequest, CsrChallenge, SignedUpload, DelegationAck]

_TYPE_INIT = "init"
_TYPE_CHALLENGE = "challenge"
_TYPE_UPLOAD = "upload"
_TYPE_ACK = "ack"


def message_payload(message: DelegationMessage) -> dict:
    """The message's JSON field dict, without the type tag."""
    if isinstance(message, InitRequest):
        return {"client_dn": message.client_dn.render()}
    if isinstance(message, CsrChallenge):
        return {"session_id": message.session_id, "csr_pem": message.csr.pem()}
    if isinstance(message, SignedUpload):
        return {
            "session_id": message.session_id,
            "proxy_cert_pem": message.proxy_cert.pem(),
            "user_cert_pem": message.user_cert.pem(),
        }
    if isinstance(message, DelegationAck):
        expiry = message.effective_expiry
        return {
            "session_id": message.session_id,
            "status": message.status,
            "effective_expiry": expiry.isoformat() if expiry is not None else None,
            "reason": message.reason,
        }
    raise TypeError(f"not a delegation message: {type(message).__name__}")


def _message_type(message: DelegationMessage) -> str:
    return {
        InitRequest: _TYPE_INIT,
        CsrChallenge: _TYPE_CHALLENGE,
        SignedUpload: _TYPE_UPLOAD,
        DelegationAck: _TYPE_ACK,
    }[type(message)]


def encode_message(message: DelegationMessage) -> bytes:
    """Canonical unframed byte form: sorted-key compact JSON, UTF-8."""
    doc = dict(message_payload(message), type=_message_type(message))
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _require_str(doc: dict, key: str) -> str:
    value = doc.get(key)
    if not isinstance(value, str):
        raise MalformedMessageError(f"field {key!r} must be a string")
    return value


def _check_fields(doc: dict, allowed: set[str]) -> None:
    extra = set(doc) - allowed - {"type"}
    if extra:
        raise MalformedMessageError(f"unexpected fields: {sorted(extra)}")


def _parse_expiry(value: object) -> dt.datetime | None:
    if value is None:
        return None
    if not isinstance(value, str):
        raise MalformedMessageError("effective_expiry must be an ISO-8601 string")
    try:
        parsed = dt.datetime.fromisoformat(value)
    except ValueError as exc:
        raise MalformedMessageError(f"bad effective_expiry: {exc}") from exc
    if parsed.tzinfo is None:
        raise MalformedMessageError("effective_expiry must carry a UTC offset")
    return parsed


def parse_message(data: bytes) -> DelegationMessage:
    """Parse one canonical message; inverse of encode_message."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedMessageError(f"frame is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedMessageError("frame must be a JSON object")
    kind = doc.get("type")
    if kind == _TYPE_INIT:
        _check_fields(doc, {"client_dn"})
        try:
            dn = DistinguishedName.parse(_require_str(doc, "client_dn"))
        except MalformedDnError as exc:
            raise MalformedMessageError(f"bad client_dn: {exc}") from exc
        return InitRequest(client_dn=dn)
    if kind == _TYPE_CHALLENGE:
        _check_fields(doc, {"session_id", "csr_pem"})
        try:
            csr = CertSigningRequest.from_pem(_require_str(doc, "csr_pem"))
        except PemDecodeError as exc:
            raise MalformedMessageError(f"bad csr_pem: {exc}") from exc
        return CsrChallenge(session_id=_require_str(doc, "session_id"), csr=csr)
    if kind == _TYPE_UPLOAD:
        _check_fields(doc, {"session_id", "proxy_cert_pem", "user_cert_pem"})
        try:
            proxy_cert = Certificate.from_pem(_require_str(doc, "proxy_cert_pem"))
            user_cert = Certificate.from_pem(_require_str(doc, "user_cert_pem"))
        except PemDecodeError as exc:
            raise MalformedMessageError(f"bad certificate PEM: {exc}") from exc
        return SignedUpload(
            session_id=_require_str(doc, "session_id"),
            proxy_cert=proxy_cert,
            user_cert=user_cert,
        )
    if kind == _TYPE_ACK:
        _check_fields(doc, {"session_id", "status", "effective_expiry", "reason"})
        status = _require_str(doc, "status")
        reason = doc.get("reason")
        if reason is not None and not isinstance(reason, str):
            raise MalformedMessageError("reason must be a string or null")
        return DelegationAck(
            session_id=_require_str(doc, "session_id"),
            status=status,
            effective_expiry=_parse_expiry(doc.get("effective_expiry")),
            reason=reason,
        )
    raise MalformedMessageError(f"unknown message type: {kind!r}")


def encode_frame(message: DelegationMessage) -> bytes:
    """Length-prefixed canonical encoding, ready for a byte stream."""
    body = encode_message(message)
    return struct.pack(">I", len(body)) + body


def decode_frames(buffer: bytes) -> tuple[list[DelegationMessage], bytes]:
    """Split a buffer into complete messages plus the unconsumed tail."""
    messages: list[DelegationMessage] = []
    view = memoryview(buffer)
    while len(view) >= FRAME_HEADER_LEN:
        (length,) = struct.unpack(">I", view[:FRAME_HEADER_LEN])
        if length > _MAX_FRAME_LEN:
            raise ProtocolError(f"frame length {length} exceeds limit")
        if len(view) < FRAME_HEADER_LEN + length:
            break
        body = bytes(view[FRAME_HEADER_LEN : FRAME_HEADER_LEN + length])
        messages.append(parse_message(body))
        view = view[FRAME_HEADER_LEN + length :]
    return messages, bytes(view)
