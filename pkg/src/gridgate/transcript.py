"""Recording of transported frames, and scanning them for secret material.

Every component that moves bytes on behalf of a user (delegation transport,
gateway client, credential store simulator) records what it sent into a
Transcript. Tests and the bench tool read the transcript back to count frames
and to prove that private keys never crossed the wire in any encoding.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from threading import Lock
from typing import Iterable, Iterator

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import rsa


@dataclass(frozen=True)
class Frame:
    """One transported unit: who sent it, what it was, and the raw bytes."""

    sender: str
    label: str
    payload: bytes = field(repr=False)

    def __len__(self) -> int:
        return len(self.payload)


class Transcript:
    """Append-only, thread-safe record of frames on one channel."""

    def __init__(self, channel: str = "") -> None:
        self.channel = channel
        self._frames: list[Frame] = []
        self._lock = Lock()

    def record(self, sender: str, label: str, payload: bytes) -> Frame:
        frame = Frame(sender=sender, label=label, payload=bytes(payload))
        with self._lock:
            self._frames.append(frame)
        return frame

    @property
    def frames(self) -> tuple[Frame, ...]:
        with self._lock:
            return tuple(self._frames)

    def __len__(self) -> int:
        with self._lock:
            return len(self._frames)

    def __iter__(self) -> Iterator[Frame]:
        return iter(self.frames)

    def clear(self) -> None:
        with self._lock:
            self._frames.clear()

    def total_bytes(self) -> int:
        return sum(len(f) for f in self.frames)


def _pem_body(pem: bytes) -> bytes:
    """The base64 payload lines of a PEM document, newline-joined."""
    lines = [ln for ln in pem.splitlines() if ln and not ln.startswith(b"-----")]
    return b"\n".join(lines)


def private_key_blobs(private_key: rsa.RSAPrivateKey) -> tuple[bytes, ...]:
    """Every serialization of the key whose presence in traffic means leakage.

    Covers raw DER (PKCS#8 and PKCS#1), single-line base64 of both, the
    PEM-armored documents, and the bare PEM body lines.
    """
    der_pkcs8 = private_key.private_bytes(
        serialization.Encoding.DER,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )
    der_pkcs1 = private_key.private_bytes(
        serialization.Encoding.DER,
        serialization.PrivateFormat.TraditionalOpenSSL,
        serialization.NoEncryption(),
    )
    pem_pkcs8 = private_key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )
    pem_pkcs1 = private_key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.TraditionalOpenSSL,
        serialization.NoEncryption(),
    )
    return (
        der_pkcs8,
        der_pkcs1,
        base64.b64encode(der_pkcs8),
        base64.b64encode(der_pkcs1),
        pem_pkcs8,
        pem_pkcs1,
        _pem_body(pem_pkcs8),
        _pem_body(pem_pkcs1),
    )


def _normalized(payload: bytes) -> bytes:
    """Collapse whitespace and escaped newlines so split base64 still matches."""
    out = payload.replace(b"\\r", b"").replace(b"\\n", b"")
    for ws in (b"\r", b"\n", b"\t", b" "):
        out = out.replace(ws, b"")
    return out


@dataclass(frozen=True)
class LeakHit:
    frame_index: int
    frame_label: str
    form: str


def scan_for_blobs(transcript: Transcript, blobs: Iterable[bytes]) -> list[LeakHit]:
    """Find frames containing any blob, raw or whitespace-reflowed."""
    blob_list = [(i, b) for i, b in enumerate(blobs) if b]
    hits: list[LeakHit] = []
    for index, frame in enumerate(transcript.frames):
        raw = frame.payload
        flat = _normalized(raw)
        for blob_index, blob in blob_list:
            if blob in raw or _normalized(blob) in flat:
                hits.append(
                    LeakHit(frame_index=index, frame_label=frame.label, form=f"blob[{blob_index}]")
                )
                break
    return hits


def scan_for_private_key(
    transcript: Transcript, private_keys: Iterable[rsa.RSAPrivateKey]
) -> list[LeakHit]:
    """Scan for any serialization of any of the given private keys."""
    blobs: list[bytes] = []
    for key in private_keys:
        blobs.extend(private_key_blobs(key))
    return scan_for_blobs(transcript, blobs)
