"""PKCS#12 to PEM conversion for personal certificates."""

from __future__ import annotations

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import rsa
from cryptography.hazmat.primitives.serialization import pkcs12 as _pkcs12

from gridgate.certs.material import Certificate


class BadPasswordError(ValueError):
    """Archive is structurally sound but the password does not open it."""


class MalformedArchiveError(ValueError):
    """Input bytes are not a PKCS#12 archive."""


def _looks_like_pkcs12(data: bytes) -> bool:
    """Structural probe: outer DER SEQUENCE wrapping INTEGER version 3."""
    if len(data) < 4 or data[0] != 0x30:
        return False
    first = data[1]
    if first < 0x80:
        header, length = 2, first
    else:
        n = first & 0x7F
        if n == 0 or n > 4 or len(data) < 2 + n:
            return False
        header, length = 2 + n, int.from_bytes(data[2 : 2 + n], "big")
    if header + length != len(data):
        return False
    return data[header : header + 3] == b"\x02\x01\x03"


def convert_p12_to_pem(p12: bytes, password: str) -> tuple[str, str]:
    """Unpack a PKCS#12 archive into (certificate PEM, private key PEM)."""
    if not _looks_like_pkcs12(bytes(p12)):
        raise MalformedArchiveError("input is not a PKCS#12 archive")
    try:
        key, cert, _extras = _pkcs12.load_key_and_certificates(
            bytes(p12), password.encode("utf-8") or None
        )
    except ValueError as exc:
        raise BadPasswordError("wrong password for PKCS#12 archive") from exc
    if cert is None or key is None:
        raise MalformedArchiveError("archive does not contain both a certificate and a key")
    if not isinstance(key, rsa.RSAPrivateKey):
        raise MalformedArchiveError("archive key is not an RSA private key")
    cert_pem = cert.public_bytes(serialization.Encoding.PEM).decode("ascii")
    key_pem = key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    ).decode("ascii")
    return cert_pem, key_pem


def bundle_p12(cert: Certificate, key: rsa.RSAPrivateKey, password: str, name: bytes = b"identity") -> bytes:
    """Pack a certificate and key into a password-protected PKCS#12 archive."""
    if password:
        encryption: serialization.KeySerializationEncryption = (
            serialization.BestAvailableEncryption(password.encode("utf-8"))
        )
    else:
        encryption = serialization.NoEncryption()
    return _pkcs12.serialize_key_and_certificates(name, key, cert.raw, None, encryption)
