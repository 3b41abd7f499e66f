"""Proxy certificate construction: CSRs, signing, and bundle assembly.

The delegation split: the party that will act (the server) generates the key
pair and a CSR carrying the user's bare DN; the user signs that CSR into a
proxy certificate whose subject extends the user DN by one CN holding the
decimal serial. The signed certificate plus the generated private key plus the
user certificate form the acting credential.
"""

from __future__ import annotations

import datetime as dt
import os
import secrets
from dataclasses import dataclass, field

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import rsa

from gridgate.certs.dn import DistinguishedName
from gridgate.certs.material import (
    Certificate,
    CertSigningRequest,
    KeyPair,
    PemDecodeError,
    key_matches_certificate,
    public_keys_equal,
)

# RFC 3820 proxyCertInfo extension with the inheritAll policy language and no
# path length constraint; marks a certificate as a proxy for path validators.
PROXY_CERT_INFO_OID = x509.ObjectIdentifier("1.3.6.1.5.5.7.1.14")
PROXY_CERT_INFO_INHERIT_ALL = bytes.fromhex("300c300a06082b06010505071501")

DEFAULT_PROXY_LIFETIME = dt.timedelta(hours=12)


class CsrSubjectMismatchError(ValueError):
    """CSR subject does not match the signing identity's subject."""


class InvalidCsrSignatureError(ValueError):
    """CSR proof-of-possession signature does not verify."""


class IssuerExpiredError(ValueError):
    """The signing identity's certificate has expired."""


class KeyCertMismatchError(ValueError):
    """Private key does not match the certificate public key."""


class IssuerMismatchError(ValueError):
    """Proxy certificate was not issued by the supplied user certificate."""


def _utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc).replace(microsecond=0)


@dataclass(frozen=True)
class IdentityCredential:
    """A user's long-lived certificate plus private key; never leaves the client."""

    certificate: Certificate
    private_key: rsa.RSAPrivateKey = field(repr=False, compare=False)

    def __post_init__(self) -> None:
        if not key_matches_certificate(self.private_key, self.certificate):
            raise KeyCertMismatchError("private key does not match certificate")

    @property
    def subject(self) -> DistinguishedName:
        return self.certificate.subject

    @classmethod
    def load(cls, cert_pem: str | bytes, key_pem: str | bytes) -> "IdentityCredential":
        cert = Certificate.from_pem(cert_pem)
        pair = KeyPair.from_private_pem(key_pem)
        return cls(certificate=cert, private_key=pair.private_key)


@dataclass(frozen=True)
class ProxyBundle:
    """The server-side acting credential: proxy cert + proxy key + issuer chain.

    Shape-only container: it may hold a hostile or broken chain (e.g. parsed
    from foreign PEM) so that validate_proxy_chain can judge it.
    assemble_proxy_bundle enforces the semantic invariants at construction.
    """

    proxy_cert: Certificate
    proxy_private_key: rsa.RSAPrivateKey = field(repr=False, compare=False)
    issuer_chain: tuple[Certificate, ...] = ()

    def __post_init__(self) -> None:
        if not self.issuer_chain:
            raise IssuerMismatchError("issuer chain must not be empty")

    @property
    def end_user_dn(self) -> DistinguishedName:
        return self.issuer_chain[0].subject

    def to_pem(self) -> str:
        """Concatenated PEM: proxy cert, proxy key, then the chain end-entity first."""
        key_pem = self.proxy_private_key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        ).decode("ascii")
        parts = [self.proxy_cert.pem(), key_pem]
        parts.extend(cert.pem() for cert in self.issuer_chain)
        return "".join(parts)

    @classmethod
    def from_pem(cls, pem: str | bytes) -> "ProxyBundle":
        text = pem.decode("ascii") if isinstance(pem, bytes) else pem
        certs = []
        key = None
        for block in _split_pem_blocks(text):
            if "CERTIFICATE" in block.splitlines()[0]:
                certs.append(Certificate.from_pem(block))
            elif "PRIVATE KEY" in block.splitlines()[0]:
                pair = KeyPair.from_private_pem(block)
                key = pair.private_key
        if key is None or len(certs) < 2:
            raise PemDecodeError("bundle needs a private key and at least two certificates")
        return cls(proxy_cert=certs[0], proxy_private_key=key, issuer_chain=tuple(certs[1:]))

    def write_file(self, path: str | os.PathLike) -> None:
        """Write the bundle with owner-only permissions."""
        data = self.to_pem().encode("ascii")
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        try:
            os.write(fd, data)
        finally:
            os.close(fd)


def _split_pem_blocks(text: str) -> list[str]:
    blocks = []
    current: list[str] = []
    for line in text.splitlines():
        if line.startswith("-----BEGIN "):
            current = [line]
        elif line.startswith("-----END "):
            current.append(line)
            blocks.append("\n".join(current) + "\n")
            current = []
        elif current:
            current.append(line)
    return blocks


def build_proxy_csr(client_dn: DistinguishedName, keypair: KeyPair) -> CertSigningRequest:
    """Build the delegation CSR: the bare client DN plus the fresh public key."""
    csr = (
        x509.CertificateSigningRequestBuilder()
        .subject_name(client_dn.to_x509())
        .sign(keypair.private_key, hashes.SHA256())
    )
    return CertSigningRequest.wrap(csr)


def sign_proxy_csr(
    csr: CertSigningRequest,
    issuer: IdentityCredential,
    lifetime: dt.timedelta,
    now: dt.datetime | None = None,
) -> Certificate:
    """Sign a delegation CSR into a proxy certificate (runs on the client).

    The proxy subject is the issuer subject plus CN=<decimal serial>; the
    validity window is clamped so the proxy never outlives the issuer.
    """
    now = now or _utcnow()
    if lifetime <= dt.timedelta(0):
        raise ValueError("lifetime must be positive")
    if not csr.self_signature_valid:
        raise InvalidCsrSignatureError("CSR self-signature does not verify")
    if csr.subject != issuer.certificate.subject:
        raise CsrSubjectMismatchError(
            f"CSR subject {csr.subject} != issuer subject {issuer.certificate.subject}"
        )
    if now >= issuer.certificate.not_after:
        raise IssuerExpiredError("issuer certificate has expired")

    serial = secrets.randbits(64) or 1
    subject = issuer.certificate.subject.with_cn(str(serial))
    not_after = min(now + lifetime, issuer.certificate.not_after)
    cert = (
        x509.CertificateBuilder()
        .subject_name(subject.to_x509())
        .issuer_name(issuer.certificate.subject.to_x509())
        .public_key(csr.public_key)
        .serial_number(serial)
        .not_valid_before(now)
        .not_valid_after(not_after)
        .add_extension(
            x509.KeyUsage(
                digital_signature=True,
                content_commitment=False,
                key_encipherment=True,
                data_encipherment=False,
                key_agreement=False,
                key_cert_sign=False,
                crl_sign=False,
                encipher_only=False,
                decipher_only=False,
            ),
            critical=True,
        )
        .add_extension(
            x509.UnrecognizedExtension(PROXY_CERT_INFO_OID, PROXY_CERT_INFO_INHERIT_ALL),
            critical=True,
        )
        .sign(issuer.private_key, hashes.SHA256())
    )
    return Certificate.wrap(cert)


def assemble_proxy_bundle(
    proxy_cert: Certificate,
    proxy_key: rsa.RSAPrivateKey,
    user_cert: Certificate,
) -> ProxyBundle:
    """Combine the signed proxy, the locally generated key, and the user cert."""
    if not public_keys_equal(proxy_key.public_key(), proxy_cert.public_key):
        raise KeyCertMismatchError("proxy key does not match proxy certificate")
    if proxy_cert.issuer != user_cert.subject:
        raise IssuerMismatchError(
            f"proxy issuer {proxy_cert.issuer} != user subject {user_cert.subject}"
        )
    return ProxyBundle(
        proxy_cert=proxy_cert,
        proxy_private_key=proxy_key,
        issuer_chain=(user_cert,),
    )


def remaining_lifetime(bundle: ProxyBundle, now: dt.datetime | None = None) -> dt.timedelta:
    """Time until the earliest expiry in the bundle's chain, floored at zero."""
    now = now or _utcnow()
    expiries = [bundle.proxy_cert.not_after]
    expiries.extend(cert.not_after for cert in bundle.issuer_chain)
    return max(dt.timedelta(0), min(expiries) - now)


def create_local_proxy(
    identity: IdentityCredential,
    lifetime: dt.timedelta = DEFAULT_PROXY_LIFETIME,
    strength: int | None = None,
    now: dt.datetime | None = None,
) -> ProxyBundle:
    """Create a proxy entirely on the client (the legacy credential-store flow)."""
    from gridgate.certs.material import DEFAULT_STRENGTH, generate_keypair

    pair = generate_keypair(strength or DEFAULT_STRENGTH)
    csr = build_proxy_csr(identity.subject, pair)
    proxy_cert = sign_proxy_csr(csr, identity, lifetime, now=now)
    return assemble_proxy_bundle(proxy_cert, pair.private_key, identity.certificate)
