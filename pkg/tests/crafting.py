"""Helpers for crafting deliberately malformed proxy certificates.

The production signer refuses to produce broken chains, so tests build their
own certificates with the low-level x509 builder when a specific defect is
needed (wrong naming, missing marker, inflated lifetime, CA flag, bad key).
"""

from __future__ import annotations

import datetime as dt

from cryptography import x509
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import rsa

from gridgate.certs import (
    PROXY_CERT_INFO_INHERIT_ALL,
    PROXY_CERT_INFO_OID,
    Certificate,
    IdentityCredential,
    KeyPair,
    generate_keypair,
)


def craft_proxy_cert(
    issuer: IdentityCredential,
    *,
    keypair: KeyPair | None = None,
    public_key: rsa.RSAPublicKey | None = None,
    subject: x509.Name | None = None,
    not_before: dt.datetime | None = None,
    not_after: dt.datetime | None = None,
    include_marker: bool = True,
    mark_ca: bool = False,
    signing_key: rsa.RSAPrivateKey | None = None,
    serial: int = 4242,
) -> tuple[Certificate, KeyPair]:
    """Sign a proxy-shaped certificate with full control over its defects.

    ``public_key`` overrides the embedded key (for certs over a key whose
    private half the test does not hold); the returned KeyPair is then
    unrelated to the certificate.
    """
    keypair = keypair or generate_keypair()
    issuer_cert = issuer.certificate
    if subject is None:
        subject = issuer_cert.subject.with_cn(str(serial)).to_x509()
    if not_before is None:
        not_before = issuer_cert.not_before
    if not_after is None:
        not_after = issuer_cert.not_after

    builder = (
        x509.CertificateBuilder()
        .subject_name(subject)
        .issuer_name(issuer_cert.raw.subject)
        .public_key(public_key or keypair.private_key.public_key())
        .serial_number(serial)
        .not_valid_before(not_before)
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
    )
    if include_marker:
        builder = builder.add_extension(
            x509.UnrecognizedExtension(PROXY_CERT_INFO_OID, PROXY_CERT_INFO_INHERIT_ALL),
            critical=True,
        )
    if mark_ca:
        builder = builder.add_extension(
            x509.BasicConstraints(ca=True, path_length=None), critical=True
        )
    signer = signing_key or issuer.private_key
    raw = builder.sign(signer, hashes.SHA256())
    return Certificate.wrap(raw), keypair


def appended_name(base: x509.Name, attr: x509.NameAttribute) -> x509.Name:
    """The base name with one extra RDN appended."""
    return x509.Name([*base.rdns, x509.RelativeDistinguishedName([attr])])
