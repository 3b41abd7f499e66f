"""Deterministic test certification authority.

Given a seed, key material, serials, and validity windows are all derived from
a SHA-256 counter generator, so fixtures regenerate byte-identically. Issued
certificates use a wide fixed validity window rather than wall-clock time for
the same reason.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import ipaddress
import os
from dataclasses import dataclass, field
from pathlib import Path

import gmpy2
from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import rsa
from cryptography.x509.oid import ExtendedKeyUsageOID

from gridgate.certs.dn import DistinguishedName
from gridgate.certs.material import Certificate, KeyPair
from gridgate.certs.proxy import IdentityCredential

_EPOCH_START = dt.datetime(2020, 1, 1, tzinfo=dt.timezone.utc)
_EPOCH_END = dt.datetime(2120, 1, 1, tzinfo=dt.timezone.utc)
_RSA_E = 65537


class _Drbg:
    """SHA-256 counter generator; nothing fancy, just reproducible."""

    def __init__(self, seed: bytes):
        self._key = hashlib.sha256(seed).digest()
        self._counter = 0
        self._buffer = b""

    def read(self, n: int) -> bytes:
        while len(self._buffer) < n:
            block = hashlib.sha256(self._key + self._counter.to_bytes(8, "big")).digest()
            self._buffer += block
            self._counter += 1
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def randint_bits(self, bits: int) -> int:
        return int.from_bytes(self.read((bits + 7) // 8), "big") % (1 << bits)


def _derive_prime(drbg: _Drbg, bits: int) -> int:
    # Top two bits set so the product of two such primes has exactly 2*bits.
    while True:
        candidate = drbg.randint_bits(bits)
        candidate |= (1 << (bits - 1)) | (1 << (bits - 2)) | 1
        prime = int(gmpy2.next_prime(candidate))
        if prime.bit_length() == bits:
            return prime


def _derive_rsa_key(drbg: _Drbg, strength: int) -> rsa.RSAPrivateKey:
    half = strength // 2
    while True:
        p = _derive_prime(drbg, half)
        q = _derive_prime(drbg, half)
        if p == q:
            continue
        phi = (p - 1) * (q - 1)
        if gmpy2.gcd(_RSA_E, phi) != 1:
            continue
        break
    if p < q:
        p, q = q, p
    n = p * q
    d = int(gmpy2.invert(_RSA_E, phi))
    numbers = rsa.RSAPrivateNumbers(
        p=p,
        q=q,
        d=d,
        dmp1=rsa.rsa_crt_dmp1(d, p),
        dmq1=rsa.rsa_crt_dmq1(d, q),
        iqmp=rsa.rsa_crt_iqmp(p, q),
        public_numbers=rsa.RSAPublicNumbers(e=_RSA_E, n=n),
    )
    return numbers.private_key()


def _key_usage(ca: bool) -> x509.KeyUsage:
    return x509.KeyUsage(
        digital_signature=True,
        content_commitment=False,
        key_encipherment=not ca,
        data_encipherment=False,
        key_agreement=False,
        key_cert_sign=ca,
        crl_sign=ca,
        encipher_only=False,
        decipher_only=False,
    )


@dataclass
class TestCa:
    """A seed-reproducible root CA for fixtures and local deployments."""

    __test__ = False  # name looks like a pytest class; it is not

    seed: int
    certificate: Certificate
    key: KeyPair = field(repr=False)
    _drbg: _Drbg = field(repr=False)

    @classmethod
    def generate(cls, seed: int, strength: int = 2048) -> "TestCa":
        drbg = _Drbg(b"gridgate-test-ca:" + str(seed).encode("ascii"))
        key = _derive_rsa_key(drbg, strength)
        name = DistinguishedName(
            (("C", "IT"), ("O", "GridGate Test CA"), ("CN", f"GridGate Test Root {seed}"))
        )
        cert = (
            x509.CertificateBuilder()
            .subject_name(name.to_x509())
            .issuer_name(name.to_x509())
            .public_key(key.public_key())
            .serial_number(drbg.randint_bits(63) or 1)
            .not_valid_before(_EPOCH_START)
            .not_valid_after(_EPOCH_END)
            .add_extension(x509.BasicConstraints(ca=True, path_length=None), critical=True)
            .add_extension(_key_usage(ca=True), critical=True)
            .sign(key, hashes.SHA256())
        )
        return cls(
            seed=seed,
            certificate=Certificate.wrap(cert),
            key=KeyPair.from_private_key(key),
            _drbg=drbg,
        )

    @property
    def subject(self) -> DistinguishedName:
        return self.certificate.subject

    def issue_user(
        self,
        dn: DistinguishedName | str,
        strength: int = 2048,
        not_before: dt.datetime = _EPOCH_START,
        not_after: dt.datetime = _EPOCH_END,
        private_key: rsa.RSAPrivateKey | None = None,
    ) -> IdentityCredential:
        """Issue a personal end-entity certificate for the given DN.

        Pass ``private_key`` to reuse an externally generated key (keeps the
        deterministic stream untouched); otherwise the key is derived from the
        CA's generator.
        """
        if isinstance(dn, str):
            dn = DistinguishedName.parse(dn)
        key = private_key or _derive_rsa_key(self._drbg, strength)
        cert = (
            x509.CertificateBuilder()
            .subject_name(dn.to_x509())
            .issuer_name(self.subject.to_x509())
            .public_key(key.public_key())
            .serial_number(self._drbg.randint_bits(63) or 1)
            .not_valid_before(not_before)
            .not_valid_after(not_after)
            .add_extension(x509.BasicConstraints(ca=False, path_length=None), critical=True)
            .add_extension(_key_usage(ca=False), critical=True)
            .sign(self.key.private_key, hashes.SHA256())
        )
        return IdentityCredential(certificate=Certificate.wrap(cert), private_key=key)

    def issue_server(
        self,
        hostnames: list[str],
        strength: int = 2048,
        not_before: dt.datetime = _EPOCH_START,
        not_after: dt.datetime = _EPOCH_END,
    ) -> IdentityCredential:
        """Issue a TLS server certificate (SANs for the given hosts/addresses)."""
        key = _derive_rsa_key(self._drbg, strength)
        sans: list[x509.GeneralName] = []
        for host in hostnames:
            try:
                sans.append(x509.IPAddress(ipaddress.ip_address(host)))
            except ValueError:
                sans.append(x509.DNSName(host))
        dn = DistinguishedName((("C", "IT"), ("O", "GridGate Test CA"), ("CN", hostnames[0])))
        cert = (
            x509.CertificateBuilder()
            .subject_name(dn.to_x509())
            .issuer_name(self.subject.to_x509())
            .public_key(key.public_key())
            .serial_number(self._drbg.randint_bits(63) or 1)
            .not_valid_before(not_before)
            .not_valid_after(not_after)
            .add_extension(x509.BasicConstraints(ca=False, path_length=None), critical=True)
            .add_extension(_key_usage(ca=False), critical=True)
            .add_extension(x509.SubjectAlternativeName(sans), critical=False)
            .add_extension(
                x509.ExtendedKeyUsage([ExtendedKeyUsageOID.SERVER_AUTH]), critical=False
            )
            .sign(self.key.private_key, hashes.SHA256())
        )
        return IdentityCredential(certificate=Certificate.wrap(cert), private_key=key)

    def write(self, directory: str | os.PathLike) -> tuple[Path, Path]:
        """Write ca_cert.pem (world-readable) and ca_key.pem (owner-only)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        cert_path = directory / "ca_cert.pem"
        key_path = directory / "ca_key.pem"
        cert_path.write_text(self.certificate.pem())
        fd = os.open(key_path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        try:
            os.write(fd, self.key.private_pem().encode("ascii"))
        finally:
            os.close(fd)
        return cert_path, key_path


def write_identity(identity: IdentityCredential, directory: str | os.PathLike, name: str) -> tuple[Path, Path]:
    """Write <name>_cert.pem and <name>_key.pem (key owner-only)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    cert_path = directory / f"{name}_cert.pem"
    key_path = directory / f"{name}_key.pem"
    cert_path.write_text(identity.certificate.pem())
    key_pem = identity.private_key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )
    fd = os.open(key_path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    try:
        os.write(fd, key_pem)
    finally:
        os.close(fd)
    return cert_path, key_path


def load_trust_anchors(directory: str | os.PathLike) -> list[Certificate]:
    """Load every *.pem certificate in a directory as a trust anchor."""
    anchors = []
    for path in sorted(Path(directory).glob("*.pem")):
        text = path.read_text()
        if "BEGIN CERTIFICATE" in text:
            anchors.append(Certificate.from_pem(text))
    return anchors
