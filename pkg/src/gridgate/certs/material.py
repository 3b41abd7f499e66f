"""Key pairs, certificates, and signing requests as value objects.

Thin immutable wrappers around ``cryptography`` primitives, giving the rest of
the system DN-typed accessors, PEM round-tripping, and equality by DER bytes.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

from cryptography import x509
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa

from gridgate.certs.dn import DistinguishedName

SUPPORTED_STRENGTHS = (2048, 3072, 4096)
DEFAULT_STRENGTH = 2048

_SIGN_PADDING = padding.PKCS1v15()
_SIGN_HASH = hashes.SHA256()


class UnsupportedStrengthError(ValueError):
    """Requested key strength is outside the supported set."""


class PemDecodeError(ValueError):
    """Input is not a decodable PEM document of the expected kind."""


@dataclass(frozen=True)
class KeyPair:
    """RSA key pair; ``strength`` is the modulus size in bits."""

    private_key: rsa.RSAPrivateKey = field(repr=False)
    strength: int

    @property
    def public_key(self) -> rsa.RSAPublicKey:
        return self.private_key.public_key()

    def sign(self, data: bytes) -> bytes:
        return self.private_key.sign(data, _SIGN_PADDING, _SIGN_HASH)

    def private_pem(self) -> str:
        return self.private_key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        ).decode("ascii")

    def public_pem(self) -> str:
        return self.public_key.public_bytes(
            serialization.Encoding.PEM,
            serialization.PublicFormat.SubjectPublicKeyInfo,
        ).decode("ascii")

    @classmethod
    def from_private_key(cls, key: rsa.RSAPrivateKey) -> "KeyPair":
        return cls(private_key=key, strength=key.key_size)

    @classmethod
    def from_private_pem(cls, pem: str | bytes) -> "KeyPair":
        data = pem.encode("ascii") if isinstance(pem, str) else pem
        try:
            key = serialization.load_pem_private_key(data, password=None)
        except (ValueError, TypeError) as exc:
            raise PemDecodeError(f"not a PEM private key: {exc}") from exc
        if not isinstance(key, rsa.RSAPrivateKey):
            raise PemDecodeError("only RSA private keys are supported")
        return cls.from_private_key(key)


def generate_keypair(strength: int = DEFAULT_STRENGTH) -> KeyPair:
    if strength not in SUPPORTED_STRENGTHS:
        raise UnsupportedStrengthError(
            f"strength {strength} not in supported set {SUPPORTED_STRENGTHS}"
        )
    key = rsa.generate_private_key(public_exponent=65537, key_size=strength)
    return KeyPair(private_key=key, strength=strength)


def verify_signature(public_key: rsa.RSAPublicKey, signature: bytes, data: bytes) -> bool:
    try:
        public_key.verify(signature, data, _SIGN_PADDING, _SIGN_HASH)
        return True
    except InvalidSignature:
        return False


def public_keys_equal(a: rsa.RSAPublicKey, b: rsa.RSAPublicKey) -> bool:
    return a.public_numbers() == b.public_numbers()


def key_matches_certificate(private_key: rsa.RSAPrivateKey, cert: "Certificate") -> bool:
    return public_keys_equal(private_key.public_key(), cert.public_key)


@dataclass(frozen=True)
class Certificate:
    """An X.509 certificate; equality and hashing are by DER encoding."""

    raw: x509.Certificate = field(compare=False, repr=False)
    der: bytes = field(repr=False)

    @classmethod
    def wrap(cls, cert: x509.Certificate) -> "Certificate":
        return cls(raw=cert, der=cert.public_bytes(serialization.Encoding.DER))

    @classmethod
    def from_pem(cls, pem: str | bytes) -> "Certificate":
        data = pem.encode("ascii") if isinstance(pem, str) else pem
        try:
            return cls.wrap(x509.load_pem_x509_certificate(data))
        except ValueError as exc:
            raise PemDecodeError(f"not a PEM certificate: {exc}") from exc

    @property
    def subject(self) -> DistinguishedName:
        return DistinguishedName.from_x509(self.raw.subject)

    @property
    def issuer(self) -> DistinguishedName:
        return DistinguishedName.from_x509(self.raw.issuer)

    @property
    def serial(self) -> int:
        return self.raw.serial_number

    @property
    def not_before(self) -> dt.datetime:
        return self.raw.not_valid_before_utc

    @property
    def not_after(self) -> dt.datetime:
        return self.raw.not_valid_after_utc

    @property
    def is_ca(self) -> bool:
        try:
            ext = self.raw.extensions.get_extension_for_class(x509.BasicConstraints)
        except x509.ExtensionNotFound:
            return False
        return ext.value.ca

    @property
    def public_key(self) -> rsa.RSAPublicKey:
        key = self.raw.public_key()
        if not isinstance(key, rsa.RSAPublicKey):
            raise PemDecodeError("only RSA certificates are supported")
        return key

    @property
    def signature(self) -> bytes:
        return self.raw.signature

    def signed_by(self, issuer_public_key: rsa.RSAPublicKey) -> bool:
        """Check this certificate's signature under the given issuer key."""
        algorithm = self.raw.signature_hash_algorithm
        if algorithm is None:
            return False
        try:
            issuer_public_key.verify(
                self.raw.signature,
                self.raw.tbs_certificate_bytes,
                padding.PKCS1v15(),
                algorithm,
            )
            return True
        except InvalidSignature:
            return False

    def pem(self) -> str:
        return self.raw.public_bytes(serialization.Encoding.PEM).decode("ascii")


@dataclass(frozen=True)
class CertSigningRequest:
    """A certificate signing request: subject + public key + proof of possession."""

    raw: x509.CertificateSigningRequest = field(compare=False, repr=False)
    der: bytes = field(repr=False)

    @classmethod
    def wrap(cls, csr: x509.CertificateSigningRequest) -> "CertSigningRequest":
        return cls(raw=csr, der=csr.public_bytes(serialization.Encoding.DER))

    @classmethod
    def from_pem(cls, pem: str | bytes) -> "CertSigningRequest":
        data = pem.encode("ascii") if isinstance(pem, str) else pem
        try:
            return cls.wrap(x509.load_pem_x509_csr(data))
        except ValueError as exc:
            raise PemDecodeError(f"not a PEM certificate request: {exc}") from exc

    @property
    def subject(self) -> DistinguishedName:
        return DistinguishedName.from_x509(self.raw.subject)

    @property
    def public_key(self) -> rsa.RSAPublicKey:
        key = self.raw.public_key()
        if not isinstance(key, rsa.RSAPublicKey):
            raise PemDecodeError("only RSA requests are supported")
        return key

    @property
    def self_signature_valid(self) -> bool:
        return self.raw.is_signature_valid

    def pem(self) -> str:
        return self.raw.public_bytes(serialization.Encoding.PEM).decode("ascii")
