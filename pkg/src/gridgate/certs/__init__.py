"""X.509 mechanics: keys, CSRs, proxy certificates, chains, conversion."""

from gridgate.certs.dn import DistinguishedName, MalformedDnError
from gridgate.certs.material import (
    Certificate,
    CertSigningRequest,
    KeyPair,
    PemDecodeError,
    SUPPORTED_STRENGTHS,
    UnsupportedStrengthError,
    generate_keypair,
    verify_signature,
)
from gridgate.certs.pkcs12 import (
    BadPasswordError,
    MalformedArchiveError,
    bundle_p12,
    convert_p12_to_pem,
)
from gridgate.certs.proxy import (
    CsrSubjectMismatchError,
    DEFAULT_PROXY_LIFETIME,
    PROXY_CERT_INFO_INHERIT_ALL,
    PROXY_CERT_INFO_OID,
    IdentityCredential,
    InvalidCsrSignatureError,
    IssuerExpiredError,
    IssuerMismatchError,
    KeyCertMismatchError,
    ProxyBundle,
    assemble_proxy_bundle,
    build_proxy_csr,
    create_local_proxy,
    remaining_lifetime,
    sign_proxy_csr,
)
from gridgate.certs.testca import TestCa, load_trust_anchors, write_identity
from gridgate.certs.validation import (
    BAD_PROXY_NAMING,
    BAD_SIGNATURE,
    CA_AS_END_ENTITY,
    CLOCK_SKEW,
    EXPIRED,
    EXPIRY_EXCEEDS_ISSUER,
    NO_TRUST_ANCHOR,
    NON_CA_SIGNER,
    NOT_A_PROXY,
    NOT_YET_VALID,
    ValidationFailure,
    ValidationReport,
    validate_proxy_chain,
)

__all__ = [
    "BAD_PROXY_NAMING",
    "BAD_SIGNATURE",
    "CA_AS_END_ENTITY",
    "CLOCK_SKEW",
    "Certificate",
    "CertSigningRequest",
    "CsrSubjectMismatchError",
    "DEFAULT_PROXY_LIFETIME",
    "DistinguishedName",
    "EXPIRED",
    "EXPIRY_EXCEEDS_ISSUER",
    "NO_TRUST_ANCHOR",
    "NON_CA_SIGNER",
    "NOT_A_PROXY",
    "NOT_YET_VALID",
    "PROXY_CERT_INFO_INHERIT_ALL",
    "PROXY_CERT_INFO_OID",
    "IdentityCredential",
    "InvalidCsrSignatureError",
    "IssuerExpiredError",
    "IssuerMismatchError",
    "KeyCertMismatchError",
    "KeyPair",
    "MalformedArchiveError",
    "MalformedDnError",
    "BadPasswordError",
    "PemDecodeError",
    "ProxyBundle",
    "SUPPORTED_STRENGTHS",
    "TestCa",
    "UnsupportedStrengthError",
    "ValidationFailure",
    "ValidationReport",
    "assemble_proxy_bundle",
    "build_proxy_csr",
    "bundle_p12",
    "convert_p12_to_pem",
    "create_local_proxy",
    "generate_keypair",
    "load_trust_anchors",
    "remaining_lifetime",
    "sign_proxy_csr",
    "validate_proxy_chain",
    "verify_signature",
    "write_identity",
]
