"""Proxy chain validation against a set of trust anchors.

Checks signatures, trust anchoring, validity windows (with a fixed 5-minute
clock-skew allowance on not-before), proxy naming, lifetime nesting, and
CA/end-entity placement. Failures are reported, never raised.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Iterable

from gridgate.certs.material import Certificate
from gridgate.certs.proxy import PROXY_CERT_INFO_OID, ProxyBundle

CLOCK_SKEW = dt.timedelta(minutes=5)

# Failure codes
BAD_SIGNATURE = "BAD_SIGNATURE"
NO_TRUST_ANCHOR = "NO_TRUST_ANCHOR"
EXPIRED = "EXPIRED"
NOT_YET_VALID = "NOT_YET_VALID"
BAD_PROXY_NAMING = "BAD_PROXY_NAMING"
EXPIRY_EXCEEDS_ISSUER = "EXPIRY_EXCEEDS_ISSUER"
CA_AS_END_ENTITY = "CA_AS_END_ENTITY"
NON_CA_SIGNER = "NON_CA_SIGNER"
NOT_A_PROXY = "NOT_A_PROXY"


@dataclass(frozen=True)
class ValidationFailure:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    failures: tuple[ValidationFailure, ...]
    effective_expiry: dt.datetime | None

    def codes(self) -> set[str]:
        return {f.code for f in self.failures}


def _has_proxy_marker(cert: Certificate) -> bool:
    return any(ext.oid == PROXY_CERT_INFO_OID for ext in cert.raw.extensions)


def validate_proxy_chain(
    bundle: ProxyBundle,
    trust_anchors: Iterable[Certificate],
    now: dt.datetime | None = None,
) -> ValidationReport:
    now = now or dt.datetime.now(dt.timezone.utc)
    anchors = list(trust_anchors)
    failures: list[ValidationFailure] = []

    def fail(code: str, message: str) -> None:
        failures.append(ValidationFailure(code, message))

    chain = [bundle.proxy_cert, *bundle.issuer_chain]

    # (c) validity windows, with skew tolerance on not-before only
    for cert in chain:
        label = str(cert.subject)
        if now > cert.not_after:
            fail(EXPIRED, f"{label} expired at {cert.not_after.isoformat()}")
        if now < cert.not_before - CLOCK_SKEW:
            fail(NOT_YET_VALID, f"{label} not valid before {cert.not_before.isoformat()}")

    # (a) each certificate verifies under its issuer inside the bundle
    for cert, issuer in zip(chain, chain[1:]):
        if not cert.signed_by(issuer.public_key):
            fail(BAD_SIGNATURE, f"{cert.subject} signature does not verify under {issuer.subject}")

    # (b) the chain tail must be anchored: either it is a trust anchor itself,
    # or a trust anchor issued it
    tail = chain[-1]
    if not any(tail == anchor for anchor in anchors):
        candidates = [a for a in anchors if a.subject == tail.issuer]
        if not any(tail.signed_by(anchor.public_key) for anchor in candidates):
            fail(NO_TRUST_ANCHOR, f"chain does not terminate at a trust anchor ({tail.issuer})")

    # (d) proxy naming: issuer subject plus exactly one CN
    delegator = bundle.issuer_chain[0]
    if not bundle.proxy_cert.subject.is_extension_of(delegator.subject):
        fail(
            BAD_PROXY_NAMING,
            f"proxy subject {bundle.proxy_cert.subject} does not extend "
            f"{delegator.subject} by one CN",
        )
    if not _has_proxy_marker(bundle.proxy_cert):
        # keeps this validator aligned with external proxy-aware validators,
        # which key proxy handling off the marker extension
        fail(NOT_A_PROXY, "proxy certificate lacks the proxy marker extension")

    # (e) the proxy never outlives its issuer
    if bundle.proxy_cert.not_after > delegator.not_after:
        fail(
            EXPIRY_EXCEEDS_ISSUER,
            f"proxy expires {bundle.proxy_cert.not_after.isoformat()} after issuer "
            f"{delegator.not_after.isoformat()}",
        )

    # (f) below the anchor, only the designated signers may be CA certificates
    if bundle.proxy_cert.is_ca:
        fail(CA_AS_END_ENTITY, "proxy certificate is marked as a CA")
    if delegator.is_ca:
        fail(CA_AS_END_ENTITY, f"delegating certificate {delegator.subject} is marked as a CA")
    for cert in bundle.issuer_chain[1:]:
        if not cert.is_ca and not any(cert == anchor for anchor in anchors):
            fail(NON_CA_SIGNER, f"intermediate {cert.subject} is not a CA certificate")

    valid = not failures
    expiry = min(cert.not_after for cert in chain) if valid else None
    return ValidationReport(valid=valid, failures=tuple(failures), effective_expiry=expiry)
