"""Chain validation: every failure code, plus cross-checks against openssl."""

import datetime as dt

from cryptography import x509
from cryptography.x509.oid import NameOID

from gridgate.certs import (
    BAD_PROXY_NAMING,
    BAD_SIGNATURE,
    CA_AS_END_ENTITY,
    EXPIRED,
    EXPIRY_EXCEEDS_ISSUER,
    IdentityCredential,
    NO_TRUST_ANCHOR,
    NOT_A_PROXY,
    NOT_YET_VALID,
    ProxyBundle,
    TestCa,
    assemble_proxy_bundle,
    build_proxy_csr,
    generate_keypair,
    sign_proxy_csr,
    validate_proxy_chain,
)
from tests.conftest import utcnow
from tests.crafting import appended_name, craft_proxy_cert
from tests.oracles import openssl_verify_bundle

HOURS_6 = dt.timedelta(hours=6)


def _good_bundle(identity, lifetime=HOURS_6, now=None):
    pair = generate_keypair(2048)
    csr = build_proxy_csr(identity.subject, pair)
    cert = sign_proxy_csr(csr, identity, lifetime, now=now)
    return assemble_proxy_bundle(cert, pair.private_key, identity.certificate)


def _crafted_bundle(identity, **kwargs) -> ProxyBundle:
    cert, pair = craft_proxy_cert(identity, **kwargs)
    return ProxyBundle(
        proxy_cert=cert,
        proxy_private_key=pair.private_key,
        issuer_chain=(identity.certificate,),
    )


def test_valid_chain_passes(alice, trust_anchors):
    now = utcnow()
    bundle = _good_bundle(alice, now=now)
    report = validate_proxy_chain(bundle, trust_anchors, now=now)
    assert report.valid
    assert report.failures == ()
    assert report.effective_expiry == min(
        bundle.proxy_cert.not_after, alice.certificate.not_after
    )


def test_valid_chain_accepted_by_openssl(alice, trust_anchors):
    bundle = _good_bundle(alice)
    ok, output = openssl_verify_bundle(bundle, trust_anchors)
    assert ok, output


def test_effective_expiry_is_chain_minimum(test_ca, trust_anchors):
    now = utcnow()
    user = test_ca.issue_user(
        "/C=IT/O=SNS/CN=Mid",
        not_before=now - dt.timedelta(days=1),
        not_after=now + dt.timedelta(days=30),
    )
    bundle = _good_bundle(user, lifetime=HOURS_6, now=now)
    report = validate_proxy_chain(bundle, [test_ca.certificate], now=now)
    assert report.valid
    assert report.effective_expiry == bundle.proxy_cert.not_after
    assert report.effective_expiry < user.certificate.not_after


def test_expired_proxy(alice, trust_anchors):
    now = utcnow()
    bundle = _crafted_bundle(
        alice,
        not_before=now - dt.timedelta(hours=13),
        not_after=now - dt.timedelta(hours=1),
    )
    report = validate_proxy_chain(bundle, trust_anchors, now=now)
    assert not report.valid
    assert EXPIRED in report.codes()
    assert report.effective_expiry is None
    ok, output = openssl_verify_bundle(bundle, trust_anchors, now=now)
    assert not ok
    assert "expired" in output.lower()


def test_not_yet_valid_beyond_skew(alice, trust_anchors):
    now = utcnow()
    bundle = _crafted_bundle(alice, not_before=now + dt.timedelta(minutes=10))
    report = validate_proxy_chain(bundle, trust_anchors, now=now)
    assert NOT_YET_VALID in report.codes()


def test_not_before_within_skew_tolerated(alice, trust_anchors):
    now = utcnow()
    bundle = _crafted_bundle(alice, not_before=now + dt.timedelta(minutes=2))
    report = validate_proxy_chain(bundle, trust_anchors, now=now)
    assert report.valid, report.failures


def test_naming_appended_ou_rejected(alice, trust_anchors):
    subject = appended_name(
        alice.certificate.raw.subject,
        x509.NameAttribute(NameOID.ORGANIZATIONAL_UNIT_NAME, "sneaky"),
    )
    bundle = _crafted_bundle(alice, subject=subject)
    report = validate_proxy_chain(bundle, trust_anchors)
    assert BAD_PROXY_NAMING in report.codes()
    ok, output = openssl_verify_bundle(bundle, trust_anchors)
    assert not ok, output


def test_naming_two_extra_cns_rejected(alice, trust_anchors):
    subject = appended_name(
        appended_name(
            alice.certificate.raw.subject,
            x509.NameAttribute(NameOID.COMMON_NAME, "111"),
        ),
        x509.NameAttribute(NameOID.COMMON_NAME, "222"),
    )
    bundle = _crafted_bundle(alice, subject=subject)
    report = validate_proxy_chain(bundle, trust_anchors)
    assert BAD_PROXY_NAMING in report.codes()


def test_naming_same_subject_as_issuer_rejected(alice, trust_anchors):
    bundle = _crafted_bundle(alice, subject=alice.certificate.raw.subject)
    report = validate_proxy_chain(bundle, trust_anchors)
    assert BAD_PROXY_NAMING in report.codes()


def test_missing_proxy_marker_rejected(alice, trust_anchors):
    bundle = _crafted_bundle(alice, include_marker=False)
    report = validate_proxy_chain(bundle, trust_anchors)
    assert NOT_A_PROXY in report.codes()
    ok, output = openssl_verify_bundle(bundle, trust_anchors)
    assert not ok, output


def test_forged_signature_rejected(alice, trust_anchors):
    forger = generate_keypair(2048)
    bundle = _crafted_bundle(alice, signing_key=forger.private_key)
    report = validate_proxy_chain(bundle, trust_anchors)
    assert BAD_SIGNATURE in report.codes()
    ok, output = openssl_verify_bundle(bundle, trust_anchors)
    assert not ok, output


def test_unanchored_chain_rejected(alice):
    stranger_ca = TestCa.generate(seed=99)
    bundle = _good_bundle(alice)
    report = validate_proxy_chain(bundle, [stranger_ca.certificate])
    assert NO_TRUST_ANCHOR in report.codes()
    ok, output = openssl_verify_bundle(bundle, [stranger_ca.certificate])
    assert not ok, output


def test_proxy_outliving_issuer_rejected(test_ca, trust_anchors):
    now = utcnow()
    user = test_ca.issue_user(
        "/C=IT/O=SNS/CN=Brief",
        not_before=now - dt.timedelta(days=1),
        not_after=now + dt.timedelta(hours=2),
    )
    bundle = _crafted_bundle(
        user,
        not_before=now - dt.timedelta(hours=1),
        not_after=now + dt.timedelta(hours=8),
    )
    report = validate_proxy_chain(bundle, trust_anchors, now=now)
    assert EXPIRY_EXCEEDS_ISSUER in report.codes()


def test_ca_flagged_proxy_rejected(alice, trust_anchors):
    bundle = _crafted_bundle(alice, mark_ca=True)
    report = validate_proxy_chain(bundle, trust_anchors)
    assert CA_AS_END_ENTITY in report.codes()


def test_ca_as_delegator_rejected(test_ca):
    ca_identity = IdentityCredential(
        certificate=test_ca.certificate, private_key=test_ca.key.private_key
    )
    bundle = _crafted_bundle(ca_identity)
    report = validate_proxy_chain(bundle, [test_ca.certificate])
    assert CA_AS_END_ENTITY in report.codes()


def test_hostile_bundle_survives_pem_round_trip(alice, trust_anchors, tmp_path):
    subject = appended_name(
        alice.certificate.raw.subject,
        x509.NameAttribute(NameOID.ORGANIZATIONAL_UNIT_NAME, "sneaky"),
    )
    bundle = _crafted_bundle(alice, subject=subject)
    reparsed = ProxyBundle.from_pem(bundle.to_pem())
    assert reparsed.proxy_cert == bundle.proxy_cert
    report = validate_proxy_chain(reparsed, trust_anchors)
    assert BAD_PROXY_NAMING in report.codes()


def test_multiple_failures_all_reported(alice, trust_anchors):
    now = utcnow()
    bundle = _crafted_bundle(
        alice,
        subject=alice.certificate.raw.subject,
        include_marker=False,
        not_before=now - dt.timedelta(hours=2),
        not_after=now - dt.timedelta(hours=1),
    )
    report = validate_proxy_chain(bundle, trust_anchors, now=now)
    assert {EXPIRED, BAD_PROXY_NAMING, NOT_A_PROXY} <= report.codes()
