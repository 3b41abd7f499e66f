"""Wire protocol round trips, session lifecycle, and key confinement."""

import dataclasses
import datetime as dt

import pytest
from cryptography import x509
from hypothesis import given, strategies as st

from gridgate.certs import (
    DistinguishedName,
    CertSigningRequest,
    build_proxy_csr,
    generate_keypair,
    validate_proxy_chain,
)
from gridgate.delegation import (
    CsrChallenge,
    DelegationAck,
    DelegationRefusedError,
    DelegationServer,
    InitRequest,
    InvalidChallengeError,
    MalformedMessageError,
    ProtocolError,
    SessionExpiredError,
    SessionState,
    SignedUpload,
    SubjectMismatchError,
    TransportFailureError,
    UnknownSessionError,
    client_sign_challenge,
    decode_frames,
    encode_frame,
    encode_message,
    parse_message,
    run_delegation,
)
from gridgate.transcript import Transcript, scan_for_private_key
from tests.conftest import utcnow
from tests.crafting import craft_proxy_cert

UTC = dt.timezone.utc
HOURS_12 = dt.timedelta(hours=12)


def make_server(anchors, **kwargs) -> DelegationServer:
    return DelegationServer(anchors, **kwargs)


def make_transport(server):
    def send(body: bytes) -> bytes:
        return server.handle_message(body)

    return send


# ---------------------------------------------------------------- messages

def test_init_round_trip(alice):
    msg = InitRequest(client_dn=alice.subject)
    assert parse_message(encode_message(msg)) == msg


def test_challenge_round_trip(alice):
    csr = build_proxy_csr(alice.subject, generate_keypair())
    msg = CsrChallenge(session_id="ab" * 16, csr=csr)
    assert parse_message(encode_message(msg)) == msg


def test_upload_round_trip(alice, test_ca):
    cert, _pair = craft_proxy_cert(alice)
    msg = SignedUpload(session_id="cd" * 16, proxy_cert=cert, user_cert=alice.certificate)
    assert parse_message(encode_message(msg)) == msg


def test_ack_round_trips():
    ok = DelegationAck(
        session_id="01" * 16,
        status="ok",
        effective_expiry=dt.datetime(2026, 8, 22, 10, 0, 0, tzinfo=UTC),
    )
    err = DelegationAck(session_id="02" * 16, status="error", reason="chain-invalid: EXPIRED")
    assert parse_message(encode_message(ok)) == ok
    assert parse_message(encode_message(err)) == err


def test_encoding_is_canonical(alice):
    msg = InitRequest(client_dn=alice.subject)
    data = encode_message(msg)
    assert data == encode_message(parse_message(data))
    assert b"\n" not in data


_dn_values = st.text(
    alphabet=st.sampled_from("abcXYZ 019/\\.-"), min_size=1, max_size=12
).filter(lambda s: s == s.strip())


@given(
    cn=_dn_values,
    org=_dn_values,
    status=st.sampled_from(["ok", "error"]),
    seconds=st.integers(min_value=0, max_value=2**31),
)
def test_message_round_trip_property(cn, org, status, seconds):
    dn = DistinguishedName((("O", org), ("CN", cn)))
    init = InitRequest(client_dn=dn)
    assert parse_message(encode_message(init)) == init

    expiry = dt.datetime(2000, 1, 1, tzinfo=UTC) + dt.timedelta(seconds=seconds)
    if status == "ok":
        ack = DelegationAck(session_id="ff" * 16, status="ok", effective_expiry=expiry)
    else:
        ack = DelegationAck(session_id="ff" * 16, status="error", reason="r")
    assert parse_message(encode_message(ack)) == ack


def test_frame_stream_reassembly(alice):
    csr = build_proxy_csr(alice.subject, generate_keypair())
    messages = [
        InitRequest(client_dn=alice.subject),
        CsrChallenge(session_id="aa" * 16, csr=csr),
        DelegationAck(session_id="aa" * 16, status="error", reason="x"),
    ]
    stream = b"".join(encode_frame(m) for m in messages)
    decoded, rest = decode_frames(stream + b"\x00\x00")
    assert decoded == messages
    assert rest == b"\x00\x00"


def test_frame_length_limit():
    huge = (1 << 25).to_bytes(4, "big") + b"x"
    with pytest.raises(ProtocolError):
        decode_frames(huge)


@pytest.mark.parametrize(
    "data",
    [
        b"not json",
        b"[1,2]",
        b'{"type":"nope"}',
        b'{"type":"init"}',
        b'{"type":"init","client_dn":7}',
        b'{"type":"init","client_dn":""}',
        b'{"type":"init","client_dn":"/C=IT/CN=A","extra":1}',
        b'{"type":"challenge","session_id":"x","csr_pem":"garbage"}',
        b'{"type":"upload","session_id":"x","proxy_cert_pem":"g","user_cert_pem":"g"}',
        b'{"type":"ack","session_id":"x","status":"maybe","effective_expiry":null,"reason":null}',
        b'{"type":"ack","session_id":"x","status":"ok","effective_expiry":null,"reason":null}',
        b'{"type":"ack","session_id":"x","status":"ok","effective_expiry":"not a date","reason":null}',
        b'{"type":"ack","session_id":"x","status":"ok","effective_expiry":"2026-01-01T00:00:00","reason":null}',
        b'{"type":"ack","session_id":"x","status":"error","effective_expiry":null,"reason":null}',
    ],
)
def test_malformed_messages_rejected(data):
    with pytest.raises(MalformedMessageError):
        parse_message(data)


def test_no_message_field_can_carry_keys():
    shapes = {
        InitRequest: ["client_dn"],
        CsrChallenge: ["session_id", "csr"],
        SignedUpload: ["session_id", "proxy_cert", "user_cert"],
        DelegationAck: ["session_id", "status", "effective_expiry", "reason"],
    }
    for cls, expected in shapes.items():
        assert [f.name for f in dataclasses.fields(cls)] == expected


# ---------------------------------------------------------------- server

def test_init_challenge_matches_dn(trust_anchors, alice):
    server = make_server(trust_anchors)
    challenge = server.handle_init(InitRequest(client_dn=alice.subject))
    assert challenge.csr.subject == alice.subject
    assert challenge.csr.self_signature_valid
    assert len(challenge.session_id) == 32  # 128 bits, hex
    assert server.pending_count == 1


def test_two_inits_are_fresh(trust_anchors, alice):
    server = make_server(trust_anchors)
    req = InitRequest(client_dn=alice.subject)
    c1, c2 = server.handle_init(req), server.handle_init(req)
    assert c1.session_id != c2.session_id
    assert (
        c1.csr.public_key.public_numbers() != c2.csr.public_key.public_numbers()
    )


def test_complete_happy_path(trust_anchors, alice):
    completed = []
    server = make_server(trust_anchors, on_complete=lambda s, b: completed.append((s, b)))
    challenge = server.handle_init(InitRequest(client_dn=alice.subject))
    upload = client_sign_challenge(challenge, alice, HOURS_12)
    bundle, ack = server.complete(upload)
    assert ack.status == "ok"
    assert bundle is not None
    report = validate_proxy_chain(bundle, trust_anchors)
    assert report.valid
    assert ack.effective_expiry == report.effective_expiry
    assert completed and completed[0][1] is bundle
    assert completed[0][0].state is SessionState.COMPLETED
    assert server.pending_count == 0


def test_replay_yields_unknown_session(trust_anchors, alice):
    server = make_server(trust_anchors)
    challenge = server.handle_init(InitRequest(client_dn=alice.subject))
    upload = client_sign_challenge(challenge, alice, HOURS_12)
    server.complete(upload)
    with pytest.raises(UnknownSessionError):
        server.complete(upload)


def test_unknown_session_id(trust_anchors, alice, test_ca):
    server = make_server(trust_anchors)
    cert, pair = craft_proxy_cert(alice)
    upload = SignedUpload(
        session_id="00" * 16, proxy_cert=cert, user_cert=alice.certificate
    )
    with pytest.raises(UnknownSessionError):
        server.complete(upload)


def test_session_ttl_expiry(trust_anchors, alice):
    t0 = utcnow()
    server = make_server(trust_anchors, clock=lambda: t0)
    challenge = server.handle_init(InitRequest(client_dn=alice.subject))
    upload = client_sign_challenge(challenge, alice, HOURS_12, now=t0)
    late = t0 + dt.timedelta(seconds=121)
    with pytest.raises(SessionExpiredError):
        server.complete(upload, now=late)
    # single-use: a second attempt is indistinguishable from never-existed
    with pytest.raises(UnknownSessionError):
        server.complete(upload, now=late)


def test_complete_just_inside_ttl(trust_anchors, alice):
    t0 = utcnow()
    server = make_server(trust_anchors, clock=lambda: t0)
    challenge = server.handle_init(InitRequest(client_dn=alice.subject))
    upload = client_sign_challenge(challenge, alice, HOURS_12, now=t0)
    bundle, ack = server.complete(upload, now=t0 + dt.timedelta(seconds=119))
    assert ack.status == "ok" and bundle is not None


def test_purge_expired(trust_anchors, alice):
    t0 = utcnow()
    server = make_server(trust_anchors, clock=lambda: t0)
    server.handle_init(InitRequest(client_dn=alice.subject))
    server.handle_init(InitRequest(client_dn=alice.subject))
    assert server.purge_expired(now=t0 + dt.timedelta(seconds=60)) == 0
    assert server.purge_expired(now=t0 + dt.timedelta(seconds=180)) == 2
    assert server.pending_count == 0


def test_foreign_key_upload_refused(trust_anchors, alice):
    server = make_server(trust_anchors)
    server.handle_init(InitRequest(client_dn=alice.subject))
    challenge = server.handle_init(InitRequest(client_dn=alice.subject))
    # proxy cert over an attacker keypair, not the session keypair
    cert, _pair = craft_proxy_cert(alice)
    upload = SignedUpload(
        session_id=challenge.session_id, proxy_cert=cert, user_cert=alice.certificate
    )
    bundle, ack = server.complete(upload)
    assert bundle is None
    assert ack.status == "error"
    assert ack.reason is not None and "chain-invalid" in ack.reason


def test_wrong_user_cert_refused(trust_anchors, alice, bob):
    server = make_server(trust_anchors)
    challenge = server.handle_init(InitRequest(client_dn=alice.subject))
    # Bob signs the session public key under his own name
    cert, _ = craft_proxy_cert(bob, public_key=challenge.csr.public_key)
    upload = SignedUpload(
        session_id=challenge.session_id, proxy_cert=cert, user_cert=bob.certificate
    )
    bundle, ack = server.complete(upload)
    assert bundle is None
    assert ack.status == "error"
    assert ack.reason is not None and "chain-invalid" in ack.reason


def test_untrusted_issuer_refused(alice):
    from gridgate.certs import TestCa

    stranger = TestCa.generate(seed=31)
    server = make_server([stranger.certificate])
    challenge = server.handle_init(InitRequest(client_dn=alice.subject))
    upload = client_sign_challenge(challenge, alice, HOURS_12)
    bundle, ack = server.complete(upload)
    assert bundle is None
    assert ack.status == "error"
    assert ack.reason is not None and "NO_TRUST_ANCHOR" in ack.reason


def test_failed_session_is_spent(trust_anchors, alice):
    server = make_server(trust_anchors)
    challenge = server.handle_init(InitRequest(client_dn=alice.subject))
    cert, _pair = craft_proxy_cert(alice)
    upload = SignedUpload(
        session_id=challenge.session_id, proxy_cert=cert, user_cert=alice.certificate
    )
    _, ack = server.complete(upload)
    assert ack.status == "error"
    good = client_sign_challenge(challenge, alice, HOURS_12)
    with pytest.raises(UnknownSessionError):
        server.complete(good)


# ---------------------------------------------------------------- client

def test_sign_challenge_for_other_identity(trust_anchors, alice, bob):
    server = make_server(trust_anchors)
    challenge = server.handle_init(InitRequest(client_dn=alice.subject))
    with pytest.raises(SubjectMismatchError):
        client_sign_challenge(challenge, bob, HOURS_12)


def test_sign_tampered_challenge(trust_anchors, alice):
    server = make_server(trust_anchors)
    challenge = server.handle_init(InitRequest(client_dn=alice.subject))
    der = bytearray(challenge.csr.der)
    der[-1] ^= 0x01  # corrupt the CSR self-signature
    broken = CertSigningRequest.wrap(x509.load_der_x509_csr(bytes(der)))
    with pytest.raises(InvalidChallengeError):
        client_sign_challenge(
            CsrChallenge(session_id=challenge.session_id, csr=broken), alice, HOURS_12
        )


# ---------------------------------------------------------------- full runs

def test_run_delegation_end_to_end(trust_anchors, alice):
    stored = []
    server = make_server(trust_anchors, on_complete=lambda s, b: stored.append(b))
    transcript = Transcript("delegation")
    expiry = run_delegation(
        make_transport(server), alice, HOURS_12, transcript=transcript
    )
    assert len(stored) == 1
    report = validate_proxy_chain(stored[0], trust_anchors)
    assert report.valid
    assert expiry == report.effective_expiry
    assert [f.label for f in transcript] == ["init", "challenge", "upload", "ack"]


def test_transcript_carries_no_private_keys(trust_anchors, alice):
    stored = []
    server = make_server(trust_anchors, on_complete=lambda s, b: stored.append(b))
    transcript = Transcript("delegation")
    run_delegation(make_transport(server), alice, HOURS_12, transcript=transcript)
    keys = [alice.private_key, stored[0].proxy_private_key]
    assert scan_for_private_key(transcript, keys) == []


def test_refused_delegation_raises(alice):
    from gridgate.certs import TestCa

    stranger = TestCa.generate(seed=32)
    server = make_server([stranger.certificate])
    with pytest.raises(DelegationRefusedError):
        run_delegation(make_transport(server), alice, HOURS_12)


def test_transport_drop_leaves_no_bundle(trust_anchors, alice):
    stored = []
    server = make_server(trust_anchors, on_complete=lambda s, b: stored.append(b))
    calls = {"n": 0}

    def flaky(body: bytes) -> bytes:
        calls["n"] += 1
        if calls["n"] == 2:
            raise ConnectionError("link dropped")
        return server.handle_message(body)

    with pytest.raises(TransportFailureError):
        run_delegation(flaky, alice, HOURS_12)
    assert stored == []
    assert server.pending_count == 1  # half-open until the TTL reaper runs


def test_server_rejects_client_bound_frames(trust_anchors, alice):
    server = make_server(trust_anchors)
    ack = DelegationAck(session_id="aa" * 16, status="error", reason="x")
    with pytest.raises(ProtocolError):
        server.handle_message(encode_message(ack))
