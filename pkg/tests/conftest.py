import datetime as dt

import pytest

from gridgate.certs import (
    TestCa,
    assemble_proxy_bundle,
    build_proxy_csr,
    generate_keypair,
    sign_proxy_csr,
)

UTC = dt.timezone.utc


def utcnow() -> dt.datetime:
    return dt.datetime.now(UTC).replace(microsecond=0)


def make_bundle(identity, lifetime=dt.timedelta(hours=6), now=None, strength=2048):
    """Delegation shortcut for tests: fresh key, CSR, signed proxy, bundle."""
    pair = generate_keypair(strength)
    csr = build_proxy_csr(identity.subject, pair)
    cert = sign_proxy_csr(csr, identity, lifetime, now=now)
    return assemble_proxy_bundle(cert, pair.private_key, identity.certificate)


@pytest.fixture(scope="session")
def test_ca() -> TestCa:
    return TestCa.generate(seed=7)


@pytest.fixture(scope="session")
def trust_anchors(test_ca):
    return [test_ca.certificate]


@pytest.fixture(scope="session")
def alice(test_ca):
    return test_ca.issue_user("/C=IT/O=SNS/CN=Alice")


@pytest.fixture(scope="session")
def bob(test_ca):
    return test_ca.issue_user("/C=IT/O=SNS/CN=Bob")


@pytest.fixture(scope="session")
def keypair_2048():
    # one shared fresh pair for tests that only need "some" keypair
    return generate_keypair(2048)
