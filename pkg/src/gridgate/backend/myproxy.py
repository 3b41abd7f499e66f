"""Password-protected credential store modeling the classic external flow.

A stored credential is retrieved by shipping username and password over the
wire, and the credential itself (proxy certificate plus its private key)
comes back in the response. That is the whole point of simulating it: the
transcript of this exchange demonstrably carries secrets, where the
delegation protocol's transcript carries none.

Network latency is injected per message so a benchmark can dial the cost of
talking to an external box up and down.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import hmac
import json
import os
import time
from dataclasses import dataclass, field
from threading import Lock
from typing import Callable

from gridgate.backend.errors import (
    BadPasswordError,
    CredentialExpiredError,
    InvalidProxyError,
    InvalidRequestError,
    UnknownCredentialError,
)
from gridgate.certs import (
    Certificate,
    ProxyBundle,
    remaining_lifetime,
    validate_proxy_chain,
)
from gridgate.transcript import Transcript

DEFAULT_MAX_RENEWAL_LIFETIME = dt.timedelta(days=7)

_PBKDF2_ROUNDS = 20_000


def _utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc).replace(microsecond=0)


def _hash_password(password: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, _PBKDF2_ROUNDS)


@dataclass
class StoredCredential:
    """One deposited proxy, unlockable by password."""

    username: str
    salt: bytes = field(repr=False)
    password_hash: bytes = field(repr=False)
    bundle: ProxyBundle = field(repr=False)
    max_renewal_lifetime: dt.timedelta
    stored_at: dt.datetime

    def matches_password(self, password: str) -> bool:
        candidate = _hash_password(password, self.salt)
        return hmac.compare_digest(candidate, self.password_hash)

    @property
    def renewal_deadline(self) -> dt.datetime:
        return self.stored_at + self.max_renewal_lifetime


def _canonical(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


class MyProxySimulator:
    """Behavioral model of an external credential repository.

    Every operation is two messages (request, response); each message pays
    the configured delay before it is considered delivered. All traffic is
    recorded into the transcript, secrets included, because that is what
    this protocol actually sends.
    """

    def __init__(
        self,
        trust_anchors: list[Certificate],
        *,
        delay: float = 0.0,
        clock: Callable[[], dt.datetime] = _utcnow,
        transcript: Transcript | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ) -> None:
        if delay < 0:
            raise ValueError("delay must be non-negative")
        self._anchors = list(trust_anchors)
        self._delay = delay
        self._clock = clock
        self.transcript = transcript if transcript is not None else Transcript("myproxy")
        self._sleeper = sleeper
        self._credentials: dict[str, StoredCredential] = {}
        self._lock = Lock()

    @property
    def delay(self) -> float:
        return self._delay

    @delay.setter
    def delay(self, value: float) -> None:
        if value < 0:
            raise ValueError("delay must be non-negative")
        self._delay = value

    def _deliver(self, sender: str, label: str, payload: bytes) -> None:
        if self._delay:
            self._sleeper(self._delay)
        self.transcript.record(sender, label, payload)

    def credential_count(self) -> int:
        with self._lock:
            return len(self._credentials)

    def stored(self, username: str) -> StoredCredential:
        with self._lock:
            if username not in self._credentials:
                raise UnknownCredentialError(f"no credential stored for {username!r}")
            return self._credentials[username]

    def store(
        self,
        username: str,
        password: str,
        bundle: ProxyBundle,
        *,
        max_renewal_lifetime: dt.timedelta = DEFAULT_MAX_RENEWAL_LIFETIME,
        now: dt.datetime | None = None,
    ) -> dt.datetime:
        """Deposit a credential; returns the renewal deadline.

        The request message carries the username, the password, and the full
        credential PEM (certificate and private key), as the legacy protocol
        does.
        """
        if not username or not username.strip():
            raise InvalidRequestError("username must be non-empty")
        if not password:
            raise InvalidRequestError("password must be non-empty")
        now = now or self._clock()
        request = _canonical(
            {
                "command": "store",
                "credential_pem": bundle.to_pem(),
                "password": password,
                "username": username,
            }
        )
        self._deliver("client", "myproxy-store-request", request)
        report = validate_proxy_chain(bundle, self._anchors, now=now)
        if not report.valid:
            response = _canonical({"status": "error", "reason": "invalid-proxy"})
            self._deliver("myproxy", "myproxy-store-response", response)
            raise InvalidProxyError(
                "credential rejected: " + ",".join(sorted(report.codes()))
            )
        salt = os.urandom(16)
        credential = StoredCredential(
            username=username,
            salt=salt,
            password_hash=_hash_password(password, salt),
            bundle=bundle,
            max_renewal_lifetime=max_renewal_lifetime,
            stored_at=now,
        )
        with self._lock:
            self._credentials[username] = credential
        response = _canonical(
            {"status": "ok", "renewal_deadline": credential.renewal_deadline.isoformat()}
        )
        self._deliver("myproxy", "myproxy-store-response", response)
        return credential.renewal_deadline

    def retrieve(
        self, username: str, password: str, now: dt.datetime | None = None
    ) -> ProxyBundle:
        """Fetch a stored credential by password.

        The response message carries the credential PEM, private key
        included; that is the legacy flow under test.
        """
        now = now or self._clock()
        request = _canonical(
            {"command": "retrieve", "password": password, "username": username}
        )
        self._deliver("client", "myproxy-retrieve-request", request)
        try:
            with self._lock:
                credential = self._credentials.get(username)
            if credential is None:
                raise UnknownCredentialError(f"no credential stored for {username!r}")
            if not credential.matches_password(password):
                raise BadPasswordError(f"wrong password for {username!r}")
            if remaining_lifetime(credential.bundle, now) <= dt.timedelta(0):
                raise CredentialExpiredError(f"credential for {username!r} has expired")
        except (UnknownCredentialError, BadPasswordError, CredentialExpiredError) as exc:
            reason = {
                UnknownCredentialError: "unknown",
                BadPasswordError: "bad-password",
                CredentialExpiredError: "expired",
            }[type(exc)]
            response = _canonical({"status": "error", "reason": reason})
            self._deliver("myproxy", "myproxy-retrieve-response", response)
            raise
        response = _canonical(
            {"status": "ok", "credential_pem": credential.bundle.to_pem()}
        )
        self._deliver("myproxy", "myproxy-retrieve-response", response)
        return credential.bundle
