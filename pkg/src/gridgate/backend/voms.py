"""Virtual-organisation membership and signed attribute assertions.

The simulator answers authorization requests the way the real membership
service would: it checks the proxy, looks the end user up in its registry,
and returns a short assertion signed with its own key.
"""

from __future__ import annotations

import datetime as dt
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from gridgate.backend.errors import (
    InvalidProxyError,
    NotAMemberError,
    UnknownVoError,
)
from gridgate.certs import (
    Certificate,
    DistinguishedName,
    KeyPair,
    MalformedDnError,
    ProxyBundle,
    generate_keypair,
    validate_proxy_chain,
    verify_signature,
)

ASSERTION_VALIDITY = dt.timedelta(hours=12)


def _utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc).replace(microsecond=0)


@dataclass(frozen=True)
class AttributeAssertion:
    """A signed statement that holder_dn belongs to vo for a bounded window."""

    holder_dn: DistinguishedName
    vo: str
    issued_at: dt.datetime
    expires_at: dt.datetime
    signature: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if self.expires_at <= self.issued_at:
            raise ValueError("assertion must expire after issuance")

    def signed_payload(self) -> bytes:
        return assertion_payload(self.holder_dn, self.vo, self.issued_at, self.expires_at)

    def is_expired(self, now: dt.datetime | None = None) -> bool:
        return (now or _utcnow()) >= self.expires_at


def assertion_payload(
    holder_dn: DistinguishedName, vo: str, issued_at: dt.datetime, expires_at: dt.datetime
) -> bytes:
    doc = {
        "expires_at": expires_at.isoformat(),
        "holder_dn": holder_dn.render(),
        "issued_at": issued_at.isoformat(),
        "vo": vo,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


class VoRegistry:
    """Immutable map of organisation name to member DNs."""

    def __init__(self, memberships: Mapping[str, Iterable[DistinguishedName]]) -> None:
        cleaned: dict[str, frozenset[DistinguishedName]] = {}
        for vo, members in memberships.items():
            if not vo or not vo.strip():
                raise ValueError("vo names must be non-empty")
            if vo in cleaned:
                raise ValueError(f"duplicate vo {vo!r}")
            cleaned[vo] = frozenset(members)
        self._memberships = cleaned

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, DistinguishedName]]) -> "VoRegistry":
        grouped: dict[str, set[DistinguishedName]] = {}
        for vo, dn in pairs:
            grouped.setdefault(vo, set()).add(dn)
        return cls(grouped)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "VoRegistry":
        """One membership per line: vo-name<TAB>distinguished-name."""
        pairs = []
        for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vo, sep, dn_text = line.partition("\t")
            if not sep or not vo or not dn_text:
                raise ValueError(f"{path}:{lineno}: expected 'vo<TAB>dn', got {line!r}")
            try:
                pairs.append((vo, DistinguishedName.parse(dn_text)))
            except MalformedDnError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
        return cls.from_pairs(pairs)

    def vos(self) -> tuple[str, ...]:
        return tuple(sorted(self._memberships))

    def members(self, vo: str) -> frozenset[DistinguishedName]:
        if vo not in self._memberships:
            raise UnknownVoError(f"unknown vo {vo!r}")
        return self._memberships[vo]

    def is_member(self, vo: str, dn: DistinguishedName) -> bool:
        return dn in self.members(vo)


class VomsSimulator:
    """Authorization endpoint: proxy in, signed membership assertion out."""

    def __init__(
        self,
        registry: VoRegistry,
        trust_anchors: Iterable[Certificate],
        *,
        validity: dt.timedelta = ASSERTION_VALIDITY,
        keypair: KeyPair | None = None,
        clock: Callable[[], dt.datetime] = _utcnow,
    ) -> None:
        self.registry = registry
        self._anchors = list(trust_anchors)
        self._validity = validity
        self._keypair = keypair or generate_keypair()
        self._clock = clock

    @property
    def public_key(self):
        return self._keypair.public_key

    def authorize(
        self, bundle: ProxyBundle, vo: str, now: dt.datetime | None = None
    ) -> AttributeAssertion:
        """Issue an assertion for the bundle's end user, if a member of vo."""
        now = now or self._clock()
        report = validate_proxy_chain(bundle, self._anchors, now=now)
        if not report.valid:
            raise InvalidProxyError(
                "proxy rejected: " + ",".join(sorted(report.codes()))
            )
        holder = bundle.end_user_dn
        if not self.registry.is_member(vo, holder):  # raises UnknownVoError first
            raise NotAMemberError(f"{holder} is not a member of {vo!r}")
        issued_at = now
        expires_at = now + self._validity
        payload = assertion_payload(holder, vo, issued_at, expires_at)
        return AttributeAssertion(
            holder_dn=holder,
            vo=vo,
            issued_at=issued_at,
            expires_at=expires_at,
            signature=self._keypair.sign(payload),
        )

    def verify(self, assertion: AttributeAssertion) -> bool:
        """Check the assertion signature under this simulator's key."""
        return verify_signature(
            self._keypair.public_key, assertion.signature, assertion.signed_payload()
        )
