"""Distinguished names: the sole user identity in the gateway.

A DN is an ordered sequence of single-attribute RDNs with a canonical
slash-separated rendering ("/C=IT/O=SNS/CN=Alice") that parses back to an
equal value.
"""

from __future__ import annotations

from dataclasses import dataclass

from cryptography import x509
from cryptography.x509.oid import NameOID


class MalformedDnError(ValueError):
    """A DN string or component does not satisfy the DN rules."""


# Attribute short names accepted in renderings, mapped to X.509 OIDs.
_ATTR_OIDS = {
    "C": NameOID.COUNTRY_NAME,
    "ST": NameOID.STATE_OR_PROVINCE_NAME,
    "L": NameOID.LOCALITY_NAME,
    "O": NameOID.ORGANIZATION_NAME,
    "OU": NameOID.ORGANIZATIONAL_UNIT_NAME,
    "CN": NameOID.COMMON_NAME,
    "DC": NameOID.DOMAIN_COMPONENT,
    "UID": NameOID.USER_ID,
    "emailAddress": NameOID.EMAIL_ADDRESS,
}
_OID_ATTRS = {oid: name for name, oid in _ATTR_OIDS.items()}


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("/", "\\/")


def _split_components(text: str) -> list[str]:
    """Split on unescaped '/', keeping escapes for later unescaping."""
    parts: list[str] = []
    buf: list[str] = []
    escaped = False
    for ch in text:
        if escaped:
            buf.append("\\" + ch)
            escaped = False
        elif ch == "\\":
            escaped = True
        elif ch == "/":
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    if escaped:
        raise MalformedDnError("dangling escape at end of DN")
    parts.append("".join(buf))
    return parts


def _unescape(value: str) -> str:
    out: list[str] = []
    escaped = False
    for ch in value:
        if escaped:
            if ch not in ("\\", "/"):
                raise MalformedDnError(f"invalid escape sequence '\\{ch}'")
            out.append(ch)
            escaped = False
        elif ch == "\\":
            escaped = True
        else:
            out.append(ch)
    if escaped:
        raise MalformedDnError("dangling escape in DN value")
    return "".join(out)


@dataclass(frozen=True)
class DistinguishedName:
    """Ordered (attribute, value) pairs, e.g. (("C","IT"),("O","SNS"),("CN","Alice"))."""

    rdns: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.rdns:
            raise MalformedDnError("DN must have at least one component")
        for attr, value in self.rdns:
            if attr not in _ATTR_OIDS:
                raise MalformedDnError(f"unsupported DN attribute type {attr!r}")
            if not value or not value.strip():
                raise MalformedDnError(f"empty value for DN attribute {attr}")
            if attr == "C" and len(value) != 2:
                raise MalformedDnError("country component must be two characters")

    def render(self) -> str:
        return "".join(f"/{attr}={_escape(value)}" for attr, value in self.rdns)

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "DistinguishedName":
        if not isinstance(text, str):
            raise MalformedDnError("DN must be a string")
        if not text.startswith("/"):
            raise MalformedDnError("DN rendering must start with '/'")
        rdns = []
        for component in _split_components(text)[1:]:
            attr, sep, raw_value = component.partition("=")
            if not sep:
                raise MalformedDnError(f"DN component {component!r} lacks '='")
            rdns.append((attr, _unescape(raw_value)))
        return cls(tuple(rdns))

    def with_cn(self, value: str) -> "DistinguishedName":
        """Return this DN with one CN component appended (proxy naming)."""
        return DistinguishedName(self.rdns + (("CN", value),))

    def is_extension_of(self, base: "DistinguishedName") -> bool:
        """True if self == base plus exactly one appended CN."""
        return (
            len(self.rdns) == len(base.rdns) + 1
            and self.rdns[: len(base.rdns)] == base.rdns
            and self.rdns[-1][0] == "CN"
        )

    def to_x509(self) -> x509.Name:
        return x509.Name(
            [x509.NameAttribute(_ATTR_OIDS[attr], value) for attr, value in self.rdns]
        )

    @classmethod
    def from_x509(cls, name: x509.Name) -> "DistinguishedName":
        rdns: list[tuple[str, str]] = []
        for rdn in name.rdns:
            attrs = list(rdn)
            if len(attrs) != 1:
                raise MalformedDnError("multi-valued RDNs are not supported")
            attr = attrs[0]
            short = _OID_ATTRS.get(attr.oid)
            if short is None:
                raise MalformedDnError(f"unsupported DN attribute OID {attr.oid.dotted_string}")
            value = attr.value
            if isinstance(value, bytes):
                raise MalformedDnError("binary DN attribute values are not supported")
            rdns.append((short, value))
        return cls(tuple(rdns))
