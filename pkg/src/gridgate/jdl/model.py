"""Value model for job descriptions.

A descriptor is an ordered list of (name, value) attributes. Values are a
small tagged union; Requirements-style expressions are carried as opaque
text, never evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


@dataclass(frozen=True)
class JdlStr:
    value: str


@dataclass(frozen=True)
class JdlNum:
    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", float(self.value))

    @property
    def is_integral(self) -> bool:
        return float(self.value).is_integer()


@dataclass(frozen=True)
class JdlBool:
    value: bool


@dataclass(frozen=True)
class JdlExpr:
    """Uninterpreted expression text (Requirements, Rank)."""

    text: str


@dataclass(frozen=True)
class JdlList:
    items: "tuple[JdlValue, ...]"

    def __post_init__(self) -> None:
        tags = {type(item) for item in self.items}
        if len(tags) > 1:
            names = sorted(t.__name__ for t in tags)
            raise ValueError(f"list elements must share one tag, got {names}")
        if JdlList in tags:
            raise ValueError("nested lists are not supported")


JdlValue = Union[JdlStr, JdlNum, JdlBool, JdlExpr, JdlList]


def render_number(value: float) -> str:
    """Decimal text for a number; integral values render without a fraction."""
    return str(int(value)) if float(value).is_integer() else repr(float(value))


@dataclass(frozen=True)
class JdlIssue:
    """One validation or parse finding. Errors block submission."""

    severity: str  # "error" | "warning"
    code: str
    message: str
    span: Optional[tuple[int, int]] = None  # (line, column), 1-based

    def __post_init__(self) -> None:
        if self.severity not in ("error", "warning"):
            raise ValueError(f"severity must be error or warning, got {self.severity!r}")


# canonical capitalization for the recognized attribute vocabulary
RECOGNIZED_ATTRIBUTES = (
    "Executable",
    "Arguments",
    "StdOutput",
    "StdError",
    "InputSandbox",
    "OutputSandbox",
    "VirtualOrganisation",
    "Requirements",
    "Rank",
    "Parameters",
    "ParameterStart",
    "ParameterStep",
    "JobType",
)
_CANONICAL = {name.lower(): name for name in RECOGNIZED_ATTRIBUTES}

# expression-valued attributes, captured verbatim by the parser
EXPRESSION_ATTRIBUTES = frozenset({"requirements", "rank"})


def canonical_name(name: str) -> str:
    """Recognized names get their canonical capitalization; others pass through."""
    return _CANONICAL.get(name.lower(), name)


@dataclass(frozen=True)
class JobDescriptor:
    """Ordered attribute map; names compare case-insensitively."""

    attributes: tuple[tuple[str, JdlValue], ...] = ()
    parse_warnings: tuple[JdlIssue, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        seen = set()
        for name, _value in self.attributes:
            key = name.lower()
            if key in seen:
                raise ValueError(f"duplicate attribute {name!r}")
            seen.add(key)

    def get(self, name: str) -> JdlValue | None:
        key = name.lower()
        for attr_name, value in self.attributes:
            if attr_name.lower() == key:
                return value
        return None

    def __contains__(self, name: str) -> bool:
        return self.get(name) is not None

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.attributes)

    def __iter__(self) -> Iterator[tuple[str, JdlValue]]:
        return iter(self.attributes)

    def __len__(self) -> int:
        return len(self.attributes)

    def with_attribute(self, name: str, value: JdlValue) -> "JobDescriptor":
        """Replace in place when present (keeping order), else append."""
        name = canonical_name(name)
        key = name.lower()
        out = []
        replaced = False
        for attr_name, attr_value in self.attributes:
            if attr_name.lower() == key:
                out.append((attr_name, value))
                replaced = True
            else:
                out.append((attr_name, attr_value))
        if not replaced:
            out.append((name, value))
        return JobDescriptor(attributes=tuple(out), parse_warnings=self.parse_warnings)

    def string_value(self, name: str) -> str | None:
        value = self.get(name)
        return value.value if isinstance(value, JdlStr) else None
