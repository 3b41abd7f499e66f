"""Flat 'key = value' configuration text, shared by service and client."""

from __future__ import annotations


class ConfigError(ValueError):
    """The configuration file or environment is unusable."""


def _parse_value(raw: str) -> str:
    value = raw.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in ("'", '"'):
        value = value[1:-1]
    return value


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Flat 'key = value' lines; '#' comments; quotes around values optional."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, raw = stripped.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _parse_value(raw)
    return values
