"""Gateway configuration: flat key=value file plus environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

from gridgate.flatconfig import ConfigError, parse_config_text

_ENV_OVERRIDES = {
    "GRIDGATE_ADDR": "listen_addr",
    "GRIDGATE_MODE": "mode",
    "GRIDGATE_MYPROXY_DELAY_MS": "myproxy_delay_ms",
}

_BOOL_WORDS = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


@dataclass
class GatewayConfig:
    listen_addr: str = "127.0.0.1:8440"
    tls_cert: str | None = None
    tls_key: str | None = None
    require_tls: bool = False
    trust_anchor_dir: str | None = None
    vo_registry: str | None = None
    mode: str = "simulate"
    workers: int = 4
    run_wall_limit: float = 60.0
    myproxy_delay_ms: float = 0.0
    myproxy_endpoints: bool = False
    journal_path: str | None = None
    timetable_path: str | None = None
    scratch_root: str | None = None
    ui_dir: str | None = None
    extra: dict[str, str] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.mode not in ("simulate", "run"):
            raise ConfigError(f"mode must be 'simulate' or 'run', got {self.mode!r}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.myproxy_delay_ms < 0:
            raise ConfigError("myproxy_delay_ms must be non-negative")
        if (self.tls_cert is None) != (self.tls_key is None):
            raise ConfigError("tls_cert and tls_key must be set together")

    @property
    def host(self) -> str:
        host, _sep, _port = self.listen_addr.rpartition(":")
        return host or self.listen_addr

    @property
    def port(self) -> int:
        _host, sep, port = self.listen_addr.rpartition(":")
        if not sep:
            raise ConfigError(f"listen_addr {self.listen_addr!r} has no port")
        try:
            return int(port)
        except ValueError:
            raise ConfigError(f"listen_addr {self.listen_addr!r} has a bad port") from None

    @property
    def myproxy_delay(self) -> float:
        """Injected delay in seconds."""
        return self.myproxy_delay_ms / 1000.0


def _coerce(name: str, text: str, target_type) -> object:
    if target_type is bool:
        word = text.strip().lower()
        if word not in _BOOL_WORDS:
            raise ConfigError(f"{name} must be true or false, got {text!r}")
        return _BOOL_WORDS[word]
    try:
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {text!r}") from None
    return text


_FIELD_TYPES = {
    "listen_addr": str,
    "tls_cert": str,
    "tls_key": str,
    "require_tls": bool,
    "trust_anchor_dir": str,
    "vo_registry": str,
    "mode": str,
    "workers": int,
    "run_wall_limit": float,
    "myproxy_delay_ms": float,
    "myproxy_endpoints": bool,
    "journal_path": str,
    "timetable_path": str,
    "scratch_root": str,
    "ui_dir": str,
}


def load_config(
    path: str | os.PathLike | None = None,
    env: Mapping[str, str] | None = None,
) -> GatewayConfig:
    """Build the configuration from an optional file, then apply env overrides."""
    env = os.environ if env is None else env
    values: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text("utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values = parse_config_text(text, source=str(path))

    known = {f.name for f in fields(GatewayConfig)} - {"extra"}
    kwargs: dict[str, object] = {}
    extra: dict[str, str] = {}
    for key, text in values.items():
        if key in known:
            kwargs[key] = _coerce(key, text, _FIELD_TYPES[key])
        else:
            extra[key] = text

    for env_name, field_name in _ENV_OVERRIDES.items():
        if env_name in env:
            kwargs[field_name] = _coerce(env_name, env[env_name], _FIELD_TYPES[field_name])

    return GatewayConfig(extra=extra, **kwargs)
