"""Client-side settings, identity loading, and the token cache."""

from __future__ import annotations

import datetime as dt
import json
import os
import stat
from dataclasses import dataclass
from pathlib import Path

from gridgate.certs import IdentityCredential, convert_p12_to_pem
from gridgate.flatconfig import ConfigError, parse_config_text

DEFAULT_GATEWAY = "http://127.0.0.1:8440"
DEFAULT_LIFETIME = dt.timedelta(hours=12)


class ClientConfigError(ConfigError):
    """The client cannot start with the given settings."""


@dataclass
class ClientConfig:
    gateway_url: str = DEFAULT_GATEWAY
    cert_path: str | None = None
    key_path: str | None = None
    p12_path: str | None = None
    default_vo: str | None = None
    proxy_lifetime: dt.timedelta = DEFAULT_LIFETIME
    token_cache: str | None = None

    def cache_path(self) -> Path:
        if self.token_cache:
            return Path(self.token_cache)
        base = os.environ.get("XDG_CACHE_HOME") or os.path.join(
            os.path.expanduser("~"), ".cache"
        )
        return Path(base) / "gridgate" / "token.json"


_FILE_KEYS = {
    "gateway": "gateway_url",
    "cert": "cert_path",
    "key": "key_path",
    "p12": "p12_path",
    "vo": "default_vo",
    "token_cache": "token_cache",
}


def load_client_config(path: str | os.PathLike | None = None, **overrides) -> ClientConfig:
    """Optional flat config file; keyword overrides (CLI flags) win."""
    config = ClientConfig()
    if path is not None:
        try:
            text = Path(path).read_text("utf-8")
        except OSError as exc:
            raise ClientConfigError(f"cannot read config {path}: {exc}") from exc
        values = parse_config_text(text, source=str(path))
        for key, attr in _FILE_KEYS.items():
            if key in values:
                setattr(config, attr, values[key])
        if "lifetime_hours" in values:
            try:
                hours = float(values["lifetime_hours"])
            except ValueError:
                raise ClientConfigError(
                    f"lifetime_hours must be a number, got {values['lifetime_hours']!r}"
                ) from None
            config.proxy_lifetime = dt.timedelta(hours=hours)
    for attr, value in overrides.items():
        if value is not None:
            setattr(config, attr, value)
    return config


def check_key_permissions(path: str | os.PathLike) -> None:
    """Keys readable beyond the owner are refused outright."""
    mode = stat.S_IMODE(os.stat(path).st_mode)
    if mode & 0o077:
        raise ClientConfigError(
            f"refusing key file {path}: mode {oct(mode)} grants access beyond "
            "the owner; tighten it to 600"
        )


def load_identity(config: ClientConfig, p12_password: str | None = None) -> IdentityCredential:
    if config.p12_path:
        archive = Path(config.p12_path).read_bytes()
        cert_pem, key_pem = convert_p12_to_pem(archive, p12_password or "")
        return IdentityCredential.load(cert_pem, key_pem)
    if not config.cert_path or not config.key_path:
        raise ClientConfigError(
            "no identity configured: set cert and key paths, or a p12 path"
        )
    check_key_permissions(config.key_path)
    return IdentityCredential.load(
        Path(config.cert_path).read_text("utf-8"),
        Path(config.key_path).read_text("utf-8"),
    )


def save_token(config: ClientConfig, token: str, expiry: dt.datetime) -> None:
    """Owner-only cache file so later commands can skip a fresh delegation."""
    path = config.cache_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(
        {"expiry": expiry.isoformat(), "gateway": config.gateway_url, "token": token}
    )
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    try:
        os.write(fd, payload.encode("utf-8"))
    finally:
        os.close(fd)


def load_token(config: ClientConfig, now: dt.datetime | None = None) -> str | None:
    """The cached token, or None when absent, foreign, or past its expiry."""
    now = now or dt.datetime.now(dt.timezone.utc)
    try:
        doc = json.loads(config.cache_path().read_text("utf-8"))
    except (OSError, ValueError):
        return None
    if doc.get("gateway") != config.gateway_url:
        return None
    try:
        expiry = dt.datetime.fromisoformat(doc["expiry"])
    except (KeyError, ValueError):
        return None
    if expiry <= now:
        return None
    token = doc.get("token")
    return token if isinstance(token, str) and token else None


def drop_token(config: ClientConfig) -> None:
    try:
        config.cache_path().unlink()
    except OSError:
        pass
