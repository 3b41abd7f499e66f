"""HTTP gateway: delegation endpoint, proxy store, and the job API."""

from gridgate.gateway.app import ApiError, TOKEN_HEADER, build_state, create_app
from gridgate.gateway.config import ConfigError, GatewayConfig, load_config, parse_config_text
from gridgate.gateway.journal import (
    HistoricalJob,
    Journal,
    mark_interrupted,
    replay_journal,
)
from gridgate.gateway.state import (
    SESSION_LIFETIME,
    ApiSession,
    GatewayState,
    ProxyStore,
    SessionTable,
    StoredProxy,
)

__all__ = [
    "ApiError",
    "ApiSession",
    "ConfigError",
    "GatewayConfig",
    "GatewayState",
    "HistoricalJob",
    "Journal",
    "ProxyStore",
    "SESSION_LIFETIME",
    "SessionTable",
    "StoredProxy",
    "TOKEN_HEADER",
    "build_state",
    "create_app",
    "load_config",
    "mark_interrupted",
    "parse_config_text",
    "replay_journal",
]
