"""User-side tools: API client, configuration, and the timing harness."""

from gridgate.client.api import (
    ApiFailure,
    GatewayClient,
    LoginResult,
    SubmitResult,
    parse_timestamp,
)
from gridgate.client.bench import (
    BENCH_PASSWORD,
    CSV_COLUMNS,
    EXTERNAL_MODE,
    LOCAL_MODE,
    MODES,
    BenchConfigError,
    BenchGateway,
    BenchReport,
    BenchRow,
    run_bench,
    write_csv,
)
from gridgate.client.config import (
    ClientConfig,
    ClientConfigError,
    check_key_permissions,
    drop_token,
    load_client_config,
    load_identity,
    load_token,
    save_token,
)

__all__ = [
    "ApiFailure",
    "GatewayClient",
    "LoginResult",
    "SubmitResult",
    "parse_timestamp",
    "BENCH_PASSWORD",
    "CSV_COLUMNS",
    "EXTERNAL_MODE",
    "LOCAL_MODE",
    "MODES",
    "BenchConfigError",
    "BenchGateway",
    "BenchReport",
    "BenchRow",
    "run_bench",
    "write_csv",
    "ClientConfig",
    "ClientConfigError",
    "check_key_permissions",
    "drop_token",
    "load_client_config",
    "load_identity",
    "load_token",
    "save_token",
]
