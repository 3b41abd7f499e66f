"""Configuration parsing, coercion, and environment overrides."""

import pytest

from gridgate.gateway import ConfigError, GatewayConfig, load_config, parse_config_text


def test_parse_flat_file():
    text = """
    # service endpoint
    listen_addr = 0.0.0.0:9000
    mode = "run"
    workers = 8
    require_tls = yes

    scratch_root = '/var/tmp/gridgate'
    """
    values = parse_config_text(text)
    assert values == {
        "listen_addr": "0.0.0.0:9000",
        "mode": "run",
        "workers": "8",
        "require_tls": "yes",
        "scratch_root": "/var/tmp/gridgate",
    }


def test_parse_rejects_duplicate_keys():
    with pytest.raises(ConfigError, match="duplicate key 'mode'"):
        parse_config_text("mode = run\nmode = simulate\n")


def test_parse_rejects_bare_words_with_position():
    with pytest.raises(ConfigError, match=r"<config>:2"):
        parse_config_text("mode = run\nnonsense\n")


def test_load_config_from_file(tmp_path):
    path = tmp_path / "gateway.conf"
    path.write_text("mode = run\nworkers = 2\nmyproxy_delay_ms = 50\ncustom_flag = on\n")
    config = load_config(path, env={})
    assert config.mode == "run"
    assert config.workers == 2
    assert config.myproxy_delay_ms == 50.0
    assert config.myproxy_delay == 0.05
    assert config.extra == {"custom_flag": "on"}


def test_env_overrides_beat_the_file(tmp_path):
    path = tmp_path / "gateway.conf"
    path.write_text("listen_addr = 127.0.0.1:8440\nmode = simulate\n")
    config = load_config(
        path,
        env={
            "GRIDGATE_ADDR": "0.0.0.0:8888",
            "GRIDGATE_MODE": "run",
            "GRIDGATE_MYPROXY_DELAY_MS": "200",
        },
    )
    assert config.listen_addr == "0.0.0.0:8888"
    assert config.mode == "run"
    assert config.myproxy_delay_ms == 200.0


def test_env_overrides_apply_without_a_file():
    config = load_config(None, env={"GRIDGATE_MODE": "run"})
    assert config.mode == "run"


def test_missing_file_is_an_error(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "absent.conf", env={})


@pytest.mark.parametrize(
    "text, message",
    [
        ("mode = drive\n", "mode must be"),
        ("workers = 0\n", "workers must be"),
        ("workers = many\n", "workers must be a number"),
        ("myproxy_delay_ms = -5\n", "must be non-negative"),
        ("require_tls = maybe\n", "must be true or false"),
        ("tls_cert = /tmp/cert.pem\n", "set together"),
    ],
)
def test_bad_values_are_rejected(tmp_path, text, message):
    path = tmp_path / "gateway.conf"
    path.write_text(text)
    with pytest.raises(ConfigError, match=message):
        load_config(path, env={})


def test_host_and_port_split():
    config = GatewayConfig(listen_addr="gateway.example.org:8440")
    assert config.host == "gateway.example.org"
    assert config.port == 8440


def test_port_missing_is_an_error():
    config = GatewayConfig(listen_addr="localhost")
    with pytest.raises(ConfigError, match="has no port"):
        config.port
