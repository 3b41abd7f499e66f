"""Client API wrapper, configuration, token cache, CLI, and bench harness."""

import datetime as dt
import json
import os
import time
from pathlib import Path
from types import SimpleNamespace

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from gridgate.certs import bundle_p12, write_identity
from gridgate.cli import cli
from gridgate.client import (
    BENCH_PASSWORD,
    EXTERNAL_MODE,
    LOCAL_MODE,
    ApiFailure,
    BenchConfigError,
    BenchGateway,
    ClientConfig,
    ClientConfigError,
    GatewayClient,
    check_key_permissions,
    load_client_config,
    load_identity,
    load_token,
    parse_timestamp,
    run_bench,
    save_token,
    write_csv,
)
from gridgate.client.bench import BenchRow
from gridgate.gateway import GatewayConfig, create_app
from gridgate.transcript import Transcript, scan_for_private_key
from tests.conftest import utcnow
from tests.test_gateway import build_state

MINIMAL_JDL = 'Executable = "run.sh";\n'


# -- GatewayClient against an in-process app


@pytest.fixture()
def api(trust_anchors, alice, bob):
    state = build_state(trust_anchors, alice, bob)
    app = create_app(GatewayConfig(myproxy_endpoints=True), state=state)
    with TestClient(app) as http:
        yield SimpleNamespace(client=GatewayClient(http=http), state=state)
    state.shutdown()


def test_client_delegates_and_keeps_token(api, alice):
    assert api.client.token is None
    expiry = api.client.delegate(alice, dt.timedelta(hours=4))
    assert api.client.token
    assert expiry.tzinfo is not None
    assert api.client.jobs() == []


def test_client_full_cycle(api, alice):
    api.client.delegate(alice)
    result = api.client.submit(MINIMAL_JDL, "theophys")
    (job_id,) = result.job_ids
    deadline = time.monotonic() + 10
    while api.client.job(job_id)["status"] != "DONE_OK":
        assert time.monotonic() < deadline, "job never finished"
        time.sleep(0.02)
    archive = api.client.output(job_id)
    assert archive[:2] == b"\x1f\x8b"
    body = api.client.cancel(job_id)
    assert body["status"] == "CLEARED"


def test_client_surfaces_api_errors(api, alice):
    with pytest.raises(ApiFailure) as caught:
        api.client.jobs()
    assert caught.value.status_code == 401
    assert caught.value.error == "NoSession"
    api.client.delegate(alice)
    with pytest.raises(ApiFailure) as caught:
        api.client.submit(MINIMAL_JDL, "no-such-vo")
    assert caught.value.error == "UnknownVo"


def test_client_validate_and_health(api):
    assert api.client.health()["status"] == "ok"
    verdict = api.client.validate_jdl('Arguments = "x";\n')
    assert verdict["valid"] is False


def test_client_renew_denied_without_registration(api, alice):
    api.client.delegate(alice)
    (job_id,) = api.client.submit(MINIMAL_JDL, "theophys").job_ids
    with pytest.raises(ApiFailure) as caught:
        api.client.renew(job_id)
    assert caught.value.error == "NoRenewalCredential"


def test_parse_timestamp_accepts_both_utc_spellings():
    assert parse_timestamp("2026-08-22T10:00:00Z") == parse_timestamp(
        "2026-08-22T10:00:00+00:00"
    )


# -- configuration and identity loading


def test_config_file_and_flag_precedence(tmp_path):
    path = tmp_path / "client.conf"
    path.write_text(
        "gateway = http://example.org:8440\nvo = theophys\nlifetime_hours = 6\n"
    )
    config = load_client_config(path, default_vo="biomed")
    assert config.gateway_url == "http://example.org:8440"
    assert config.default_vo == "biomed"
    assert config.proxy_lifetime == dt.timedelta(hours=6)


def test_config_rejects_bad_lifetime(tmp_path):
    path = tmp_path / "client.conf"
    path.write_text("lifetime_hours = soon\n")
    with pytest.raises(ClientConfigError, match="lifetime_hours"):
        load_client_config(path)


def test_key_permission_check(tmp_path):
    key = tmp_path / "userkey.pem"
    key.write_text("not really a key")
    os.chmod(key, 0o644)
    with pytest.raises(ClientConfigError, match="beyond\n?.*owner|owner"):
        check_key_permissions(key)
    os.chmod(key, 0o600)
    check_key_permissions(key)


def test_load_identity_refuses_open_key(tmp_path, alice):
    cert_path, key_path = write_identity(alice, tmp_path, "alice")
    os.chmod(key_path, 0o664)
    config = ClientConfig(cert_path=str(cert_path), key_path=str(key_path))
    with pytest.raises(ClientConfigError, match="refusing key file"):
        load_identity(config)
    os.chmod(key_path, 0o600)
    loaded = load_identity(config)
    assert loaded.subject == alice.subject


def test_load_identity_from_p12(tmp_path, alice):
    archive = tmp_path / "identity.p12"
    archive.write_bytes(bundle_p12(alice.certificate, alice.private_key, "pw"))
    config = ClientConfig(p12_path=str(archive))
    loaded = load_identity(config, "pw")
    assert loaded.subject == alice.subject


def test_load_identity_without_any_source(tmp_path):
    with pytest.raises(ClientConfigError, match="no identity configured"):
        load_identity(ClientConfig())


def test_token_cache_round_trip(tmp_path):
    config = ClientConfig(token_cache=str(tmp_path / "token.json"))
    save_token(config, "secret-token", utcnow() + dt.timedelta(hours=2))
    mode = os.stat(config.cache_path()).st_mode & 0o777
    assert mode == 0o600
    assert load_token(config) == "secret-token"


def test_token_cache_misses(tmp_path):
    config = ClientConfig(token_cache=str(tmp_path / "token.json"))
    assert load_token(config) is None  # nothing cached yet

    save_token(config, "t", utcnow() - dt.timedelta(minutes=1))
    assert load_token(config) is None  # expired

    save_token(config, "t", utcnow() + dt.timedelta(hours=1))
    other = ClientConfig(
        gateway_url="http://elsewhere:1", token_cache=str(tmp_path / "token.json")
    )
    assert load_token(other) is None  # cached for a different gateway

    config.cache_path().write_text("{broken")
    assert load_token(config) is None  # unreadable cache is just a miss


# -- CLI against a live loopback gateway


@pytest.fixture(scope="module")
def live(tmp_path_factory):
    gateway = BenchGateway(seed=77)
    gateway.start()
    ident_dir = tmp_path_factory.mktemp("identity")
    cert_path, key_path = write_identity(gateway.identity, ident_dir, "bench")
    yield SimpleNamespace(
        gateway=gateway, cert=str(cert_path), key=str(key_path), url=gateway.base_url
    )
    gateway.stop()


@pytest.fixture()
def runner():
    return CliRunner()


def cli_args(live, cache, *command):
    return [
        "--gateway", live.url,
        "--cert", live.cert,
        "--key", live.key,
        "--vo", "bench",
        "--token-cache", str(cache),
        *command,
    ]


def test_cli_delegate_prints_expiry_and_caches_token(runner, live, tmp_path):
    cache = tmp_path / "token.json"
    result = runner.invoke(cli, cli_args(live, cache, "delegate", "--lifetime-hours", "3"))
    assert result.exit_code == 0, result.output
    expiry = parse_timestamp(result.output.strip())
    remaining = expiry - dt.datetime.now(dt.timezone.utc)
    assert dt.timedelta(hours=2, minutes=50) < remaining <= dt.timedelta(hours=3)
    assert json.loads(cache.read_text())["token"]


def test_cli_submit_status_output_cancel(runner, live, tmp_path):
    cache = tmp_path / "token.json"
    jdl_path = tmp_path / "job.jdl"
    jdl_path.write_text(MINIMAL_JDL)

    submitted = runner.invoke(cli, cli_args(live, cache, "submit", str(jdl_path)))
    assert submitted.exit_code == 0, submitted.output
    job_id = submitted.output.strip().splitlines()[-1]
    assert job_id.startswith("gg-")

    token = json.loads(cache.read_text())["token"]
    with GatewayClient(live.url, token=token) as client:
        deadline = time.monotonic() + 10
        while client.job(job_id)["status"] != "DONE_OK":
            assert time.monotonic() < deadline, "job never finished"
            time.sleep(0.02)

    listed = runner.invoke(cli, cli_args(live, cache, "status"))
    assert listed.exit_code == 0
    assert job_id in listed.output
    assert "DONE_OK" in listed.output

    dest = tmp_path / "retrieved"
    fetched = runner.invoke(
        cli, cli_args(live, cache, "output", job_id, "--dest", str(dest))
    )
    assert fetched.exit_code == 0, fetched.output
    assert (dest / "std.out").exists()
    assert (dest / "std.err").exists()

    cancelled = runner.invoke(cli, cli_args(live, cache, "cancel", job_id))
    assert cancelled.exit_code == 0
    assert "CLEARED" in cancelled.output


def test_cli_recovers_from_a_dead_session(runner, live, tmp_path):
    cache = tmp_path / "token.json"
    config = ClientConfig(gateway_url=live.url, token_cache=str(cache))
    save_token(config, "stale-token", utcnow() + dt.timedelta(hours=1))

    result = runner.invoke(cli, cli_args(live, cache, "status"))
    assert result.exit_code == 0, result.output
    assert json.loads(cache.read_text())["token"] != "stale-token"


def test_cli_refuses_world_readable_key(runner, live, tmp_path):
    loose_dir = tmp_path / "loose"
    cert_path, key_path = write_identity(live.gateway.identity, loose_dir, "bench")
    os.chmod(key_path, 0o644)
    args = [
        "--gateway", live.url,
        "--cert", str(cert_path),
        "--key", str(key_path),
        "--token-cache", str(tmp_path / "token.json"),
        "delegate",
    ]
    result = runner.invoke(cli, args)
    assert result.exit_code == 1
    assert "refusing key file" in result.output


def test_cli_submit_without_vo_is_a_usage_error(runner, live, tmp_path):
    jdl_path = tmp_path / "job.jdl"
    jdl_path.write_text(MINIMAL_JDL)
    args = [
        "--gateway", live.url,
        "--cert", live.cert,
        "--key", live.key,
        "--token-cache", str(tmp_path / "token.json"),
        "submit", str(jdl_path),
    ]
    result = runner.invoke(cli, args)
    assert result.exit_code == 2
    assert "no VO" in result.output


def test_cli_unreachable_gateway_is_exit_one(runner, live, tmp_path):
    args = [
        "--gateway", "http://127.0.0.1:9",
        "--cert", live.cert,
        "--key", live.key,
        "--token-cache", str(tmp_path / "token.json"),
        "delegate",
    ]
    result = runner.invoke(cli, args)
    assert result.exit_code == 1


def test_cli_submit_with_sandbox_directory(runner, live, tmp_path):
    cache = tmp_path / "token.json"
    jdl_path = tmp_path / "job.jdl"
    jdl_path.write_text(
        'Executable = "run.sh";\nInputSandbox = {"data/seed.txt"};\n'
    )
    sandbox = tmp_path / "sandbox"
    (sandbox / "data").mkdir(parents=True)
    (sandbox / "data" / "seed.txt").write_text("42\n")

    result = runner.invoke(
        cli, cli_args(live, cache, "submit", str(jdl_path), "--sandbox", str(sandbox))
    )
    assert result.exit_code == 0, result.output


def test_cli_submit_missing_sandbox_fails_before_any_network_call(runner, tmp_path):
    jdl_path = tmp_path / "job.jdl"
    jdl_path.write_text(MINIMAL_JDL)
    args = [
        "--gateway", "http://127.0.0.1:9",  # would fail if contacted
        "submit", str(jdl_path),
        "--vo", "bench",
        "--sandbox", str(tmp_path / "not-there"),
    ]
    result = CliRunner().invoke(cli, args)
    assert result.exit_code == 2
    assert "not-there" in result.output


def test_cli_convert_round_trip(runner, tmp_path, alice):
    archive = tmp_path / "identity.p12"
    archive.write_bytes(bundle_p12(alice.certificate, alice.private_key, "pw"))
    with runner.isolated_filesystem(temp_dir=tmp_path):
        result = runner.invoke(
            cli, ["convert", "--p12", str(archive), "--password", "pw"]
        )
        assert result.exit_code == 0, result.output
        assert "BEGIN CERTIFICATE" in Path("usercert.pem").read_text()
        key_stat = os.stat("userkey.pem")
        assert key_stat.st_mode & 0o777 == 0o600

        wrong = runner.invoke(
            cli, ["convert", "--p12", str(archive), "--password", "nope"]
        )
        assert wrong.exit_code == 1


# -- bench harness


def test_bench_rejects_nonsense():
    with pytest.raises(BenchConfigError, match="mode"):
        run_bench("turbo")
    with pytest.raises(BenchConfigError, match="repetitions"):
        run_bench(LOCAL_MODE, repetitions=0)
    with pytest.raises(BenchConfigError, match="delay"):
        run_bench(LOCAL_MODE, delay_ms=-1)


def test_bench_frame_counts_and_ordering(live):
    local = run_bench(
        LOCAL_MODE, delay_ms=25.0, repetitions=2, gateway=live.gateway,
        keep_transcripts=True,
    )
    external = run_bench(
        EXTERNAL_MODE, delay_ms=25.0, repetitions=2, gateway=live.gateway,
        keep_transcripts=True,
    )
    assert local.message_count == 4
    assert external.message_count == 6
    assert local.wall_time_s < external.wall_time_s
    for transcript in local.transcripts + external.transcripts:
        assert len(transcript.frames) in (4, 6)

    password = BENCH_PASSWORD.encode()
    local_hits = sum(
        password in frame.payload
        for transcript in local.transcripts
        for frame in transcript.frames
    )
    external_hits = sum(
        password in frame.payload
        for transcript in external.transcripts
        for frame in transcript.frames
    )
    assert local_hits == 0
    assert external_hits >= 1


def test_bench_transcripts_never_carry_the_long_lived_key(live):
    report = run_bench(
        LOCAL_MODE, repetitions=1, gateway=live.gateway, keep_transcripts=True
    )
    hits = scan_for_private_key(
        report.transcripts[0], [live.gateway.identity.private_key]
    )
    assert hits == []


def test_bench_csv_schema(tmp_path):
    rows = [
        BenchRow(LOCAL_MODE, 1, 10.0, 0.1, 0.01, 0.2, 0.005, 0.315, 4),
        BenchRow(EXTERNAL_MODE, 1, 10.0, 0.3, 0.01, 0.2, 0.005, 0.515, 6),
    ]
    path = tmp_path / "bench.csv"
    write_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "mode,repetition,delay_ms,delegate_s,submit_s,monitor_s,output_s,total_s,frames"
    assert lines[1].startswith("local-delegation,1,10,")
    assert lines[1].endswith(",4")
    assert len(lines) == 3


def test_cli_bench_writes_csv(runner, tmp_path):
    out = tmp_path / "bench.csv"
    result = runner.invoke(
        cli,
        ["bench", "--mode", LOCAL_MODE, "--repetitions", "1", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert "messages=4" in result.output
    lines = out.read_text().splitlines()
    assert lines[0].startswith("mode,repetition")
    assert len(lines) == 2
