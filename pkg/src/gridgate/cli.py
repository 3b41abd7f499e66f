"""The gridgate command line: service management plus the user-side client."""

from __future__ import annotations

import datetime as dt
import os
from pathlib import Path

import click
import uvicorn

from gridgate.backend import compress_sandbox, decompress_sandbox
from gridgate.certs import (
    BadPasswordError,
    MalformedArchiveError,
    TestCa,
    convert_p12_to_pem,
    write_identity,
)
from gridgate.client import (
    EXTERNAL_MODE,
    LOCAL_MODE,
    ApiFailure,
    BenchConfigError,
    BenchGateway,
    ClientConfig,
    ClientConfigError,
    GatewayClient,
    load_client_config,
    load_identity,
    load_token,
    parse_timestamp,
    run_bench,
    save_token,
    write_csv,
)
from gridgate.delegation import DelegationError
from gridgate.flatconfig import ConfigError
from gridgate.gateway import create_app, load_config

_OPERATIONAL_ERRORS = (
    ApiFailure,
    ClientConfigError,
    ConfigError,
    DelegationError,
    BenchConfigError,
    BadPasswordError,
    MalformedArchiveError,
    OSError,
)


def _fail(exc: Exception) -> "click.ClickException":
    return click.ClickException(str(exc))


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--gateway", default=None, help="Gateway base URL.")
@click.option("--cert", default=None, type=click.Path(), help="Identity certificate PEM.")
@click.option("--key", default=None, type=click.Path(), help="Identity private key PEM.")
@click.option("--p12", default=None, type=click.Path(), help="Identity PKCS#12 archive.")
@click.option("--vo", default=None, help="Default virtual organisation.")
@click.option("--config", "config_path", default=None, type=click.Path(), help="Client config file.")
@click.option("--token-cache", default=None, type=click.Path(), help="Session token cache file.")
@click.pass_context
def cli(ctx, gateway, cert, key, p12, vo, config_path, token_cache):
    """Proxy-delegation grid gateway: server, client, and benchmark tools."""
    try:
        ctx.obj = load_client_config(
            config_path,
            gateway_url=gateway,
            cert_path=cert,
            key_path=key,
            p12_path=p12,
            default_vo=vo,
            token_cache=token_cache,
        )
    except _OPERATIONAL_ERRORS as exc:
        raise _fail(exc)


def main() -> None:
    cli(auto_envvar_prefix="GRIDGATE_CLI")


# -- service side


@cli.command()
@click.option("--config", "config_path", default=None, type=click.Path(), help="Gateway config file.")
def serve(config_path):
    """Run the gateway service."""
    try:
        config = load_config(config_path)
        app = create_app(config)
    except _OPERATIONAL_ERRORS as exc:
        raise _fail(exc)
    kwargs = {}
    if config.tls_cert:
        kwargs.update(ssl_certfile=config.tls_cert, ssl_keyfile=config.tls_key)
    uvicorn.run(app, host=config.host, port=config.port, **kwargs)


@cli.command("gen-test-ca")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--user", "users", multiple=True, help="Also issue an identity for this common name.")
@click.option("--user-vo", default="testvo", show_default=True, help="VO the issued users belong to.")
def gen_test_ca(seed, out_dir, users, user_vo):
    """Write a reproducible root CA, trust-anchor directory, and optional users."""
    out = Path(out_dir)
    ca = TestCa.generate(seed)
    cert_path, key_path = ca.write(out)
    trust = out / "trust"
    trust.mkdir(parents=True, exist_ok=True)
    (trust / "ca_cert.pem").write_text(ca.certificate.pem())
    click.echo(f"ca: {ca.subject.render()}")
    click.echo(f"  cert {cert_path}")
    click.echo(f"  key  {key_path}")
    click.echo(f"  trust-anchor dir {trust}")
    if users:
        registry_lines = []
        for name in users:
            identity = ca.issue_user(f"/C=IT/O=GridGate Users/CN={name}")
            slug = "".join(c if c.isalnum() else "_" for c in name.lower())
            user_cert, user_key = write_identity(identity, out, slug)
            registry_lines.append(f"{user_vo}\t{identity.subject.render()}\n")
            click.echo(f"user: {identity.subject.render()}")
            click.echo(f"  cert {user_cert}")
            click.echo(f"  key  {user_key}")
        registry_path = out / "vo-registry.tsv"
        registry_path.write_text("".join(registry_lines), encoding="utf-8")
        click.echo(f"vo registry {registry_path} (vo {user_vo})")


# -- client side


def _relogin(config: ClientConfig, client: GatewayClient, p12_password: str | None) -> None:
    identity = load_identity(config, p12_password)
    expiry = client.delegate(identity, config.proxy_lifetime)
    save_token(config, client.token, expiry)


def _with_session(config: ClientConfig, operation, p12_password: str | None = None):
    """Run one API call, delegating first (or again, after a dead session)."""
    token = load_token(config)
    with GatewayClient(config.gateway_url, token=token) as client:
        if client.token is None:
            _relogin(config, client, p12_password)
        try:
            return operation(client)
        except ApiFailure as failure:
            if failure.status_code != 401:
                raise
            _relogin(config, client, p12_password)
            return operation(client)


@cli.command()
@click.option("--lifetime-hours", type=float, default=None, help="Proxy validity window.")
@click.option("--p12-password", default=None)
@click.pass_obj
def delegate(config: ClientConfig, lifetime_hours, p12_password):
    """Sign a short-lived proxy over to the gateway and keep the session."""
    try:
        identity = load_identity(config, p12_password)
        lifetime = config.proxy_lifetime
        if lifetime_hours is not None:
            lifetime = dt.timedelta(hours=lifetime_hours)
        with GatewayClient(config.gateway_url) as client:
            expiry = client.delegate(identity, lifetime)
            save_token(config, client.token, expiry)
    except _OPERATIONAL_ERRORS as exc:
        raise _fail(exc)
    click.echo(expiry.isoformat())


def _pack_directory(directory: str) -> bytes:
    root = Path(directory)
    files = []
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        files.append((path.relative_to(root).as_posix(), path.read_bytes()))
    return compress_sandbox(files)


@cli.command()
@click.argument("jdl_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--sandbox", "sandbox_dir", type=click.Path(exists=True, file_okay=False),
              help="Directory packed as the input sandbox.")
@click.option("--vo", default=None, help="Virtual organisation to submit under.")
@click.option("--myproxy-username", default=None, help="Register for proxy renewal.")
@click.option("--myproxy-password", default=None)
@click.option("--p12-password", default=None)
@click.pass_obj
def submit(config: ClientConfig, jdl_path, sandbox_dir, vo, myproxy_username,
           myproxy_password, p12_password):
    """Submit a job description; prints one job id per line."""
    vo_name = vo or config.default_vo
    if not vo_name:
        raise click.UsageError("no VO given; pass --vo or set one in the config")
    try:
        jdl_text = Path(jdl_path).read_text("utf-8")
        archive = _pack_directory(sandbox_dir) if sandbox_dir else None
        result = _with_session(
            config,
            lambda client: client.submit(
                jdl_text,
                vo_name,
                sandbox=archive,
                myproxy_username=myproxy_username,
                myproxy_password=myproxy_password,
            ),
            p12_password,
        )
    except _OPERATIONAL_ERRORS as exc:
        raise _fail(exc)
    for warning in result.warnings:
        click.echo(f"warning: {warning}", err=True)
    for job_id in result.job_ids:
        click.echo(job_id)


def _age(submitted_at: str, now: dt.datetime) -> str:
    seconds = int((now - parse_timestamp(submitted_at)).total_seconds())
    seconds = max(seconds, 0)
    if seconds < 60:
        return f"{seconds}s"
    if seconds < 3600:
        return f"{seconds // 60}m{seconds % 60:02d}s"
    return f"{seconds // 3600}h{(seconds % 3600) // 60:02d}m"


@cli.command()
@click.argument("job_id", required=False)
@click.option("--p12-password", default=None)
@click.pass_obj
def status(config: ClientConfig, job_id, p12_password):
    """Show job status: one line per job (id, status, age)."""
    try:
        if job_id:
            rows = [_with_session(config, lambda c: c.job(job_id), p12_password)]
        else:
            rows = _with_session(config, lambda c: c.jobs(), p12_password)
    except _OPERATIONAL_ERRORS as exc:
        raise _fail(exc)
    now = dt.datetime.now(dt.timezone.utc)
    for row in rows:
        name = row.get("id")
        click.echo(f"{name}  {row['status']:<11}  {_age(row['submitted_at'], now)}")


@cli.command()
@click.argument("job_id")
@click.option("--dest", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--p12-password", default=None)
@click.pass_obj
def output(config: ClientConfig, job_id, dest, p12_password):
    """Download a finished job's output sandbox into a directory."""
    try:
        archive = _with_session(config, lambda c: c.output(job_id), p12_password)
        files = decompress_sandbox(archive)
        root = Path(dest)
        for name, content in files:
            target = root / name
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(content)
    except _OPERATIONAL_ERRORS as exc:
        raise _fail(exc)
    click.echo(f"{len(files)} file(s) written to {root}")


@cli.command()
@click.argument("job_id")
@click.option("--p12-password", default=None)
@click.pass_obj
def cancel(config: ClientConfig, job_id, p12_password):
    """Terminate a job and clear its record."""
    try:
        body = _with_session(config, lambda c: c.cancel(job_id), p12_password)
    except _OPERATIONAL_ERRORS as exc:
        raise _fail(exc)
    click.echo(f"{body['id']}  {body['status']}")


@cli.command()
@click.argument("job_id")
@click.option("--p12-password", default=None)
@click.pass_obj
def renew(config: ClientConfig, job_id, p12_password):
    """Extend a running job's proxy from its registered renewal credential."""
    try:
        expiry = _with_session(config, lambda c: c.renew(job_id), p12_password)
    except _OPERATIONAL_ERRORS as exc:
        raise _fail(exc)
    click.echo(expiry)


@cli.command()
@click.option("--p12", "p12_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--password", default="")
@click.option("--out-cert", type=click.Path(dir_okay=False), default="usercert.pem", show_default=True)
@click.option("--out-key", type=click.Path(dir_okay=False), default="userkey.pem", show_default=True)
def convert(p12_path, password, out_cert, out_key):
    """Unpack a PKCS#12 archive to PEM files, locally; the key file is owner-only."""
    try:
        cert_pem, key_pem = convert_p12_to_pem(Path(p12_path).read_bytes(), password)
        Path(out_cert).write_text(cert_pem)
        fd = os.open(out_key, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        try:
            os.write(fd, key_pem.encode("ascii"))
        finally:
            os.close(fd)
    except _OPERATIONAL_ERRORS as exc:
        raise _fail(exc)
    click.echo(f"wrote {out_cert} and {out_key}")


@cli.command()
@click.option("--mode", type=click.Choice([LOCAL_MODE, EXTERNAL_MODE, "both"]),
              default="both", show_default=True)
@click.option("--delay-ms", type=float, default=0.0, show_default=True,
              help="Injected per-message delay of the external credential store.")
@click.option("--repetitions", type=int, default=5, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Write per-repetition rows as CSV.")
def bench(mode, delay_ms, repetitions, out_path):
    """Time the job cycle with on-gateway delegation vs an external store."""
    modes = [LOCAL_MODE, EXTERNAL_MODE] if mode == "both" else [mode]
    rows = []
    try:
        with BenchGateway() as gateway:
            for one in modes:
                report = run_bench(
                    one, delay_ms=delay_ms, repetitions=repetitions, gateway=gateway
                )
                rows.extend(report.rows)
                click.echo(
                    f"{one}: messages={report.message_count} "
                    f"mean total={report.wall_time_s:.3f}s "
                    f"(delegate {report.delegate_s:.3f}s, submit {report.submit_s:.3f}s, "
                    f"monitor {report.monitor_s:.3f}s, output {report.output_s:.3f}s)"
                )
        if out_path:
            write_csv(rows, out_path)
            click.echo(f"wrote {out_path}")
    except (RuntimeError, *_OPERATIONAL_ERRORS) as exc:
        raise _fail(exc)


if __name__ == "__main__":
    main()
