"""Independent checkers the test-suite uses to cross-validate the implementation."""

from __future__ import annotations

import datetime as dt
import subprocess
import tempfile
from pathlib import Path

from gridgate.certs import Certificate, ProxyBundle


def openssl_verify_bundle(
    bundle: ProxyBundle,
    anchors: list[Certificate],
    now: dt.datetime | None = None,
) -> tuple[bool, str]:
    """Validate a proxy bundle with openssl's proxy-aware path validation."""
    with tempfile.TemporaryDirectory() as tmp:
        tmp_path = Path(tmp)
        ca_file = tmp_path / "anchors.pem"
        ca_file.write_text("".join(a.pem() for a in anchors))
        untrusted = tmp_path / "chain.pem"
        untrusted.write_text("".join(c.pem() for c in bundle.issuer_chain))
        proxy = tmp_path / "proxy.pem"
        proxy.write_text(bundle.proxy_cert.pem())
        cmd = [
            "openssl",
            "verify",
            "-allow_proxy_certs",
            "-CAfile",
            str(ca_file),
            "-untrusted",
            str(untrusted),
        ]
        if now is not None:
            cmd += ["-attime", str(int(now.timestamp()))]
        cmd.append(str(proxy))
        result = subprocess.run(cmd, capture_output=True, text=True)
        return result.returncode == 0, result.stdout + result.stderr
