"""Timing harness: on-gateway delegation versus an external credential store.

Both modes drive the same submit, monitor, and output cycle against a private
in-process gateway; they differ only in how the acting credential reaches it.
Local mode hands over a freshly signed proxy (four protocol messages, no
password on the wire). External mode deposits a credential in the store and
buys it back by password at login time (six messages, password in three of
them), with the store's per-message delay standing in for the extra network
hop.
"""

from __future__ import annotations

import csv
import datetime as dt
import statistics
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import uvicorn

from gridgate.backend import Timetable, VoRegistry
from gridgate.certs import TestCa, create_local_proxy
from gridgate.client.api import GatewayClient
from gridgate.gateway import GatewayConfig, GatewayState, create_app
from gridgate.transcript import Transcript

LOCAL_MODE = "local-delegation"
EXTERNAL_MODE = "external-myproxy"
MODES = (LOCAL_MODE, EXTERNAL_MODE)

CSV_COLUMNS = (
    "mode",
    "repetition",
    "delay_ms",
    "delegate_s",
    "submit_s",
    "monitor_s",
    "output_s",
    "total_s",
    "frames",
)

_BENCH_VO = "bench"
_BENCH_DN = "/C=IT/O=GridGate Bench/CN=Bench User"
_USERNAME = "bench"
BENCH_PASSWORD = "bench-credential-passphrase"
_JDL = 'Executable = "run.sh";\n'
_PROXY_LIFETIME = dt.timedelta(hours=2)
# keep the simulated run short so repetitions measure the credential paths,
# not the job scheduler
_FAST_TIMETABLE = '[[null, "READY", 0.01], [null, "RUNNING", 0.02], [null, "DONE_OK", 0.04]]'


class BenchConfigError(ValueError):
    """The benchmark was asked for something it cannot measure."""


@dataclass(frozen=True)
class BenchRow:
    """One full cycle, timed phase by phase."""

    mode: str
    repetition: int
    delay_ms: float
    delegate_s: float
    submit_s: float
    monitor_s: float
    output_s: float
    total_s: float
    frames: int


@dataclass
class BenchReport:
    mode: str
    injected_delay_ms: float
    repetitions: int
    message_count: int
    wall_time_s: float
    delegate_s: float
    submit_s: float
    monitor_s: float
    output_s: float
    rows: list[BenchRow]
    transcripts: list[Transcript] = field(default_factory=list, repr=False)


class BenchGateway:
    """A private gateway on a loopback port with one user and a fast schedule."""

    def __init__(self, seed: int = 1302) -> None:
        self.ca = TestCa.generate(seed)
        self.identity = self.ca.issue_user(_BENCH_DN)
        registry = VoRegistry.from_pairs([(_BENCH_VO, self.identity.subject)])
        self.state = GatewayState(
            trust_anchors=[self.ca.certificate],
            vo_registry=registry,
            mode="simulate",
            timetable=Timetable.from_json(_FAST_TIMETABLE),
        )
        self.app = create_app(GatewayConfig(myproxy_endpoints=True), state=self.state)
        self.base_url = ""
        self._server: uvicorn.Server | None = None
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        config = uvicorn.Config(
            self.app,
            host="127.0.0.1",
            port=0,
            log_level="warning",
            access_log=False,
            lifespan="off",
        )
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(
            target=self._server.run, name="bench-gateway", daemon=True
        )
        self._thread.start()
        deadline = time.monotonic() + 15.0
        while not self._server.started:
            if not self._thread.is_alive():
                raise RuntimeError("bench gateway exited during startup")
            if time.monotonic() > deadline:
                raise RuntimeError("bench gateway did not come up in time")
            time.sleep(0.01)
        sockets = self._server.servers[0].sockets
        self.base_url = "http://127.0.0.1:%d" % sockets[0].getsockname()[1]

    def stop(self) -> None:
        if self._server is not None:
            self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=15.0)
        self.state.shutdown()

    def __enter__(self) -> "BenchGateway":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def _wait_done(client: GatewayClient, job_id: str, timeout: float = 60.0) -> None:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        status = client.job(job_id)["status"]
        if status == "DONE_OK":
            return
        if status in ("DONE_FAILED", "ABORTED", "CANCELLED"):
            raise RuntimeError(f"bench job ended {status}")
        time.sleep(0.005)
    raise RuntimeError("bench job never finished")


def _one_cycle(
    gateway: BenchGateway, mode: str, repetition: int, delay_ms: float
) -> tuple[BenchRow, Transcript]:
    transcript = Transcript(f"{mode}-{repetition}")
    # in external mode the store and retrieve exchanges land here too
    gateway.state.myproxy.transcript = transcript
    with GatewayClient(gateway.base_url) as client:
        t0 = time.perf_counter()
        if mode == LOCAL_MODE:
            client.delegate(gateway.identity, _PROXY_LIFETIME, transcript=transcript)
        else:
            proxy = create_local_proxy(gateway.identity, _PROXY_LIFETIME)
            client.myproxy_store(_USERNAME, BENCH_PASSWORD, proxy.to_pem())
            client.myproxy_login(_USERNAME, BENCH_PASSWORD, transcript=transcript)
        t1 = time.perf_counter()
        result = client.submit(_JDL, _BENCH_VO)
        t2 = time.perf_counter()
        _wait_done(client, result.job_ids[0])
        t3 = time.perf_counter()
        client.output(result.job_ids[0])
        t4 = time.perf_counter()
    row = BenchRow(
        mode=mode,
        repetition=repetition,
        delay_ms=delay_ms,
        delegate_s=t1 - t0,
        submit_s=t2 - t1,
        monitor_s=t3 - t2,
        output_s=t4 - t3,
        total_s=t4 - t0,
        frames=len(transcript.frames),
    )
    return row, transcript


def run_bench(
    mode: str,
    *,
    delay_ms: float = 0.0,
    repetitions: int = 5,
    gateway: BenchGateway | None = None,
    out_path: str | Path | None = None,
    keep_transcripts: bool = False,
) -> BenchReport:
    """Sequential repetitions of the full cycle in one mode."""
    if mode not in MODES:
        raise BenchConfigError(f"mode must be one of {', '.join(MODES)}; got {mode!r}")
    if repetitions < 1:
        raise BenchConfigError("repetitions must be at least 1")
    if delay_ms < 0:
        raise BenchConfigError("delay_ms must be non-negative")

    owned = gateway is None
    if owned:
        gateway = BenchGateway()
        gateway.start()
    rows: list[BenchRow] = []
    transcripts: list[Transcript] = []
    try:
        gateway.state.myproxy.delay = delay_ms / 1000.0
        for repetition in range(1, repetitions + 1):
            row, transcript = _one_cycle(gateway, mode, repetition, delay_ms)
            rows.append(row)
            if keep_transcripts:
                transcripts.append(transcript)
    finally:
        if owned:
            gateway.stop()

    counts = {row.frames for row in rows}
    if len(counts) != 1:
        raise RuntimeError(f"frame count drifted between repetitions: {sorted(counts)}")
    report = BenchReport(
        mode=mode,
        injected_delay_ms=delay_ms,
        repetitions=repetitions,
        message_count=counts.pop(),
        wall_time_s=statistics.fmean(row.total_s for row in rows),
        delegate_s=statistics.fmean(row.delegate_s for row in rows),
        submit_s=statistics.fmean(row.submit_s for row in rows),
        monitor_s=statistics.fmean(row.monitor_s for row in rows),
        output_s=statistics.fmean(row.output_s for row in rows),
        rows=rows,
        transcripts=transcripts,
    )
    if out_path is not None:
        write_csv(rows, out_path)
    return report


def write_csv(rows: list[BenchRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.mode,
                    row.repetition,
                    f"{row.delay_ms:g}",
                    f"{row.delegate_s:.6f}",
                    f"{row.submit_s:.6f}",
                    f"{row.monitor_s:.6f}",
                    f"{row.output_s:.6f}",
                    f"{row.total_s:.6f}",
                    row.frames,
                ]
            )
