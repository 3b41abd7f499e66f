"""Job lifecycle management: submission, status, output, cancel, clear, renew.

Two execution modes share one state machine. "run" mode actually executes the
job's command line in a scratch directory on a worker pool; "simulate" mode
advances statuses along a scripted timetable so tests and benchmarks are
deterministic. Either way, every status change is appended to the job's
history and checked against the legal-transition matrix.
"""

from __future__ import annotations

import datetime as dt
import enum
import glob
import json
import os
import secrets
import signal
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from threading import RLock
from typing import Callable, Iterable, Sequence

from gridgate.backend.errors import (
    AssertionMismatchError,
    ClearedError,
    InvalidDescriptorError,
    NoRenewalCredentialError,
    NotFinishedError,
    NotTerminalError,
    PathTraversalError,
    ProxyExpiredError,
    RenewalDeniedError,
    UnknownJobError,
)
from gridgate.backend.myproxy import MyProxySimulator
from gridgate.backend.sandbox import check_relative_path, compress_sandbox, decompress_sandbox
from gridgate.backend.voms import AttributeAssertion
from gridgate.certs import DistinguishedName, ProxyBundle, remaining_lifetime
from gridgate.jdl import (
    JdlList,
    JdlStr,
    JdlValue,
    JobDescriptor,
    expand_parametric,
    validate_jdl,
)


class JobStatus(str, enum.Enum):
    SUBMITTED = "SUBMITTED"
    READY = "READY"
    RUNNING = "RUNNING"
    DONE_OK = "DONE_OK"
    DONE_FAILED = "DONE_FAILED"
    ABORTED = "ABORTED"
    CANCELLED = "CANCELLED"
    CLEARED = "CLEARED"


TERMINAL_STATUSES = frozenset(
    {JobStatus.DONE_OK, JobStatus.DONE_FAILED, JobStatus.ABORTED, JobStatus.CANCELLED}
)

LEGAL_TRANSITIONS: dict[JobStatus, frozenset[JobStatus]] = {
    JobStatus.SUBMITTED: frozenset(
        {JobStatus.READY, JobStatus.ABORTED, JobStatus.CANCELLED}
    ),
    JobStatus.READY: frozenset(
        {JobStatus.RUNNING, JobStatus.ABORTED, JobStatus.CANCELLED}
    ),
    JobStatus.RUNNING: frozenset(
        {
            JobStatus.DONE_OK,
            JobStatus.DONE_FAILED,
            JobStatus.ABORTED,
            JobStatus.CANCELLED,
        }
    ),
    JobStatus.DONE_OK: frozenset({JobStatus.CLEARED}),
    JobStatus.DONE_FAILED: frozenset({JobStatus.CLEARED}),
    JobStatus.ABORTED: frozenset({JobStatus.CLEARED}),
    JobStatus.CANCELLED: frozenset({JobStatus.CLEARED}),
    JobStatus.CLEARED: frozenset(),
}


def is_legal_transition(before: JobStatus, after: JobStatus) -> bool:
    return after in LEGAL_TRANSITIONS[before]


HistoryEntry = tuple[JobStatus, dt.datetime]


def history_violations(history: Sequence[HistoryEntry]) -> list[str]:
    """Every way a status history can be unsound, as human-readable findings."""
    problems: list[str] = []
    if not history:
        return ["history is empty"]
    if history[0][0] is not JobStatus.SUBMITTED:
        problems.append(f"history starts at {history[0][0].value}, not SUBMITTED")
    for (before, at_before), (after, at_after) in zip(history, history[1:]):
        if not is_legal_transition(before, after):
            problems.append(f"illegal transition {before.value} -> {after.value}")
        if at_after < at_before:
            problems.append(
                f"timestamps go backwards at {before.value} -> {after.value}"
            )
    return problems


def validate_history(history: Sequence[HistoryEntry]) -> None:
    problems = history_violations(history)
    if problems:
        raise ValueError("; ".join(problems))


def _utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc)


RENEWAL_QUANTUM = dt.timedelta(hours=12)

_DEFAULT_STDOUT = "std.out"
_DEFAULT_STDERR = "std.err"


@dataclass(frozen=True)
class TimetableEntry:
    """One scripted status change; ordinal None applies to every job."""

    ordinal: int | None
    status: JobStatus
    offset: float

    def __post_init__(self) -> None:
        if self.offset < 0:
            raise ValueError("offset must be non-negative")


@dataclass(frozen=True)
class Timetable:
    """Scripted schedule for simulate mode, keyed by submission ordinal."""

    entries: tuple[TimetableEntry, ...]

    @classmethod
    def default(cls) -> "Timetable":
        return cls(
            entries=(
                TimetableEntry(None, JobStatus.READY, 0.05),
                TimetableEntry(None, JobStatus.RUNNING, 0.1),
                TimetableEntry(None, JobStatus.DONE_OK, 0.25),
            )
        )

    @classmethod
    def from_json(cls, text: str | bytes) -> "Timetable":
        """Parse a JSON list of [ordinal-or-null, status-name, offset-seconds]."""
        try:
            rows = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"timetable is not valid JSON: {exc}") from exc
        if not isinstance(rows, list):
            raise ValueError("timetable must be a JSON list")
        entries = []
        for row in rows:
            if not isinstance(row, list) or len(row) != 3:
                raise ValueError(f"timetable row must have 3 items, got {row!r}")
            ordinal, status_name, offset = row
            if ordinal is not None and not isinstance(ordinal, int):
                raise ValueError(f"ordinal must be an integer or null, got {ordinal!r}")
            try:
                status = JobStatus(status_name)
            except ValueError:
                raise ValueError(f"unknown status {status_name!r}") from None
            if not isinstance(offset, (int, float)) or isinstance(offset, bool):
                raise ValueError(f"offset must be a number, got {offset!r}")
            entries.append(TimetableEntry(ordinal, status, float(offset)))
        return cls(entries=tuple(entries))

    def schedule_for(self, ordinal: int) -> list[TimetableEntry]:
        matched = [
            e for e in self.entries if e.ordinal is None or e.ordinal == ordinal
        ]
        matched.sort(key=lambda e: e.offset)
        return matched


@dataclass
class JobRecord:
    """Everything the manager knows about one job.

    status always equals the last history entry; output_archive is set
    exactly while status is DONE_OK or DONE_FAILED.
    """

    job_id: str
    owner_dn: DistinguishedName
    descriptor: JobDescriptor
    status: JobStatus
    status_history: list[HistoryEntry]
    input_archive: bytes | None = field(repr=False, default=None)
    output_archive: bytes | None = field(repr=False, default=None)
    exit_code: int | None = None
    collection_id: str | None = None
    warnings: tuple[str, ...] = ()
    proxy_expiry: dt.datetime | None = None
    ordinal: int = 0


@dataclass(frozen=True)
class JobSnapshot:
    """Read-only view handed out by the manager."""

    job_id: str
    owner_dn: DistinguishedName
    status: JobStatus
    status_history: tuple[HistoryEntry, ...]
    exit_code: int | None
    collection_id: str | None
    warnings: tuple[str, ...]
    proxy_expiry: dt.datetime | None


def _new_job_id() -> str:
    return "gg-" + secrets.token_hex(16)


def _string_items(value: JdlValue | None) -> list[str]:
    if value is None:
        return []
    if isinstance(value, JdlStr):
        return [value.value]
    if isinstance(value, JdlList):
        return [item.value for item in value.items if isinstance(item, JdlStr)]
    return []


def _safe_name(candidate: str | None, fallback: str) -> str:
    if not candidate:
        return fallback
    try:
        check_relative_path(candidate)
    except PathTraversalError:
        return fallback
    return candidate


def _output_names(descriptor: JobDescriptor) -> tuple[str, str, list[str]]:
    stdout_name = _safe_name(descriptor.string_value("StdOutput"), _DEFAULT_STDOUT)
    stderr_name = _safe_name(descriptor.string_value("StdError"), _DEFAULT_STDERR)
    patterns = _string_items(descriptor.get("OutputSandbox"))
    return stdout_name, stderr_name, patterns


class WorkloadManager:
    """The job table plus the machinery that moves jobs through it."""

    def __init__(
        self,
        *,
        mode: str = "simulate",
        clock: Callable[[], dt.datetime] = _utcnow,
        timetable: Timetable | None = None,
        max_workers: int = 4,
        run_wall_limit: float = 60.0,
        scratch_root: str | os.PathLike | None = None,
        myproxy: MyProxySimulator | None = None,
    ) -> None:
        if mode not in ("simulate", "run"):
            raise ValueError(f"mode must be 'simulate' or 'run', got {mode!r}")
        self.mode = mode
        self._clock = clock
        self._timetable = timetable or Timetable.default()
        self._run_wall_limit = run_wall_limit
        self._myproxy = myproxy
        self._records: dict[str, JobRecord] = {}
        self._schedules: dict[str, list[tuple[JobStatus, dt.datetime]]] = {}
        self._renewal: dict[str, tuple[str, str]] = {}
        self._processes: dict[str, subprocess.Popen] = {}
        self._lock = RLock()
        self._next_ordinal = 0
        self._executor: ThreadPoolExecutor | None = None
        if mode == "run":
            self._executor = ThreadPoolExecutor(max_workers=max_workers)
            self._scratch = Path(scratch_root or tempfile.mkdtemp(prefix="gridgate-wms-"))
            self._scratch.mkdir(parents=True, exist_ok=True)
        else:
            self._scratch = None

    # -- submission

    def submit(
        self,
        descriptor: JobDescriptor,
        assertion: AttributeAssertion,
        bundle: ProxyBundle,
        input_archive: bytes = b"",
        *,
        renewal: tuple[str, str] | None = None,
        now: dt.datetime | None = None,
    ) -> list[str]:
        """Validate, expand, and register jobs; returns the new job ids."""
        now = now or self._clock()
        issues = validate_jdl(descriptor)
        errors = [i for i in issues if i.severity == "error"]
        if errors:
            raise InvalidDescriptorError(
                "; ".join(f"{i.code}: {i.message}" for i in errors), issues=tuple(issues)
            )
        if assertion.is_expired(now):
            raise AssertionMismatchError("authorization assertion has expired")
        if assertion.holder_dn != bundle.end_user_dn:
            raise AssertionMismatchError(
                f"assertion holder {assertion.holder_dn} does not match "
                f"proxy end user {bundle.end_user_dn}"
            )
        if remaining_lifetime(bundle, now) <= dt.timedelta(0):
            raise ProxyExpiredError("proxy has no remaining lifetime")
        if renewal is not None and self._myproxy is None:
            raise ValueError("renewal requested but no credential store is configured")
        if not input_archive:
            input_archive = compress_sandbox([])
        decompress_sandbox(input_archive)  # reject hostile archives up front

        warnings = tuple(
            f"{name} is accepted but ignored by the single simulated endpoint"
            for name in ("Requirements", "Rank")
            if name in descriptor
        )
        expansions = expand_parametric(descriptor)
        collection_id = _new_job_id() if len(expansions) > 1 else None
        proxy_expiry = now + remaining_lifetime(bundle, now)

        ids = []
        with self._lock:
            for expanded in expansions:
                job_id = _new_job_id()
                record = JobRecord(
                    job_id=job_id,
                    owner_dn=bundle.end_user_dn,
                    descriptor=expanded,
                    status=JobStatus.SUBMITTED,
                    status_history=[(JobStatus.SUBMITTED, now)],
                    input_archive=input_archive,
                    collection_id=collection_id,
                    warnings=warnings,
                    proxy_expiry=proxy_expiry,
                    ordinal=self._next_ordinal,
                )
                self._records[job_id] = record
                if renewal is not None:
                    self._renewal[job_id] = renewal
                if self.mode == "simulate":
                    self._schedules[job_id] = [
                        (entry.status, now + dt.timedelta(seconds=entry.offset))
                        for entry in self._timetable.schedule_for(record.ordinal)
                    ]
                self._next_ordinal += 1
                ids.append(job_id)
        if self.mode == "run":
            for job_id in ids:
                assert self._executor is not None
                self._executor.submit(self._execute, job_id)
        return ids

    # -- state machine plumbing

    def _get(self, job_id: str) -> JobRecord:
        record = self._records.get(job_id)
        if record is None:
            raise UnknownJobError(f"no job {job_id!r}")
        return record

    def _transition(self, record: JobRecord, status: JobStatus, now: dt.datetime) -> None:
        if not is_legal_transition(record.status, status):
            raise ValueError(
                f"illegal transition {record.status.value} -> {status.value}"
            )
        record.status = status
        record.status_history.append((status, now))

    def _advance(self, record: JobRecord, now: dt.datetime) -> None:
        """Simulate mode: apply every due timetable entry that is still legal."""
        schedule = self._schedules.get(record.job_id, [])
        while schedule and schedule[0][1] <= now:
            status, when = schedule[0]
            if not is_legal_transition(record.status, status):
                # the job left the scripted path (cancelled, aborted); stop following it
                self._schedules[record.job_id] = []
                return
            schedule.pop(0)
            self._transition(record, status, when)
            if status in (JobStatus.DONE_OK, JobStatus.DONE_FAILED):
                record.exit_code = 0 if status is JobStatus.DONE_OK else 1
                record.output_archive = self._synthesize_output(record)

    def _synthesize_output(self, record: JobRecord) -> bytes:
        """Simulate mode has no real process, so outputs are empty placeholders."""
        stdout_name, stderr_name, patterns = _output_names(record.descriptor)
        names: list[str] = []
        for name in [stdout_name, stderr_name] + patterns:
            try:
                check_relative_path(name)
            except PathTraversalError:
                continue
            if name not in names:
                names.append(name)
        return compress_sandbox([(name, b"") for name in names])

    def _refresh(self, job_id: str, now: dt.datetime) -> JobRecord:
        record = self._get(job_id)
        if self.mode == "simulate":
            self._advance(record, now)
        return record

    # -- queries

    def status(
        self, job_id: str, now: dt.datetime | None = None
    ) -> tuple[JobStatus, tuple[HistoryEntry, ...]]:
        now = now or self._clock()
        with self._lock:
            record = self._refresh(job_id, now)
            return record.status, tuple(record.status_history)

    def snapshot(self, job_id: str, now: dt.datetime | None = None) -> JobSnapshot:
        now = now or self._clock()
        with self._lock:
            record = self._refresh(job_id, now)
            return JobSnapshot(
                job_id=record.job_id,
                owner_dn=record.owner_dn,
                status=record.status,
                status_history=tuple(record.status_history),
                exit_code=record.exit_code,
                collection_id=record.collection_id,
                warnings=record.warnings,
                proxy_expiry=record.proxy_expiry,
            )

    def job_ids(self) -> tuple[str, ...]:
        with self._lock:
            return tuple(self._records)

    def owner_of(self, job_id: str) -> DistinguishedName:
        with self._lock:
            return self._get(job_id).owner_dn

    def output(self, job_id: str, now: dt.datetime | None = None) -> bytes:
        now = now or self._clock()
        with self._lock:
            record = self._refresh(job_id, now)
            if record.status is JobStatus.CLEARED:
                raise ClearedError(f"job {job_id!r} has been cleared")
            if record.status not in (JobStatus.DONE_OK, JobStatus.DONE_FAILED):
                raise NotFinishedError(
                    f"job {job_id!r} is {record.status.value}, not finished"
                )
            assert record.output_archive is not None
            return record.output_archive

    # -- lifecycle commands

    def cancel(self, job_id: str, now: dt.datetime | None = None) -> JobStatus:
        now = now or self._clock()
        with self._lock:
            record = self._refresh(job_id, now)
            if record.status in TERMINAL_STATUSES or record.status is JobStatus.CLEARED:
                return record.status
            self._transition(record, JobStatus.CANCELLED, now)
            self._schedules.pop(job_id, None)
            process = self._processes.pop(job_id, None)
        if process is not None and process.poll() is None:
            _kill_process_group(process)
        return JobStatus.CANCELLED

    def clear(self, job_id: str, now: dt.datetime | None = None) -> JobStatus:
        now = now or self._clock()
        with self._lock:
            record = self._refresh(job_id, now)
            if record.status is JobStatus.CLEARED:
                return JobStatus.CLEARED
            if record.status not in TERMINAL_STATUSES:
                raise NotTerminalError(
                    f"job {job_id!r} is {record.status.value}, not terminal"
                )
            self._transition(record, JobStatus.CLEARED, now)
            record.input_archive = None
            record.output_archive = None
            return JobStatus.CLEARED

    def renew(self, job_id: str, now: dt.datetime | None = None) -> dt.datetime:
        """Refresh the job's working proxy from the credential store."""
        now = now or self._clock()
        with self._lock:
            record = self._refresh(job_id, now)
            if record.status in TERMINAL_STATUSES or record.status is JobStatus.CLEARED:
                raise RenewalDeniedError(f"job {job_id!r} is already {record.status.value}")
            credentials = self._renewal.get(job_id)
        if credentials is None or self._myproxy is None:
            raise NoRenewalCredentialError(
                f"no renewal credential was registered for job {job_id!r}"
            )
        username, password = credentials
        retrieved = self._myproxy.retrieve(username, password, now=now)
        stored = self._myproxy.stored(username)
        candidate = min(
            now + RENEWAL_QUANTUM,
            now + remaining_lifetime(retrieved, now),
            stored.renewal_deadline,
        )
        with self._lock:
            record = self._get(job_id)
            if record.proxy_expiry is not None and candidate <= record.proxy_expiry:
                raise RenewalDeniedError(
                    "renewal would not extend the working proxy "
                    f"({candidate.isoformat()} <= {record.proxy_expiry.isoformat()})"
                )
            record.proxy_expiry = candidate
        return candidate

    def shutdown(self) -> None:
        with self._lock:
            processes = list(self._processes.values())
            self._processes.clear()
        for process in processes:
            if process.poll() is None:
                _kill_process_group(process)
        if self._executor is not None:
            self._executor.shutdown(wait=True, cancel_futures=True)

    # -- run mode execution

    def _execute(self, job_id: str) -> None:
        try:
            self._execute_inner(job_id)
        except Exception:
            now = self._clock()
            with self._lock:
                record = self._records.get(job_id)
                if record is not None and is_legal_transition(
                    record.status, JobStatus.ABORTED
                ):
                    self._transition(record, JobStatus.ABORTED, now)

    def _execute_inner(self, job_id: str) -> None:
        with self._lock:
            record = self._get(job_id)
            if record.status is not JobStatus.SUBMITTED:
                return
            self._transition(record, JobStatus.READY, self._clock())
            descriptor = record.descriptor
            input_archive = record.input_archive or b""

        assert self._scratch is not None
        workdir = self._scratch / job_id
        workdir.mkdir(parents=True, exist_ok=True)
        for rel_path, content in decompress_sandbox(input_archive):
            target = workdir / rel_path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(content)

        executable = descriptor.string_value("Executable") or ""
        arguments = descriptor.string_value("Arguments") or ""
        local = workdir / executable
        if "/" not in executable and local.is_file():
            local.chmod(0o755)
            invocation = f"./{executable}"
        else:
            invocation = executable
        command = f"{invocation} {arguments}".strip()
        stdout_name, stderr_name, patterns = _output_names(descriptor)

        with self._lock:
            record = self._get(job_id)
            if record.status is not JobStatus.READY:
                return
            self._transition(record, JobStatus.RUNNING, self._clock())
            (workdir / stdout_name).parent.mkdir(parents=True, exist_ok=True)
            (workdir / stderr_name).parent.mkdir(parents=True, exist_ok=True)
            with open(workdir / stdout_name, "wb") as out, open(
                workdir / stderr_name, "wb"
            ) as err:
                process = subprocess.Popen(
                    ["sh", "-c", command],
                    cwd=workdir,
                    stdout=out,
                    stderr=err,
                    stdin=subprocess.DEVNULL,
                    start_new_session=True,
                )
            self._processes[job_id] = process

        timed_out = False
        try:
            exit_code = process.wait(timeout=self._run_wall_limit)
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill_process_group(process)
            process.wait()
            exit_code = None

        archive = self._collect_output(workdir, stdout_name, stderr_name, patterns)
        now = self._clock()
        with self._lock:
            record = self._get(job_id)
            self._processes.pop(job_id, None)
            if record.status is not JobStatus.RUNNING:
                return  # cancelled while running
            if timed_out:
                self._transition(record, JobStatus.ABORTED, now)
                return
            assert exit_code is not None
            final = JobStatus.DONE_OK if exit_code == 0 else JobStatus.DONE_FAILED
            self._transition(record, final, now)
            record.exit_code = exit_code
            record.output_archive = archive

    def _collect_output(
        self, workdir: Path, stdout_name: str, stderr_name: str, patterns: Iterable[str]
    ) -> bytes:
        names: list[str] = [stdout_name, stderr_name]
        for pattern in patterns:
            try:
                check_relative_path(pattern)
            except PathTraversalError:
                continue
            for match in glob.glob(pattern, root_dir=workdir):
                if (workdir / match).is_file() and match not in names:
                    names.append(match)
        files = []
        for name in names:
            path = workdir / name
            if path.is_file():
                files.append((name, path.read_bytes()))
        files.sort(key=lambda item: item[0])
        return compress_sandbox(files)


def _kill_process_group(process: subprocess.Popen) -> None:
    try:
        os.killpg(process.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        process.kill()
    except OSError:
        process.kill()
