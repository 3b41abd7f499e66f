"""Append-only JSONL job journal so history survives gateway restarts.

The journal records job identities and status transitions, nothing else. In
particular it never holds passwords, proxy material, or sandbox contents;
credentials deliberately die with the process.
"""

from __future__ import annotations

import datetime as dt
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from threading import Lock

from gridgate.backend import JobStatus, TERMINAL_STATUSES
from gridgate.certs import DistinguishedName


@dataclass
class HistoricalJob:
    """A job known only from the journal (submitted before the last restart)."""

    job_id: str
    owner_dn: DistinguishedName
    collection_id: str | None
    history: list[tuple[JobStatus, dt.datetime]] = field(default_factory=list)

    @property
    def status(self) -> JobStatus:
        return self.history[-1][0]

    @property
    def submitted_at(self) -> dt.datetime:
        return self.history[0][1]


class Journal:
    """Line-per-event writer; safe for concurrent appends."""

    def __init__(self, path: str | os.PathLike) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = Lock()

    def _append(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True, separators=(",", ":"))
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")

    def record_submitted(
        self,
        job_id: str,
        owner_dn: DistinguishedName,
        collection_id: str | None,
        at: dt.datetime,
    ) -> None:
        self._append(
            {
                "event": "submitted",
                "job_id": job_id,
                "owner_dn": owner_dn.render(),
                "collection_id": collection_id,
                "at": at.isoformat(),
            }
        )

    def record_transition(self, job_id: str, status: JobStatus, at: dt.datetime) -> None:
        self._append(
            {
                "event": "transition",
                "job_id": job_id,
                "status": status.value,
                "at": at.isoformat(),
            }
        )


def replay_journal(path: str | os.PathLike) -> dict[str, HistoricalJob]:
    """Rebuild job histories from the journal file; missing file means none.

    Unparseable lines are skipped (a crash can truncate the final line);
    transitions for unknown jobs are ignored.
    """
    jobs: dict[str, HistoricalJob] = {}
    journal_path = Path(path)
    if not journal_path.exists():
        return jobs
    for line in journal_path.read_text("utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            event = json.loads(line)
        except json.JSONDecodeError:
            continue
        if not isinstance(event, dict):
            continue
        kind = event.get("event")
        try:
            if kind == "submitted":
                job_id = event["job_id"]
                jobs[job_id] = HistoricalJob(
                    job_id=job_id,
                    owner_dn=DistinguishedName.parse(event["owner_dn"]),
                    collection_id=event.get("collection_id"),
                    history=[(JobStatus.SUBMITTED, dt.datetime.fromisoformat(event["at"]))],
                )
            elif kind == "transition":
                record = jobs.get(event.get("job_id", ""))
                if record is not None:
                    record.history.append(
                        (JobStatus(event["status"]), dt.datetime.fromisoformat(event["at"]))
                    )
        except (KeyError, ValueError):
            continue
    return jobs


def mark_interrupted(
    jobs: dict[str, HistoricalJob], journal: Journal, now: dt.datetime
) -> int:
    """Jobs that were still in flight at shutdown are aborted on replay.

    The synthetic transition is also written back so the next restart agrees.
    Returns how many jobs were marked.
    """
    marked = 0
    for record in jobs.values():
        status = record.status
        if status in TERMINAL_STATUSES or status is JobStatus.CLEARED:
            continue
        record.history.append((JobStatus.ABORTED, now))
        journal.record_transition(record.job_id, JobStatus.ABORTED, now)
        marked += 1
    return marked
