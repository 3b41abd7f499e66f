"""Shared gateway state: stored proxies, API sessions, and wired components."""

from __future__ import annotations

import datetime as dt
import secrets
from dataclasses import dataclass
from threading import Lock
from typing import Callable, Iterable

from gridgate.backend import (
    JobStatus,
    MyProxySimulator,
    Timetable,
    VoRegistry,
    VomsSimulator,
    WorkloadManager,
)
from gridgate.certs import (
    Certificate,
    DistinguishedName,
    ProxyBundle,
    remaining_lifetime,
)
from gridgate.delegation import DelegationServer, DelegationSession
from gridgate.gateway.journal import HistoricalJob, Journal, mark_interrupted, replay_journal

SESSION_LIFETIME = dt.timedelta(hours=8)


def _utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc)


@dataclass
class StoredProxy:
    bundle: ProxyBundle
    stored_at: dt.datetime


class ProxyStore:
    """At most one delegated bundle per user; re-delegation replaces it."""

    def __init__(self) -> None:
        self._by_dn: dict[str, StoredProxy] = {}
        self._lock = Lock()

    def put(self, bundle: ProxyBundle, now: dt.datetime) -> None:
        key = bundle.end_user_dn.render()
        with self._lock:
            self._by_dn[key] = StoredProxy(bundle=bundle, stored_at=now)

    def get(self, dn: DistinguishedName) -> StoredProxy | None:
        with self._lock:
            return self._by_dn.get(dn.render())

    def get_live(self, dn: DistinguishedName, now: dt.datetime) -> ProxyBundle | None:
        """The stored bundle if it still has lifetime left, else None."""
        stored = self.get(dn)
        if stored is None:
            return None
        if remaining_lifetime(stored.bundle, now) <= dt.timedelta(0):
            return None
        return stored.bundle

    def __len__(self) -> int:
        with self._lock:
            return len(self._by_dn)


@dataclass(frozen=True)
class ApiSession:
    token: str
    dn: DistinguishedName
    issued_at: dt.datetime
    expires_at: dt.datetime


class SessionTable:
    """Bearer sessions minted at delegation time; there is no password login."""

    def __init__(self, lifetime: dt.timedelta = SESSION_LIFETIME) -> None:
        self._lifetime = lifetime
        self._by_token: dict[str, ApiSession] = {}
        self._lock = Lock()

    def create(self, dn: DistinguishedName, now: dt.datetime) -> ApiSession:
        session = ApiSession(
            token=secrets.token_urlsafe(32),  # 256 bits
            dn=dn,
            issued_at=now,
            expires_at=now + self._lifetime,
        )
        with self._lock:
            self._by_token[session.token] = session
        return session

    def resolve(self, token: str, now: dt.datetime) -> DistinguishedName | None:
        with self._lock:
            session = self._by_token.get(token)
            if session is None:
                return None
            if now >= session.expires_at:
                del self._by_token[session.token]
                return None
            return session.dn

    def revoke(self, token: str) -> None:
        with self._lock:
            self._by_token.pop(token, None)

    def __len__(self) -> int:
        with self._lock:
            return len(self._by_token)


class GatewayState:
    """Every long-lived object behind the HTTP surface, wired together."""

    def __init__(
        self,
        *,
        trust_anchors: Iterable[Certificate],
        vo_registry: VoRegistry,
        mode: str = "simulate",
        clock: Callable[[], dt.datetime] = _utcnow,
        myproxy_delay: float = 0.0,
        journal_path=None,
        workers: int = 4,
        run_wall_limit: float = 60.0,
        timetable: Timetable | None = None,
        scratch_root=None,
        session_lifetime: dt.timedelta = SESSION_LIFETIME,
    ) -> None:
        self.clock = clock
        self.trust_anchors = list(trust_anchors)
        self.myproxy = MyProxySimulator(self.trust_anchors, delay=myproxy_delay, clock=clock)
        self.voms = VomsSimulator(vo_registry, self.trust_anchors, clock=clock)
        self.wms = WorkloadManager(
            mode=mode,
            clock=clock,
            timetable=timetable,
            max_workers=workers,
            run_wall_limit=run_wall_limit,
            scratch_root=scratch_root,
            myproxy=self.myproxy,
        )
        self.proxy_store = ProxyStore()
        self.sessions = SessionTable(session_lifetime)
        self.delegation = DelegationServer(
            self.trust_anchors, clock=clock, on_complete=self._on_delegated
        )
        self.journal: Journal | None = None
        self.history: dict[str, HistoricalJob] = {}
        if journal_path is not None:
            self.journal = Journal(journal_path)
            self.history = replay_journal(journal_path)
            mark_interrupted(self.history, self.journal, clock())
        self._journaled_lengths: dict[str, int] = {}
        self._pending_tokens: dict[str, str] = {}
        self._lock = Lock()

    # -- delegation-as-login plumbing

    def _on_delegated(self, session: DelegationSession, bundle: ProxyBundle) -> None:
        now = self.clock()
        self.proxy_store.put(bundle, now)
        api_session = self.sessions.create(bundle.end_user_dn, now)
        with self._lock:
            self._pending_tokens[session.session_id] = api_session.token

    def take_token(self, delegation_session_id: str) -> str | None:
        with self._lock:
            return self._pending_tokens.pop(delegation_session_id, None)

    # -- journal reconciliation

    def note_submitted(self, job_id: str, at: dt.datetime) -> None:
        if self.journal is None:
            return
        snapshot = self.wms.snapshot(job_id, now=at)
        self.journal.record_submitted(job_id, snapshot.owner_dn, snapshot.collection_id, at)
        with self._lock:
            self._journaled_lengths[job_id] = 1

    def reconcile_job(self, job_id: str) -> None:
        """Write any status transitions the journal has not seen yet."""
        if self.journal is None:
            return
        _status, history = self.wms.status(job_id)
        with self._lock:
            seen = self._journaled_lengths.get(job_id, 1)
            for status, at in history[seen:]:
                self.journal.record_transition(job_id, status, at)
            self._journaled_lengths[job_id] = max(seen, len(history))

    def reconcile_all(self) -> None:
        for job_id in self.wms.job_ids():
            self.reconcile_job(job_id)

    def shutdown(self) -> None:
        self.reconcile_all()
        self.wms.shutdown()
