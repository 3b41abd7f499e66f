"""The HTTP surface: delegation, conversion, jobs, and the baseline flow."""

from __future__ import annotations

import datetime as dt
import logging
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Union

from fastapi import Depends, FastAPI, File, Form, Request, Response, UploadFile
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from gridgate.backend import (
    BadPasswordError,
    ClearedError,
    CredentialExpiredError,
    InvalidProxyError,
    InvalidRequestError,
    JobStatus,
    MalformedArchiveError,
    NoRenewalCredentialError,
    NotAMemberError,
    NotFinishedError,
    PathTraversalError,
    ProxyExpiredError,
    RenewalDeniedError,
    UnknownCredentialError,
    UnknownJobError,
    UnknownVoError,
    VoRegistry,
    Timetable,
)
from gridgate.backend.wms import JobSnapshot, TERMINAL_STATUSES
from gridgate.certs import (
    BadPasswordError as P12BadPasswordError,
    DistinguishedName,
    MalformedArchiveError as P12MalformedArchiveError,
    MalformedDnError,
    PemDecodeError,
    ProxyBundle,
    convert_p12_to_pem,
    load_trust_anchors,
)
from gridgate.delegation import (
    DelegationAck,
    InitRequest,
    MalformedMessageError,
    ProtocolError,
    SessionExpiredError,
    SignedUpload,
    UnknownSessionError,
    encode_message,
    parse_message,
)
from gridgate.gateway.config import ConfigError, GatewayConfig
from gridgate.gateway.journal import HistoricalJob
from gridgate.gateway.schemas import (
    CancelResponse,
    ConvertResponse,
    HealthResponse,
    HistoryEntryBody,
    IssueBody,
    JobDetail,
    JobList,
    JobSummary,
    MyProxyLoginRequest,
    MyProxyLoginResponse,
    MyProxyStoreRequest,
    MyProxyStoreResponse,
    RenewResponse,
    SubmitResponse,
    ValidationBody,
)
from gridgate.gateway.state import GatewayState
from gridgate.jdl import JdlSyntaxError, JobDescriptor, parse_jdl, validate_jdl

logger = logging.getLogger("gridgate.gateway")

TOKEN_HEADER = "X-Gridgate-Token"


class ApiError(Exception):
    """Maps a domain failure onto one HTTP status and error code."""

    def __init__(self, status_code: int, code: str, detail: str = "") -> None:
        super().__init__(f"{code}: {detail}" if detail else code)
        self.status_code = status_code
        self.code = code
        self.detail = detail


def build_state(config: GatewayConfig) -> GatewayState:
    """Construct runtime state from file-based configuration."""
    if config.trust_anchor_dir is None:
        raise ConfigError("trust_anchor_dir is required")
    if config.vo_registry is None:
        raise ConfigError("vo_registry is required")
    anchors = load_trust_anchors(config.trust_anchor_dir)
    if not anchors:
        raise ConfigError(f"no trust anchors found in {config.trust_anchor_dir}")
    timetable = None
    if config.timetable_path is not None:
        timetable = Timetable.from_json(Path(config.timetable_path).read_text("utf-8"))
    return GatewayState(
        trust_anchors=anchors,
        vo_registry=VoRegistry.from_file(config.vo_registry),
        mode=config.mode,
        myproxy_delay=config.myproxy_delay,
        journal_path=config.journal_path,
        workers=config.workers,
        run_wall_limit=config.run_wall_limit,
        timetable=timetable,
        scratch_root=config.scratch_root,
    )


def _issue_bodies(issues) -> list[IssueBody]:
    return [
        IssueBody(
            severity=issue.severity,
            code=issue.code,
            message=issue.message,
            line=issue.span[0] if issue.span else None,
            column=issue.span[1] if issue.span else None,
        )
        for issue in issues
    ]


def _parse_and_check(jdl: str) -> tuple[JobDescriptor | None, ValidationBody]:
    """Total JDL check: syntax errors and validation issues in one report."""
    try:
        descriptor = parse_jdl(jdl)
    except JdlSyntaxError as exc:
        issue = IssueBody(
            severity="error",
            code="Syntax",
            message=str(exc),
            line=exc.line,
            column=exc.column,
        )
        return None, ValidationBody(valid=False, issues=[issue])
    issues = validate_jdl(descriptor)
    for warning in descriptor.parse_warnings:
        issues.append(warning)
    valid = not any(issue.severity == "error" for issue in issues)
    return descriptor, ValidationBody(valid=valid, issues=_issue_bodies(issues))


def create_app(
    config: GatewayConfig | None = None, state: GatewayState | None = None
) -> FastAPI:
    config = config or GatewayConfig()
    if state is None:
        state = build_state(config)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        state.shutdown()

    app = FastAPI(title="gridgate", version="1.0", lifespan=lifespan)
    app.state.gateway = state
    app.state.config = config

    @app.exception_handler(ApiError)
    async def handle_api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status_code, content={"error": exc.code, "detail": exc.detail}
        )

    if config.require_tls:

        @app.middleware("http")
        async def require_tls(request: Request, call_next):
            forwarded = request.headers.get("x-forwarded-proto", "")
            if request.url.scheme != "https" and forwarded != "https":
                return JSONResponse(
                    status_code=426,
                    content={"error": "TlsRequired", "detail": "use https"},
                )
            return await call_next(request)

    def current_dn(request: Request) -> DistinguishedName:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise ApiError(401, "NoSession", "missing bearer token")
        dn = state.sessions.resolve(header[7:].strip(), state.clock())
        if dn is None:
            raise ApiError(401, "NoSession", "unknown or expired token")
        return dn

    def owned_job(
        dn: DistinguishedName, job_id: str
    ) -> Union[JobSnapshot, HistoricalJob]:
        """The job as seen by its owner; foreign and unknown are both 404."""
        try:
            snapshot = state.wms.snapshot(job_id)
        except UnknownJobError:
            historical = state.history.get(job_id)
            if historical is None or historical.owner_dn != dn:
                raise ApiError(404, "UnknownJob", "no such job") from None
            return historical
        if snapshot.owner_dn != dn:
            raise ApiError(404, "UnknownJob", "no such job")
        state.reconcile_job(job_id)
        return snapshot

    # -- delegation

    @app.post("/delegation/init")
    async def delegation_init(request: Request) -> Response:
        body = await request.body()
        try:
            message = parse_message(body)
        except MalformedMessageError as exc:
            if isinstance(exc.__cause__, MalformedDnError):
                raise ApiError(400, "MalformedDn", str(exc)) from exc
            raise ApiError(400, "MalformedMessage", str(exc)) from exc
        if not isinstance(message, InitRequest):
            raise ApiError(400, "MalformedMessage", "expected an init message")
        state.delegation.purge_expired()
        challenge = state.delegation.handle_init(message)
        return Response(content=encode_message(challenge), media_type="application/json")

    @app.post("/delegation/complete")
    async def delegation_complete(request: Request) -> Response:
        body = await request.body()
        try:
            message = parse_message(body)
        except MalformedMessageError as exc:
            raise ApiError(400, "MalformedMessage", str(exc)) from exc
        if not isinstance(message, SignedUpload):
            raise ApiError(400, "MalformedMessage", "expected an upload message")
        try:
            bundle, ack = state.delegation.complete(message)
        except UnknownSessionError:
            ack = DelegationAck(
                session_id=message.session_id, status="error", reason="unknown-session"
            )
            return Response(
                content=encode_message(ack), status_code=404, media_type="application/json"
            )
        except SessionExpiredError:
            ack = DelegationAck(
                session_id=message.session_id, status="error", reason="session-expired"
            )
            return Response(
                content=encode_message(ack), status_code=409, media_type="application/json"
            )
        if bundle is None:
            logger.info("delegation %s refused: %s", ack.session_id, ack.reason)
            return Response(
                content=encode_message(ack), status_code=422, media_type="application/json"
            )
        logger.info(
            "delegation %s completed for %s", ack.session_id, bundle.end_user_dn.render()
        )
        token = state.take_token(ack.session_id)
        headers = {TOKEN_HEADER: token} if token else {}
        return Response(
            content=encode_message(ack), media_type="application/json", headers=headers
        )

    # -- pre-authentication utilities

    @app.post("/convert", response_model=ConvertResponse)
    async def convert(
        p12: UploadFile = File(...), password: str = Form("")
    ) -> ConvertResponse:
        data = await p12.read()
        logger.info("convert request: %d byte archive", len(data))
        try:
            cert_pem, key_pem = convert_p12_to_pem(data, password)
        except P12BadPasswordError as exc:
            raise ApiError(400, "BadPassword", str(exc)) from exc
        except P12MalformedArchiveError as exc:
            raise ApiError(400, "MalformedArchive", str(exc)) from exc
        finally:
            del data  # response is the only place the material survives
        return ConvertResponse(cert_pem=cert_pem, key_pem=key_pem)

    @app.post("/jdl/validate", response_model=ValidationBody)
    async def jdl_validate(request: Request) -> ValidationBody:
        body = await request.body()
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ApiError(400, "MalformedMessage", f"body must be UTF-8: {exc}") from exc
        _descriptor, report = _parse_and_check(text)
        return report

    # -- job lifecycle

    @app.post("/jobs", response_model=SubmitResponse)
    async def submit_jobs(
        jdl: str = Form(...),
        vo: str = Form(...),
        myproxy_username: str | None = Form(None),
        myproxy_password: str | None = Form(None),
        sandbox: UploadFile | None = File(None),
        dn: DistinguishedName = Depends(current_dn),
    ) -> SubmitResponse:
        now = state.clock()
        stored = state.proxy_store.get(dn)
        if stored is None:
            raise ApiError(409, "NoProxy", "delegate a proxy before submitting")
        bundle = state.proxy_store.get_live(dn, now)
        if bundle is None:
            raise ApiError(409, "ProxyExpired", "the delegated proxy has expired")

        descriptor, report = _parse_and_check(jdl)
        if descriptor is None or not report.valid:
            raise ApiError(
                422,
                "InvalidJdl",
                "; ".join(
                    f"{i.code}: {i.message}" for i in report.issues if i.severity == "error"
                ),
            )

        try:
            assertion = state.voms.authorize(bundle, vo, now=now)
        except UnknownVoError as exc:
            raise ApiError(403, "UnknownVo", str(exc)) from exc
        except NotAMemberError as exc:
            raise ApiError(403, "NotAMember", str(exc)) from exc
        except InvalidProxyError as exc:
            raise ApiError(409, "ProxyExpired", str(exc)) from exc

        renewal = None
        if myproxy_username is not None:
            if myproxy_password is None:
                raise ApiError(400, "InvalidRequest", "myproxy_password is required")
            renewal = (myproxy_username, myproxy_password)

        archive = await sandbox.read() if sandbox is not None else b""
        try:
            job_ids = state.wms.submit(
                descriptor, assertion, bundle, archive, renewal=renewal, now=now
            )
        except (MalformedArchiveError, PathTraversalError) as exc:
            raise ApiError(400, type(exc).__name__.removesuffix("Error"), str(exc)) from exc
        except ProxyExpiredError as exc:
            raise ApiError(409, "ProxyExpired", str(exc)) from exc

        for job_id in job_ids:
            state.note_submitted(job_id, now)
        logger.info("submitted %d job(s) for %s", len(job_ids), dn.render())
        first = state.wms.snapshot(job_ids[0])
        return SubmitResponse(
            job_ids=job_ids,
            collection_id=first.collection_id,
            warnings=list(first.warnings),
        )

    def _summary(job) -> JobSummary:
        if isinstance(job, HistoricalJob):
            return JobSummary(
                id=job.job_id,
                status=job.status.value,
                submitted_at=job.submitted_at,
                collection_id=job.collection_id,
            )
        return JobSummary(
            id=job.job_id,
            status=job.status.value,
            submitted_at=job.status_history[0][1],
            collection_id=job.collection_id,
        )

    @app.get("/jobs", response_model=JobList)
    async def list_jobs(dn: DistinguishedName = Depends(current_dn)) -> JobList:
        rows = []
        for job_id in state.wms.job_ids():
            snapshot = state.wms.snapshot(job_id)
            if snapshot.owner_dn == dn:
                state.reconcile_job(job_id)
                rows.append(_summary(snapshot))
        for historical in state.history.values():
            if historical.owner_dn == dn:
                rows.append(_summary(historical))
        rows.sort(key=lambda row: (row.submitted_at, row.id))
        return JobList(jobs=rows)

    @app.get("/jobs/{job_id}", response_model=JobDetail)
    async def job_detail(
        job_id: str, dn: DistinguishedName = Depends(current_dn)
    ) -> JobDetail:
        job = owned_job(dn, job_id)
        if isinstance(job, HistoricalJob):
            return JobDetail(
                id=job.job_id,
                status=job.status.value,
                submitted_at=job.submitted_at,
                collection_id=job.collection_id,
                history=[HistoryEntryBody(status=s.value, at=at) for s, at in job.history],
                historical=True,
            )
        return JobDetail(
            id=job.job_id,
            status=job.status.value,
            submitted_at=job.status_history[0][1],
            collection_id=job.collection_id,
            history=[
                HistoryEntryBody(status=s.value, at=at) for s, at in job.status_history
            ],
            exit_code=job.exit_code,
            warnings=list(job.warnings),
            proxy_expiry=job.proxy_expiry,
        )

    @app.get("/jobs/{job_id}/output")
    async def job_output(
        job_id: str, dn: DistinguishedName = Depends(current_dn)
    ) -> Response:
        job = owned_job(dn, job_id)
        if isinstance(job, HistoricalJob):
            raise ApiError(409, "Cleared", "archives do not survive gateway restarts")
        try:
            archive = state.wms.output(job_id)
        except ClearedError as exc:
            raise ApiError(409, "Cleared", str(exc)) from exc
        except NotFinishedError as exc:
            raise ApiError(409, "NotFinished", str(exc)) from exc
        return Response(
            content=archive,
            media_type="application/gzip",
            headers={"Content-Disposition": f'attachment; filename="{job_id}.tar.gz"'},
        )

    @app.delete("/jobs/{job_id}", response_model=CancelResponse)
    async def job_delete(
        job_id: str, dn: DistinguishedName = Depends(current_dn)
    ) -> CancelResponse:
        """Cancel when still moving, then clear: one terminate button."""
        job = owned_job(dn, job_id)
        now = state.clock()
        if isinstance(job, HistoricalJob):
            if job.status is not JobStatus.CLEARED:
                job.history.append((JobStatus.CLEARED, now))
                if state.journal is not None:
                    state.journal.record_transition(job_id, JobStatus.CLEARED, now)
            return CancelResponse(id=job_id, status=JobStatus.CLEARED.value)
        state.wms.cancel(job_id, now=now)
        status = state.wms.clear(job_id, now=now)
        state.reconcile_job(job_id)
        return CancelResponse(id=job_id, status=status.value)

    @app.post("/jobs/{job_id}/renew", response_model=RenewResponse)
    async def job_renew(
        job_id: str, dn: DistinguishedName = Depends(current_dn)
    ) -> RenewResponse:
        job = owned_job(dn, job_id)
        if isinstance(job, HistoricalJob):
            raise ApiError(409, "NoRenewalCredential", "job predates the last restart")
        try:
            expiry = state.wms.renew(job_id)
        except NoRenewalCredentialError as exc:
            raise ApiError(409, "NoRenewalCredential", str(exc)) from exc
        except RenewalDeniedError as exc:
            raise ApiError(409, "RenewalDenied", str(exc)) from exc
        except (
            UnknownCredentialError,
            BadPasswordError,
            CredentialExpiredError,
        ) as exc:
            raise ApiError(409, "RenewalDenied", str(exc)) from exc
        return RenewResponse(id=job_id, expiry=expiry)

    # -- baseline external-credential flow (benchmark comparison surface)

    if config.myproxy_endpoints:

        @app.post("/myproxy/store", response_model=MyProxyStoreResponse)
        async def myproxy_store(body: MyProxyStoreRequest) -> MyProxyStoreResponse:
            try:
                bundle = ProxyBundle.from_pem(body.credential_pem)
            except (PemDecodeError, ValueError) as exc:
                raise ApiError(400, "InvalidRequest", str(exc)) from exc
            kwargs = {}
            if body.max_renewal_hours is not None:
                kwargs["max_renewal_lifetime"] = dt.timedelta(hours=body.max_renewal_hours)
            try:
                deadline = state.myproxy.store(
                    body.username, body.password, bundle, **kwargs
                )
            except InvalidRequestError as exc:
                raise ApiError(400, "InvalidRequest", str(exc)) from exc
            except InvalidProxyError as exc:
                raise ApiError(422, "InvalidProxy", str(exc)) from exc
            return MyProxyStoreResponse(renewal_deadline=deadline)

        @app.post("/myproxy/login", response_model=MyProxyLoginResponse)
        async def myproxy_login(body: MyProxyLoginRequest) -> MyProxyLoginResponse:
            """The legacy flow: password goes over the wire, proxy comes back."""
            now = state.clock()
            try:
                bundle = state.myproxy.retrieve(body.username, body.password, now=now)
            except UnknownCredentialError as exc:
                raise ApiError(404, "Unknown", str(exc)) from exc
            except BadPasswordError as exc:
                raise ApiError(401, "BadPassword", str(exc)) from exc
            except CredentialExpiredError as exc:
                raise ApiError(409, "Expired", str(exc)) from exc
            state.proxy_store.put(bundle, now)
            session = state.sessions.create(bundle.end_user_dn, now)
            return MyProxyLoginResponse(
                token=session.token,
                dn=session.dn.render(),
                expires_at=session.expires_at,
            )

    # -- service

    @app.get("/healthz", response_model=HealthResponse)
    async def healthz() -> HealthResponse:
        return HealthResponse(status="ok", mode=state.wms.mode)

    if config.ui_dir is not None and Path(config.ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
