"""Request and response bodies for the JSON API."""

from __future__ import annotations

import datetime as dt

from pydantic import BaseModel, Field


class ErrorBody(BaseModel):
    error: str
    detail: str = ""


class IssueBody(BaseModel):
    severity: str
    code: str
    message: str
    line: int | None = None
    column: int | None = None


class ValidationBody(BaseModel):
    valid: bool
    issues: list[IssueBody] = Field(default_factory=list)


class SubmitResponse(BaseModel):
    job_ids: list[str]
    collection_id: str | None = None
    warnings: list[str] = Field(default_factory=list)


class HistoryEntryBody(BaseModel):
    status: str
    at: dt.datetime


class JobSummary(BaseModel):
    id: str
    status: str
    submitted_at: dt.datetime
    collection_id: str | None = None


class JobList(BaseModel):
    jobs: list[JobSummary]


class JobDetail(BaseModel):
    id: str
    status: str
    submitted_at: dt.datetime
    collection_id: str | None = None
    history: list[HistoryEntryBody]
    exit_code: int | None = None
    warnings: list[str] = Field(default_factory=list)
    proxy_expiry: dt.datetime | None = None
    historical: bool = False


class CancelResponse(BaseModel):
    id: str
    status: str


class RenewResponse(BaseModel):
    id: str
    expiry: dt.datetime


class ConvertResponse(BaseModel):
    cert_pem: str
    key_pem: str


class HealthResponse(BaseModel):
    status: str
    mode: str


class MyProxyStoreRequest(BaseModel):
    username: str
    password: str
    credential_pem: str
    max_renewal_hours: float | None = None


class MyProxyStoreResponse(BaseModel):
    renewal_deadline: dt.datetime


class MyProxyLoginRequest(BaseModel):
    username: str
    password: str


class MyProxyLoginResponse(BaseModel):
    token: str
    dn: str
    expires_at: dt.datetime
