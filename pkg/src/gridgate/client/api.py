"""Synchronous HTTP client for the gateway API."""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass

import httpx

from gridgate.certs import DEFAULT_PROXY_LIFETIME, IdentityCredential
from gridgate.delegation import run_delegation
from gridgate.transcript import Transcript

TOKEN_HEADER = "X-Gridgate-Token"

# the statuses under which the delegation endpoints answer with a protocol
# message rather than an API error body
_PROTOCOL_STATUSES = (200, 404, 409, 422)


class ApiFailure(Exception):
    """A non-success answer from the gateway, decoded."""

    def __init__(self, status_code: int, error: str, detail: str) -> None:
        super().__init__(f"{error} (HTTP {status_code}): {detail}")
        self.status_code = status_code
        self.error = error
        self.detail = detail


@dataclass(frozen=True)
class SubmitResult:
    job_ids: tuple[str, ...]
    collection_id: str | None
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class LoginResult:
    token: str
    dn: str
    expires_at: str


def parse_timestamp(text: str) -> dt.datetime:
    """ISO-8601 with either a Z suffix or an explicit offset."""
    return dt.datetime.fromisoformat(text.replace("Z", "+00:00"))


class GatewayClient:
    """Wraps the HTTP surface and keeps the bearer token between calls."""

    def __init__(
        self,
        base_url: str = "",
        *,
        token: str | None = None,
        timeout: float = 30.0,
        verify: bool | str = True,
        http: httpx.Client | None = None,
    ) -> None:
        if http is None:
            http = httpx.Client(base_url=base_url, timeout=timeout, verify=verify)
            self._owns_http = True
        else:
            self._owns_http = False
        self._http = http
        self.token = token

    def close(self) -> None:
        if self._owns_http:
            self._http.close()

    def __enter__(self) -> "GatewayClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _headers(self) -> dict[str, str]:
        if self.token:
            return {"Authorization": f"Bearer {self.token}"}
        return {}

    @staticmethod
    def _checked(response: httpx.Response) -> httpx.Response:
        if response.status_code < 400:
            return response
        try:
            body = response.json()
            error = body["error"]
            detail = body.get("detail", "")
        except (ValueError, KeyError):
            error = "HttpError"
            detail = response.text[:200]
        raise ApiFailure(response.status_code, error, detail)

    # -- authentication

    def delegate(
        self,
        identity: IdentityCredential,
        lifetime: dt.timedelta = DEFAULT_PROXY_LIFETIME,
        transcript: Transcript | None = None,
    ) -> dt.datetime:
        """Hand over a fresh proxy; the granted session becomes this client's."""
        seen_tokens: list[str] = []

        def transport(message: bytes) -> bytes:
            kind = json.loads(message).get("type")
            path = "/delegation/init" if kind == "init" else "/delegation/complete"
            response = self._http.post(
                path, content=message, headers={"content-type": "application/json"}
            )
            token = response.headers.get(TOKEN_HEADER)
            if token:
                seen_tokens.append(token)
            if response.status_code not in _PROTOCOL_STATUSES:
                raise ConnectionError(f"gateway answered HTTP {response.status_code}")
            return response.content

        expiry = run_delegation(transport, identity, lifetime, transcript=transcript)
        if seen_tokens:
            self.token = seen_tokens[-1]
        return expiry

    def myproxy_store(
        self,
        username: str,
        password: str,
        credential_pem: str,
        max_renewal_hours: float | None = None,
    ) -> str:
        """Deposit a credential in the gateway's store; returns the renewal deadline."""
        payload: dict = {
            "username": username,
            "password": password,
            "credential_pem": credential_pem,
        }
        if max_renewal_hours is not None:
            payload["max_renewal_hours"] = max_renewal_hours
        response = self._checked(self._http.post("/myproxy/store", json=payload))
        return response.json()["renewal_deadline"]

    def myproxy_login(
        self, username: str, password: str, transcript: Transcript | None = None
    ) -> LoginResult:
        """The legacy path: a password buys back a stored credential and a session."""
        body = json.dumps(
            {"password": password, "username": username},
            sort_keys=True,
            separators=(",", ":"),
        ).encode()
        if transcript is not None:
            transcript.record("client", "gateway-login-request", body)
        response = self._http.post(
            "/myproxy/login", content=body, headers={"content-type": "application/json"}
        )
        if transcript is not None:
            transcript.record("gateway", "gateway-login-response", response.content)
        doc = self._checked(response).json()
        self.token = doc["token"]
        return LoginResult(token=doc["token"], dn=doc["dn"], expires_at=doc["expires_at"])

    # -- jobs

    def submit(
        self,
        jdl: str,
        vo: str,
        *,
        sandbox: bytes | None = None,
        myproxy_username: str | None = None,
        myproxy_password: str | None = None,
    ) -> SubmitResult:
        data = {"jdl": jdl, "vo": vo}
        if myproxy_username is not None:
            data["myproxy_username"] = myproxy_username
        if myproxy_password is not None:
            data["myproxy_password"] = myproxy_password
        files = None
        if sandbox is not None:
            files = {"sandbox": ("sandbox.tar.gz", sandbox, "application/gzip")}
        response = self._checked(
            self._http.post("/jobs", data=data, files=files, headers=self._headers())
        )
        body = response.json()
        return SubmitResult(
            job_ids=tuple(body["job_ids"]),
            collection_id=body["collection_id"],
            warnings=tuple(body["warnings"]),
        )

    def jobs(self) -> list[dict]:
        response = self._checked(self._http.get("/jobs", headers=self._headers()))
        return response.json()["jobs"]

    def job(self, job_id: str) -> dict:
        response = self._checked(self._http.get(f"/jobs/{job_id}", headers=self._headers()))
        return response.json()

    def output(self, job_id: str) -> bytes:
        response = self._checked(
            self._http.get(f"/jobs/{job_id}/output", headers=self._headers())
        )
        return response.content

    def cancel(self, job_id: str) -> dict:
        response = self._checked(
            self._http.request("DELETE", f"/jobs/{job_id}", headers=self._headers())
        )
        return response.json()

    def renew(self, job_id: str) -> str:
        response = self._checked(
            self._http.post(f"/jobs/{job_id}/renew", headers=self._headers())
        )
        return response.json()["expiry"]

    # -- utilities

    def validate_jdl(self, text: str) -> dict:
        response = self._checked(
            self._http.post(
                "/jdl/validate", content=text.encode(), headers={"content-type": "text/plain"}
            )
        )
        return response.json()

    def health(self) -> dict:
        return self._checked(self._http.get("/healthz")).json()
