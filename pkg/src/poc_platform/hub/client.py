"""HTTP client for the sharing hub.

Thin wrapper over httpx that maps the wire API onto typed calls and raises
``HubError`` carrying the server's stable error code.  Network-level failures
are retried once before surfacing, matching the CLI's retry contract.
"""

from __future__ import annotations

import json
from typing import List, Optional

import httpx

from ..crypto import abe


class HubError(Exception):
    def __init__(self, code: str, message: str, status: int = 0):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.status = status


class HubUnreachableError(HubError):
    def __init__(self, message: str):
        super().__init__("network_error", message)


class InProcessTransport(httpx.BaseTransport):
    """Serve requests against an ASGI app without a socket (tests, tooling)."""

    def __init__(self, app):
        self._async = httpx.ASGITransport(app=app)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        import asyncio

        async def go():
            resp = await self._async.handle_async_request(request)
            body = await resp.aread()
            await resp.aclose()
            return httpx.Response(
                status_code=resp.status_code, headers=resp.headers, content=body
            )

        return asyncio.run(go())


class HubClient:
    def __init__(self, base_url: str, transport: Optional[httpx.BaseTransport] = None, timeout: float = 35.0):
        self._client = httpx.Client(base_url=base_url, transport=transport, timeout=timeout)
        self.token: Optional[str] = None

    def close(self):
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- plumbing -----------------------------------------------------------

    def _request(self, method: str, path: str, *, authed: bool = False, **kwargs) -> httpx.Response:
        headers = dict(kwargs.pop("headers", {}))
        if authed:
            if not self.token:
                raise HubError("auth_failed", "not logged in")
            headers["Authorization"] = f"Bearer {self.token}"
        last_exc = None
        for _attempt in range(2):
            try:
                resp = self._client.request(method, path, headers=headers, **kwargs)
                break
            except httpx.TransportError as exc:
                last_exc = exc
        else:
            raise HubUnreachableError(f"hub unreachable after retry: {last_exc}")
        if resp.status_code >= 400:
            try:
                body = resp.json()
                raise HubError(body["code"], body["message"], status=resp.status_code)
            except (ValueError, KeyError):
                raise HubError("http_error", f"status {resp.status_code}", status=resp.status_code)
        return resp

    # -- API ----------------------------------------------------------------

    def register_user(self, user_id: str, role: str, attributes, credential: str) -> dict:
        return self._request(
            "POST",
            "/users",
            json={"user_id": user_id, "role": role, "attributes": list(attributes), "credential": credential},
        ).json()

    def login(self, user_id: str, credential: str) -> dict:
        body = self._request("POST", "/login", json={"user_id": user_id, "credential": credential}).json()
        self.token = body["token"]
        return body

    def issue_key(self, user_id: str, credential: str) -> abe.UserSecretKey:
        resp = self._request("POST", "/keys", json={"user_id": user_id, "credential": credential})
        return abe.key_from_json(resp.text)

    def get_params(self) -> abe.PublicParams:
        return abe.params_from_json(self._request("GET", "/params").text)

    def attribute_universe(self) -> List[str]:
        return list(self._request("GET", "/params").json()["attribute_universe"])

    def upload(self, envelope_bytes: bytes) -> str:
        resp = self._request("POST", "/docs", authed=True, content=envelope_bytes)
        return resp.json()["doc_id"]

    def fetch(self, doc_id: str) -> bytes:
        return self._request("GET", f"/docs/{doc_id}", authed=True).content

    def share(self, doc_id: str, audience: str) -> dict:
        return self._request("POST", "/shares", authed=True, json={"doc_id": doc_id, "audience": audience}).json()

    def notices(self, since: Optional[float] = None, wait_s: float = 0.0) -> List[dict]:
        params = {}
        if since is not None:
            params["since"] = repr(since)
        if wait_s:
            params["wait_s"] = wait_s
        return self._request("GET", "/notices", authed=True, params=params).json()["notices"]
