"""Sharing hub: key authority, encrypted document store, notification feeds.

The hub is honest-but-curious by design: it authenticates users and moves
envelopes around, but it never decrypts anything and never performs a policy
check on fetch — access control is purely cryptographic on the client side.

Wire API (JSON bodies unless noted):
    POST /users               register {user_id, role, attributes, credential}
    POST /login               {user_id, credential} -> {token}
    POST /keys                {user_id, credential} -> attribute secret key
    GET  /params              public parameters + attribute universe
    POST /docs                raw envelope body -> {doc_id}          (bearer)
    GET  /docs/{id}           raw envelope body                      (bearer)
    POST /shares              {doc_id, audience} -> notices          (bearer)
    GET  /notices?since=&wait_s=   recipient feed, optional long poll (bearer)

Errors are ``{"code": ..., "message": ...}`` with stable codes.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from fastapi import FastAPI, Header, Query, Request, Response
from fastapi.responses import JSONResponse

from .. import policy as policy_lang
from ..crypto import abe, envelope
from .storage import DocumentStore, MemoryStore

TOKEN_TTL_S = 3600.0
_PBKDF2_ITERATIONS = 50_000

ROLES = ("patient", "staff")


class HubApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _hash_credential(credential: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", credential.encode(), salt, _PBKDF2_ITERATIONS)


@dataclass
class UserRecord:
    user_id: str
    role: str
    attributes: Tuple[str, ...]
    salt: bytes
    credential_hash: bytes


@dataclass
class ShareNotice:
    notice_id: str
    doc_id: str
    from_user: str
    to_user: str
    audience: str
    created_at: float
    read: bool = False

    def to_dict(self) -> dict:
        return {
            "notice_id": self.notice_id,
            "doc_id": self.doc_id,
            "from": self.from_user,
            "to": self.to_user,
            "audience": self.audience,
            "created_at": self.created_at,
            "read": self.read,
        }


@dataclass
class HubState:
    params: abe.PublicParams
    msk: abe.MasterSecret
    universe: Tuple[str, ...]
    store: DocumentStore
    rng: abe.RandomSource
    users: Dict[str, UserRecord] = field(default_factory=dict)
    tokens: Dict[str, Tuple[str, float]] = field(default_factory=dict)  # token -> (user, expiry)
    feeds: Dict[str, List[ShareNotice]] = field(default_factory=dict)
    doc_meta: Dict[str, dict] = field(default_factory=dict)
    audit_log: List[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    notice_seq: int = 0
    last_notice_ts: float = 0.0

    def audit(self, event: str, user_id: str, **extra):
        self.audit_log.append({"ts": time.time(), "event": event, "user_id": user_id, **extra})


def _require_user(state: HubState, user_id: str, credential: str) -> UserRecord:
    rec = state.users.get(user_id)
    if rec is None or not secrets.compare_digest(
        _hash_credential(credential, rec.salt if rec else b""), rec.credential_hash if rec else b""
    ):
        raise HubApiError(401, "auth_failed", "unknown user or wrong credential")
    return rec


def _require_token(state: HubState, authorization: Optional[str]) -> UserRecord:
    if not authorization or not authorization.startswith("Bearer "):
        raise HubApiError(401, "auth_failed", "missing bearer token")
    token = authorization[len("Bearer "):]
    with state.lock:
        entry = state.tokens.get(token)
        if entry is None or entry[1] < time.time():
            state.tokens.pop(token, None)
            raise HubApiError(401, "auth_failed", "invalid or expired token")
        user_id = entry[0]
    return state.users[user_id]


def _resolve_audience(state: HubState, audience: str) -> List[str]:
    """Recipients of a share: an exact user id, or staff matching a policy."""
    if audience in state.users:
        return [audience]
    try:
        node = policy_lang.parse(audience)
    except policy_lang.PolicyError:
        raise HubApiError(400, "bad_audience", f"audience {audience!r} is neither a user nor a valid policy")
    out = []
    for rec in state.users.values():
        if rec.role != "staff":
            continue
        ok, _ = policy_lang.satisfies(node, rec.attributes)
        if ok:
            out.append(rec.user_id)
    return sorted(out)


def create_app(
    universe,
    store: Optional[DocumentStore] = None,
    rng: abe.RandomSource = secrets.token_bytes,
) -> FastAPI:
    """Build a hub instance with a freshly generated master key."""
    universe = tuple(str(policy_lang.Attribute.parse(a)) for a in universe)
    params, msk = abe.setup(rng)
    state = HubState(params=params, msk=msk, universe=universe, store=store or MemoryStore(), rng=rng)

    app = FastAPI(title="poc-share-hub")
    app.state.hub = state

    @app.exception_handler(HubApiError)
    async def _api_error(_request: Request, exc: HubApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    async def _json_body(request: Request) -> dict:
        try:
            body = json.loads(await request.body())
        except ValueError:
            raise HubApiError(400, "bad_request", "body is not valid JSON")
        if not isinstance(body, dict):
            raise HubApiError(400, "bad_request", "body must be a JSON object")
        return body

    @app.post("/users")
    async def register_user(request: Request):
        body = await _json_body(request)
        user_id = body.get("user_id")
        role = body.get("role")
        attributes = body.get("attributes", [])
        credential = body.get("credential")
        if not user_id or not isinstance(user_id, str) or not isinstance(credential, str) or not credential:
            raise HubApiError(400, "bad_request", "user_id and credential are required")
        if role not in ROLES:
            raise HubApiError(400, "bad_request", f"role must be one of {ROLES}")
        try:
            attrs = tuple(str(policy_lang.Attribute.parse(a)) for a in attributes)
        except policy_lang.PolicyError as exc:
            raise HubApiError(400, "unknown_attribute", str(exc))
        if role == "staff":
            unknown = [a for a in attrs if a not in state.universe]
            if unknown:
                raise HubApiError(400, "unknown_attribute", f"attributes outside universe: {unknown}")
        salt = secrets.token_bytes(16)
        rec = UserRecord(
            user_id=user_id,
            role=role,
            attributes=attrs,
            salt=salt,
            credential_hash=_hash_credential(credential, salt),
        )
        with state.lock:
            if user_id in state.users:
                raise HubApiError(409, "duplicate_user", f"user {user_id!r} already exists")
            state.users[user_id] = rec
        state.audit("register", user_id, role=role)
        return {"user_id": user_id, "role": role, "attributes": list(attrs)}

    @app.post("/login")
    async def login(request: Request):
        body = await _json_body(request)
        rec = _require_user(state, body.get("user_id", ""), body.get("credential", ""))
        token = secrets.token_urlsafe(32)
        with state.lock:
            state.tokens[token] = (rec.user_id, time.time() + TOKEN_TTL_S)
        state.audit("login", rec.user_id)
        return {"token": token, "role": rec.role, "attributes": list(rec.attributes)}

    @app.post("/keys")
    async def issue_key(request: Request):
        body = await _json_body(request)
        rec = _require_user(state, body.get("user_id", ""), body.get("credential", ""))
        if rec.role != "staff":
            raise HubApiError(403, "not_staff", "attribute keys are only issued to staff accounts")
        usk = abe.keygen(state.msk, rec.attributes, state.rng)
        state.audit("issue_key", rec.user_id, attributes=list(rec.attributes))
        return Response(content=abe.key_to_json(usk), media_type="application/json")

    @app.get("/params")
    async def get_params():
        payload = json.loads(abe.params_to_json(state.params))
        payload["attribute_universe"] = list(state.universe)
        return payload

    @app.post("/docs")
    async def upload(request: Request, authorization: Optional[str] = Header(default=None)):
        rec = _require_token(state, authorization)
        data = await request.body()
        try:
            header = envelope.parse_header(data)
        except envelope.EnvelopeError as exc:
            raise HubApiError(400, "malformed_envelope", str(exc))
        doc_id = state.store.put(data)
        with state.lock:
            state.doc_meta.setdefault(
                doc_id,
                {
                    "doc_id": doc_id,
                    "uploader": rec.user_id,
                    "created_at": time.time(),
                    "payload_type": header.payload_type,
                    "size": len(data),
                },
            )
        state.audit("upload", rec.user_id, doc_id=doc_id)
        return {"doc_id": doc_id}

    @app.get("/docs/{doc_id}")
    async def fetch(doc_id: str, authorization: Optional[str] = Header(default=None)):
        _require_token(state, authorization)
        data = state.store.get(doc_id)
        if data is None:
            raise HubApiError(404, "unknown_doc", f"no document {doc_id!r}")
        return Response(content=data, media_type="application/octet-stream")

    @app.post("/shares")
    async def share(request: Request, authorization: Optional[str] = Header(default=None)):
        rec = _require_token(state, authorization)
        body = await _json_body(request)
        doc_id = body.get("doc_id", "")
        audience = body.get("audience", "")
        if state.store.get(doc_id) is None:
            raise HubApiError(404, "unknown_doc", f"no document {doc_id!r}")
        recipients = _resolve_audience(state, audience)
        notices = []
        with state.lock:
            for to_user in recipients:
                state.notice_seq += 1
                # strictly increasing timestamps keep `since` filters exact
                ts = max(time.time(), state.last_notice_ts + 1e-6)
                state.last_notice_ts = ts
                notice = ShareNotice(
                    notice_id=f"n{state.notice_seq:08d}",
                    doc_id=doc_id,
                    from_user=rec.user_id,
                    to_user=to_user,
                    audience=audience,
                    created_at=ts,
                )
                state.feeds.setdefault(to_user, []).append(notice)
                notices.append(notice.to_dict())
        state.audit("share", rec.user_id, doc_id=doc_id, audience=audience, recipients=recipients)
        result = {"notices": notices}
        if not notices:
            result["warning"] = "audience matched no registered recipients"
        return result

    @app.get("/notices")
    async def list_notices(
        authorization: Optional[str] = Header(default=None),
        since: Optional[float] = Query(default=None),
        wait_s: float = Query(default=0.0, le=30.0),
    ):
        import asyncio

        rec = _require_token(state, authorization)
        deadline = time.monotonic() + max(0.0, wait_s)
        while True:
            with state.lock:
                feed = list(state.feeds.get(rec.user_id, ()))
            if since is not None:
                feed = [n for n in feed if n.created_at > since]
            if feed or time.monotonic() >= deadline:
                return {"notices": [n.to_dict() for n in feed]}
            await asyncio.sleep(0.05)

    return app
