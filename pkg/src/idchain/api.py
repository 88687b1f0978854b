"""Identity HTTP service: registration, login/logout, user management, and
audit access, wired to the document store and the chain gateway.

All error bodies are ``{"detail": <string>}``. Every token failure maps to
401 with detail "Could not validate credentials". Every sensitive action
writes exactly one audit entry.
"""

from __future__ import annotations

import logging
import os
import time
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, Response

from . import identity, tokens
from .store import DuplicateKey, PageBounds

log = logging.getLogger("idchain.api")

AUDIT_ACTIONS = ("register", "login", "login_failed", "logout", "user_update",
                 "user_delete", "user_view", "audit_view")

CREDENTIALS_DETAIL = "Could not validate credentials"
LOGIN_FAILED_DETAIL = "Incorrect email or password"


@dataclass(frozen=True)
class ApiConfig:
    jwt_secret: bytes
    token_ttl: int = tokens.DEFAULT_TTL_SECONDS
    store_uri: str = "memory://"
    gateway_addr: str = ""
    bind_addr: str = "127.0.0.1:8000"

    @classmethod
    def from_env(cls, env=os.environ) -> "ApiConfig":
        secret = env.get("IDENTITY_JWT_SECRET")
        store_uri = env.get("STORE_URI")
        gateway_addr = env.get("CHAIN_GATEWAY_ADDR")
        missing = [name for name, value in [
            ("IDENTITY_JWT_SECRET", secret),
            ("STORE_URI", store_uri),
            ("CHAIN_GATEWAY_ADDR", gateway_addr),
        ] if not value]
        if missing:
            raise RuntimeError(f"missing required env vars: {missing}")
        return cls(
            jwt_secret=secret.encode(),
            token_ttl=int(env.get("IDENTITY_TOKEN_TTL_SECONDS",
                                  tokens.DEFAULT_TTL_SECONDS)),
            store_uri=store_uri,
            gateway_addr=gateway_addr,
            bind_addr=env.get("BIND_ADDR", "127.0.0.1:8000"),
        )


def create_app(config: ApiConfig, store, gateway, clock=None) -> FastAPI:
    """Build the API around an already-connected store and gateway client."""
    clock = clock or (lambda: int(time.time()))
    revocations = tokens.RevocationList(store)

    app = FastAPI(title="identity-api", docs_url=None, redoc_url=None,
                  openapi_url=None)
    app.state.store = store
    app.state.gateway = gateway
    app.state.revocations = revocations

    # -- helpers -------------------------------------------------------------

    def now_iso() -> str:
        return datetime.fromtimestamp(clock(), tz=timezone.utc).isoformat()

    def audit(actor: str, action: str, resource_id: str | None = None,
              outcome: str = "success", chain_tx_hash: str | None = None,
              detail: str | None = None):
        assert action in AUDIT_ACTIONS
        store.insert("audit_logs", {
            "timestamp": now_iso(),
            "actor": actor,
            "action": action,
            "resource_id": resource_id,
            "outcome": outcome,
            "chain_tx_hash": chain_tx_hash,
            "detail": detail,
        })

    async def body_of(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(422, detail="request body must be JSON")
        if not isinstance(body, dict):
            raise HTTPException(422, detail="request body must be an object")
        return body

    def require_auth(request: Request) -> str:
        header = request.headers.get("Authorization", "")
        if not header.startswith("Bearer "):
            raise HTTPException(401, detail=CREDENTIALS_DETAIL)
        token = header[len("Bearer "):]
        try:
            subject = tokens.decode_token(token, config.jwt_secret, clock())
        except tokens.TokenError:
            raise HTTPException(401, detail=CREDENTIALS_DETAIL) from None
        if revocations.is_revoked(token):
            raise HTTPException(401, detail=CREDENTIALS_DETAIL)
        request.state.token = token
        return subject

    def public_user(doc: dict) -> dict:
        b = doc["body"]
        return {
            "user_id": b["user_id"],
            "name": b["name"],
            "cpf": identity.mask_cpf(b["cpf"]),
            "email": b["email"],
            "created_at": b["created_at"],
            "chain_tx_hash": b.get("chain_tx_hash"),
        }

    def user_doc_or_404(user_id: str) -> dict:
        docs = store.find_by("users", "user_id", user_id)
        if not docs:
            raise HTTPException(404, detail="user not found")
        return docs[0]

    # -- auth routes ---------------------------------------------------------

    @app.post("/auth/register", status_code=201)
    async def register(request: Request):
        body = await body_of(request)
        req = identity.RegistrationRequest(
            name=str(body.get("name", "")),
            cpf=str(body.get("cpf", "")),
            email=str(body.get("email", "")),
            password=str(body.get("password", "")),
        )
        problems = req.validate()
        if problems:
            field, problem = next(iter(problems.items()))
            raise HTTPException(422, detail=f"{field}: {problem}")

        cpf = identity.normalize_cpf(req.cpf)
        email = req.email.lower()
        user = {
            "user_id": uuid.uuid4().hex,
            "name": req.name,
            "cpf": cpf,
            "email": email,
            "password_hash": identity.hash_password(req.password),
            "created_at": now_iso(),
            "chain_tx_hash": None,
        }
        try:
            doc = store.insert("users", user)
        except DuplicateKey as e:
            audit("anonymous", "register", outcome="failure",
                  detail=f"duplicate {e.field}")
            raise HTTPException(409, detail=f"{e.field} already registered")

        # Chain anchoring is best-effort: local registration stands even when
        # the chain is down; the failure is recorded in the audit entry and
        # anchor-retry can re-anchor later.
        chain_tx_hash = None
        chain_error = None
        try:
            result = gateway.register_user(user["user_id"], email, cpf)
            if result.ok:
                chain_tx_hash = result.transaction_hash
            else:
                chain_error = result.error
        except Exception as e:
            chain_error = str(e)
        if chain_tx_hash:
            doc["body"]["chain_tx_hash"] = chain_tx_hash
            doc = store.update("users", doc["id"], doc["body"])
        audit("anonymous", "register", resource_id=user["user_id"],
              chain_tx_hash=chain_tx_hash,
              detail=f"chain anchoring failed: {chain_error}"
              if chain_error else None)
        return JSONResponse(public_user(doc), status_code=201)

    @app.post("/auth/login")
    async def login(request: Request):
        body = await body_of(request)
        email = str(body.get("email", "")).lower()
        password = str(body.get("password", ""))
        docs = store.find_by("users", "email", email)
        ok = False
        if docs:
            try:
                ok = identity.verify_password(password,
                                              docs[0]["body"]["password_hash"])
            except identity.MalformedHashError:
                ok = False
        if not ok:
            audit(email or "anonymous", "login_failed", outcome="failure")
            raise HTTPException(401, detail=LOGIN_FAILED_DETAIL)
        token = tokens.create_access_token(email, config.token_ttl,
                                           config.jwt_secret, clock())
        audit(email, "login")
        return {"access_token": token, "token_type": "bearer",
                "expires_in": config.token_ttl}

    @app.post("/auth/logout", status_code=204)
    def logout(request: Request, actor: str = Depends(require_auth)):
        revocations.revoke(request.state.token, clock())
        audit(actor, "logout")
        return Response(status_code=204)

    # -- user management -----------------------------------------------------

    @app.get("/users")
    def list_users(offset: int = 0, limit: int = 100,
                   actor: str = Depends(require_auth)):
        try:
            docs, total = store.list("users", offset, limit)
        except PageBounds:
            raise HTTPException(422, detail="invalid pagination")
        audit(actor, "user_view")
        return {"users": [public_user(d) for d in docs], "total": total}

    @app.get("/users/{user_id}")
    def get_user(user_id: str, actor: str = Depends(require_auth)):
        doc = user_doc_or_404(user_id)
        audit(actor, "user_view", resource_id=user_id)
        return public_user(doc)

    @app.put("/users/{user_id}")
    async def update_user(user_id: str, request: Request,
                          actor: str = Depends(require_auth)):
        body = await body_of(request)
        doc = user_doc_or_404(user_id)
        current = doc["body"]
        if "cpf" in body:
            try:
                same = identity.normalize_cpf(str(body["cpf"])) == current["cpf"]
            except identity.CpfLengthError:
                same = False
            if not same:
                raise HTTPException(422, detail="cpf immutable")
        new_body = dict(current)
        if "name" in body:
            if not str(body["name"]).strip():
                raise HTTPException(422, detail="name: name must not be empty")
            new_body["name"] = str(body["name"])
        if "email" in body:
            email = str(body["email"]).lower()
            if not identity.validate_email(email):
                raise HTTPException(422,
                                    detail="email: email address is not valid")
            new_body["email"] = email
        try:
            updated = store.update("users", doc["id"], new_body)
        except DuplicateKey as e:
            raise HTTPException(409, detail=f"{e.field} already registered")
        audit(actor, "user_update", resource_id=user_id)
        return public_user(updated)

    @app.delete("/users/{user_id}", status_code=204)
    def delete_user(user_id: str, actor: str = Depends(require_auth)):
        doc = user_doc_or_404(user_id)
        store.delete("users", doc["id"])
        audit(actor, "user_delete", resource_id=user_id)
        return Response(status_code=204)

    # -- audit ---------------------------------------------------------------

    @app.get("/audit")
    def read_audit(offset: int = 0, limit: int = 100,
                   actor: str = Depends(require_auth)):
        if offset < 0 or not 1 <= limit <= 500:
            raise HTTPException(422, detail="invalid pagination")
        docs, total = store.list("audit_logs", 0, 500)
        while len(docs) < total:
            more, total = store.list("audit_logs", len(docs), 500)
            docs.extend(more)
        newest_first = [d["body"] for d in reversed(docs)]
        page = newest_first[offset:offset + limit]
        audit(actor, "audit_view")
        return {"entries": page, "total": total}

    # -- health --------------------------------------------------------------

    @app.get("/health")
    def health():
        store_ok = False
        try:
            store_ok = store.ping()
        except Exception:
            pass
        chain_ok = False
        try:
            chain_ok = gateway.health().chain_ok
        except Exception:
            pass
        return {"store": "ok" if store_ok else "down",
                "chain": "ok" if chain_ok else "down"}

    return app
