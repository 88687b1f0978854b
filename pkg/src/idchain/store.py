"""Document persistence for the `users`, `audit_logs`, and `revocations`
collections.

Two interchangeable backends sit behind one interface: an embedded store
(in-memory, or file-backed with an append-only JSON-lines log per collection)
for tests and the CLI, and a remote client that talks to a standalone
doc-store HTTP service for container deployments. `connect` retries with
exponential backoff before giving up.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger("idchain.store")

COLLECTIONS = ("users", "audit_logs", "revocations")

_REQUIRED_FIELDS = {
    "users": {"user_id", "name", "cpf", "email", "password_hash", "created_at"},
    "audit_logs": {"timestamp", "actor", "action", "outcome"},
    "revocations": {"token_digest", "revoked_at", "expires_at"},
}

_UNIQUE_FIELDS = {
    "users": ("user_id", "email", "cpf"),
    "audit_logs": (),
    "revocations": ("token_digest",),
}

# audit_logs is append-only: no update/delete grant exists for it.
_IMMUTABLE_COLLECTIONS = {"audit_logs"}


class StoreError(Exception):
    pass


class UnknownCollection(StoreError):
    pass


class SchemaViolation(StoreError):
    pass


class DuplicateKey(StoreError):
    def __init__(self, field: str):
        super().__init__(f"duplicate value for unique field '{field}'")
        self.field = field


class NotFound(StoreError):
    pass


class PageBounds(StoreError):
    pass


class AppendOnlyViolation(StoreError):
    pass


class ConnectionExhausted(StoreError):
    pass


@dataclass(frozen=True)
class StoreConfig:
    uri: str
    database_name: str = "identity_system"
    max_retries: int = 3
    backoff_base: float = 0.25

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.backoff_base <= 0:
            raise ValueError("backoff_base must be > 0")


def _check_collection(name: str):
    if name not in COLLECTIONS:
        raise UnknownCollection(name)


def _check_schema(collection: str, body: dict):
    missing = _REQUIRED_FIELDS[collection] - set(body)
    if missing:
        raise SchemaViolation(
            f"{collection} document missing fields: {sorted(missing)}")


class MemoryStore:
    """Embedded store; all operations atomic under one lock."""

    def __init__(self):
        self._lock = threading.RLock()
        # collection -> id -> document dict {id, body, version}
        self._docs: dict[str, dict[str, dict]] = {c: {} for c in COLLECTIONS}

    # journal hook for the file-backed subclass
    def _journal(self, collection: str, op: str, doc: dict):
        pass

    def insert(self, collection: str, body: dict) -> dict:
        _check_collection(collection)
        _check_schema(collection, body)
        with self._lock:
            for field in _UNIQUE_FIELDS[collection]:
                value = body.get(field)
                for doc in self._docs[collection].values():
                    if doc["body"].get(field) == value:
                        raise DuplicateKey(field)
            doc = {"id": uuid.uuid4().hex, "body": dict(body), "version": 1}
            self._docs[collection][doc["id"]] = doc
            self._journal(collection, "insert", doc)
            return dict(doc)

    def find_by(self, collection: str, field: str, value) -> list[dict]:
        _check_collection(collection)
        with self._lock:
            return [dict(d) for d in self._docs[collection].values()
                    if d["body"].get(field) == value]

    def get(self, collection: str, doc_id: str) -> dict:
        _check_collection(collection)
        with self._lock:
            doc = self._docs[collection].get(doc_id)
            if doc is None:
                raise NotFound(doc_id)
            return dict(doc)

    def update(self, collection: str, doc_id: str, new_body: dict) -> dict:
        _check_collection(collection)
        if collection in _IMMUTABLE_COLLECTIONS:
            raise AppendOnlyViolation(f"{collection} is append-only")
        _check_schema(collection, new_body)
        with self._lock:
            doc = self._docs[collection].get(doc_id)
            if doc is None:
                raise NotFound(doc_id)
            for field in _UNIQUE_FIELDS[collection]:
                value = new_body.get(field)
                for other in self._docs[collection].values():
                    if other["id"] != doc_id and other["body"].get(field) == value:
                        raise DuplicateKey(field)
            doc["body"] = dict(new_body)
            doc["version"] += 1
            self._journal(collection, "update", doc)
            return dict(doc)

    def delete(self, collection: str, doc_id: str) -> bool:
        _check_collection(collection)
        if collection in _IMMUTABLE_COLLECTIONS:
            raise AppendOnlyViolation(f"{collection} is append-only")
        with self._lock:
            if doc_id not in self._docs[collection]:
                raise NotFound(doc_id)
            doc = self._docs[collection].pop(doc_id)
            self._journal(collection, "delete", doc)
            return True

    def list(self, collection: str, offset: int, limit: int) -> tuple[list[dict], int]:
        _check_collection(collection)
        if offset < 0 or not 1 <= limit <= 500:
            raise PageBounds(f"offset={offset} limit={limit}")
        with self._lock:
            docs = list(self._docs[collection].values())
            return [dict(d) for d in docs[offset:offset + limit]], len(docs)

    def ping(self) -> bool:
        return True

    def close(self):
        pass


class FileStore(MemoryStore):
    """Append-only JSON-lines journal per collection, replayed on open."""

    def __init__(self, directory: str | Path):
        super().__init__()
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._files = {}
        for collection in COLLECTIONS:
            path = self._dir / f"{collection}.jsonl"
            if path.exists():
                self._replay(collection, path)
            self._files[collection] = path.open("a")

    def _replay(self, collection: str, path: Path):
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            doc = record["doc"]
            if record["op"] == "delete":
                self._docs[collection].pop(doc["id"], None)
            else:
                self._docs[collection][doc["id"]] = doc

    def _journal(self, collection: str, op: str, doc: dict):
        fh = self._files[collection]
        fh.write(json.dumps({"op": op, "doc": doc}) + "\n")
        fh.flush()

    def close(self):
        for fh in self._files.values():
            fh.close()


class RemoteStore:
    """Client for the standalone doc-store HTTP service."""

    def __init__(self, base_url: str):
        import httpx
        self._client = httpx.Client(base_url=base_url.rstrip("/"), timeout=10.0)

    _ERRORS = {
        "unknown_collection": UnknownCollection,
        "schema_violation": SchemaViolation,
        "not_found": NotFound,
        "page_bounds": PageBounds,
        "append_only": AppendOnlyViolation,
    }

    def _call(self, path: str, payload: dict):
        resp = self._client.post(path, json=payload)
        data = resp.json()
        if resp.status_code != 200:
            kind = data.get("error")
            if kind == "duplicate_key":
                raise DuplicateKey(data["field"])
            raise self._ERRORS.get(kind, StoreError)(data.get("detail", ""))
        return data

    def insert(self, collection, body):
        return self._call("/op/insert", {"collection": collection, "body": body})

    def find_by(self, collection, field, value):
        return self._call("/op/find_by", {"collection": collection,
                                          "field": field, "value": value})

    def get(self, collection, doc_id):
        return self._call("/op/get", {"collection": collection, "id": doc_id})

    def update(self, collection, doc_id, new_body):
        return self._call("/op/update", {"collection": collection,
                                         "id": doc_id, "body": new_body})

    def delete(self, collection, doc_id):
        return self._call("/op/delete", {"collection": collection, "id": doc_id})

    def list(self, collection, offset, limit):
        data = self._call("/op/list", {"collection": collection,
                                       "offset": offset, "limit": limit})
        return data["docs"], data["total"]

    def ping(self) -> bool:
        try:
            return self._client.get("/health").status_code == 200
        except Exception:
            return False

    def close(self):
        self._client.close()


def open_backend(config: StoreConfig):
    """Open the backend named by the config URI; raises ConnectionError when
    the backend is unreachable (retried by `connect`)."""
    uri = config.uri
    if uri.startswith("memory://"):
        return MemoryStore()
    if uri.startswith("file://"):
        return FileStore(Path(uri[len("file://"):]) / config.database_name)
    if uri.startswith("http://") or uri.startswith("https://"):
        store = RemoteStore(uri)
        if not store.ping():
            store.close()
            raise ConnectionError(f"doc-store not reachable at {uri}")
        return store
    raise ValueError(f"unsupported store URI: {uri}")


def connect(config: StoreConfig, sleep=time.sleep, opener=open_backend):
    """Open a store handle, retrying with exponential backoff.

    Attempt n (0-based) failures wait backoff_base * 2^n before the next try;
    after max_retries consecutive failures the final error surfaces as
    ConnectionExhausted.
    """
    last_error = None
    for attempt in range(config.max_retries + 1):
        try:
            handle = opener(config)
            log.info("store connected uri=%s attempt=%d", config.uri, attempt)
            return handle
        except ConnectionError as e:
            last_error = e
            log.warning("store connection failed uri=%s attempt=%d error=%s",
                        config.uri, attempt, e)
            if attempt < config.max_retries:
                sleep(config.backoff_base * (2 ** attempt))
    raise ConnectionExhausted(
        f"gave up after {config.max_retries + 1} attempts: {last_error}")


def build_server_app(store: MemoryStore):
    """FastAPI app exposing the store as a service (the deployment backend)."""
    app = FastAPI(title="doc-store", docs_url=None, redoc_url=None,
                  openapi_url=None)

    kinds = {
        UnknownCollection: ("unknown_collection", 400),
        SchemaViolation: ("schema_violation", 400),
        NotFound: ("not_found", 404),
        PageBounds: ("page_bounds", 400),
        AppendOnlyViolation: ("append_only", 403),
    }

    def run(fn):
        try:
            return JSONResponse(fn())
        except DuplicateKey as e:
            return JSONResponse({"error": "duplicate_key", "field": e.field},
                                status_code=409)
        except StoreError as e:
            kind, code = kinds.get(type(e), ("store_error", 500))
            return JSONResponse({"error": kind, "detail": str(e)},
                                status_code=code)

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/op/insert")
    async def op_insert(request: Request):
        p = await request.json()
        return run(lambda: store.insert(p["collection"], p["body"]))

    @app.post("/op/find_by")
    async def op_find_by(request: Request):
        p = await request.json()
        return run(lambda: store.find_by(p["collection"], p["field"], p["value"]))

    @app.post("/op/get")
    async def op_get(request: Request):
        p = await request.json()
        return run(lambda: store.get(p["collection"], p["id"]))

    @app.post("/op/update")
    async def op_update(request: Request):
        p = await request.json()
        return run(lambda: store.update(p["collection"], p["id"], p["body"]))

    @app.post("/op/delete")
    async def op_delete(request: Request):
        p = await request.json()
        return run(lambda: store.delete(p["collection"], p["id"]))

    @app.post("/op/list")
    async def op_list(request: Request):
        p = await request.json()

        def do():
            docs, total = store.list(p["collection"], p["offset"], p["limit"])
            return {"docs": docs, "total": total}
        return run(do)

    return app
