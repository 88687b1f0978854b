"""JWT (HS256) creation, validation, and logout revocation.

Tokens are compact JWS strings. The revocation denylist is keyed by token
digest and persisted to the document store so every API replica sees it.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import threading
from dataclasses import dataclass

DEFAULT_TTL_SECONDS = 30 * 60


class TokenError(Exception):
    """Base class for token validation failures."""


class ExpiredToken(TokenError):
    pass


class BadSignature(TokenError):
    pass


class MalformedToken(TokenError):
    pass


class MissingSubject(TokenError):
    pass


class EmptySecret(ValueError):
    pass


def _b64url(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode()


def _b64url_decode(segment: str) -> bytes:
    pad = "=" * (-len(segment) % 4)
    return base64.urlsafe_b64decode(segment + pad)


def _sign(signing_input: bytes, secret: bytes) -> bytes:
    return hmac.new(secret, signing_input, hashlib.sha256).digest()


def create_access_token(subject: str, ttl_seconds: int, secret: bytes,
                        now: int) -> str:
    """Issue a compact HS256 token with sub/exp claims."""
    if not secret:
        raise EmptySecret("JWT secret must not be empty")
    if ttl_seconds <= 0:
        raise ValueError("ttl must be positive")
    header = _b64url(json.dumps(
        {"alg": "HS256", "typ": "JWT"}, separators=(",", ":")).encode())
    payload = _b64url(json.dumps(
        {"sub": subject, "exp": now + ttl_seconds},
        separators=(",", ":")).encode())
    signing_input = f"{header}.{payload}".encode()
    return f"{header}.{payload}.{_b64url(_sign(signing_input, secret))}"


def decode_token(token: str, secret: bytes, now: int) -> str:
    """Return the subject claim iff signature, expiry, and sub all check out."""
    parts = token.split(".")
    if len(parts) != 3:
        raise MalformedToken("token is not a three-segment JWS")
    header_b64, payload_b64, sig_b64 = parts
    try:
        header = json.loads(_b64url_decode(header_b64))
        payload = json.loads(_b64url_decode(payload_b64))
        signature = _b64url_decode(sig_b64)
    except (ValueError, UnicodeDecodeError):
        raise MalformedToken("token segments do not decode") from None
    if not isinstance(header, dict) or header.get("alg") != "HS256":
        raise MalformedToken("unsupported token algorithm")
    expected = _sign(f"{header_b64}.{payload_b64}".encode(), secret)
    if not hmac.compare_digest(signature, expected):
        raise BadSignature("token signature does not verify")
    exp = payload.get("exp")
    if not isinstance(exp, int) or now >= exp:
        raise ExpiredToken("token is expired")
    subject = payload.get("sub")
    if not subject:
        raise MissingSubject("token carries no subject claim")
    return subject


def token_digest(token: str) -> str:
    return hashlib.sha256(token.encode()).hexdigest()


def token_expiry(token: str) -> int:
    """Expiry claim without signature verification; for revocation records."""
    parts = token.split(".")
    if len(parts) != 3:
        raise MalformedToken("token is not a three-segment JWS")
    try:
        payload = json.loads(_b64url_decode(parts[1]))
        return int(payload["exp"])
    except (ValueError, KeyError, TypeError):
        raise MalformedToken("token payload carries no expiry") from None


@dataclass(frozen=True)
class RevocationEntry:
    token_digest: str
    revoked_at: int
    expires_at: int


class RevocationList:
    """Denylist of logged-out tokens, persisted via the document store.

    The in-memory cache makes the common is_revoked miss cheap; the store is
    the source of truth shared across replicas. Revoking the same token twice
    is idempotent.
    """

    def __init__(self, store):
        self._store = store
        self._cache: set[str] = set()
        self._lock = threading.Lock()
        for doc in store.list("revocations", 0, 500)[0]:
            self._cache.add(doc["body"]["token_digest"])

    def revoke(self, token: str, now: int) -> RevocationEntry:
        entry = RevocationEntry(token_digest(token), now, token_expiry(token))
        with self._lock:
            if entry.token_digest not in self._cache:
                from .store import DuplicateKey
                try:
                    self._store.insert("revocations", {
                        "token_digest": entry.token_digest,
                        "revoked_at": entry.revoked_at,
                        "expires_at": entry.expires_at,
                    })
                except DuplicateKey:
                    pass  # another replica won the race; same outcome
                self._cache.add(entry.token_digest)
        return entry

    def is_revoked(self, token: str) -> bool:
        digest = token_digest(token)
        with self._lock:
            if digest in self._cache:
                return True
        found = bool(self._store.find_by("revocations", "token_digest", digest))
        if found:
            with self._lock:
                self._cache.add(digest)
        return found

    def purge_expired(self, now: int) -> int:
        """Drop revocations whose tokens are already past expiry.

        Safe because decode rejects expired tokens regardless of the denylist.
        """
        purged = 0
        docs, _total = self._store.list("revocations", 0, 500)
        for doc in docs:
            if doc["body"]["expires_at"] <= now:
                self._store.delete("revocations", doc["id"])
                with self._lock:
                    self._cache.discard(doc["body"]["token_digest"])
                purged += 1
        return purged
