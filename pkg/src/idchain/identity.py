"""Domain rules for identities: CPF normalization and check digits, email
syntax, password hashing, and the user record shapes shared by the API and
the chain gateway."""

from __future__ import annotations

import hashlib
import hmac
import os
import re
from dataclasses import dataclass, field

PBKDF2_SCHEME = "pbkdf2_sha256"
PBKDF2_ITERATIONS = 100_000
SALT_BYTES = 16

# Deliberately conservative: one non-empty local part, dotted domain labels,
# alphanumeric TLD of 2+ chars. Not full RFC 5322.
_EMAIL_RE = re.compile(
    r"^[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}$"
)


class CpfLengthError(ValueError):
    """Raised when a CPF does not contain exactly 11 digits."""


class EmptyPasswordError(ValueError):
    """Raised when an empty password is offered for hashing."""


class MalformedHashError(ValueError):
    """Raised when an encoded password hash does not parse."""


def normalize_cpf(raw: str) -> str:
    """Strip punctuation from a CPF, returning its 11 digits."""
    digits = re.sub(r"\D", "", raw)
    if len(digits) != 11:
        raise CpfLengthError(f"CPF must have 11 digits, got {len(digits)}")
    return digits


def _cpf_check_digit(digits: str, weights: range) -> int:
    total = sum(int(d) * w for d, w in zip(digits, weights))
    d = 11 - (total % 11)
    return 0 if d >= 10 else d


def validate_cpf(cpf: str) -> bool:
    """Mod-11 check-digit validation on an already normalized CPF.

    All-identical digit strings are rejected even when their check digits
    verify arithmetically.
    """
    if len(cpf) != 11 or not cpf.isdigit():
        return False
    if cpf == cpf[0] * 11:
        return False
    d1 = _cpf_check_digit(cpf[:9], range(10, 1, -1))
    d2 = _cpf_check_digit(cpf[:10], range(11, 1, -1))
    return int(cpf[9]) == d1 and int(cpf[10]) == d2


def validate_email(email: str) -> bool:
    return bool(_EMAIL_RE.match(email))


def hash_password(password: str, salt: bytes | None = None,
                  iterations: int = PBKDF2_ITERATIONS) -> str:
    """PBKDF2-HMAC-SHA256 with a self-describing encoding.

    Format: ``pbkdf2_sha256$<iterations>$<salt_hex>$<digest_hex>``.
    """
    if not password:
        raise EmptyPasswordError("password must not be empty")
    if salt is None:
        salt = os.urandom(SALT_BYTES)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), salt, iterations)
    return f"{PBKDF2_SCHEME}${iterations}${salt.hex()}${digest.hex()}"


def verify_password(password: str, encoded: str) -> bool:
    parts = encoded.split("$")
    if len(parts) != 4 or parts[0] != PBKDF2_SCHEME:
        raise MalformedHashError("unrecognized password hash encoding")
    try:
        iterations = int(parts[1])
        salt = bytes.fromhex(parts[2])
        expected = bytes.fromhex(parts[3])
    except ValueError as e:
        raise MalformedHashError(str(e)) from None
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), salt, iterations)
    return hmac.compare_digest(digest, expected)


def mask_cpf(cpf: str) -> str:
    """Presentation masking: first 3 and last 2 digits visible."""
    return f"{cpf[:3]}.***.***-{cpf[9:]}"


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    name: str
    cpf: str
    email: str
    password_hash: str
    created_at: str
    chain_tx_hash: str | None = None

    def public(self) -> dict:
        """Projection safe to return from the API: no password material."""
        return {
            "user_id": self.user_id,
            "name": self.name,
            "cpf": mask_cpf(self.cpf),
            "email": self.email,
            "created_at": self.created_at,
            "chain_tx_hash": self.chain_tx_hash,
        }


@dataclass(frozen=True)
class RegistrationRequest:
    name: str
    cpf: str
    email: str
    password: str

    def validate(self) -> dict[str, str]:
        """Field name -> problem description; empty when acceptable."""
        problems: dict[str, str] = {}
        if not self.name.strip():
            problems["name"] = "name must not be empty"
        try:
            cpf = normalize_cpf(self.cpf)
            if not validate_cpf(cpf):
                problems["cpf"] = "CPF check digits do not verify"
        except CpfLengthError as e:
            problems["cpf"] = str(e)
        if not validate_email(self.email):
            problems["email"] = "email address is not valid"
        if len(self.password) < 8:
            problems["password"] = "password must be at least 8 characters"
        return problems
