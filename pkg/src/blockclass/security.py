"""Credential hashing and constant-time verification."""

from __future__ import annotations

import hashlib
import hmac

PBKDF2_ITERATIONS = 20_000

# Fixed-cost comparison target for unknown usernames, so login timing does
# not reveal whether an account exists.
DUMMY_SALT = "0" * 32
DUMMY_HASH = hashlib.pbkdf2_hmac(
    "sha256", b"placeholder", bytes.fromhex(DUMMY_SALT), PBKDF2_ITERATIONS
).hex()


def hash_secret(secret: str, salt_hex: str) -> str:
    return hashlib.pbkdf2_hmac(
        "sha256", secret.encode("utf-8"), bytes.fromhex(salt_hex), PBKDF2_ITERATIONS
    ).hex()


def verify_secret(secret: str, salt_hex: str, expected_hash: str) -> bool:
    candidate = hash_secret(secret, salt_hex)
    return hmac.compare_digest(candidate, expected_hash)
