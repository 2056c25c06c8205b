"""Login sessions.

Tokens are 128-bit random urlsafe strings with an 8-hour lifetime. Login
failure is indistinguishable between unknown usernames and wrong secrets:
both paths perform the same hash work and return the same error.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

from blockclass.clock import Clock
from blockclass.domain.model import Role, User
from blockclass.errors import BadCredentials, TokenExpired
from blockclass.security import DUMMY_HASH, DUMMY_SALT, verify_secret

TOKEN_TTL_MS = 8 * 60 * 60 * 1000

_LOGIN_FAILED = "invalid username or secret"


@dataclass
class SessionToken:
    token: str
    user_id: str
    role: Role
    issued_at: int
    expires_at: int


class SessionStore:
    def __init__(self, clock: Clock, ttl_ms: int = TOKEN_TTL_MS):
        self.clock = clock
        self.ttl_ms = ttl_ms
        self._tokens: dict[str, SessionToken] = {}

    def issue(self, user: User) -> SessionToken:
        now = self.clock.now_ms()
        token = SessionToken(
            token=secrets.token_urlsafe(16),
            user_id=user.user_id,
            role=user.role,
            issued_at=now,
            expires_at=now + self.ttl_ms,
        )
        self._tokens[token.token] = token
        return token

    def resolve(self, token: str) -> SessionToken:
        session = self._tokens.get(token)
        if session is None:
            raise BadCredentials("invalid token")
        if self.clock.now_ms() >= session.expires_at:
            del self._tokens[token]
            raise TokenExpired("session expired; log in again")
        return session

    def revoke(self, token: str) -> None:
        self._tokens.pop(token, None)


def authenticate(users: dict[str, User], store: SessionStore, username: str, secret: str) -> SessionToken:
    user = users.get(username)
    if user is None:
        # burn the same hashing cost as a real check
        verify_secret(secret, DUMMY_SALT, DUMMY_HASH)
        raise BadCredentials(_LOGIN_FAILED)
    if not verify_secret(secret, user.credential_salt, user.credential_hash):
        raise BadCredentials(_LOGIN_FAILED)
    return store.issue(user)
