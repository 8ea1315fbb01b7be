"""User store: salted iterated password hashes over an append-only journal."""

from __future__ import annotations

import hashlib
import hmac
import os
import threading
from dataclasses import dataclass

from ..clock import Clock, SYSTEM_CLOCK
from ..errors import RcaError
from ..journal import Journal

ROLES = {"admin", "caregiver", "relative"}
DEFAULT_ITERATIONS = 100_000
MIN_PASSWORD_BYTES = 8
MAX_USERNAME_BYTES = 64


class WeakPassword(RcaError):
    pass


class DuplicateUser(RcaError):
    pass


class UnknownUser(RcaError):
    pass


class BadUser(RcaError):
    pass


@dataclass
class UserRecord:
    username: str
    salt: bytes
    passwordHash: bytes
    iterations: int
    roles: frozenset[str]
    createdAt: int


def _hash_password(password: str, salt: bytes, iterations: int) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode(), salt, iterations)


class UserStore:
    def __init__(self, journal_path=None, iterations: int = DEFAULT_ITERATIONS,
                 clock: Clock = SYSTEM_CLOCK):
        self.iterations = iterations
        self.clock = clock
        self._lock = threading.Lock()
        self._users: dict[str, UserRecord] = {}
        self._journal = Journal(journal_path, flush_every=1)
        for record in self._journal.replay():
            self._apply(record)

    def _apply(self, rec: dict):
        op = rec.get("op")
        if op == "create":
            self._users[rec["username"]] = UserRecord(
                username=rec["username"],
                salt=bytes.fromhex(rec["salt"]),
                passwordHash=bytes.fromhex(rec["hash"]),
                iterations=int(rec["iterations"]),
                roles=frozenset(rec["roles"]),
                createdAt=int(rec["createdAt"]),
            )
        elif op == "passwd":
            user = self._users.get(rec["username"])
            if user is not None:
                user.salt = bytes.fromhex(rec["salt"])
                user.passwordHash = bytes.fromhex(rec["hash"])
                user.iterations = int(rec["iterations"])

    def create(self, username: str, password: str, roles) -> UserRecord:
        roles = frozenset(roles)
        if (not username or len(username.encode()) > MAX_USERNAME_BYTES
                or not roles or not roles <= ROLES):
            raise BadUser("bad username or roles")
        if len(password.encode()) < MIN_PASSWORD_BYTES:
            raise WeakPassword("password must be at least %d bytes" % MIN_PASSWORD_BYTES)
        with self._lock:
            if username in self._users:
                raise DuplicateUser(username)
            salt = os.urandom(16)
            record = UserRecord(
                username=username, salt=salt,
                passwordHash=_hash_password(password, salt, self.iterations),
                iterations=self.iterations, roles=roles,
                createdAt=self.clock.now_ms(),
            )
            self._users[username] = record
            self._journal.append({"op": "create", "username": username,
                                  "salt": salt.hex(),
                                  "hash": record.passwordHash.hex(),
                                  "iterations": self.iterations,
                                  "roles": sorted(roles),
                                  "createdAt": record.createdAt})
            return record

    def set_password(self, username: str, password: str):
        if len(password.encode()) < MIN_PASSWORD_BYTES:
            raise WeakPassword("password must be at least %d bytes" % MIN_PASSWORD_BYTES)
        with self._lock:
            user = self._users.get(username)
            if user is None:
                raise UnknownUser(username)
            salt = os.urandom(16)
            user.salt = salt
            user.passwordHash = _hash_password(password, salt, self.iterations)
            user.iterations = self.iterations
            self._journal.append({"op": "passwd", "username": username,
                                  "salt": salt.hex(), "hash": user.passwordHash.hex(),
                                  "iterations": self.iterations})

    def verify(self, username: str, password: str):
        """UserRecord on a credential match, None otherwise. The caller must
        not distinguish unknown-user from wrong-password."""
        with self._lock:
            user = self._users.get(username)
        if user is None:
            # Burn comparable time so timing does not leak user existence.
            _hash_password(password, b"\x00" * 16, self.iterations)
            return None
        candidate = _hash_password(password, user.salt, user.iterations)
        if hmac.compare_digest(candidate, user.passwordHash):
            return user
        return None

    def get(self, username: str):
        with self._lock:
            return self._users.get(username)

    def exists(self, username: str) -> bool:
        return self.get(username) is not None

    def close(self):
        self._journal.close()
