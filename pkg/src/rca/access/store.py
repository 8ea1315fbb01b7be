"""Grant storage and the allow/deny decision.

Default deny. A home-level grant covers every item in that home; Write
never implies Read. Grant and revoke are idempotent and journaled for
replay and audit.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional

from ..clock import Clock, SYSTEM_CLOCK
from ..domain import AccessMode, home_key_of, parse_access_item
from ..journal import Journal


@dataclass(frozen=True)
class Grant:
    username: str
    accessItem: str
    mode: AccessMode
    grantedBy: str
    grantedAt: int

    def to_json(self) -> dict:
        return {"username": self.username, "accessItem": self.accessItem,
                "mode": self.mode.value, "grantedBy": self.grantedBy,
                "grantedAt": self.grantedAt}


class GrantStore:
    def __init__(self, journal_path: Optional[str] = None, clock: Clock = SYSTEM_CLOCK):
        self.clock = clock
        self._lock = threading.Lock()
        self._grants: dict[tuple[str, str, AccessMode], Grant] = {}
        self._journal = Journal(journal_path, flush_every=1)
        for record in self._journal.replay():
            self._apply(record)

    def _apply(self, rec: dict):
        key = (rec["username"], rec["accessItem"], AccessMode(rec["mode"]))
        if rec.get("op") == "grant":
            self._grants[key] = Grant(username=key[0], accessItem=key[1], mode=key[2],
                                      grantedBy=rec.get("grantedBy", ""),
                                      grantedAt=int(rec.get("grantedAt", 0)))
        elif rec.get("op") == "revoke":
            self._grants.pop(key, None)

    def grant(self, actor: str, username: str, access_item: str, mode: AccessMode) -> Grant:
        parse_access_item(access_item)  # raises MalformedIdentifier
        key = (username, access_item, mode)
        with self._lock:
            existing = self._grants.get(key)
            if existing is not None:
                return existing
            record = Grant(username=username, accessItem=access_item, mode=mode,
                           grantedBy=actor, grantedAt=self.clock.now_ms())
            self._grants[key] = record
            self._journal.append({"op": "grant", "username": username,
                                  "accessItem": access_item, "mode": mode.value,
                                  "grantedBy": actor, "grantedAt": record.grantedAt})
            return record

    def revoke(self, actor: str, username: str, access_item: str, mode: AccessMode):
        key = (username, access_item, mode)
        with self._lock:
            if key in self._grants:
                del self._grants[key]
                self._journal.append({"op": "revoke", "username": username,
                                      "accessItem": access_item, "mode": mode.value,
                                      "grantedBy": actor,
                                      "grantedAt": self.clock.now_ms()})

    def check(self, username: str, access_item: str, mode: AccessMode) -> bool:
        parse_access_item(access_item)
        home_key = home_key_of(access_item)
        with self._lock:
            if (username, access_item, mode) in self._grants:
                return True
            return home_key != access_item and (username, home_key, mode) in self._grants

    def grants_for(self, username: str) -> list[Grant]:
        with self._lock:
            out = [g for (u, _, _), g in self._grants.items() if u == username]
        return sorted(out, key=lambda g: (g.accessItem, g.mode.value))

    def close(self):
        self._journal.close()
