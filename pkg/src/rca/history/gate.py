"""Cached read-access decisions against the access-control service.

Point checks and the caller's grant list are both cached for a short
window so hot read paths stay off the network; staleness is bounded by
the cache TTL (2 s by default).
"""

from __future__ import annotations

import time
import threading
from typing import Optional

from ..domain import AccessMode, access_item_for, parse_access_item
from ..errors import ApiError
from ..resilience import BreakerOpenError, DownstreamError, NoInstancesError
from ..svcclient import ServiceClient

DEFAULT_CACHE_TTL_S = 2.0


def _unavailable() -> ApiError:
    return ApiError(503, "access-unavailable",
                    "access-control unavailable, failing fast")


class AccessGate:
    def __init__(self, client: ServiceClient, cache_ttl_s: float = DEFAULT_CACHE_TTL_S):
        self.client = client
        self.cache_ttl_s = cache_ttl_s
        self._lock = threading.Lock()
        self._checks: dict[tuple[str, str, str], tuple[float, bool]] = {}
        self._grants: dict[str, tuple[float, list[dict]]] = {}

    def check(self, username: str, access_item: str, mode: AccessMode,
              token: str) -> bool:
        key = (username, access_item, mode.value)
        now = time.monotonic()
        with self._lock:
            hit = self._checks.get(key)
            if hit and now - hit[0] < self.cache_ttl_s:
                return hit[1]
        try:
            resp = self.client.call(
                "accesscontrol", "GET",
                "/access/check?user=%s&item=%s&mode=%s" % (username, access_item, mode.value),
                token=token)
        except (BreakerOpenError, NoInstancesError, DownstreamError):
            raise _unavailable()
        if resp.status_code != 200:
            raise ApiError(resp.status_code, "access-check-failed", resp.text)
        allowed = resp.json().get("decision") == "allow"
        with self._lock:
            self._checks[key] = (now, allowed)
        return allowed

    def grants_for(self, username: str, token: str) -> list[dict]:
        now = time.monotonic()
        with self._lock:
            hit = self._grants.get(username)
            if hit and now - hit[0] < self.cache_ttl_s:
                return hit[1]
        try:
            resp = self.client.call("accesscontrol", "GET",
                                    "/access/grants/%s" % username, token=token)
        except (BreakerOpenError, NoInstancesError, DownstreamError):
            raise _unavailable()
        if resp.status_code != 200:
            raise ApiError(resp.status_code, "access-check-failed", resp.text)
        grants = resp.json()
        with self._lock:
            self._grants[username] = (now, grants)
        return grants

    def readable_scopes(self, username: str, token: str) -> tuple[set, dict[str, set]]:
        """(home-level read homeIds, homeId -> item-level read itemIds)."""
        home_reads: set = set()
        item_reads: dict[str, set] = {}
        for grant in self.grants_for(username, token):
            if grant.get("mode") != AccessMode.READ.value:
                continue
            try:
                home_id, item_id = parse_access_item(grant.get("accessItem", ""))
            except Exception:
                continue
            if item_id is None:
                home_reads.add(home_id)
            else:
                item_reads.setdefault(home_id, set()).add(item_id)
        return home_reads, item_reads

    def can_read_item(self, username: str, home_id: str, item_id: str,
                      token: str) -> bool:
        return self.check(username, access_item_for(home_id, item_id),
                          AccessMode.READ, token)
