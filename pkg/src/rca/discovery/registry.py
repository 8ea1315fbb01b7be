"""Lease-based in-memory service registry.

Services register (serviceName, instanceId, baseUrl), heartbeat to renew
their lease, and resolve each other. Expired leases are evicted by a
periodic sweep and lazily inside resolve, so resolve never returns a dead
lease even between sweeps.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass

from ..clock import Clock, SYSTEM_CLOCK
from ..errors import RcaError

DEFAULT_TTL_MS = 30_000
DEFAULT_SWEEP_INTERVAL_S = 5.0
HEARTBEAT_INTERVAL_S = 10.0

_NAME_RE = re.compile(r"^[a-z][a-z0-9-]*$")
_URL_RE = re.compile(r"^https?://[^\s/]+(:\d+)?(/.*)?$")


class MalformedRegistration(RcaError):
    pass


class UnknownInstance(RcaError):
    pass


@dataclass
class ServiceRegistration:
    serviceName: str
    instanceId: str
    baseUrl: str
    registeredAt: int
    leaseExpiry: int

    def to_json(self) -> dict:
        return {
            "serviceName": self.serviceName,
            "instanceId": self.instanceId,
            "baseUrl": self.baseUrl,
            "registeredAt": self.registeredAt,
            "leaseExpiry": self.leaseExpiry,
        }


class Registry:
    def __init__(self, ttl_ms: int = DEFAULT_TTL_MS, clock: Clock = SYSTEM_CLOCK):
        self.ttl_ms = ttl_ms
        self.clock = clock
        self._lock = threading.Lock()
        # insertion order preserved per service for round-robin stability
        self._entries: dict[tuple[str, str], ServiceRegistration] = {}

    def register(self, service_name: str, instance_id: str, base_url: str) -> ServiceRegistration:
        if not service_name or not _NAME_RE.match(service_name):
            raise MalformedRegistration("bad serviceName %r" % service_name)
        if not instance_id:
            raise MalformedRegistration("empty instanceId")
        if not _URL_RE.match(base_url or ""):
            raise MalformedRegistration("bad baseUrl %r" % base_url)
        now = self.clock.now_ms()
        key = (service_name, instance_id)
        with self._lock:
            existing = self._entries.get(key)
            if existing is not None:
                existing.baseUrl = base_url
                existing.leaseExpiry = now + self.ttl_ms
                return existing
            reg = ServiceRegistration(service_name, instance_id, base_url,
                                      registeredAt=now, leaseExpiry=now + self.ttl_ms)
            self._entries[key] = reg
            return reg

    def heartbeat(self, service_name: str, instance_id: str) -> int:
        now = self.clock.now_ms()
        key = (service_name, instance_id)
        with self._lock:
            reg = self._entries.get(key)
            if reg is None or reg.leaseExpiry <= now:
                self._entries.pop(key, None)
                raise UnknownInstance("%s/%s not registered" % (service_name, instance_id))
            reg.leaseExpiry = now + self.ttl_ms
            return reg.leaseExpiry

    def resolve(self, service_name: str) -> list[ServiceRegistration]:
        now = self.clock.now_ms()
        self.evict(now)
        with self._lock:
            return [reg for (name, _), reg in self._entries.items()
                    if name == service_name and reg.leaseExpiry > now]

    def all_services(self) -> dict[str, list[ServiceRegistration]]:
        now = self.clock.now_ms()
        self.evict(now)
        out: dict[str, list[ServiceRegistration]] = {}
        with self._lock:
            for (name, _), reg in self._entries.items():
                out.setdefault(name, []).append(reg)
        return out

    def evict(self, now: int) -> list[tuple[str, str]]:
        with self._lock:
            dead = [key for key, reg in self._entries.items() if reg.leaseExpiry <= now]
            for key in dead:
                del self._entries[key]
            return dead
