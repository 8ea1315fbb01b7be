"""Discovery client: registration with heartbeats, and resolution."""

from __future__ import annotations

import logging
import threading
import time
import uuid
from typing import Optional

import requests

from .registry import HEARTBEAT_INTERVAL_S

log = logging.getLogger("rca.discovery.client")


class DiscoveryClient:
    def __init__(self, discovery_url: str, timeout_s: float = 2.0):
        self.discovery_url = discovery_url.rstrip("/")
        self.timeout_s = timeout_s
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def resolve(self, service_name: str) -> list[dict]:
        resp = requests.get("%s/registry/services/%s" % (self.discovery_url, service_name),
                            timeout=self.timeout_s)
        resp.raise_for_status()
        return resp.json()

    def all_services(self) -> dict:
        resp = requests.get("%s/registry/services" % self.discovery_url,
                            timeout=self.timeout_s)
        resp.raise_for_status()
        return resp.json()

    def register(self, service_name: str, instance_id: str, base_url: str) -> dict:
        resp = requests.post("%s/registry/register" % self.discovery_url,
                             json={"serviceName": service_name,
                                   "instanceId": instance_id,
                                   "baseUrl": base_url},
                             timeout=self.timeout_s)
        resp.raise_for_status()
        return resp.json()

    def maintain_registration(self, service_name: str, base_url: str,
                              instance_id: Optional[str] = None,
                              interval_s: float = HEARTBEAT_INTERVAL_S) -> str:
        """Register and keep the lease alive on a background thread.
        Re-registers on unknown-instance or registry restart."""
        instance_id = instance_id or "%s-%s" % (service_name, uuid.uuid4().hex[:8])

        def loop():
            registered = False
            while not self._stop.is_set():
                try:
                    if not registered:
                        self.register(service_name, instance_id, base_url)
                        registered = True
                    else:
                        resp = requests.post(
                            "%s/registry/heartbeat/%s/%s"
                            % (self.discovery_url, service_name, instance_id),
                            timeout=self.timeout_s)
                        if resp.status_code == 404:
                            registered = False
                            continue
                        resp.raise_for_status()
                except requests.RequestException:
                    registered = False
                    if self._stop.wait(1.0):
                        return
                    continue
                self._stop.wait(interval_s)

        self._thread = threading.Thread(target=loop, daemon=True,
                                        name="heartbeat-%s" % service_name)
        self._thread.start()
        return instance_id

    def stop(self):
        self._stop.set()
