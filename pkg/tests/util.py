"""Shared test helpers: an in-process platform stack and token minting."""

from __future__ import annotations

import socket
import threading
import uuid

import requests

from rca.access.service import create_service as create_access
from rca.control.service import create_service as create_control
from rca.discovery.service import create_service as create_discovery
from rca.gateway.service import create_service as create_gateway
from rca.history.service import create_service as create_history
from rca.mqtt.broker import BrokerThread
from rca.security.service import create_service as create_security
from rca.security.tokens import issue_token

SECRET = "test-shared-secret"
ADMIN_PASSWORD = "admin-pass-1"
TEST_ITERATIONS = 200  # keep password hashing fast in tests


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def free_port_block(count: int) -> int:
    """A base port with `count` consecutive free ports, for multi-instance
    services that listen on base+N."""
    while True:
        socks = []
        try:
            base = free_port()
            for i in range(count):
                s = socket.socket()
                socks.append(s)
                try:
                    s.bind(("127.0.0.1", base + i))
                except OSError:
                    break
            else:
                return base
        finally:
            for s in socks:
                s.close()


def mint(subject: str, roles=("caregiver",), lifetime_s: int = 3600,
         secret: str = SECRET) -> str:
    return issue_token(secret, subject, roles, lifetime_s=lifetime_s)


class InProcStack:
    """Whole platform in one process: broker plus every HTTP service on
    ephemeral ports, registered with a private discovery instance."""

    def __init__(self, history_instances: int = 1, ttl_ms: int = 30_000,
                 sweep_interval_s: float = 5.0, access_cache_ttl_s: float = 0.0,
                 start_ingest: bool = True):
        self.secret = SECRET
        self.services = []
        self.broker = BrokerThread().start()

        self.discovery = self._up(create_discovery(
            port=0, ttl_ms=ttl_ms, sweep_interval_s=sweep_interval_s))
        self.discovery_url = self.discovery.base_url

        self.security = self._up(create_security(
            secret=SECRET, port=0, pbkdf2_iterations=TEST_ITERATIONS,
            bootstrap_admin=("admin", ADMIN_PASSWORD)))
        self._register("security", self.security)

        self.access = self._up(create_access(
            secret=SECRET, port=0, discovery_url=self.discovery_url))
        self._register("accesscontrol", self.access)

        self.historys = []
        for i in range(history_instances):
            hist = self._up(create_history(
                secret=SECRET, port=0, broker_host="127.0.0.1",
                broker_port=self.broker.port, discovery_url=self.discovery_url,
                access_cache_ttl_s=access_cache_ttl_s,
                instance_id="history-%d" % i, start_ingest=start_ingest))
            self._register("history", hist, "history-%d" % i)
            self.historys.append(hist)
        self.history = self.historys[0]

        self.control = self._up(create_control(
            secret=SECRET, port=0, broker_host="127.0.0.1",
            broker_port=self.broker.port, discovery_url=self.discovery_url))
        self._register("remotecontrol", self.control)

        self.gateway = self._up(create_gateway(
            secret=SECRET, discovery_url=self.discovery_url, port=0))

    def _up(self, service):
        service.start()
        self.services.append(service)
        return service

    def _register(self, name: str, service, instance_id: str = None):
        self.discovery.registry.register(
            name, instance_id or "%s-%s" % (name, uuid.uuid4().hex[:6]),
            service.base_url)

    def close(self):
        for service in reversed(self.services):
            service.stop()
        self.broker.stop()

    # -- client helpers ----------------------------------------------------

    @property
    def gateway_url(self) -> str:
        return self.gateway.base_url

    def login(self, username: str, password: str) -> str:
        resp = requests.post(self.gateway_url + "/api/auth/token",
                             json={"username": username, "password": password},
                             timeout=5)
        resp.raise_for_status()
        return resp.json()["token"]

    def admin_token(self) -> str:
        return self.login("admin", ADMIN_PASSWORD)

    def api(self, method: str, path: str, token: str = None, json=None,
            params=None, base: str = None, **kw) -> requests.Response:
        headers = {"Authorization": "Bearer %s" % token} if token else {}
        return requests.request(method, (base or self.gateway_url) + path,
                                json=json, params=params, headers=headers,
                                timeout=kw.pop("timeout", 5), **kw)

    def create_user(self, username: str, password: str, roles=("caregiver",)):
        resp = self.api("POST", "/api/users", token=self.admin_token(),
                        json={"username": username, "password": password,
                              "roles": list(roles)})
        resp.raise_for_status()

    def grant(self, username: str, item: str, mode: str):
        resp = self.api("POST", "/api/access/grants", token=self.admin_token(),
                        json={"username": username, "accessItem": item,
                              "mode": mode})
        resp.raise_for_status()

    def publish_state(self, home_id: str, item_id: str, value: str,
                      timestamp: int, kind: str = None):
        """Inject telemetry directly into every history store."""
        for hist in self.historys:
            hist.store.ingest(home_id, item_id, value, timestamp, kind=kind)
