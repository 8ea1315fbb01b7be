"""Remote-control service: validates and dispatches commands to households.

Dispatch is fire-and-forget over the broker at QoS0; confirmation arrives
later as telemetry. Authorization precedes any publish: a denied request
never reaches the broker.
"""

from __future__ import annotations

import collections
import json
import logging
import threading
import uuid
from typing import Callable, Optional

from ..auth import require_principal
from ..clock import Clock, SYSTEM_CLOCK
from ..domain import AccessMode, Command, ItemKind, access_item_for, validate_value
from ..errors import ApiError, MalformedIdentifier, forbidden, not_found, unavailable
from ..httpkit import Request, Service
from ..journal import Journal
from ..mqtt.client import MqttClient, MqttError
from ..svcclient import ServiceClient
from ..resilience import BreakerOpenError, DownstreamError, NoInstancesError
from ..discovery.client import DiscoveryClient
from ..wire import command_topic

log = logging.getLogger("rca.control")

COMMAND_LOG_SIZE = 10_000
MAX_LOG_LIMIT = 500

Publisher = Callable[[str, bytes], None]


class BrokerPublisher:
    """Publish with one lazy connection; a single reconnect attempt per call."""

    def __init__(self, host: str, port: int, client_id: str = "control-pub"):
        self.host = host
        self.port = port
        self.client_id = client_id
        self._client: Optional[MqttClient] = None
        self._lock = threading.Lock()

    def __call__(self, topic: str, payload: bytes):
        with self._lock:
            for attempt in (0, 1):
                if self._client is None or not self._client.connected:
                    client = MqttClient(self.client_id, self.host, self.port, keepalive=30)
                    client.connect(timeout=2.0)
                    self._client = client
                try:
                    self._client.publish(topic, payload)
                    return
                except (OSError, MqttError):
                    self._client.close()
                    self._client = None
                    if attempt:
                        raise

    def close(self):
        with self._lock:
            if self._client is not None:
                self._client.close()
                self._client = None


def create_service(secret: str, host: str = "127.0.0.1", port: int = 7004,
                   broker_host: str = "127.0.0.1", broker_port: int = 1883,
                   discovery_url: Optional[str] = None,
                   journal_path: Optional[str] = None,
                   publisher: Optional[Publisher] = None,
                   svc_client: Optional[ServiceClient] = None,
                   clock: Clock = SYSTEM_CLOCK) -> Service:
    service = Service("remotecontrol", host=host, port=port)
    journal = Journal(journal_path, flush_every=1)
    service.on_shutdown(journal.close)

    if publisher is None:
        publisher = BrokerPublisher(broker_host, broker_port)
        service.on_shutdown(publisher.close)
    if svc_client is None:
        if discovery_url is None:
            raise ValueError("need discovery_url or an explicit svc_client")
        svc_client = ServiceClient("remotecontrol", discovery_url, clock=clock)

    command_log: collections.deque = collections.deque(maxlen=COMMAND_LOG_SIZE)
    log_lock = threading.Lock()
    service.command_log = command_log

    def item_kind(home_id: str, item_id: str, token: str) -> Optional[ItemKind]:
        try:
            resp = svc_client.call("history", "GET",
                                   "/catalog/%s/%s" % (home_id, item_id), token=token)
        except (BreakerOpenError, NoInstancesError, DownstreamError):
            raise unavailable("history-unavailable", "cannot resolve item catalog")
        if resp.status_code != 200:
            raise ApiError(resp.status_code, "catalog-error", resp.text)
        body = resp.json()
        if not body.get("exists"):
            return None
        return ItemKind(body["kind"])

    def check_write(username: str, home_id: str, item_id: str, token: str) -> bool:
        key = access_item_for(home_id, item_id)
        try:
            resp = svc_client.call("accesscontrol", "GET",
                                   "/access/check?user=%s&item=%s&mode=%s"
                                   % (username, key, AccessMode.WRITE.value),
                                   token=token)
        except (BreakerOpenError, NoInstancesError, DownstreamError):
            raise unavailable("access-unavailable", "access-control unavailable")
        if resp.status_code != 200:
            raise ApiError(resp.status_code, "access-check-failed", resp.text)
        return resp.json().get("decision") == "allow"

    def check_read_home(username: str, home_id: str, token: str) -> bool:
        try:
            resp = svc_client.call("accesscontrol", "GET",
                                   "/access/check?user=%s&item=%s&mode=%s"
                                   % (username, access_item_for(home_id),
                                      AccessMode.READ.value),
                                   token=token)
        except (BreakerOpenError, NoInstancesError, DownstreamError):
            raise unavailable("access-unavailable", "access-control unavailable")
        return resp.status_code == 200 and resp.json().get("decision") == "allow"

    @service.route("POST", "/control/homes/{homeId}/items/{itemId:path}/command")
    def send_command(req: Request):
        principal = require_principal(req, secret, clock)
        token = req.bearer_token()
        home_id, item_id = req.params["homeId"], req.params["itemId"]
        body = req.json()
        value = str(body.get("value", ""))
        label = body.get("label")
        try:
            kind = item_kind(home_id, item_id, token)
        except MalformedIdentifier as exc:
            raise ApiError(400, "malformed-identifier", str(exc))
        if kind is None:
            raise not_found("unknown-item", "no item %s/%s" % (home_id, item_id))
        if not validate_value(kind, value):
            raise ApiError(400, "invalid-value",
                           "%r is not a valid %s value" % (value, kind.value))
        if not check_write(principal.subject, home_id, item_id, token):
            raise forbidden("no write grant on %s/%s" % (home_id, item_id))
        command = Command(homeId=home_id, itemId=item_id, value=value,
                          issuedBy=principal.subject, issuedAt=clock.now_ms(),
                          commandId=uuid.uuid4().hex,
                          label=label if label is None else str(label))
        payload = json.dumps(command.to_json(), separators=(",", ":")).encode()
        try:
            publisher(command_topic(home_id), payload)
        except (OSError, MqttError, BreakerOpenError, DownstreamError):
            raise unavailable("broker-unavailable", "cannot reach the broker")
        with log_lock:
            command_log.append(command)
        journal.append(command.to_json())
        return {"commandId": command.commandId, "status": "dispatched"}

    @service.route("GET", "/control/homes/{homeId}/commands")
    def get_command_log(req: Request):
        principal = require_principal(req, secret, clock)
        home_id = req.params["homeId"]
        if not check_read_home(principal.subject, home_id, req.bearer_token()):
            raise forbidden("no read grant on home %s" % home_id)
        limit = min(int(req.query_one("limit") or MAX_LOG_LIMIT), MAX_LOG_LIMIT)
        with log_lock:
            matching = [c for c in command_log if c.homeId == home_id]
        newest_first = list(reversed(matching))[:limit]
        return [c.to_json() for c in newest_first]

    if discovery_url:
        discovery = DiscoveryClient(discovery_url)
        service.on_shutdown(discovery.stop)

        def announce():
            discovery.maintain_registration("remotecontrol", service.base_url)
        service.announce = announce

    return service
