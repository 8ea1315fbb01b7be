"""History service: MQTT telemetry ingestion plus access-gated read API."""

from __future__ import annotations

import json
import logging
import queue
import threading
from typing import Optional

from ..auth import require_principal
from ..clock import Clock, SYSTEM_CLOCK
from ..domain import AccessMode, access_item_for, current_state
from ..errors import ApiError, forbidden, not_found
from ..httpkit import Request, Response, Service
from ..mqtt.client import MqttClient
from ..svcclient import ServiceClient
from ..discovery.client import DiscoveryClient
from ..wire import STATE_FILTER
from .gate import AccessGate
from .store import StateStore

log = logging.getLogger("rca.history")

MAX_HISTORY_LIMIT = 1000
SSE_HEARTBEAT_S = 15.0


class IngestRunner:
    """Keeps one broker subscription alive; reconnects with backoff."""

    def __init__(self, store: StateStore, broker_host: str, broker_port: int,
                 client_id: str = "history-ingest"):
        self.store = store
        self.broker_host = broker_host
        self.broker_port = broker_port
        self.client_id = client_id
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True,
                                        name="history-ingest")

    def start(self):
        self._thread.start()

    def stop(self):
        self._stop.set()

    def _run(self):
        while not self._stop.is_set():
            client = MqttClient(self.client_id, self.broker_host, self.broker_port,
                                keepalive=30, on_message=self._on_message)
            try:
                client.connect_with_retry(give_up=self._stop.is_set)
                client.subscribe([STATE_FILTER])
                log.info("ingestion subscribed to %s", STATE_FILTER)
                while not self._stop.wait(0.5):
                    if not client.connected:
                        break
                    self.store.maybe_snapshot()
            except Exception:
                if not self._stop.is_set():
                    log.exception("ingestion loop error, reconnecting")
                    self._stop.wait(0.5)
            finally:
                client.close()

    def _on_message(self, topic: str, payload: bytes):
        self.store.ingest_raw(topic, payload)


def create_service(secret: str, host: str = "127.0.0.1", port: int = 7003,
                   broker_host: str = "127.0.0.1", broker_port: int = 1883,
                   discovery_url: Optional[str] = None,
                   journal_path: Optional[str] = None,
                   dead_letter_path: Optional[str] = None,
                   history_cap: int = 10_000,
                   access_cache_ttl_s: float = 2.0,
                   instance_id: Optional[str] = None,
                   start_ingest: bool = True,
                   gate: Optional[AccessGate] = None,
                   clock: Clock = SYSTEM_CLOCK) -> Service:
    store = StateStore(cap=history_cap, journal_path=journal_path,
                       dead_letter_path=dead_letter_path, clock=clock)
    service = Service("history", host=host, port=port)
    service.store = store
    service.on_shutdown(store.close)

    if gate is None:
        if discovery_url is None:
            raise ValueError("need discovery_url or an explicit gate")
        gate = AccessGate(ServiceClient("history", discovery_url, clock=clock),
                          cache_ttl_s=access_cache_ttl_s)
    service.gate = gate

    if start_ingest:
        ingest = IngestRunner(store, broker_host, broker_port,
                              client_id=instance_id or "history-ingest")
        ingest.start()
        service.on_shutdown(ingest.stop)
        service.ingest = ingest

    if discovery_url:
        discovery = DiscoveryClient(discovery_url)
        service.on_shutdown(discovery.stop)

        def announce():
            discovery.maintain_registration("history", service.base_url,
                                            instance_id=instance_id)
        service.announce = announce

    def _read_access_or_forbidden(principal, home_id: str, item_id: str, token: str):
        if not gate.check(principal.subject, access_item_for(home_id, item_id),
                          AccessMode.READ, token):
            raise forbidden("no read access to %s/%s" % (home_id, item_id))

    @service.route("GET", "/homes")
    def list_homes(req: Request):
        principal = require_principal(req, secret, clock)
        home_reads, item_reads = gate.readable_scopes(principal.subject,
                                                      req.bearer_token())
        out = []
        for home_id in store.list_home_ids():
            if home_id in home_reads or item_reads.get(home_id):
                home = store.get_home(home_id)
                out.append({"homeId": home.homeId, "label": home.label,
                            "itemCount": len(home.items)})
        return out

    @service.route("GET", "/homes/{homeId}")
    def get_home(req: Request):
        principal = require_principal(req, secret, clock)
        token = req.bearer_token()
        home_id = req.params["homeId"]
        home_read = gate.check(principal.subject, access_item_for(home_id),
                               AccessMode.READ, token)
        home = store.get_home(home_id)
        if home is None:
            # Unreadable homes are forbidden, not 404: no existence leak.
            if home_read:
                raise not_found("not-found", "no such home")
            raise forbidden("no read access to home %s" % home_id)
        if home_read:
            visible = list(home.items.values())
        else:
            _, item_reads = gate.readable_scopes(principal.subject, token)
            allowed = item_reads.get(home_id, set())
            visible = [item for item in home.items.values() if item.itemId in allowed]
            if not visible:
                raise forbidden("no read access to home %s" % home_id)
        return {
            "homeId": home.homeId,
            "label": home.label,
            "items": [
                {"itemId": item.itemId, "kind": item.kind.value, "label": item.label,
                 "currentState": (lambda s: s.to_json() if s else None)(current_state(item))}
                for item in visible],
        }

    @service.route("GET", "/homes/{homeId}/items/{itemId:path}/history")
    def item_history(req: Request):
        principal = require_principal(req, secret, clock)
        home_id, item_id = req.params["homeId"], req.params["itemId"]
        _read_access_or_forbidden(principal, home_id, item_id, req.bearer_token())
        try:
            from_ts = int(req.query_one("from") or 0)
            to_ts = int(req.query_one("to") or (1 << 62))
            limit = int(req.query_one("limit") or MAX_HISTORY_LIMIT)
        except ValueError:
            raise ApiError(400, "invalid-range", "from/to/limit must be integers")
        if from_ts > to_ts or limit < 1 or limit > MAX_HISTORY_LIMIT:
            raise ApiError(400, "invalid-range",
                           "need from <= to and 1 <= limit <= %d" % MAX_HISTORY_LIMIT)
        states = store.item_history(home_id, item_id, from_ts, to_ts, limit)
        if states is None:
            raise not_found("not-found", "no such home or item")
        return {"homeId": home_id, "itemId": item_id,
                "states": [s.to_json() for s in states]}

    @service.route("GET", "/homes/{homeId}/items/{itemId:path}/events")
    def item_events(req: Request):
        principal = require_principal(req, secret, clock)
        home_id, item_id = req.params["homeId"], req.params["itemId"]
        _read_access_or_forbidden(principal, home_id, item_id, req.bearer_token())

        def stream():
            q = store.subscribe(home_id, item_id)
            try:
                cur = store.current(home_id, item_id)
                if cur is not None:
                    yield _sse_frame(home_id, item_id, cur)
                while True:
                    try:
                        state = q.get(timeout=SSE_HEARTBEAT_S)
                    except queue.Empty:
                        yield b": keepalive\n\n"
                        continue
                    yield _sse_frame(home_id, item_id, state)
            finally:
                store.unsubscribe(home_id, item_id, q)

        return Response(stream(), content_type="text/event-stream")

    @service.route("GET", "/catalog/{homeId}/{itemId:path}")
    def catalog(req: Request):
        require_principal(req, secret, clock)
        home = store.get_home(req.params["homeId"])
        item = home.items.get(req.params["itemId"]) if home else None
        if item is None:
            return {"exists": False}
        return {"exists": True, "kind": item.kind.value, "label": item.label}

    @service.route("GET", "/stats")
    def stats(req: Request):
        with store._lock:
            items = sum(len(h.items) for h in store.homes.values())
        return {"accepted": store.accepted, "deadLetter": store.dead_letter,
                "homes": len(store.homes), "items": items}

    return service


def _sse_frame(home_id: str, item_id: str, state) -> bytes:
    body = {"homeId": home_id, "itemId": item_id}
    body.update(state.to_json())
    return b"data: " + json.dumps(body, separators=(",", ":")).encode() + b"\n\n"
