"""HTTP surface of the discovery registry."""

from __future__ import annotations

import threading

from ..clock import Clock, SYSTEM_CLOCK
from ..errors import ApiError
from ..httpkit import Request, Service
from .registry import (DEFAULT_SWEEP_INTERVAL_S, DEFAULT_TTL_MS,
                       MalformedRegistration, Registry, UnknownInstance)


def create_service(host: str = "127.0.0.1", port: int = 7000,
                   ttl_ms: int = DEFAULT_TTL_MS,
                   sweep_interval_s: float = DEFAULT_SWEEP_INTERVAL_S,
                   clock: Clock = SYSTEM_CLOCK) -> Service:
    registry = Registry(ttl_ms=ttl_ms, clock=clock)
    service = Service("discovery", host=host, port=port)
    service.registry = registry

    stop = threading.Event()

    def sweep_loop():
        while not stop.wait(sweep_interval_s):
            registry.evict(clock.now_ms())

    sweeper = threading.Thread(target=sweep_loop, daemon=True, name="discovery-sweep")
    sweeper.start()
    service.on_shutdown(stop.set)

    @service.route("POST", "/registry/register")
    def register(req: Request):
        body = req.json()
        try:
            reg = registry.register(str(body.get("serviceName", "")),
                                    str(body.get("instanceId", "")),
                                    str(body.get("baseUrl", "")))
        except MalformedRegistration as exc:
            raise ApiError(400, "malformed-registration", str(exc))
        return reg.to_json()

    @service.route("POST", "/registry/heartbeat/{serviceName}/{instanceId}")
    def heartbeat(req: Request):
        try:
            expiry = registry.heartbeat(req.params["serviceName"], req.params["instanceId"])
        except UnknownInstance as exc:
            raise ApiError(404, "unknown-instance", str(exc))
        return {"leaseExpiry": expiry}

    @service.route("GET", "/registry/services/{serviceName}")
    def resolve(req: Request):
        return [r.to_json() for r in registry.resolve(req.params["serviceName"])]

    @service.route("GET", "/registry/services")
    def all_services(req: Request):
        return {name: [r.to_json() for r in regs]
                for name, regs in registry.all_services().items()}

    return service
