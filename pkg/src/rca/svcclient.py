"""Guarded inter-service HTTP client.

Order of evaluation per call: breaker admission (no I/O), discovery
resolution, round-robin instance choice, transport with per-call timeout.
The bearer token, when given, is relayed verbatim so every hop sees the
original caller's identity.
"""

from __future__ import annotations

import threading
import time
from typing import Optional

import requests

from .clock import Clock, SYSTEM_CLOCK
from .discovery.client import DiscoveryClient
from .resilience import (DEFAULT_CALL_TIMEOUT_S, DEFAULT_FAILURE_THRESHOLD,
                         DEFAULT_RESET_TIMEOUT_MS, BreakerRegistry,
                         DownstreamError, NoInstancesError, RoundRobinBalancer)


class RequestsTransport:
    def __call__(self, method: str, url: str, headers: dict, body,
                 timeout: float, stream: bool = False) -> requests.Response:
        return requests.request(method, url, headers=headers, data=body,
                                timeout=timeout, stream=stream)


class ServiceClient:
    def __init__(self, caller: str, discovery_url: str,
                 threshold: int = DEFAULT_FAILURE_THRESHOLD,
                 reset_timeout_ms: int = DEFAULT_RESET_TIMEOUT_MS,
                 call_timeout_s: float = DEFAULT_CALL_TIMEOUT_S,
                 resolve_cache_s: float = 1.0,
                 clock: Clock = SYSTEM_CLOCK,
                 transport=None):
        self.caller = caller
        self.discovery = DiscoveryClient(discovery_url)
        self.breakers = BreakerRegistry(threshold, reset_timeout_ms, clock)
        self.balancer = RoundRobinBalancer()
        self.call_timeout_s = call_timeout_s
        self.resolve_cache_s = resolve_cache_s
        self.transport = transport or RequestsTransport()
        self._cache: dict[str, tuple[float, list[dict]]] = {}
        self._cache_lock = threading.Lock()

    def _resolve(self, target: str) -> list[dict]:
        now = time.monotonic()
        with self._cache_lock:
            cached = self._cache.get(target)
            if cached and now - cached[0] < self.resolve_cache_s:
                return cached[1]
        try:
            instances = self.discovery.resolve(target)
        except requests.RequestException as exc:
            raise DownstreamError("discovery unreachable: %s" % exc)
        with self._cache_lock:
            self._cache[target] = (now, instances)
        return instances

    def call(self, target: str, method: str, path: str,
             json_body: Optional[dict] = None, body: Optional[bytes] = None,
             token: Optional[str] = None, headers: Optional[dict] = None,
             stream: bool = False, timeout=None) -> requests.Response:
        """Issue one guarded request to a named service.

        Raises BreakerOpenError, NoInstancesError or DownstreamError; any
        HTTP response below 500 is returned to the caller as-is.
        """
        breaker = self.breakers.get(target)
        breaker.before_call()
        try:
            instances = self._resolve(target)
            try:
                instance = self.balancer.choose(target, instances)
            except NoInstancesError:
                # Not a downstream fault: nothing was called.
                breaker.on_success()
                raise
            url = instance["baseUrl"].rstrip("/") + path
            hdrs = dict(headers or {})
            if json_body is not None:
                import json as _json
                body = _json.dumps(json_body).encode()
                hdrs["Content-Type"] = "application/json"
            if token:
                hdrs["Authorization"] = "Bearer %s" % token
            try:
                resp = self.transport(method, url, hdrs, body,
                                      timeout or self.call_timeout_s, stream)
            except requests.Timeout as exc:
                raise DownstreamError("timeout calling %s: %s" % (target, exc))
            except requests.RequestException as exc:
                raise DownstreamError("error calling %s: %s" % (target, exc))
            if resp.status_code >= 500:
                raise DownstreamError("%s returned %d" % (target, resp.status_code),
                                      status=resp.status_code)
        except DownstreamError:
            breaker.on_failure()
            raise
        breaker.on_success()
        return resp
