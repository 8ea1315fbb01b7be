"""API gateway: single external entry point with single sign-on.

Every external request except the login route must carry a bearer token,
validated locally; the same token is relayed downstream unchanged so each
hop sees the original caller. Routing is by path prefix over a static
table, with instances resolved through discovery, balanced round-robin and
wrapped by the per-target circuit breaker.
"""

from __future__ import annotations

import logging
import mimetypes
import os
from dataclasses import dataclass
from typing import Optional
from urllib.parse import urlencode

import requests

from ..auth import require_principal
from ..clock import Clock, SYSTEM_CLOCK
from ..errors import not_found, unavailable
from ..httpkit import Request, Response, Service
from ..svcclient import ServiceClient

log = logging.getLogger("rca.gateway")

MAX_BODY_BYTES = 1024 * 1024

# Hop-by-hop (plus auth/framing) headers never relayed verbatim.
_HOP_HEADERS = {"connection", "keep-alive", "transfer-encoding", "te", "trailer",
                "upgrade", "proxy-authenticate", "proxy-authorization",
                "content-length", "host", "authorization", "accept-encoding"}


@dataclass(frozen=True)
class RouteRule:
    prefix: str         # external prefix, e.g. "/api/history/"
    service: str        # discovery serviceName
    target_prefix: str  # downstream prefix replacing the external one


DEFAULT_ROUTES = [
    RouteRule("/api/history/", "history", "/"),
    RouteRule("/api/control/", "remotecontrol", "/control/"),
    RouteRule("/api/access/", "accesscontrol", "/access/"),
    RouteRule("/api/auth/", "security", "/auth/"),
    RouteRule("/api/users/", "security", "/users/"),
]

# The only anonymous route: login itself.
ANONYMOUS_ROUTES = {("POST", "/api/auth/token")}


def routes_from_config(raw: list[dict]) -> list[RouteRule]:
    return [RouteRule(r["prefix"], r["service"], r["targetPrefix"]) for r in raw]


def create_service(secret: str, discovery_url: str,
                   host: str = "127.0.0.1", port: int = 8080,
                   routes: Optional[list[RouteRule]] = None,
                   ui_dir: Optional[str] = None,
                   svc_client: Optional[ServiceClient] = None,
                   clock: Clock = SYSTEM_CLOCK) -> Service:
    routes = list(routes or DEFAULT_ROUTES)
    service = Service("gateway", host=host, port=port, max_body_bytes=MAX_BODY_BYTES)
    client = svc_client or ServiceClient("gateway", discovery_url, clock=clock)
    service.svc_client = client
    service.routes = routes

    def find_route(path: str) -> Optional[RouteRule]:
        best = None
        for rule in routes:
            # "/api/users" matches the "/api/users/" rule as its bare root.
            if path.startswith(rule.prefix) or path + "/" == rule.prefix:
                if best is None or len(rule.prefix) > len(best.prefix):
                    best = rule
        return best

    def proxy(req: Request):
        rule = find_route(req.path)
        if rule is None:
            raise not_found("unknown-route", "no route for %s" % req.path)
        if (req.method, req.path) not in ANONYMOUS_ROUTES:
            require_principal(req, secret, clock)

        if req.path + "/" == rule.prefix:
            target_path = rule.target_prefix.rstrip("/") or "/"
        else:
            target_path = rule.target_prefix + req.path[len(rule.prefix):]
        if req.query:
            target_path += "?" + urlencode(req.query, doseq=True)
        headers = {k: v for k, v in req.headers.items()
                   if k.lower() not in _HOP_HEADERS}
        stream = (req.headers.get("Accept", "").startswith("text/event-stream")
                  or req.path.endswith("/events"))
        resp = client.call(rule.service, req.method, target_path,
                           body=req.body or None, headers=headers,
                           token=req.bearer_token(), stream=stream,
                           timeout=(2.0, None) if stream else None)
        out_headers = {k: v for k, v in resp.headers.items()
                       if k.lower() not in _HOP_HEADERS and k.lower() != "content-type"}
        ctype = resp.headers.get("Content-Type", "application/json")
        if stream and resp.status_code == 200:
            # Breaker accounting ended at the header exchange; relay bytes
            # as they arrive until either side closes.
            def relay():
                try:
                    for chunk in resp.iter_content(chunk_size=None):
                        if chunk:
                            yield chunk
                finally:
                    resp.close()
            return Response(relay(), status=resp.status_code,
                            content_type=ctype, headers=out_headers)
        return Response(resp.content, status=resp.status_code,
                        content_type=ctype, headers=out_headers)

    @service.route("GET", "/api/status")
    def status(req: Request):
        require_principal(req, secret, clock)
        try:
            return client.discovery.all_services()
        except requests.RequestException as exc:
            raise unavailable("discovery-unavailable", str(exc))

    for method in ("GET", "POST", "PUT", "DELETE", "PATCH"):
        service.router.add(method, "/api/{rest:path}", proxy)

    # -- static caregiver UI ----------------------------------------------

    @service.route("GET", "/ui")
    @service.route("GET", "/ui/{rest:path}")
    def serve_ui(req: Request):
        if not ui_dir:
            raise not_found("not-found", "UI bundle not configured")
        base = os.path.abspath(ui_dir)
        rest = req.params.get("rest") or "index.html"
        full = os.path.normpath(os.path.join(base, rest))
        if not full.startswith(base):
            raise not_found()
        if not os.path.isfile(full):
            # SPA fallback: unknown paths load the shell.
            full = os.path.join(base, "index.html")
            if not os.path.isfile(full):
                raise not_found()
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as fh:
            return Response(fh.read(), content_type=ctype)

    @service.route("GET", "/")
    def root(req: Request):
        return Response(b"", status=302, headers={"Location": "/ui"},
                        content_type="text/plain")

    return service
