"""Access-control HTTP service: admins manage grants, services query checks.

Every request carries a bearer token validated locally; each decision is
audit-logged with the authenticated subject so a relayed token can be
traced back to the original external caller.
"""

from __future__ import annotations

import collections
import logging
import threading
from typing import Optional

from ..auth import require_principal
from ..clock import Clock, SYSTEM_CLOCK
from ..domain import AccessMode
from ..errors import ApiError, MalformedIdentifier, forbidden
from ..httpkit import Request, Service
from ..svcclient import ServiceClient
from ..resilience import BreakerOpenError, DownstreamError, NoInstancesError
from ..discovery.client import DiscoveryClient
from .store import GrantStore

log = logging.getLogger("rca.access")

AUDIT_RING_SIZE = 50_000


def _mode(raw: str) -> AccessMode:
    try:
        return AccessMode(raw)
    except ValueError:
        raise ApiError(400, "malformed-mode", "mode must be Read or Write")


def create_service(secret: str, host: str = "127.0.0.1", port: int = 7002,
                   journal_path: Optional[str] = None,
                   discovery_url: Optional[str] = None,
                   verify_users: bool = True,
                   clock: Clock = SYSTEM_CLOCK) -> Service:
    store = GrantStore(journal_path=journal_path, clock=clock)
    service = Service("accesscontrol", host=host, port=port)
    service.grant_store = store
    service.on_shutdown(store.close)

    audit: collections.deque = collections.deque(maxlen=AUDIT_RING_SIZE)
    audit_lock = threading.Lock()
    service.audit_log = audit

    svc_client: Optional[ServiceClient] = None
    if discovery_url:
        svc_client = ServiceClient("accesscontrol", discovery_url, clock=clock)
        discovery = DiscoveryClient(discovery_url)
        service.on_shutdown(discovery.stop)

        def announce():
            discovery.maintain_registration("accesscontrol", service.base_url)
        service.announce = announce

    def record_audit(operation: str, subject: str, **fields):
        entry = {"at": clock.now_ms(), "operation": operation, "subject": subject}
        entry.update(fields)
        with audit_lock:
            audit.append(entry)

    def user_known(username: str, token: str) -> bool:
        if not (verify_users and svc_client):
            return True
        try:
            resp = svc_client.call("security", "GET",
                                   "/users/%s/exists" % username, token=token)
        except (BreakerOpenError, NoInstancesError, DownstreamError):
            raise ApiError(503, "security-unavailable",
                           "cannot verify target user right now")
        return resp.status_code == 200 and resp.json().get("exists", False)

    @service.route("POST", "/access/grants")
    def grant(req: Request):
        actor = require_principal(req, secret, clock)
        if not actor.has_role("admin"):
            raise forbidden("admin role required")
        body = req.json()
        username = str(body.get("username", ""))
        item = str(body.get("accessItem", ""))
        mode = _mode(str(body.get("mode", "")))
        if not user_known(username, req.bearer_token()):
            raise ApiError(404, "unknown-user", "no such user %r" % username)
        try:
            record = store.grant(actor.subject, username, item, mode)
        except MalformedIdentifier as exc:
            raise ApiError(400, "malformed-access-item", str(exc))
        record_audit("grant", actor.subject, user=username, item=item, mode=mode.value)
        return record.to_json()

    @service.route("DELETE", "/access/grants")
    def revoke(req: Request):
        actor = require_principal(req, secret, clock)
        if not actor.has_role("admin"):
            raise forbidden("admin role required")
        body = req.json()
        username = str(body.get("username", ""))
        item = str(body.get("accessItem", ""))
        mode = _mode(str(body.get("mode", "")))
        store.revoke(actor.subject, username, item, mode)
        record_audit("revoke", actor.subject, user=username, item=item, mode=mode.value)
        return {"revoked": True}

    @service.route("GET", "/access/check")
    def check(req: Request):
        principal = require_principal(req, secret, clock)
        username = req.query_one("user") or principal.subject
        item = req.query_one("item") or ""
        mode = _mode(req.query_one("mode") or "")
        try:
            allowed = store.check(username, item, mode)
        except MalformedIdentifier as exc:
            raise ApiError(400, "malformed-access-item", str(exc))
        record_audit("check", principal.subject, user=username, item=item,
                     mode=mode.value, decision="allow" if allowed else "deny")
        return {"decision": "allow" if allowed else "deny"}

    @service.route("GET", "/access/grants/{username}")
    def list_grants(req: Request):
        actor = require_principal(req, secret, clock)
        username = req.params["username"]
        if not (actor.has_role("admin") or actor.subject == username):
            raise forbidden("may only list own grants")
        record_audit("list_grants", actor.subject, user=username)
        return [g.to_json() for g in store.grants_for(username)]

    @service.route("GET", "/access/audit")
    def audit_view(req: Request):
        actor = require_principal(req, secret, clock)
        if not actor.has_role("admin"):
            raise forbidden("admin role required")
        limit = int(req.query_one("limit") or 1000)
        with audit_lock:
            entries = list(audit)[-limit:]
        return entries

    return service
