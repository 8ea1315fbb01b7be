"""Identity provider HTTP service: login, validation, user management."""

from __future__ import annotations

import logging
from typing import Optional

from ..auth import require_principal
from ..clock import Clock, SYSTEM_CLOCK
from ..discovery.client import DiscoveryClient
from ..errors import ApiError, conflict, forbidden, unauthorized
from ..httpkit import Request, Service
from .tokens import (DEFAULT_LIFETIME_S, ExpiredToken, InvalidToken,
                     issue_token, validate_token)
from .users import BadUser, DuplicateUser, UnknownUser, UserStore, WeakPassword

log = logging.getLogger("rca.security")

# One fixed body for both unknown-user and wrong-password: no enumeration.
_INVALID_CREDENTIALS = ApiError(401, "invalid-credentials", "invalid credentials")


def create_service(secret: str, host: str = "127.0.0.1", port: int = 7001,
                   journal_path: Optional[str] = None,
                   token_lifetime_s: int = DEFAULT_LIFETIME_S,
                   pbkdf2_iterations: Optional[int] = None,
                   bootstrap_admin: Optional[tuple[str, str]] = None,
                   discovery_url: Optional[str] = None,
                   clock: Clock = SYSTEM_CLOCK) -> Service:
    kwargs = {"journal_path": journal_path, "clock": clock}
    if pbkdf2_iterations:
        kwargs["iterations"] = pbkdf2_iterations
    store = UserStore(**kwargs)
    service = Service("security", host=host, port=port)
    service.user_store = store
    service.on_shutdown(store.close)

    if bootstrap_admin and not store.exists(bootstrap_admin[0]):
        store.create(bootstrap_admin[0], bootstrap_admin[1], {"admin"})
        log.info("seeded bootstrap admin %r", bootstrap_admin[0])

    if discovery_url:
        discovery = DiscoveryClient(discovery_url)
        service.on_shutdown(discovery.stop)

        def announce():
            discovery.maintain_registration("security", service.base_url)
        service.announce = announce

    @service.route("POST", "/auth/token")
    def auth_token(req: Request):
        body = req.json()
        username = str(body.get("username", ""))
        password = str(body.get("password", ""))
        user = store.verify(username, password)
        if user is None:
            raise _INVALID_CREDENTIALS
        token = issue_token(secret, user.username, user.roles,
                            lifetime_s=token_lifetime_s, clock=clock)
        return {"token": token,
                "expiresAt": clock.now_ms() + token_lifetime_s * 1000}

    @service.route("POST", "/auth/validate")
    def auth_validate(req: Request):
        token = str(req.json().get("token", ""))
        try:
            principal = validate_token(secret, token, clock)
        except ExpiredToken:
            raise unauthorized("expired-token", "token expired")
        except InvalidToken:
            raise unauthorized("invalid-token", "token invalid")
        return principal.to_json()

    @service.route("POST", "/users")
    def create_user(req: Request):
        actor = require_principal(req, secret, clock)
        if not actor.has_role("admin"):
            raise forbidden("admin role required")
        body = req.json()
        try:
            record = store.create(str(body.get("username", "")),
                                  str(body.get("password", "")),
                                  body.get("roles") or [])
        except DuplicateUser:
            raise conflict("conflict", "username already taken")
        except WeakPassword as exc:
            raise ApiError(400, "weak-password", str(exc))
        except BadUser as exc:
            raise ApiError(400, "malformed-user", str(exc))
        return {"username": record.username, "roles": sorted(record.roles),
                "createdAt": record.createdAt}

    @service.route("PUT", "/users/{username}/password")
    def change_password(req: Request):
        actor = require_principal(req, secret, clock)
        username = req.params["username"]
        if not (actor.has_role("admin") or actor.subject == username):
            raise forbidden("may only change own password")
        try:
            store.set_password(username, str(req.json().get("password", "")))
        except UnknownUser:
            raise ApiError(404, "unknown-user", "no such user")
        except WeakPassword as exc:
            raise ApiError(400, "weak-password", str(exc))
        return {"username": username, "changed": True}

    @service.route("GET", "/users/{username}/exists")
    def user_exists(req: Request):
        # Internal helper for access-control's target-user verification.
        require_principal(req, secret, clock)
        return {"username": req.params["username"],
                "exists": store.exists(req.params["username"])}

    return service
