"""Request-side token enforcement shared by every service."""

from __future__ import annotations

from .clock import Clock, SYSTEM_CLOCK
from .errors import unauthorized
from .httpkit import Request
from .security.tokens import ExpiredToken, InvalidToken, Principal, validate_token


def require_principal(req: Request, secret: str, clock: Clock = SYSTEM_CLOCK) -> Principal:
    token = req.bearer_token()
    if not token:
        raise unauthorized("missing-token", "Authorization: Bearer token required")
    try:
        principal = validate_token(secret, token, clock)
    except ExpiredToken:
        raise unauthorized("expired-token", "token expired")
    except InvalidToken:
        raise unauthorized("invalid-token", "token invalid")
    req.principal = principal
    return principal
