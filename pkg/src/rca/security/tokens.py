"""Self-contained signed access tokens.

"header.payload.signature" with an HMAC-SHA256 signature over
header.payload under a shared service secret. Validation is local to each
service: no introspection round-trip, and a token relayed across hops
yields the same principal at every hop.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import uuid
from dataclasses import dataclass

from ..clock import Clock, SYSTEM_CLOCK
from ..errors import RcaError

DEFAULT_LIFETIME_S = 3600

_HEADER = {"alg": "HS256", "typ": "RCA"}


class InvalidToken(RcaError):
    pass


class ExpiredToken(RcaError):
    pass


@dataclass(frozen=True)
class Principal:
    subject: str
    roles: frozenset[str]
    tokenId: str

    def has_role(self, role: str) -> bool:
        return role in self.roles

    def to_json(self) -> dict:
        return {"subject": self.subject, "roles": sorted(self.roles),
                "tokenId": self.tokenId}


def _b64(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def _unb64(text: str) -> bytes:
    pad = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + pad)


def _sign(secret: str, signing_input: bytes) -> bytes:
    return hmac.new(secret.encode(), signing_input, hashlib.sha256).digest()


def issue_token(secret: str, subject: str, roles, lifetime_s: int = DEFAULT_LIFETIME_S,
                clock: Clock = SYSTEM_CLOCK) -> str:
    iat = clock.now_ms()
    payload = {
        "sub": subject,
        "roles": sorted(roles),
        "iat": iat,
        "exp": iat + lifetime_s * 1000,
        "jti": uuid.uuid4().hex,
    }
    head = _b64(json.dumps(_HEADER, separators=(",", ":")).encode())
    body = _b64(json.dumps(payload, separators=(",", ":")).encode())
    signing_input = ("%s.%s" % (head, body)).encode("ascii")
    return "%s.%s.%s" % (head, body, _b64(_sign(secret, signing_input)))


def validate_token(secret: str, token: str, clock: Clock = SYSTEM_CLOCK) -> Principal:
    try:
        head, body, sig = token.split(".")
        signing_input = ("%s.%s" % (head, body)).encode("ascii")
        expected = _sign(secret, signing_input)
        if not hmac.compare_digest(expected, _unb64(sig)):
            raise InvalidToken("bad signature")
        payload = json.loads(_unb64(body))
        subject = payload["sub"]
        roles = frozenset(payload["roles"])
        exp = int(payload["exp"])
        jti = str(payload["jti"])
    except InvalidToken:
        raise
    except Exception as exc:
        raise InvalidToken("malformed token") from exc
    if clock.now_ms() >= exp:
        raise ExpiredToken("token expired")
    return Principal(subject=subject, roles=roles, tokenId=jti)


def token_expiry_ms(token: str) -> int:
    """exp claim without validation; for client-side cache freshness only."""
    try:
        return int(json.loads(_unb64(token.split(".")[1]))["exp"])
    except Exception:
        return 0
