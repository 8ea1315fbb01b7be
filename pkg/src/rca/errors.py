"""Error types shared across services.

Every HTTP-facing failure maps to an ApiError with a stable machine-readable
code; the JSON body is always {"error": code, "message": text}.
"""

from __future__ import annotations


class RcaError(Exception):
    """Base class for all platform errors."""


class MalformedIdentifier(RcaError):
    """Home or item identifier contains forbidden characters."""


class ApiError(RcaError):
    """An error with a canonical HTTP status and wire code."""

    def __init__(self, status: int, code: str, message: str = ""):
        super().__init__(message or code)
        self.status = status
        self.code = code
        self.message = message or code

    def body(self) -> dict:
        return {"error": self.code, "message": self.message}


def forbidden(message: str = "forbidden") -> ApiError:
    return ApiError(403, "forbidden", message)


def unauthorized(code: str = "invalid-token", message: str = "") -> ApiError:
    return ApiError(401, code, message or code)


def not_found(code: str = "not-found", message: str = "") -> ApiError:
    return ApiError(404, code, message or code)


def bad_request(code: str, message: str = "") -> ApiError:
    return ApiError(400, code, message or code)


def conflict(code: str = "conflict", message: str = "") -> ApiError:
    return ApiError(409, code, message or code)


def unavailable(code: str, message: str = "") -> ApiError:
    return ApiError(503, code, message or code)
