"""Tiny HTTP service kit over the stdlib threading server.

Each service declares routes with path templates ("/homes/{homeId}") and
returns JSON bodies; exceptions map to the shared error envelope. Responses
may be generators of byte chunks for server-sent event streams.

Every service gets GET /health for free.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import urllib.parse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Iterator, Optional, Union

from .errors import ApiError
from .resilience import BreakerOpenError, DownstreamError, NoInstancesError

log = logging.getLogger("rca.http")


class Request:
    def __init__(self, method: str, path: str, query: dict, headers,
                 body: bytes, params: dict, client_addr=None):
        self.method = method
        self.path = path
        self.query = query
        self.headers = headers
        self.body = body
        self.params = params
        self.client_addr = client_addr
        self.principal = None

    def json(self) -> dict:
        try:
            data = json.loads(self.body.decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            raise ApiError(400, "malformed-json", "request body is not valid JSON")
        if not isinstance(data, dict):
            raise ApiError(400, "malformed-json", "request body must be a JSON object")
        return data

    def query_one(self, name: str, default: Optional[str] = None) -> Optional[str]:
        values = self.query.get(name)
        return values[0] if values else default

    def bearer_token(self) -> Optional[str]:
        auth = self.headers.get("Authorization", "")
        if auth.startswith("Bearer "):
            return auth[len("Bearer "):].strip()
        return None


Body = Union[dict, list, bytes, None, Iterator[bytes]]


class Response:
    def __init__(self, body: Body = None, status: int = 200,
                 content_type: Optional[str] = None, headers: Optional[dict] = None):
        self.body = body
        self.status = status
        self.content_type = content_type
        self.headers = headers or {}


Handler = Callable[[Request], Union[Response, dict, list, None]]

_PARAM_RE = re.compile(r"\{([a-zA-Z_][a-zA-Z0-9_]*)(:path)?\}")


def _compile_template(template: str) -> re.Pattern:
    pattern = ""
    pos = 0
    for m in _PARAM_RE.finditer(template):
        pattern += re.escape(template[pos:m.start()])
        if m.group(2):
            pattern += "(?P<%s>.+?)" % m.group(1)
        else:
            pattern += "(?P<%s>[^/]+)" % m.group(1)
        pos = m.end()
    pattern += re.escape(template[pos:])
    return re.compile("^%s$" % pattern)


class Router:
    def __init__(self):
        self.routes: list[tuple[str, re.Pattern, Handler]] = []

    def add(self, method: str, template: str, handler: Handler):
        self.routes.append((method.upper(), _compile_template(template), handler))

    def dispatch(self, request: Request) -> Response:
        path_matched = False
        for method, pattern, handler in self.routes:
            m = pattern.match(request.path)
            if not m:
                continue
            path_matched = True
            if method != request.method:
                continue
            request.params = m.groupdict()
            result = handler(request)
            if isinstance(result, Response):
                return result
            return Response(result)
        if path_matched:
            raise ApiError(405, "method-not-allowed")
        raise ApiError(404, "not-found", "no route for %s" % request.path)


class Service:
    """A named HTTP JSON service bound to one port."""

    def __init__(self, name: str, host: str = "127.0.0.1", port: int = 0,
                 max_body_bytes: int = 8 * 1024 * 1024):
        self.name = name
        self.host = host
        self.port = port
        self.max_body_bytes = max_body_bytes
        self.router = Router()
        self._server: Optional[ThreadingHTTPServer] = None
        self._thread: Optional[threading.Thread] = None
        self._shutdown_hooks: list[Callable[[], None]] = []
        self.route("GET", "/health")(lambda req: {"status": "up", "service": self.name})

    def route(self, method: str, template: str):
        def register(handler: Handler) -> Handler:
            self.router.add(method, template, handler)
            return handler
        return register

    def on_shutdown(self, hook: Callable[[], None]):
        self._shutdown_hooks.append(hook)

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> int:
        """Bind and serve on a background thread; returns the bound port."""
        self._server = _make_server(self)
        self.port = self._server.server_address[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True, name="http-%s" % self.name)
        self._thread.start()
        log.info("%s listening on %s:%d", self.name, self.host, self.port)
        return self.port

    def serve_forever(self):
        self._server = _make_server(self)
        self.port = self._server.server_address[1]
        log.info("%s listening on %s:%d", self.name, self.host, self.port)
        try:
            self._server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def stop(self):
        for hook in self._shutdown_hooks:
            try:
                hook()
            except Exception:
                log.exception("shutdown hook failed")
        self._shutdown_hooks.clear()
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    @property
    def base_url(self) -> str:
        return "http://%s:%d" % (self.host, self.port)


def _make_server(service: Service) -> ThreadingHTTPServer:
    class _Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s %s", service.name, fmt % args)

        def _handle(self):
            length = int(self.headers.get("Content-Length") or 0)
            if length > service.max_body_bytes:
                self._send_json(413, {"error": "payload-too-large",
                                      "message": "body exceeds %d bytes" % service.max_body_bytes})
                self.close_connection = True
                return
            body = self.rfile.read(length) if length else b""
            parsed = urllib.parse.urlsplit(self.path)
            request = Request(
                method=self.command,
                path=urllib.parse.unquote(parsed.path),
                query=urllib.parse.parse_qs(parsed.query),
                headers=self.headers,
                body=body,
                params={},
                client_addr=self.client_address,
            )
            try:
                response = service.router.dispatch(request)
            except ApiError as exc:
                self._send_json(exc.status, exc.body())
                return
            except BreakerOpenError as exc:
                self._send_json(503, {"error": "breaker-open", "message": str(exc)})
                return
            except NoInstancesError as exc:
                self._send_json(503, {"error": "no-instances", "message": str(exc)})
                return
            except DownstreamError as exc:
                self._send_json(502, {"error": "downstream-error", "message": str(exc)})
                return
            except Exception:
                log.exception("unhandled error in %s %s %s", service.name,
                              self.command, self.path)
                self._send_json(500, {"error": "internal", "message": "internal error"})
                return
            self._send_response(response)

        def _send_response(self, response: Response):
            body = response.body
            if isinstance(body, (dict, list)) or body is None:
                raw = json.dumps(body if body is not None else {}).encode()
                ctype = response.content_type or "application/json"
                self._send_bytes(response.status, raw, ctype, response.headers)
            elif isinstance(body, bytes):
                ctype = response.content_type or "application/octet-stream"
                self._send_bytes(response.status, body, ctype, response.headers)
            else:
                # Byte-chunk generator: chunked stream (SSE), so clients see
                # each event as soon as it is written.
                self.send_response(response.status)
                self.send_header("Content-Type",
                                 response.content_type or "text/event-stream")
                self.send_header("Cache-Control", "no-cache")
                for key, value in response.headers.items():
                    self.send_header(key, value)
                self.send_header("Transfer-Encoding", "chunked")
                self.send_header("Connection", "close")
                self.end_headers()
                self.close_connection = True
                try:
                    for chunk in body:
                        if not chunk:
                            continue
                        self.wfile.write(b"%x\r\n" % len(chunk))
                        self.wfile.write(chunk)
                        self.wfile.write(b"\r\n")
                        self.wfile.flush()
                    self.wfile.write(b"0\r\n\r\n")
                except (BrokenPipeError, ConnectionResetError):
                    pass
                finally:
                    close = getattr(body, "close", None)
                    if close:
                        close()

        def _send_json(self, status: int, payload: dict):
            self._send_bytes(status, json.dumps(payload).encode(),
                             "application/json", {})

        def _send_bytes(self, status: int, raw: bytes, ctype: str, headers: dict):
            self.send_response(status)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(raw)))
            for key, value in headers.items():
                self.send_header(key, value)
            self.end_headers()
            try:
                self.wfile.write(raw)
            except (BrokenPipeError, ConnectionResetError):
                pass

        do_GET = do_POST = do_PUT = do_DELETE = do_PATCH = _handle

    server = ThreadingHTTPServer((service.host, service.port), _Handler)
    server.daemon_threads = True
    return server
