"""Tiny JSON-over-HTTP toolkit on the standard library.

One router + threaded server class serves both the hub API and the
in-process mock services the harness spawns on loopback ephemeral ports.
Handlers take (request, **path_params) and return (status, json_value),
or a RawResponse when bytes must be streamed (mock object stores).
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable, Iterable, Optional

from .errors import MeshHubError

logger = logging.getLogger(__name__)

_PARAM_RE = re.compile(r"\{([a-z_]+)(:path)?\}")


@dataclass
class Request:
    method: str
    path: str
    query: dict[str, list[str]]
    headers: dict[str, str]
    body: bytes

    def json(self) -> Any:
        if not self.body:
            return None
        return json.loads(self.body.decode("utf-8"))

    def param(self, name: str, default: Optional[str] = None) -> Optional[str]:
        values = self.query.get(name)
        return values[0] if values else default

    @property
    def bearer_token(self) -> Optional[str]:
        header = self.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            return header[7:].strip()
        return None


@dataclass
class RawResponse:
    status: int
    chunks: Iterable[bytes]
    content_length: Optional[int] = None
    content_type: str = "application/octet-stream"


class Router:
    def __init__(self):
        self._routes: list[tuple[str, re.Pattern, Callable]] = []

    def add(self, method: str, pattern: str, handler: Callable) -> None:
        regex = "^"
        pos = 0
        for m in _PARAM_RE.finditer(pattern):
            regex += re.escape(pattern[pos:m.start()])
            if m.group(2):  # {name:path} spans slashes
                regex += f"(?P<{m.group(1)}>.+?)"
            else:
                regex += f"(?P<{m.group(1)}>[^/]+)"
            pos = m.end()
        regex += re.escape(pattern[pos:]) + "$"
        self._routes.append((method.upper(), re.compile(regex), handler))

    def dispatch(self, request: Request):
        allowed = False
        for method, regex, handler in self._routes:
            m = regex.match(request.path)
            if not m:
                continue
            if method != request.method:
                allowed = True
                continue
            return handler(request, **m.groupdict())
        if allowed:
            return 405, {"error": "MethodNotAllowed", "message": request.method}
        return 404, {"error": "NoRoute", "message": request.path}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "meshhub"

    def log_message(self, fmt, *args):  # route through logging, not stderr
        logger.debug("%s %s", self.address_string(), fmt % args)

    def _handle(self):
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        parsed = urllib.parse.urlsplit(self.path)
        request = Request(
            method=self.command,
            path=urllib.parse.unquote(parsed.path),
            query=urllib.parse.parse_qs(parsed.query),
            headers={k.lower(): v for k, v in self.headers.items()},
            body=body,
        )
        try:
            result = self.server.router.dispatch(request)
        except MeshHubError as exc:
            body = {"error": type(exc).__name__, "message": str(exc)}
            if getattr(exc, "violations", None):
                body["violations"] = list(exc.violations)
            result = exc.http_status, body
        except Exception as exc:  # noqa: BLE001 - surface, don't kill the thread
            logger.exception("handler failed: %s %s", request.method, request.path)
            result = 500, {"error": "InternalError", "message": str(exc)}

        if isinstance(result, RawResponse):
            self.send_response(result.status)
            self.send_header("Content-Type", result.content_type)
            if result.content_length is not None:
                self.send_header("Content-Length", str(result.content_length))
                self.end_headers()
                for chunk in result.chunks:
                    self.wfile.write(chunk)
            else:
                self.send_header("Transfer-Encoding", "chunked")
                self.end_headers()
                for chunk in result.chunks:
                    self.wfile.write(b"%x\r\n%s\r\n" % (len(chunk), chunk))
                self.wfile.write(b"0\r\n\r\n")
            return

        status, value = result
        data = json.dumps(value).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    do_GET = do_POST = do_PUT = do_DELETE = _handle


class JsonHttpServer:
    """Threaded loopback server with an ephemeral port by default."""

    def __init__(self, router: Router, host: str = "127.0.0.1", port: int = 0):
        self._server = ThreadingHTTPServer((host, port), _Handler)
        self._server.daemon_threads = True
        self._server.router = router
        self._thread: Optional[threading.Thread] = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "JsonHttpServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)


# -- client helpers --------------------------------------------------------------


class HttpError(Exception):
    def __init__(self, status: int, body: Any):
        self.status = status
        self.body = body
        super().__init__(f"HTTP {status}: {body}")


def request_json(method: str, url: str, body: Any = None, token: Optional[str] = None,
                 headers: Optional[dict] = None, timeout: float = 10.0) -> tuple[int, Any]:
    """Issue a request, return (status, parsed-json-or-text). Never raises on
    HTTP error statuses; network failures raise URLError/OSError."""
    data = None
    req_headers = dict(headers or {})
    if body is not None:
        data = json.dumps(body).encode("utf-8")
        req_headers["Content-Type"] = "application/json"
    if token:
        req_headers["Authorization"] = f"Bearer {token}"
    req = urllib.request.Request(url, data=data, headers=req_headers, method=method)
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
            status = resp.status
    except urllib.error.HTTPError as exc:
        raw = exc.read()
        status = exc.code
    try:
        parsed = json.loads(raw.decode("utf-8")) if raw else None
    except (ValueError, UnicodeDecodeError):
        parsed = raw.decode("utf-8", errors="replace")
    return status, parsed


def fetch_json(method: str, url: str, body: Any = None, token: Optional[str] = None,
               timeout: float = 10.0) -> Any:
    status, parsed = request_json(method, url, body=body, token=token, timeout=timeout)
    if status >= 400:
        raise HttpError(status, parsed)
    return parsed


def download_discard(url: str, timeout: float = 30.0) -> tuple[int, str]:
    """Stream a URL, discarding bytes. Returns (byte_count, sha256 hex)."""
    digest = hashlib.sha256()
    total = 0
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        while True:
            chunk = resp.read(1 << 16)
            if not chunk:
                break
            total += len(chunk)
            digest.update(chunk)
    return total, digest.hexdigest()
