"""Minimal shared plumbing for the threaded HTTP services."""
from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

from .errors import ParseError, PayloadTooLargeError, PortError, error_document

log = logging.getLogger("modelport.http")


def parse_listen(listen: str) -> tuple[str, int]:
    """Split 'host:port'; host defaults to loopback, port 0 means ephemeral."""
    host, sep, port = listen.rpartition(":")
    if not sep:
        raise ValueError(f"listen address must be host:port, got {listen!r}")
    try:
        return (host or "127.0.0.1", int(port))
    except ValueError:
        raise ValueError(f"invalid port in listen address {listen!r}") from None


def _reject_constant(name: str) -> Any:
    raise ValueError(f"non-finite number {name} not allowed")


def loads_strict(data: bytes | str) -> Any:
    """Decode an interchange document; NaN and infinities are rejected."""
    try:
        return json.loads(data, parse_constant=_reject_constant)
    except (json.JSONDecodeError, UnicodeDecodeError, ValueError) as exc:
        raise ParseError(f"body is not a valid document: {exc}") from exc


class Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "modelport"

    def log_message(self, fmt: str, *args: Any) -> None:
        log.debug("%s %s", self.address_string(), fmt % args)

    def read_body(self, cap: int) -> bytes:
        length = self.headers.get("Content-Length")
        if length is None:
            return b""
        try:
            n = int(length)
        except ValueError:
            raise ParseError("bad Content-Length header") from None
        if n > cap:
            raise PayloadTooLargeError(f"request body {n} bytes exceeds cap {cap}")
        return self.rfile.read(n)

    def send_json(self, status: int, doc: Any) -> None:
        body = json.dumps(doc, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def send_octets(self, status: int, data: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/octet-stream")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def send_error_doc(self, exc: Exception) -> None:
        doc = error_document(exc)
        status = getattr(exc, "http_status", 500)
        if status >= 500:
            log.warning("%s: %s", doc["error_code"], doc["message"])
        self.send_json(status, doc)


class HttpService:
    """A ThreadingHTTPServer plus its serving thread."""

    def __init__(self, handler_cls: type[Handler], listen: str, context: Any = None):
        host, port = parse_listen(listen)
        try:
            self.server = ThreadingHTTPServer((host, port), handler_cls)
        except OSError as exc:
            raise PortError(f"cannot bind {listen}: {exc}") from exc
        self.server.daemon_threads = True
        self.server.context = context  # type: ignore[attr-defined]
        self.host = host
        self.port = self.server.server_address[1]
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        self._thread.join(timeout=5)
